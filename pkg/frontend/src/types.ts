// Shapes of the ifacedesc.v1 documents and API payloads the client consumes.

export interface View {
  viewType: string;
  title: string;
  experimentPath: string;
  series: Record<string, unknown>;
}

export interface Control {
  controlId: string;
  controlType: "slider" | "dropdown" | "scopeChip" | "constraintControl" | string;
  bindingPath: string;
  label: string;
  currentValue: unknown;
  min?: number;
  max?: number;
  step?: number;
  options?: unknown[];
  excludeZero?: boolean;
  variable?: string;
  operator?: string;
}

export interface InterfaceDescription {
  version: string;
  revision: number;
  views: View[];
  controls: Control[];
}

export interface Finding {
  category: string;
  code: string;
  path: string;
  message: string;
  severity: "nonFunctional" | "functional";
}

export interface InteractionEvent {
  controlId: string;
  newValue: unknown;
  revision: number;
}

export interface InterfaceResponse {
  revision: number;
  interface: InterfaceDescription;
  findings?: Finding[];
  reExecuted?: number[];
}

export interface SpecFeed {
  schemaVersion: string;
  document: string;
  findings: Finding[];
  revision: number;
}

export const SUPPORTED_VERSION = "ifacedesc.v1";
