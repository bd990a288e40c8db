// Client-side session state: the last seen revision, the rendered
// description, and a queue holding at most one in-flight interaction.
// Conflicts refetch and replay; nothing is dropped silently.

import { ApiClient } from "./client.js";
import { Control, Finding, InterfaceDescription } from "./types.js";

export interface ChangeOutcome {
  accepted: boolean;
  rejectedLocally?: boolean;
  replayed?: boolean;
  findings?: Finding[];
}

export function valueInRange(control: Control, value: unknown): boolean {
  if (control.controlType === "slider" || control.controlType === "constraintControl") {
    if (typeof value !== "number" || !Number.isFinite(value)) return false;
    if (control.excludeZero && value === 0) return false;
    if (control.min !== undefined && value < control.min) return false;
    if (control.max !== undefined && value > control.max) return false;
    return true;
  }
  if (control.controlType === "dropdown") {
    return (control.options ?? []).some((o) => o === value);
  }
  if (control.controlType === "scopeChip") {
    return value === null;
  }
  return false;
}

export class ClientSession {
  revision = 0;
  description: InterfaceDescription | null = null;
  findings: Finding[] = [];
  inlineFindings: Record<string, Finding[]> = {};
  notices: string[] = [];
  private queue: Array<() => Promise<void>> = [];
  private inFlight = false;

  constructor(private client: ApiClient, public sessionId: string,
              private onRender: () => void = () => {}) {}

  async postSpec(document: unknown): Promise<ChangeOutcome> {
    const result = await this.client.postSpec(this.sessionId, document);
    if (result.status === 200) {
      this.adopt(result.body.revision, result.body.interface,
                 result.body.findings ?? []);
      return { accepted: true };
    }
    return { accepted: false, findings: result.body.findings ?? [] };
  }

  async refetch(): Promise<void> {
    const result = await this.client.getInterface(this.sessionId);
    if (result.status === 200) {
      this.adopt(result.body.revision, result.body.interface, this.findings);
    }
  }

  /** One user action, one event. Out-of-range values are rejected here
   * without a request; conflicts refetch and replay once. */
  onControlChange(control: Control, newValue: unknown): Promise<ChangeOutcome> {
    if (!valueInRange(control, newValue)) {
      this.notices.push(`value ${String(newValue)} is outside the range of `
        + `${control.label}`);
      this.onRender();
      return Promise.resolve({ accepted: false, rejectedLocally: true });
    }
    return this.enqueue(() => this.dispatch(control, newValue, true));
  }

  private enqueue(task: () => Promise<ChangeOutcome>): Promise<ChangeOutcome> {
    return new Promise((resolve, reject) => {
      this.queue.push(async () => {
        try {
          resolve(await task());
        } catch (err) {
          reject(err);
        }
      });
      void this.pump();
    });
  }

  private async pump(): Promise<void> {
    if (this.inFlight) return;
    const next = this.queue.shift();
    if (!next) return;
    this.inFlight = true;
    try {
      await next();
    } finally {
      this.inFlight = false;
      void this.pump();
    }
  }

  private async dispatch(control: Control, newValue: unknown,
                         retryOnConflict: boolean): Promise<ChangeOutcome> {
    const result = await this.client.postInteraction(this.sessionId, {
      controlId: control.controlId,
      newValue,
      revision: this.revision,
    });
    if (result.status === 200) {
      delete this.inlineFindings[control.controlId];
      this.adopt(result.body.revision, result.body.interface,
                 result.body.findings ?? []);
      return { accepted: true };
    }
    if (result.status === 409 && retryOnConflict) {
      // someone moved the session forward; tell the user, then replay
      this.notices.push("interface was out of date; refreshed and replayed "
        + `${control.label}`);
      await this.refetch();
      const replay = await this.dispatch(control, newValue, false);
      return { ...replay, replayed: true };
    }
    const findings = result.body.findings ?? [];
    if (findings.length > 0) {
      this.inlineFindings[control.controlId] = findings;
      this.onRender();
    }
    return { accepted: false, findings };
  }

  private adopt(revision: number, description: InterfaceDescription,
                findings: Finding[]): void {
    this.revision = revision;
    this.description = description;
    this.findings = findings;
    this.onRender();
  }
}
