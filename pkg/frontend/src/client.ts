// Thin typed wrapper over the HTTP API. The fetch implementation is
// injectable so tests can stub the server.

import { Finding, InteractionEvent, InterfaceResponse, SpecFeed } from "./types.js";

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export interface ApiResult<T> {
  status: number;
  body: T & { error?: { message: string }; findings?: Finding[];
              currentRevision?: number };
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async call<T>(method: string, path: string,
                        payload?: unknown): Promise<ApiResult<T>> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    const body = (await response.json()) as ApiResult<T>["body"];
    return { status: response.status, body };
  }

  createSession(dataset: string) {
    return this.call<{ sessionId: string; revision: number }>(
      "POST", "/sessions", { dataset });
  }

  postSpec(sessionId: string, document: unknown) {
    return this.call<InterfaceResponse>(
      "POST", `/sessions/${sessionId}/spec`, { document });
  }

  getInterface(sessionId: string) {
    return this.call<InterfaceResponse>("GET", `/sessions/${sessionId}/interface`);
  }

  getSpec(sessionId: string) {
    return this.call<SpecFeed>("GET", `/sessions/${sessionId}/spec`);
  }

  postInteraction(sessionId: string, event: InteractionEvent) {
    return this.call<InterfaceResponse>(
      "POST", `/sessions/${sessionId}/interaction`, event);
  }
}
