import type {
  ApiErrorPayload,
  ModelPayload,
  StatePayload,
  VerifyPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: ApiErrorPayload,
  ) {
    super(`${payload.error} (HTTP ${status})`);
  }
}

/** Thin typed wrapper over the JSON endpoints; one instance per session. */
export class ApiClient {
  private sessionId: string | null = null;

  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload as ApiErrorPayload);
    }
    return payload as T;
  }

  async model(): Promise<ModelPayload> {
    return this.request("GET", "/model");
  }

  async createSession(): Promise<StatePayload> {
    const state = await this.request<StatePayload>("POST", "/sessions");
    this.sessionId = state.session;
    return state;
  }

  private session(): string {
    if (this.sessionId === null) {
      throw new Error("no session: call createSession() first");
    }
    return this.sessionId;
  }

  async state(): Promise<StatePayload> {
    return this.request("GET", `/sessions/${this.session()}/state`);
  }

  async step(actionId: number): Promise<StatePayload> {
    return this.request("POST", `/sessions/${this.session()}/step`, {
      action_id: actionId,
    });
  }

  async undo(): Promise<StatePayload> {
    return this.request("POST", `/sessions/${this.session()}/undo`);
  }

  async verify(): Promise<VerifyPayload> {
    return this.request("GET", "/verify");
  }
}
