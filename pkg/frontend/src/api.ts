/**
 * Typed client for the workbench JSON API.
 *
 * Mutations carry an idempotency key; a network failure retries the same
 * request with the same key, so a response lost in transit never produces
 * a second server-side mutation.
 */

import type {
  FeedbackResponse,
  MetricsPayload,
  QueryPayload,
  SessionRecordPayload,
  VerdictPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function freshKey(): string {
  const rand = Math.random().toString(36).slice(2, 10);
  return `ui-${Date.now().toString(36)}-${rand}`;
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    public readonly baseUrl: string,
    fetchImpl?: FetchLike,
    private readonly retries = 2,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const attempts = init?.method === "POST" ? this.retries + 1 : 1;
    let lastError: unknown;
    for (let attempt = 0; attempt < attempts; attempt += 1) {
      let resp: Response;
      try {
        resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
      } catch (err) {
        lastError = err; // network failure: retry with the identical body/key
        continue;
      }
      if (!resp.ok) {
        let code = "http_error";
        let message = `${resp.status}`;
        try {
          const body = await resp.json();
          code = body.code ?? code;
          message = body.message ?? message;
        } catch {
          /* non-JSON error body */
        }
        throw new ApiError(resp.status, code, message);
      }
      return (await resp.json()) as T;
    }
    throw lastError instanceof Error ? lastError : new Error(String(lastError));
  }

  listDatasets(): Promise<{ dataset_id: string; images: number; stages: string[] }[]> {
    return this.request("/datasets");
  }

  createSession(datasetId: string): Promise<SessionRecordPayload> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dataset_id: datasetId, idempotency_key: freshKey() }),
    });
  }

  getSession(sessionId: string): Promise<SessionRecordPayload> {
    return this.request(`/sessions/${sessionId}`);
  }

  /** Resolves null once every exemplar has been screened. */
  async getQuery(sessionId: string): Promise<QueryPayload | null> {
    try {
      return await this.request<QueryPayload>(`/sessions/${sessionId}/query`);
    } catch (err) {
      if (err instanceof ApiError && err.code === "session_complete") return null;
      throw err;
    }
  }

  postFeedback(
    sessionId: string,
    verdicts: VerdictPayload[],
    idempotencyKey?: string,
  ): Promise<FeedbackResponse> {
    return this.request(`/sessions/${sessionId}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ verdicts, idempotency_key: idempotencyKey ?? freshKey() }),
    });
  }

  finalize(sessionId: string): Promise<{ report: Record<string, unknown>; record: SessionRecordPayload }> {
    return this.request(`/sessions/${sessionId}/finalize`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ idempotency_key: freshKey() }),
    });
  }

  metrics(sessionId: string): Promise<MetricsPayload> {
    return this.request(`/sessions/${sessionId}/metrics`);
  }

  audit(sessionId: string): Promise<{ consistent: boolean; log_events: number }> {
    return this.request(`/sessions/${sessionId}/audit`);
  }

  chipUrl(chipRef: string): string {
    return `${this.baseUrl}/${chipRef}`;
  }
}
