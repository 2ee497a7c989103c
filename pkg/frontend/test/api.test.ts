import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("retries a failed POST with the identical body and key", async () => {
    const calls: { url: string; body: string }[] = [];
    let first = true;
    const fetchImpl = vi.fn(async (url: string, init?: RequestInit) => {
      calls.push({ url, body: String(init?.body) });
      if (first) {
        first = false;
        throw new TypeError("network down");
      }
      return jsonResponse({ report: {}, record: { counts: {} } });
    });
    const client = new ApiClient("http://svc", fetchImpl);
    await client.postFeedback("s1", [], "key-123");
    expect(calls).toHaveLength(2);
    expect(calls[0]!.body).toBe(calls[1]!.body);
    expect(JSON.parse(calls[1]!.body).idempotency_key).toBe("key-123");
  });

  it("does not retry GET requests", async () => {
    const fetchImpl = vi.fn(async () => {
      throw new TypeError("offline");
    });
    const client = new ApiClient("http://svc", fetchImpl);
    await expect(client.getSession("s1")).rejects.toThrow("offline");
    expect(fetchImpl).toHaveBeenCalledTimes(1);
  });

  it("maps error bodies onto ApiError with the wire code", async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ code: "verdict_not_in_query", message: "nope", detail: null }, 409),
    );
    const client = new ApiClient("http://svc", fetchImpl);
    const err = await client.postFeedback("s1", []).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("verdict_not_in_query");
    expect(err.status).toBe(409);
  });

  it("turns session_complete responses into a null query", async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ code: "session_complete", message: "done", detail: null }, 409),
    );
    const client = new ApiClient("http://svc", fetchImpl);
    expect(await client.getQuery("s1")).toBeNull();
  });

  it("builds chip urls off the api base", () => {
    const client = new ApiClient("http://svc:1234");
    expect(client.chipUrl("chips/img:p1")).toBe("http://svc:1234/chips/img:p1");
  });
});
