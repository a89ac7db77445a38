import { afterEach, describe, expect, test, vi } from "vitest";

import { ApiError, DaemonClient, tokenFromFragment } from "../dist/api.js";

describe("tokenFromFragment", () => {
  test("extracts the token", () => {
    expect(tokenFromFragment("#token=abc123")).toBe("abc123");
    expect(tokenFromFragment("#view=inbox&token=t%2Bx")).toBe("t+x");
  });

  test("empty when absent", () => {
    expect(tokenFromFragment("")).toBe("");
    expect(tokenFromFragment("#")).toBe("");
    expect(tokenFromFragment("#nottoken=1")).toBe("");
  });
});

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("DaemonClient", () => {
  afterEach(() => vi.unstubAllGlobals());

  test("sends the bearer token and relative paths only", async () => {
    const calls: { url: string; init: RequestInit }[] = [];
    vi.stubGlobal("fetch", async (url: string, init: RequestInit) => {
      calls.push({ url, init });
      return jsonResponse(200, { messages: [] });
    });
    const api = new DaemonClient("", "sekrit");
    await api.messages();
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("/local/messages");
    expect(new Headers(calls[0].init.headers).get("Authorization")).toBe("Bearer sekrit");
  });

  test("serializes send bodies and escapes path ids", async () => {
    const calls: { url: string; init: RequestInit }[] = [];
    vi.stubGlobal("fetch", async (url: string, init: RequestInit) => {
      calls.push({ url, init });
      return jsonResponse(200, { purged: true });
    });
    const api = new DaemonClient("", "t");
    await api.ack("abc/../def");
    expect(calls[0].url).toBe("/local/ack/abc%2F..%2Fdef");
    expect(calls[0].init.method).toBe("POST");
  });

  test("maps daemon errors to ApiError with the daemon's code", async () => {
    vi.stubGlobal("fetch", async () =>
      jsonResponse(400, { error: "unknown-contact", detail: "no such alias" }),
    );
    const api = new DaemonClient("", "t");
    const err = await api.send("ghost", "s", "b").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("unknown-contact");
    expect(err.message).toBe("no such alias");
  });

  test("maps transport failures to network-failure", async () => {
    vi.stubGlobal("fetch", async () => {
      throw new TypeError("fetch failed");
    });
    const api = new DaemonClient("", "t");
    const err = await api.sync().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("network-failure");
  });

  test("tolerates non-JSON error bodies", async () => {
    vi.stubGlobal("fetch", async () => new Response("boom", { status: 500 }));
    const api = new DaemonClient("", "t");
    const err = await api.status().catch((e) => e);
    expect(err.code).toBe("http-500");
  });
});
