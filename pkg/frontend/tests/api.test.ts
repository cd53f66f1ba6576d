import { describe, expect, it } from "vitest";

import { RejectedError, ServiceClient } from "../src/api.js";

const jsonResponse = (body: unknown, status = 200) =>
  new Response(JSON.stringify(body), { status, headers: { "content-type": "application/json" } });

describe("ServiceClient.submit", () => {
  it("retries the byte-identical payload on network failure", async () => {
    const bodies: string[] = [];
    let failures = 2;
    const client = new ServiceClient("http://svc", "e", "w", {
      fetchFn: async (_url, init) => {
        bodies.push(String(init?.body));
        if (failures-- > 0) throw new TypeError("connection reset");
        return jsonResponse({ ok: true });
      },
      wait: async () => {},
    });
    await client.submit("t1", [3, 1], 842.6);
    expect(bodies.length).toBe(3);
    expect(new Set(bodies).size).toBe(1); // identical every time
    expect(JSON.parse(bodies[0]!)).toEqual({
      task_id: "t1", worker: "w", selected: [1, 3], elapsed_ms: 843,
    });
  });

  it("surfaces rejection codes without retrying", async () => {
    let calls = 0;
    const client = new ServiceClient("http://svc", "e", "w", {
      fetchFn: async () => {
        calls += 1;
        return jsonResponse({ code: "wrong_selection_count", detail: "need 2" }, 409);
      },
      wait: async () => {},
    });
    await expect(client.submit("t1", [0], 10)).rejects.toThrowError(RejectedError);
    expect(calls).toBe(1);
  });

  it("gives up after the retry budget", async () => {
    let calls = 0;
    const client = new ServiceClient("http://svc", "e", "w", {
      fetchFn: async () => {
        calls += 1;
        throw new TypeError("offline");
      },
      wait: async () => {},
      maxRetries: 3,
    });
    await expect(client.submit("t1", [0, 1], 10)).rejects.toThrow("offline");
    expect(calls).toBe(3);
  });
});

describe("ServiceClient.nextTask", () => {
  it("parses the done signal", async () => {
    const client = new ServiceClient("http://svc", "e", "w", {
      fetchFn: async () => jsonResponse({ done: true }),
    });
    expect(await client.nextTask()).toEqual({ done: true });
  });

  it("threads the worker token into the query", async () => {
    let seen = "";
    const client = new ServiceClient("http://svc", "e", "w 7", {
      fetchFn: async (url) => {
        seen = url;
        return jsonResponse({ done: true });
      },
    });
    await client.nextTask();
    expect(seen).toBe("http://svc/experiments/e/next?worker=w%207");
  });
});
