import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("prefixes the base url and api root", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({ out_dims: 2, points: [] }));
    vi.stubGlobal("fetch", fetchMock);
    const api = new ApiClient("http://example:9");
    await api.embedding();
    expect(fetchMock).toHaveBeenCalledWith("http://example:9/api/v1/embedding", undefined);
  });

  it("surfaces the server's error message with its status", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(jsonResponse({ error: "no embedding yet" }, 404)),
    );
    const api = new ApiClient();
    const err = await api.embedding().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.message).toBe("no embedding yet");
  });

  it("falls back to the status line for non-JSON error bodies", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(new Response("boom", { status: 502, statusText: "Bad Gateway" })),
    );
    const err = await new ApiClient().health().catch((e) => e);
    expect(err.message).toBe("502 Bad Gateway");
  });

  it("posts label overrides as a JSON body", async () => {
    const fetchMock = vi
      .fn()
      .mockResolvedValue(jsonResponse({ status: "applied", states: {}, stale: [] }));
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient().submitLabels([{ clusters: [0], name: "a", tag: "healthy" }]);
    const [url, init] = fetchMock.mock.calls[0]!;
    expect(url).toBe("/api/v1/labels");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body)).toEqual({
      overrides: [{ clusters: [0], name: "a", tag: "healthy" }],
    });
  });

  it("builds query strings for signals and scores", async () => {
    const fetchMock = vi.fn().mockImplementation(async () => jsonResponse({}));
    vi.stubGlobal("fetch", fetchMock);
    const api = new ApiClient();
    await api.signals([3, 17, 4]);
    await api.scores({ from: "2018-09-20T00:00:00Z" });
    await api.clusters("dbscan");
    expect(fetchMock.mock.calls.map((c) => c[0])).toEqual([
      "/api/v1/signals?rows=3,17,4",
      "/api/v1/scores?from=2018-09-20T00%3A00%3A00Z",
      "/api/v1/clusters?algo=dbscan",
    ]);
  });
});
