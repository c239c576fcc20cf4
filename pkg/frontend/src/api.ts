/** Typed fetch client for the monitoring service. All analytical numbers the
 * UI shows come from these responses; the client never computes results of
 * its own beyond display transforms. */

import type {
  ClustersResponse,
  EmbeddingResponse,
  HealthResponse,
  JobStatus,
  LabelEntry,
  LabelsResponse,
  ProjectResponse,
  ScoresResponse,
  SignalsResponse,
  TrainResponse,
} from "./types.js";

/** Server-reported failure: carries the HTTP status and the server's message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(res: Response): Promise<never> {
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, message);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + "/api/v1" + path, init);
    if (!res.ok) return parseError(res);
    return (await res.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("/health");
  }

  projectState(): Promise<ProjectResponse> {
    return this.request("/state");
  }

  embedding(): Promise<EmbeddingResponse> {
    return this.request("/embedding");
  }

  clusters(algo?: string): Promise<ClustersResponse> {
    const q = algo ? `?algo=${encodeURIComponent(algo)}` : "";
    return this.request("/clusters" + q);
  }

  signals(rows: number[]): Promise<SignalsResponse> {
    return this.request(`/signals?rows=${rows.join(",")}`);
  }

  scores(range?: { from?: string; to?: string }): Promise<ScoresResponse> {
    const parts: string[] = [];
    if (range?.from) parts.push(`from=${encodeURIComponent(range.from)}`);
    if (range?.to) parts.push(`to=${encodeURIComponent(range.to)}`);
    const q = parts.length ? "?" + parts.join("&") : "";
    return this.request("/scores" + q);
  }

  job(id: string): Promise<JobStatus> {
    return this.request(`/jobs/${encodeURIComponent(id)}`);
  }

  submitLabels(overrides: LabelEntry[]): Promise<LabelsResponse> {
    return this.request("/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ overrides }),
    });
  }

  train(): Promise<TrainResponse> {
    return this.request("/train", { method: "POST" });
  }
}
