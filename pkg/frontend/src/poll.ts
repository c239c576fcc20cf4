/** Background-job watching. The service contract allows polling no faster
 * than once a second; the floor is enforced here rather than trusted. */

import type { ApiClient } from "./api.js";
import type { JobStatus } from "./types.js";

export const POLL_INTERVAL_MS = 1000;

export class JobFailure extends Error {
  constructor(
    readonly job: JobStatus,
    message: string,
  ) {
    super(message);
    this.name = "JobFailure";
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Poll a job until it settles. Resolves on completion; rejects with the
 * server's failure reason verbatim. */
export async function watchJob(
  api: ApiClient,
  jobId: string,
  onUpdate?: (job: JobStatus) => void,
  intervalMs: number = POLL_INTERVAL_MS,
): Promise<JobStatus> {
  const interval = Math.max(POLL_INTERVAL_MS, intervalMs);
  for (;;) {
    const job = await api.job(jobId);
    onUpdate?.(job);
    if (job.status === "complete") return job;
    if (job.status === "failed") {
      throw new JobFailure(job, job.error ?? "training job failed");
    }
    await sleep(interval);
  }
}
