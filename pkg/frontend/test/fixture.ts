/** Test fixture plumbing: builds a completed monitoring project over the
 * seeded synthetic plant set once (cached under test/.cache), then serves a
 * throwaway copy of it for each acceptance run. Talks to the backend only
 * through its CLI and HTTP interfaces. */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { copyFileSync, existsSync, mkdirSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

const here = path.dirname(fileURLToPath(import.meta.url));
const cacheDir = path.join(here, ".cache");

const PIPELINE_CONFIG = {
  // 70/30 time split over the 8000-row synthetic set
  split_boundary: 1539120000,
  master_seed: 42,
  embedding: { n_neighbors: 15, n_epochs: 80, seed: 42 },
  clustering: { kmeans: { k: 2, restarts: 10 } },
  active_algorithm: "kmeans",
  auto_accept: true,
  search: { depths: [1], widths: [8, 16], activations: ["tanh"], budget: 2, seed: 42 },
  train: { epochs: 30, seed: 0 },
};

function backend(args: string[], cwd: string): void {
  execFileSync("python3", ["-m", "hydromon", ...args], {
    cwd,
    stdio: ["ignore", "pipe", "pipe"],
    timeout: 240_000,
  });
}

export interface Fixture {
  statePath: string;
  truthPath: string;
}

/** Build (or reuse) the completed project state and ground-truth labels. */
export function ensureFixture(): Fixture {
  const statePath = path.join(cacheDir, "state.json");
  const truthPath = path.join(cacheDir, "truth.csv");
  if (existsSync(statePath) && existsSync(truthPath)) {
    return { statePath, truthPath };
  }
  mkdirSync(cacheDir, { recursive: true });
  backend(["synth", "--out", "plant.csv", "--labels-out", "truth.csv"], cacheDir);
  writeFileSync(path.join(cacheDir, "config.json"), JSON.stringify(PIPELINE_CONFIG));
  backend(
    ["run", "--data", "plant.csv", "--config", "config.json", "--state", "state.json"],
    cacheDir,
  );
  return { statePath, truthPath };
}

/** Ground-truth regime per row id: 0 = shutdown, 1 = operating. */
export function readTruth(truthPath: string): number[] {
  const lines = readFileSync(truthPath, "utf8").trim().split("\n").slice(1);
  const labels: number[] = [];
  for (const line of lines) {
    const [row, label] = line.split(",");
    labels[Number(row)] = Number(label);
  }
  return labels;
}

export const OPERATING = 1;

export interface RunningServer {
  base: string;
  stop: () => void;
}

/** Serve a fresh copy of the cached state on a free-ish port. */
export async function startServer(fixture: Fixture): Promise<RunningServer> {
  const workdir = mkdtempSync(path.join(tmpdir(), "hydromon-ui-"));
  const stateCopy = path.join(workdir, "state.json");
  copyFileSync(fixture.statePath, stateCopy);
  const port = 8810 + Math.floor(Math.random() * 800);
  const base = `http://127.0.0.1:${port}`;
  const proc: ChildProcess = spawn(
    "python3",
    ["-m", "hydromon", "serve", "--state", stateCopy, "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });
  for (let attempt = 0; attempt < 120; attempt++) {
    if (proc.exitCode !== null) {
      throw new Error(`server exited with ${proc.exitCode}: ${stderr}`);
    }
    try {
      const res = await fetch(`${base}/api/v1/health`);
      if (res.ok) return { base, stop: () => proc.kill() };
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  proc.kill();
  throw new Error(`server never became healthy on ${base}: ${stderr}`);
}
