/** Payload shapes of the monitoring service HTTP API (all under /api/v1). */

export type StateTag = "healthy" | "faulty" | "transient" | "unknown";

/** A practitioner-validated group of clusters. */
export interface StateInfo {
  name: string;
  tag: StateTag;
  clusters: number[];
}

export interface HealthResponse {
  status: string;
  /** Pipeline stage names in execution order. */
  stages: string[];
  /** Stages whose artifacts exist and are current. */
  complete: string[];
  /** Stages invalidated by a label change since their last run. */
  stale: string[];
  busy: boolean;
}

export interface ManifestEntry {
  stage: string;
  status: string;
  finished?: string;
  [extra: string]: unknown;
}

export interface ProjectResponse {
  config: Record<string, unknown>;
  manifest: ManifestEntry[];
  stale: string[];
  states: Record<string, StateInfo>;
  n_rows: number | null;
  n_train: number | null;
  algorithms: string[];
  active_algorithm: string;
  busy: boolean;
}

export interface EmbeddingPoint {
  row: number;
  coords: number[];
  timestamp?: string;
}

export interface EmbeddingResponse {
  out_dims: number;
  points: EmbeddingPoint[];
}

export interface ClustersResponse {
  algorithm: string;
  active: string;
  algorithms: string[];
  n_clusters: number;
  /** Cluster id per training row, -1 for noise. */
  labels: number[];
  states: Record<string, StateInfo> | null;
  /** State id per training row when labels were applied to the active algorithm. */
  state_labels: number[] | null;
}

export interface SignalsRow {
  row: number;
  timestamp: string;
  /** One value per signal column; null when a reading is missing. */
  values: (number | null)[];
}

export interface SignalsResponse {
  signals: string[];
  units: string[];
  rows: SignalsRow[];
}

export interface ScoreRow {
  timestamp: string;
  nearest_state: number;
  /** Deviation index per state id: dev <= 1 means consistent with the state. */
  dev: Record<string, number | null>;
  mae: Record<string, number | null>;
  global_dev: number | null;
  global_mae: number | null;
}

export interface ScoresResponse {
  /** State ids in the model bank's order; keys of each row's dev/mae maps. */
  state_labels: number[];
  states: Record<string, StateInfo>;
  rows: ScoreRow[];
}

export interface JobStatus {
  id: string;
  status: "queued" | "running" | "complete" | "failed";
  stage: string | null;
  error: string | null;
}

export interface LabelEntry {
  clusters: number[];
  name: string;
  tag: StateTag;
}

export interface LabelsResponse {
  status: "applied" | "already-applied";
  states: Record<string, StateInfo>;
  stale: string[];
}

export interface TrainResponse {
  job: string;
}
