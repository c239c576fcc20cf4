/** Single-page controller. Everything shown is derived from server responses
 * plus the local (unsent) label draft; reloading the page rebuilds the same
 * view minus the draft. At most one mutating request is in flight at a time.
 */

import { ApiClient, ApiError } from "./api.js";
import { LabelDraft, TAGS, clustersOfSelection } from "./drafts.js";
import { lassoSelect, type Pt } from "./lasso.js";
import { MapView, colorFor } from "./map.js";
import { JobFailure, watchJob } from "./poll.js";
import { paintDevChart, paintMap, paintStrip } from "./render.js";
import { devTraces, type DevTrace } from "./scores.js";
import { selectionStats, stripSeries, timestampRange } from "./stats.js";
import type {
  ClustersResponse,
  HealthResponse,
  ScoresResponse,
  SignalsResponse,
  StateTag,
} from "./types.js";

const SKELETON = `
<header class="topbar">
  <h1>hydromon</h1>
  <span id="busy-badge" class="badge" hidden>training running</span>
  <div id="error-banner" class="banner" hidden>
    <span id="error-text"></span>
    <button id="retry-btn" type="button">retry</button>
  </div>
</header>
<main class="grid">
  <section id="map-panel" class="panel">
    <div class="panel-head">
      <h2>state map</h2>
      <label>color by <select id="algo-select"></select></label>
    </div>
    <canvas id="map-canvas" width="640" height="460"></canvas>
    <p id="map-empty" class="empty" hidden>no embedding yet; run the pipeline first</p>
    <ul id="legend" class="legend"></ul>
  </section>
  <section id="inspect-panel" class="panel disabled">
    <h2>selection</h2>
    <p id="sel-summary" class="muted">nothing selected</p>
    <p id="sel-range"></p>
    <div class="table-wrap"><table id="stats-table"></table></div>
    <label id="strip-label" hidden>signal <select id="strip-signal"></select></label>
    <canvas id="strip-canvas" width="360" height="110"></canvas>
    <button id="clear-selection" type="button" hidden>clear selection</button>
  </section>
  <section id="label-panel" class="panel">
    <div class="panel-head">
      <h2>states</h2>
      <span id="label-stale-badge" class="badge warn" hidden>stale</span>
    </div>
    <ul id="draft-list" class="draft-list"></ul>
    <form id="draft-form">
      <input id="draft-name" placeholder="state name" autocomplete="off">
      <select id="draft-tag"></select>
      <button id="draft-add" type="submit">name selected clusters</button>
    </form>
    <button id="submit-labels" type="button" disabled>apply labels</button>
    <span id="label-status" class="muted"></span>
    <p id="label-error" class="inline-error" hidden></p>
  </section>
  <section id="score-panel" class="panel">
    <div class="panel-head">
      <h2>deviation</h2>
      <span id="stale-badge" class="badge warn" hidden>stale</span>
    </div>
    <div class="row">
      <button id="train-btn" type="button">retrain</button>
      <span id="job-status" class="muted"></span>
    </div>
    <canvas id="dev-canvas" width="640" height="220"></canvas>
    <ul id="dev-legend" class="legend"></ul>
    <p id="score-empty" class="empty" hidden>no scores yet</p>
  </section>
</main>`;

export class App {
  readonly api: ApiClient;
  readonly root: HTMLElement;
  view: MapView | null = null;
  draft = new LabelDraft();
  /** Active algorithm's cluster ids per row; drafts always address these. */
  clusterLabels: number[] = [];
  lastClusters: ClustersResponse | null = null;
  health: HealthResponse | null = null;
  scores: ScoresResponse | null = null;
  traces: DevTrace[] = [];
  scoresStale = false;
  private lastSignals: SignalsResponse | null = null;
  private lassoPath: Pt[] | null = null;
  private mutationInFlight = false;

  private el<T extends HTMLElement>(id: string): T {
    return this.root.querySelector<T>("#" + id)!;
  }

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
    root.innerHTML = SKELETON;
    const tagSelect = this.el<HTMLSelectElement>("draft-tag");
    for (const tag of TAGS) {
      const opt = document.createElement("option");
      opt.value = tag;
      opt.textContent = tag;
      tagSelect.append(opt);
    }
    this.wireEvents();
  }

  private wireEvents(): void {
    this.el("retry-btn").addEventListener("click", () => void this.init());
    this.el<HTMLSelectElement>("algo-select").addEventListener("change", (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      void (value === "states" ? this.colorByStates() : this.setAlgorithm(value));
    });
    this.el("clear-selection").addEventListener("click", () => {
      this.view?.clearSelection();
      void this.updateInspect();
      this.renderMap();
    });
    this.el<HTMLFormElement>("draft-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      this.addDraftEntry();
    });
    this.el("submit-labels").addEventListener("click", () => void this.submitDraft());
    this.el("train-btn").addEventListener("click", () => void this.startTraining());
    this.el<HTMLSelectElement>("strip-signal").addEventListener("change", () => this.renderStrip());

    const canvas = this.el<HTMLCanvasElement>("map-canvas");
    canvas.addEventListener("mousedown", (ev) => {
      this.lassoPath = [this.canvasPoint(canvas, ev)];
    });
    canvas.addEventListener("mousemove", (ev) => {
      if (!this.lassoPath) return;
      this.lassoPath.push(this.canvasPoint(canvas, ev));
      this.renderMap();
    });
    canvas.addEventListener("mouseup", () => {
      const path = this.lassoPath;
      this.lassoPath = null;
      if (path && path.length >= 3) void this.applyLasso(path);
      else this.renderMap();
    });
  }

  private canvasPoint(canvas: HTMLCanvasElement, ev: MouseEvent): Pt {
    const rect = canvas.getBoundingClientRect();
    const scaleX = rect.width ? canvas.width / rect.width : 1;
    const scaleY = rect.height ? canvas.height / rect.height : 1;
    return { x: (ev.clientX - rect.left) * scaleX, y: (ev.clientY - rect.top) * scaleY };
  }

  /** Load everything the server knows and render. Any transport failure
   * raises the banner; the retry button runs this again. */
  async init(): Promise<void> {
    const banner = this.el("error-banner");
    try {
      this.health = await this.api.health();
      let points: MapView["points"] = [];
      try {
        points = (await this.api.embedding()).points;
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 404)) throw err;
      }
      this.view = new MapView(points);
      this.lastClusters = null;
      this.clusterLabels = [];
      if (!this.view.isEmpty) {
        try {
          this.applyClusters(await this.api.clusters());
        } catch (err) {
          if (!(err instanceof ApiError && err.status === 404)) throw err;
        }
      }
      banner.hidden = true;
      this.renderAlgoOptions();
      this.renderMap();
      this.renderDraft();
      this.syncBadges();
      await this.refreshScores();
    } catch (err) {
      this.el("error-text").textContent = `server unreachable: ${describe(err)}`;
      banner.hidden = false;
    }
  }

  private applyClusters(resp: ClustersResponse): void {
    this.lastClusters = resp;
    if (resp.algorithm === resp.active) this.clusterLabels = resp.labels;
    if (!this.view) return;
    this.view.setColoring(resp.labels, "clusters", resp.states);
  }

  /** Recolor by another algorithm's assignment; coordinates stay as fetched. */
  async setAlgorithm(algo: string): Promise<void> {
    if (!this.view) return;
    const resp = await this.api.clusters(algo);
    this.applyClusters(resp);
    this.renderMap();
  }

  /** Recolor by the practitioner's named states (active algorithm only). */
  async colorByStates(): Promise<void> {
    if (!this.view) return;
    let resp = this.lastClusters;
    if (!resp || resp.algorithm !== resp.active) resp = await this.api.clusters();
    this.lastClusters = resp;
    this.clusterLabels = resp.labels;
    if (resp.state_labels && resp.states) {
      this.view.setColoring(resp.state_labels, "states", resp.states);
    }
    this.renderMap();
  }

  /** Scripted or pointer-drawn lasso in canvas pixels. */
  applyLasso(polygon: Pt[]): Promise<void> {
    if (!this.view || this.view.isEmpty) return Promise.resolve();
    const canvas = this.el<HTMLCanvasElement>("map-canvas");
    const { sx, sy } = this.view.scales(canvas.width, canvas.height);
    const screen: Pt[] = [];
    for (let i = 0; i < this.view.points.length; i++) {
      screen.push({ x: sx(this.view.xs[i]!), y: sy(this.view.ys[i]!) });
    }
    this.view.setSelection(lassoSelect(screen, polygon));
    this.renderMap();
    return this.updateInspect();
  }

  /** Fill the inspection panel for the current selection (capped at the
   * server's 1000-row limit); empty selection disables the panel. */
  async updateInspect(): Promise<void> {
    const panel = this.el("inspect-panel");
    const summary = this.el("sel-summary");
    const selection = this.view ? [...this.view.selection].sort((a, b) => a - b) : [];
    if (selection.length === 0) {
      panel.classList.add("disabled");
      summary.textContent = "nothing selected";
      this.el("sel-range").textContent = "";
      this.el("stats-table").innerHTML = "";
      this.el("strip-label").hidden = true;
      this.el("clear-selection").hidden = true;
      this.lastSignals = null;
      return;
    }
    const rows = selection.slice(0, 1000);
    const resp = await this.api.signals(rows);
    this.lastSignals = resp;
    panel.classList.remove("disabled");
    summary.textContent =
      selection.length === 1
        ? "1 datapoint selected"
        : `${selection.length} datapoints selected` + (selection.length > 1000 ? " (first 1000 shown)" : "");
    const range = timestampRange(resp);
    this.el("sel-range").textContent = range ? `${range[0]} to ${range[1]}` : "";
    const table = this.el<HTMLTableElement>("stats-table");
    table.innerHTML = "<tr><th>signal</th><th>mean</th><th>min</th><th>max</th></tr>";
    for (const s of selectionStats(resp)) {
      const tr = document.createElement("tr");
      for (const cell of [
        s.unit ? `${s.signal} [${s.unit}]` : s.signal,
        fmt(s.mean),
        fmt(s.min),
        fmt(s.max),
      ]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.append(td);
      }
      table.append(tr);
    }
    const signalSelect = this.el<HTMLSelectElement>("strip-signal");
    const keep = signalSelect.value;
    signalSelect.innerHTML = "";
    resp.signals.forEach((name, i) => {
      const opt = document.createElement("option");
      opt.value = String(i);
      opt.textContent = name;
      signalSelect.append(opt);
    });
    if (keep && Number(keep) < resp.signals.length) signalSelect.value = keep;
    this.el("strip-label").hidden = false;
    this.el("clear-selection").hidden = false;
    this.renderStrip();
  }

  private renderStrip(): void {
    if (!this.lastSignals) return;
    const col = Number(this.el<HTMLSelectElement>("strip-signal").value) || 0;
    paintStrip(this.el<HTMLCanvasElement>("strip-canvas"), stripSeries(this.lastSignals, col));
  }

  /** Turn the current selection into one named draft entry. */
  addDraftEntry(): void {
    const errorBox = this.el("label-error");
    errorBox.hidden = true;
    if (!this.view) return;
    const name = this.el<HTMLInputElement>("draft-name").value;
    const tag = this.el<HTMLSelectElement>("draft-tag").value as StateTag;
    const clusters = clustersOfSelection(this.view.selection, this.clusterLabels);
    try {
      this.draft.add(clusters, name, tag);
    } catch (err) {
      errorBox.textContent = describe(err);
      errorBox.hidden = false;
      return;
    }
    this.el<HTMLInputElement>("draft-name").value = "";
    this.el("label-status").textContent = "";
    this.renderDraft();
  }

  async submitDraft(): Promise<void> {
    if (!this.draft.canSubmit || this.mutationInFlight) return;
    const errorBox = this.el("label-error");
    const status = this.el("label-status");
    errorBox.hidden = true;
    this.mutationInFlight = true;
    try {
      const resp = await this.api.submitLabels(this.draft.toOverrides());
      status.textContent = resp.status === "already-applied" ? "already applied" : "applied";
      this.draft.clear();
      this.renderDraft();
      if (this.health) this.health.stale = resp.stale;
      this.scoresStale = resp.stale.includes("bank") || resp.stale.includes("score");
      // the cached cluster response predates the label change
      this.lastClusters = null;
      await this.colorByStates();
      this.renderAlgoOptions();
      this.syncBadges();
    } catch (err) {
      // server said no: keep the draft so the practitioner can fix it
      errorBox.textContent = describe(err);
      errorBox.hidden = false;
    } finally {
      this.mutationInFlight = false;
    }
  }

  async startTraining(): Promise<void> {
    if (this.mutationInFlight) return;
    const status = this.el("job-status");
    this.mutationInFlight = true;
    this.setBusy(true);
    try {
      const { job } = await this.api.train();
      status.textContent = `${job}: queued`;
      const done = await watchJob(this.api, job, (j) => {
        status.textContent = `${j.id}: ${j.status}` + (j.stage ? ` (${j.stage})` : "");
      });
      status.textContent = `${done.id}: complete`;
      this.health = await this.api.health();
      this.scoresStale = false;
      await this.refreshScores();
    } catch (err) {
      if (err instanceof JobFailure) {
        status.textContent = `training failed: ${err.message}`;
      } else {
        status.textContent = describe(err);
      }
      try {
        this.health = await this.api.health();
      } catch {
        // keep the stale health snapshot; badges resync on next action
      }
    } finally {
      this.mutationInFlight = false;
      this.setBusy(this.health?.busy ?? false);
      this.syncBadges();
    }
  }

  /** Pull the latest scores; 409 means a label change outran training. */
  async refreshScores(): Promise<void> {
    const empty = this.el("score-empty");
    try {
      this.scores = await this.api.scores();
      this.scoresStale = false;
      this.traces = devTraces(this.scores);
      empty.hidden = true;
      this.renderScores();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.scoresStale = true;
        empty.textContent = err.message;
        empty.hidden = false;
      } else if (err instanceof ApiError && err.status === 404) {
        empty.textContent = "no scores yet";
        empty.hidden = false;
      } else {
        throw err;
      }
    }
    this.syncBadges();
  }

  // ------------------------------------------------------------- rendering

  private renderAlgoOptions(): void {
    const select = this.el<HTMLSelectElement>("algo-select");
    const current = this.view?.mode === "states" ? "states" : (this.lastClusters?.algorithm ?? "");
    select.innerHTML = "";
    for (const algo of this.lastClusters?.algorithms ?? []) {
      const opt = document.createElement("option");
      opt.value = algo;
      opt.textContent = algo === this.lastClusters?.active ? `${algo} (active)` : algo;
      select.append(opt);
    }
    if (this.lastClusters?.state_labels) {
      const opt = document.createElement("option");
      opt.value = "states";
      opt.textContent = "named states";
      select.append(opt);
    }
    if (current) select.value = current;
  }

  renderMap(): void {
    const canvas = this.el<HTMLCanvasElement>("map-canvas");
    const emptyMsg = this.el("map-empty");
    if (!this.view || this.view.isEmpty) {
      emptyMsg.hidden = false;
      canvas.hidden = true;
      this.el("legend").innerHTML = "";
      return;
    }
    emptyMsg.hidden = true;
    canvas.hidden = false;
    paintMap(canvas, this.view, this.lassoPath);
    const legend = this.el("legend");
    legend.innerHTML = "";
    for (const entry of this.view.legend()) {
      const li = document.createElement("li");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = entry.color;
      li.append(swatch, `${entry.text} (${entry.count})`);
      legend.append(li);
    }
  }

  private renderDraft(): void {
    const list = this.el("draft-list");
    list.innerHTML = "";
    this.draft.entries.forEach((entry, i) => {
      const li = document.createElement("li");
      li.textContent = `${entry.name} [${entry.tag}] = clusters {${entry.clusters.join(", ")}}`;
      const drop = document.createElement("button");
      drop.type = "button";
      drop.textContent = "remove";
      drop.addEventListener("click", () => {
        this.draft.removeAt(i);
        this.renderDraft();
      });
      li.append(" ", drop);
      list.append(li);
    });
    this.el<HTMLButtonElement>("submit-labels").disabled = !this.draft.canSubmit;
  }

  private renderScores(): void {
    paintDevChart(this.el<HTMLCanvasElement>("dev-canvas"), this.traces);
    const legend = this.el("dev-legend");
    legend.innerHTML = "";
    for (const trace of this.traces) {
      const li = document.createElement("li");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = colorFor(trace.stateId);
      li.append(swatch, trace.name);
      legend.append(li);
    }
  }

  private setBusy(busy: boolean): void {
    this.el("busy-badge").hidden = !busy;
    const train = this.el<HTMLButtonElement>("train-btn");
    train.disabled = busy;
    train.title = busy ? "a training job is running" : "";
  }

  syncBadges(): void {
    const stale =
      this.scoresStale ||
      (this.health?.stale ?? []).some((s) => s === "bank" || s === "score" || s === "voting");
    this.el("stale-badge").hidden = !stale;
    this.el("label-stale-badge").hidden = !stale;
    this.setBusy(this.health?.busy ?? false);
  }
}

function fmt(v: number | null): string {
  if (v === null) return "-";
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.001) return v.toExponential(3);
  return v.toPrecision(4);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}

export function mount(root: HTMLElement, api: ApiClient): App {
  return new App(root, api);
}
