"""Orchestration: run the monitoring pipeline end to end, resumably.

Eight stages: ingest, normalize, split, embed, cluster, voting, bank,
score. Each manifest entry stores a hash over that stage's inputs (the
upstream entry's hash plus the stage's own settings), so a rerun can
skip stages whose inputs are unchanged and label edits can flag exactly
the work they invalidate. The practitioner labeling step sits between
cluster and voting: with auto_accept each cluster simply becomes its own
state, otherwise the run pauses after cluster until labels are applied.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import replace

import numpy as np

from ..autoenc import SearchSpace, TrainConfig, derive_seed, fit_bank, score_rows
from ..classify import VotingConfig, fit_voting
from ..cluster import ClusterAssignment, agglomerative, dbscan, kmeans, som_fit
from ..dimred import fit_embedding
from ..ingest import FeatureMatrix, apply_band_filter, format_timestamp, normalize_fit, pad_missing
from .state import (
    LABEL_TAGS,
    STAGES,
    PipelineConfig,
    ProjectState,
    ServiceError,
    canonical_hash,
)


class PipelineError(Exception):
    """A stage failed; carries the stage name and the partial state."""

    def __init__(self, stage: str, cause: Exception, state: ProjectState):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.state = state


def _now() -> str:
    return format_timestamp(int(time.time()))


def _data_fingerprint(m: FeatureMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(m.timestamps).tobytes())
    h.update(np.ascontiguousarray(m.data).tobytes())
    h.update(",".join(m.signals).encode())
    return h.hexdigest()


def _stage_seed(cfg: PipelineConfig, *parts) -> int:
    return derive_seed(cfg.master_seed, *parts)


def labels_hash(states: dict) -> str:
    return canonical_hash({str(k): states[k] for k in sorted(states)})


def _input_hash(state: ProjectState, stage: str, data_fp: str | None) -> str | None:
    """Hash of everything a stage consumes; None when it cannot be known yet."""
    cfg = state.config

    def prev(name: str) -> str | None:
        entry = state.manifest_entry(name)
        if entry is None or entry["status"] != "complete":
            return None
        return entry["input_hash"]

    if stage == "ingest":
        if data_fp is None:
            return None
        return canonical_hash({"data": data_fp, "bands": {k: list(v) for k, v in sorted(cfg.band_filters.items())}})
    if stage == "normalize":
        p = prev("ingest")
        return None if p is None else canonical_hash({"prev": p})
    if stage == "split":
        p = prev("normalize")
        return None if p is None else canonical_hash({"prev": p, "boundary": cfg.split_boundary})
    if stage == "embed":
        p = prev("split")
        if p is None:
            return None
        ecfg = replace(cfg.embedding, seed=_stage_seed(cfg, "embed"))
        return canonical_hash({"prev": p, "embedding": ecfg.to_dict()})
    if stage == "cluster":
        p = prev("split")
        if p is None:
            return None
        seeds = {algo: _stage_seed(cfg, "cluster", algo) for algo in cfg.clustering}
        return canonical_hash({"prev": p, "clustering": cfg.clustering,
                               "active": cfg.active_algorithm, "seeds": seeds})
    if stage == "voting":
        p = prev("cluster")
        if p is None or not state.states:
            return None
        return canonical_hash({"prev": p, "labels": labels_hash(state.states),
                               "seed": _stage_seed(cfg, "voting")})
    if stage == "bank":
        p = prev("cluster")
        if p is None or not state.states:
            return None
        space = replace(cfg.search, seed=_stage_seed(cfg, "bank"))
        tcfg = replace(cfg.train, seed=_stage_seed(cfg, "train"))
        return canonical_hash({"prev": p, "labels": labels_hash(state.states),
                               "space": space.to_dict(), "train": tcfg.__dict__})
    if stage == "score":
        p = prev("bank")
        return None if p is None else canonical_hash({"prev": p})
    raise ServiceError(f"unknown stage {stage!r}")


_ARTIFACT_CHECKS = {
    "ingest": lambda s: s.dataset is not None,
    "normalize": lambda s: s.normalized is not None and s.norm_params is not None,
    "split": lambda s: s.n_train is not None,
    "embed": lambda s: s.embedding is not None,
    "cluster": lambda s: bool(s.assignments),
    "voting": lambda s: s.voting is not None,
    "bank": lambda s: s.bank is not None,
    "score": lambda s: s.scores is not None,
}


def _can_skip(state: ProjectState, stage: str, want_hash: str | None) -> bool:
    entry = state.manifest_entry(stage)
    if entry is None or entry["status"] != "complete":
        return False
    if not _ARTIFACT_CHECKS[stage](state):
        return False
    if want_hash is None:
        return stage == "ingest"   # no fresh data given: trust the stored dataset
    return entry["input_hash"] == want_hash


def _run_ingest(state: ProjectState, data: FeatureMatrix) -> None:
    m = pad_missing(data)
    for signal in sorted(state.config.band_filters):
        low, high = state.config.band_filters[signal]
        m = apply_band_filter(m, signal, low, high)
    state.dataset = m


def _run_normalize(state: ProjectState) -> None:
    state.normalized, state.norm_params = normalize_fit(state.dataset)


def _run_split(state: ProjectState) -> None:
    boundary = state.config.split_boundary
    n_train = int((state.normalized.timestamps < boundary).sum())
    if n_train == 0:
        raise ServiceError(f"split at {format_timestamp(boundary)} leaves no training rows")
    if n_train == state.normalized.n:
        raise ServiceError(f"split at {format_timestamp(boundary)} leaves no test rows")
    state.n_train = n_train


def _run_embed(state: ProjectState) -> None:
    cfg = replace(state.config.embedding, seed=_stage_seed(state.config, "embed"))
    train = state.train_matrix
    e = fit_embedding(train.data, cfg)
    e.signals = list(train.signals)
    e.timestamps = train.timestamps.copy()
    state.embedding = e


def _run_cluster(state: ProjectState) -> None:
    X = state.train_matrix.data
    assignments = {}
    for algo in sorted(state.config.clustering):
        p = dict(state.config.clustering[algo])
        if algo == "kmeans":
            _, a = kmeans(X, p["k"], seed=_stage_seed(state.config, "cluster", algo),
                          restarts=p.get("restarts", 10))
        elif algo == "agglomerative":
            a = agglomerative(X, p["k"], linkage=p.get("linkage", "ward"))
        elif algo == "dbscan":
            a = dbscan(X, p["eps"], p["min_pts"])
        elif algo == "som":
            _, a = som_fit(X, p.get("grid_w", 4), p.get("grid_h", 4),
                           p.get("epochs", 10),
                           seed=_stage_seed(state.config, "cluster", algo))
        else:
            raise ServiceError(f"unknown clustering algorithm {algo!r}")
        assignments[algo] = a
    active = assignments[state.config.active_algorithm]
    if active.n_clusters < 1:
        raise ServiceError(
            f"active algorithm {state.config.active_algorithm!r} found no clusters"
        )
    state.assignments = assignments


def auto_accept_states(state: ProjectState) -> None:
    """Adopt the active clustering as-is: every cluster becomes a state."""
    active = state.assignments[state.config.active_algorithm]
    states = {
        int(c): {"name": f"cluster-{c}", "tag": "unknown", "clusters": [int(c)]}
        for c in range(active.n_clusters)
    }
    state.states = states
    state.label_overrides = []
    state.state_assignment = ClusterAssignment(
        labels=active.labels.copy(),
        algorithm=active.algorithm,
        params={"source": active.algorithm, "accepted": "auto"},
        n_clusters=active.n_clusters,
    )


def apply_labels(state: ProjectState, overrides: list) -> ProjectState:
    """Apply practitioner label decisions over the active clustering.

    Each override is {"clusters": [ids], "name": str, "tag": one of
    healthy/faulty/transient/unknown}; listed groups merge into one named
    state each, and clusters left unlisted keep a state of their own.
    Anything trained from the previous labels (voting, bank, scores) is
    marked stale, not deleted.
    """
    if state.config.active_algorithm not in state.assignments:
        raise ServiceError("no clustering to label yet; run the pipeline first")
    active = state.assignments[state.config.active_algorithm]
    known = set(range(active.n_clusters))
    seen: set[int] = set()
    for entry in overrides:
        if not isinstance(entry, dict) or "clusters" not in entry or "name" not in entry:
            raise ServiceError(f"label entry needs clusters and name: {entry!r}")
        tag = entry.get("tag", "unknown")
        if tag not in LABEL_TAGS:
            raise ServiceError(f"unknown tag {tag!r}; pick from {LABEL_TAGS}")
        if not str(entry["name"]).strip():
            raise ServiceError("state name must be non-empty")
        if not entry["clusters"]:
            raise ServiceError(f"label entry {entry['name']!r} lists no clusters")
        for c in entry["clusters"]:
            if int(c) not in known:
                raise ServiceError(
                    f"label entry {entry['name']!r} references unknown cluster {c}"
                )
            if int(c) in seen:
                raise ServiceError(f"cluster {c} appears in more than one label entry")
            seen.add(int(c))

    states: dict[int, dict] = {}
    mapping = np.full(active.n_clusters, -1, dtype=np.int64)
    next_label = 0
    for entry in overrides:
        ids = sorted(int(c) for c in entry["clusters"])
        states[next_label] = {
            "name": str(entry["name"]).strip(),
            "tag": entry.get("tag", "unknown"),
            "clusters": ids,
        }
        for c in ids:
            mapping[c] = next_label
        next_label += 1
    for c in sorted(known - seen):
        states[next_label] = {"name": f"cluster-{c}", "tag": "unknown", "clusters": [c]}
        mapping[c] = next_label
        next_label += 1

    merged = np.where(active.labels >= 0, mapping[np.maximum(active.labels, 0)], -1)
    state.states = states
    state.label_overrides = [
        {"clusters": sorted(int(c) for c in e["clusters"]),
         "name": str(e["name"]).strip(), "tag": e.get("tag", "unknown")}
        for e in overrides
    ]
    state.state_assignment = ClusterAssignment(
        labels=merged,
        algorithm=active.algorithm,
        params={"source": active.algorithm, "accepted": "labeled"},
        n_clusters=next_label,
    )
    for stage in ("voting", "bank", "score"):
        if _ARTIFACT_CHECKS[stage](state):
            state.mark_stale(stage)
    return state


def _run_voting(state: ProjectState) -> None:
    labels = state.state_assignment.labels
    cfg = VotingConfig(seed=_stage_seed(state.config, "voting"))
    state.voting = fit_voting(state.train_matrix.data, labels, cfg)
    state.voting_row_ids = np.flatnonzero(labels >= 0)


def _run_bank(state: ProjectState) -> None:
    space = replace(state.config.search, seed=_stage_seed(state.config, "bank"))
    tcfg = replace(state.config.train, seed=_stage_seed(state.config, "train"))
    state.bank = fit_bank(state.train_matrix, state.state_assignment, space, tcfg)


def _run_score(state: ProjectState) -> None:
    test = state.test_matrix
    mae, dev, nearest, g_mae, g_dev = score_rows(state.bank, test.data)
    state.scores = {
        "timestamps": test.timestamps.tolist(),
        "state_labels": [int(x) for x in state.bank.labels],
        "mae": mae.tolist(),
        "dev": dev.tolist(),
        "nearest": nearest.tolist(),
        "global_mae": g_mae.tolist(),
        "global_dev": g_dev.tolist(),
    }


_RUNNERS = {
    "normalize": _run_normalize,
    "split": _run_split,
    "embed": _run_embed,
    "cluster": _run_cluster,
    "voting": _run_voting,
    "bank": _run_bank,
    "score": _run_score,
}


def pipeline_run(
    config: PipelineConfig | None = None,
    data: FeatureMatrix | None = None,
    state: ProjectState | None = None,
    until: str | None = None,
) -> ProjectState:
    """Run (or resume) the pipeline; returns the updated state.

    A fresh run needs `config` and `data`. Passing an existing `state`
    resumes it: stages whose recorded input hash still matches are
    skipped, everything downstream of a change is redone. Without
    auto_accept the run returns after cluster until labels are applied.
    `until` stops after the named stage.
    """
    if state is None:
        if config is None or data is None:
            raise ServiceError("a fresh run needs a config and a dataset")
        state = ProjectState(config=config)
    elif config is not None and config.to_dict() != state.config.to_dict():
        raise ServiceError("config does not match the one stored in the state; "
                           "start a fresh run for a new config")
    if until is not None and until not in STAGES:
        raise ServiceError(f"unknown stage {until!r}; stages are {STAGES}")

    data_fp = None if data is None else _data_fingerprint(data)
    if data is None and state.dataset is None:
        raise ServiceError("no dataset: pass data or a state that already ingested some")

    for stage in STAGES:
        if stage == "voting" and not state.states:
            # labeling gate: nothing downstream can run without states
            if not state.config.auto_accept:
                return state
            auto_accept_states(state)

        want = _input_hash(state, stage, data_fp)
        if _can_skip(state, stage, want):
            if until == stage:
                return state
            continue
        started = _now()
        try:
            if stage == "ingest":
                if data is None:
                    raise ServiceError("dataset changed or missing; pass data to re-ingest")
                _run_ingest(state, data)
            else:
                _RUNNERS[stage](state)
        except Exception as exc:
            raise PipelineError(stage, exc, state) from exc
        seed = None
        if stage in ("embed", "voting", "bank"):
            seed = _stage_seed(state.config, stage)
        elif stage == "cluster":
            seed = _stage_seed(state.config, "cluster", state.config.active_algorithm)
        want = _input_hash(state, stage, data_fp)
        state.record_stage(stage, want, seed, started, _now())
        for downstream in STAGES[STAGES.index(stage) + 1:]:
            entry = state.manifest_entry(downstream)
            if entry is not None and entry["status"] == "complete":
                if _input_hash(state, downstream, data_fp) != entry["input_hash"]:
                    state.mark_stale(downstream)
        if until == stage:
            return state
    return state
