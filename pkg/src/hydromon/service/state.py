"""Project configuration, pipeline state, and single-file persistence.

A ProjectState is everything one monitoring project knows: the cleaned
dataset, normalization, the time split, embedding, every clustering
result, practitioner state labels, the voting classifier, the model bank
and test scores, plus a manifest recording each stage's input hash so
downstream work can be flagged stale when an input changes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..autoenc import SearchSpace, TrainConfig
from ..autoenc.bank import ModelBank, bank_from_doc, bank_to_doc
from ..classify import VotingClassifier
from ..cluster import ClusterAssignment
from ..dimred import Embedding, EmbeddingConfig
from ..dimred.embedding import embedding_from_doc, embedding_to_doc
from ..ingest import FeatureMatrix, NormalizationParams, parse_timestamp

_STATE_FORMAT = "project-state"
_STATE_VERSION = 1

STAGES = ["ingest", "normalize", "split", "embed", "cluster", "voting", "bank", "score"]
_ALGORITHMS = ("kmeans", "agglomerative", "dbscan", "som")
LABEL_TAGS = ("healthy", "faulty", "transient", "unknown")


class ServiceError(ValueError):
    pass


def canonical_hash(obj) -> str:
    """sha256 over a canonical JSON rendering; arrays hash their bytes."""
    def default(o):
        if isinstance(o, np.ndarray):
            return {"__array__": hashlib.sha256(np.ascontiguousarray(o).tobytes()).hexdigest(),
                    "shape": list(o.shape)}
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        raise TypeError(f"unhashable config value {o!r}")

    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=default)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class PipelineConfig:
    split_boundary: int | str
    master_seed: int = 42
    band_filters: dict = field(default_factory=dict)   # signal -> (low, high)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    clustering: dict = field(default_factory=lambda: {"kmeans": {"k": 2, "restarts": 10}})
    active_algorithm: str = "kmeans"
    auto_accept: bool = True
    search: SearchSpace = field(default_factory=SearchSpace)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.split_boundary, str):
            self.split_boundary = parse_timestamp(self.split_boundary)
        self.split_boundary = int(self.split_boundary)
        if not isinstance(self.master_seed, int):
            raise ServiceError(f"master seed must be an integer, got {self.master_seed!r}")
        for name, bounds in self.band_filters.items():
            lo, hi = bounds
            if not lo < hi:
                raise ServiceError(f"band filter for {name!r} needs low < high, got {bounds}")
        if not self.clustering:
            raise ServiceError("at least one clustering algorithm must be configured")
        for algo in self.clustering:
            if algo not in _ALGORITHMS:
                raise ServiceError(f"unknown clustering algorithm {algo!r}; pick from {_ALGORITHMS}")
        if self.active_algorithm not in self.clustering:
            raise ServiceError(
                f"active algorithm {self.active_algorithm!r} is not configured"
            )

    def to_dict(self) -> dict:
        return {
            "split_boundary": self.split_boundary,
            "master_seed": self.master_seed,
            "band_filters": {k: list(v) for k, v in self.band_filters.items()},
            "embedding": self.embedding.to_dict(),
            "clustering": self.clustering,
            "active_algorithm": self.active_algorithm,
            "auto_accept": self.auto_accept,
            "search": self.search.to_dict(),
            "train": self.train.__dict__.copy(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            split_boundary=d["split_boundary"],
            master_seed=d.get("master_seed", 42),
            band_filters={k: tuple(v) for k, v in d.get("band_filters", {}).items()},
            embedding=EmbeddingConfig.from_dict(d["embedding"]) if "embedding" in d
            else EmbeddingConfig(),
            clustering=d.get("clustering", {"kmeans": {"k": 2, "restarts": 10}}),
            active_algorithm=d.get("active_algorithm", "kmeans"),
            auto_accept=d.get("auto_accept", True),
            search=SearchSpace.from_dict(d["search"]) if "search" in d else SearchSpace(),
            train=TrainConfig(**d["train"]) if "train" in d else TrainConfig(),
        )


@dataclass
class ProjectState:
    config: PipelineConfig
    dataset: FeatureMatrix | None = None          # cleaned, band-filtered rows
    norm_params: NormalizationParams | None = None
    normalized: FeatureMatrix | None = None
    n_train: int | None = None                    # train = first n_train rows
    embedding: Embedding | None = None
    assignments: dict = field(default_factory=dict)   # algo -> ClusterAssignment
    label_overrides: list = field(default_factory=list)
    states: dict = field(default_factory=dict)    # state label -> {name, tag, clusters}
    state_assignment: ClusterAssignment | None = None
    voting: VotingClassifier | None = None
    voting_row_ids: np.ndarray | None = None
    bank: ModelBank | None = None
    scores: dict | None = None
    manifest: list = field(default_factory=list)  # per-stage records
    stale: list = field(default_factory=list)

    @property
    def train_matrix(self) -> FeatureMatrix:
        if self.normalized is None or self.n_train is None:
            raise ServiceError("state has no split yet")
        return _slice_matrix(self.normalized, 0, self.n_train)

    @property
    def test_matrix(self) -> FeatureMatrix:
        if self.normalized is None or self.n_train is None:
            raise ServiceError("state has no split yet")
        return _slice_matrix(self.normalized, self.n_train, self.normalized.n)

    def manifest_entry(self, stage: str) -> dict | None:
        for entry in self.manifest:
            if entry["stage"] == stage:
                return entry
        return None

    def record_stage(self, stage: str, input_hash: str, seed: int | None,
                     started: str, finished: str) -> None:
        entry = {
            "stage": stage,
            "status": "complete",
            "input_hash": input_hash,
            "seed": seed,
            "started": started,
            "finished": finished,
        }
        self.manifest = [e for e in self.manifest if e["stage"] != stage]
        self.manifest.append(entry)
        if stage in self.stale:
            self.stale.remove(stage)

    def mark_stale(self, stage: str) -> None:
        if stage not in self.stale:
            self.stale.append(stage)
        entry = self.manifest_entry(stage)
        if entry is not None:
            entry["status"] = "stale"


def _slice_matrix(m: FeatureMatrix, lo: int, hi: int) -> FeatureMatrix:
    return FeatureMatrix(
        signals=list(m.signals),
        units=list(m.units),
        timestamps=m.timestamps[lo:hi],
        data=m.data[lo:hi],
    )


def matrix_to_doc(m: FeatureMatrix | None) -> dict | None:
    if m is None:
        return None
    return {
        "signals": m.signals,
        "units": m.units,
        "timestamps": m.timestamps.tolist(),
        "data": m.data.tolist(),
    }


def matrix_from_doc(doc: dict | None) -> FeatureMatrix | None:
    if doc is None:
        return None
    return FeatureMatrix(
        signals=doc["signals"],
        units=doc["units"],
        timestamps=np.asarray(doc["timestamps"], dtype=np.int64),
        data=np.asarray(doc["data"], dtype=np.float64),
    )


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _assignment_to_doc(a: ClusterAssignment) -> dict:
    return {
        "labels": a.labels.tolist(),
        "algorithm": a.algorithm,
        "params": _jsonable(a.params),
        "n_clusters": a.n_clusters,
    }


def _assignment_from_doc(doc: dict) -> ClusterAssignment:
    return ClusterAssignment(
        labels=np.asarray(doc["labels"], dtype=np.int64),
        algorithm=doc["algorithm"],
        params=doc["params"],
        n_clusters=doc["n_clusters"],
    )


def state_to_doc(state: ProjectState) -> dict:
    return {
        "format": _STATE_FORMAT,
        "version": _STATE_VERSION,
        "config": state.config.to_dict(),
        "dataset": matrix_to_doc(state.dataset),
        "norm_params": None if state.norm_params is None else state.norm_params.to_dict(),
        "normalized": matrix_to_doc(state.normalized),
        "n_train": state.n_train,
        "embedding": None if state.embedding is None else embedding_to_doc(state.embedding),
        "assignments": {k: _assignment_to_doc(v) for k, v in state.assignments.items()},
        "label_overrides": state.label_overrides,
        "states": {str(k): v for k, v in state.states.items()},
        "state_assignment": None if state.state_assignment is None
        else _assignment_to_doc(state.state_assignment),
        "voting": None if state.voting is None
        else state.voting.to_dict(row_ids=state.voting_row_ids),
        "bank": None if state.bank is None else bank_to_doc(state.bank),
        "scores": state.scores,
        "manifest": state.manifest,
        "stale": state.stale,
    }


def state_from_doc(doc: dict) -> ProjectState:
    if doc.get("format") != _STATE_FORMAT:
        raise ServiceError(f"not a project state file: format {doc.get('format')!r}")
    if doc.get("version") != _STATE_VERSION:
        raise ServiceError(
            f"unsupported state version v{doc.get('version')} (this build reads v{_STATE_VERSION})"
        )
    state = ProjectState(config=PipelineConfig.from_dict(doc["config"]))
    state.dataset = matrix_from_doc(doc["dataset"])
    if doc["norm_params"] is not None:
        state.norm_params = NormalizationParams.from_dict(doc["norm_params"])
    state.normalized = matrix_from_doc(doc["normalized"])
    state.n_train = doc["n_train"]
    if doc["embedding"] is not None:
        state.embedding = embedding_from_doc(doc["embedding"])
    state.assignments = {k: _assignment_from_doc(v) for k, v in doc["assignments"].items()}
    state.label_overrides = doc["label_overrides"]
    state.states = {int(k): v for k, v in doc["states"].items()}
    if doc["state_assignment"] is not None:
        state.state_assignment = _assignment_from_doc(doc["state_assignment"])
    if doc["voting"] is not None:
        if state.normalized is None:
            raise ServiceError("state stores a classifier but no training data")
        state.voting = VotingClassifier.from_dict(doc["voting"], state.train_matrix.data)
        state.voting_row_ids = np.asarray(doc["voting"]["row_ids"], dtype=np.int64)
    if doc["bank"] is not None:
        state.bank = bank_from_doc(doc["bank"])
    state.scores = doc["scores"]
    state.manifest = doc["manifest"]
    state.stale = doc["stale"]
    return state


def save_state(state: ProjectState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_doc(state), fh)


def load_state(path) -> ProjectState:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ServiceError(f"unreadable state file {path}: {exc}") from None
    return state_from_doc(doc)
