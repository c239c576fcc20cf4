"""Per-state autoencoder bank and MAE-based deviation scoring.

One autoencoder is searched and trained per labeled operating state, plus
a single global model trained on every row as the no-clustering baseline.
A row is scored against every state: its reconstruction MAE, a deviation
index MAE/tau (tau = 95th percentile of that state's training MAE), and
the nearest state by raw MAE.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..ingest import format_timestamp
from .mlp import AutoencError, Mlp, MlpSpec, TrainConfig, forward, init, row_mae
from .search import SearchSpace, Trial, random_search

_MIN_CLUSTER_ROWS = 10
_TAU_PERCENTILE = 95.0
_BANK_FORMAT = "model-bank"
_BANK_VERSION = 1


@dataclass
class StateEntry:
    label: int
    model: Mlp
    tau: float
    mae_mean: float
    mae_median: float
    n_rows: int
    trials: list[Trial]


@dataclass
class ModelBank:
    entries: dict[int, StateEntry]
    global_model: Mlp
    global_tau: float
    input_width: int
    space: SearchSpace
    train_cfg: TrainConfig
    skipped: list[tuple[int, int]] = field(default_factory=list)  # (label, n_rows)

    def __post_init__(self):
        if not self.entries:
            raise AutoencError("bank needs at least one state model")
        for label, e in self.entries.items():
            if e.model.spec.input_width != self.input_width:
                raise AutoencError(
                    f"state {label} model width {e.model.spec.input_width} != {self.input_width}"
                )
            if e.tau < 0:
                raise AutoencError(f"state {label} has negative threshold {e.tau}")
        if self.global_model.spec.input_width != self.input_width:
            raise AutoencError("global model width does not match bank")

    @property
    def labels(self) -> list[int]:
        return sorted(self.entries)


def _deviation(mae: np.ndarray, tau: float) -> np.ndarray:
    """MAE/tau, with the degenerate tau = 0 case pinned to 0 or +inf."""
    if tau > 0.0:
        return mae / tau
    return np.where(mae == 0.0, 0.0, np.inf)


def fit_bank(
    train,
    assignment,
    space: SearchSpace,
    train_cfg: TrainConfig | None = None,
) -> ModelBank:
    """Search + train one model per cluster and the global baseline.

    Noise rows (label -1) never get a state model. Clusters under 10 rows
    are skipped with a warning naming the cluster; if none is large
    enough the bank cannot be built and this raises.
    """
    data = np.asarray(getattr(train, "data", train), dtype=np.float64)
    labels = np.asarray(getattr(assignment, "labels", assignment), dtype=np.int64)
    if data.ndim != 2:
        raise AutoencError(f"expected 2-d training data, got shape {data.shape}")
    if labels.shape != (data.shape[0],):
        raise AutoencError(
            f"labels shape {labels.shape} does not match {data.shape[0]} rows"
        )
    cfg = train_cfg if train_cfg is not None else TrainConfig()

    entries: dict[int, StateEntry] = {}
    skipped: list[tuple[int, int]] = []
    for label in np.unique(labels):
        label = int(label)
        if label == -1:
            continue
        rows = data[labels == label]
        if len(rows) < _MIN_CLUSTER_ROWS:
            skipped.append((label, len(rows)))
            warnings.warn(
                f"cluster {label} has {len(rows)} rows (< {_MIN_CLUSTER_ROWS}), skipped",
                stacklevel=2,
            )
            continue
        _, model, trials = random_search(rows, space, cfg, tag=f"state-{label}")
        maes = row_mae(model, rows)
        entries[label] = StateEntry(
            label=label,
            model=model,
            tau=float(np.percentile(maes, _TAU_PERCENTILE)),
            mae_mean=float(maes.mean()),
            mae_median=float(np.median(maes)),
            n_rows=len(rows),
            trials=trials,
        )
    if not entries:
        raise AutoencError("no cluster large enough to train a model")

    _, global_model, _ = random_search(data, space, cfg, tag="global")
    global_maes = row_mae(global_model, data)
    return ModelBank(
        entries=entries,
        global_model=global_model,
        global_tau=float(np.percentile(global_maes, _TAU_PERCENTILE)),
        input_width=data.shape[1],
        space=space,
        train_cfg=cfg,
        skipped=skipped,
    )


@dataclass
class ScoreReport:
    mae: dict[int, float]
    dev: dict[int, float]
    nearest_state: int
    global_mae: float
    global_dev: float


def score_rows(bank: ModelBank, X) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized scoring: (mae[n,s], dev[n,s], nearest[n], g_mae[n], g_dev[n]).

    State columns follow bank.labels order. Nearest ties go to the lowest
    state label, which that ordering plus argmin gives directly.
    """
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[1] != bank.input_width:
        raise AutoencError(f"expected width {bank.input_width}, got {data.shape[1]}")
    labels = bank.labels
    mae = np.empty((len(data), len(labels)))
    dev = np.empty_like(mae)
    for j, label in enumerate(labels):
        e = bank.entries[label]
        mae[:, j] = row_mae(e.model, data)
        dev[:, j] = _deviation(mae[:, j], e.tau)
    nearest = np.array([labels[j] for j in mae.argmin(axis=1)], dtype=np.int64)
    g_mae = row_mae(bank.global_model, data)
    g_dev = _deviation(g_mae, bank.global_tau)
    return mae, dev, nearest, g_mae, g_dev


def score(bank: ModelBank, x) -> ScoreReport:
    """Per-state MAE and deviation index for a single row."""
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if x.ndim != 1:
        raise AutoencError(f"score takes one row, got shape {x.shape}")
    mae, dev, nearest, g_mae, g_dev = score_rows(bank, x[None, :])
    labels = bank.labels
    return ScoreReport(
        mae={lab: float(mae[0, j]) for j, lab in enumerate(labels)},
        dev={lab: float(dev[0, j]) for j, lab in enumerate(labels)},
        nearest_state=int(nearest[0]),
        global_mae=float(g_mae[0]),
        global_dev=float(g_dev[0]),
    )


def export_scores_csv(bank: ModelBank, X, timestamps, path) -> None:
    """One line per (row, state) plus a `global` line per row.

    Floats are written with repr so identical banks and rows produce
    byte-identical files.
    """
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.shape != (len(data),):
        raise AutoencError(f"need one timestamp per row, got {ts.shape} for {len(data)} rows")
    mae, dev, nearest, g_mae, g_dev = score_rows(bank, data)
    labels = bank.labels
    lines = ["timestamp,state,mae,dev,nearest_state"]
    for i in range(len(data)):
        stamp = format_timestamp(float(ts[i]))
        near = int(nearest[i])
        for j, lab in enumerate(labels):
            lines.append(f"{stamp},{lab},{float(mae[i, j])!r},{float(dev[i, j])!r},{near}")
        lines.append(f"{stamp},global,{float(g_mae[i])!r},{float(g_dev[i])!r},{near}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _model_to_dict(m: Mlp) -> dict:
    return {
        "spec": m.spec.to_dict(),
        "seed": m.seed,
        "weights": [{"shape": list(w.shape), "data": w.ravel().tolist()} for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }


def _model_from_dict(d: dict) -> Mlp:
    spec = MlpSpec.from_dict(d["spec"])
    weights = [
        np.array(w["data"], dtype=np.float64).reshape(w["shape"]) for w in d["weights"]
    ]
    biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    return Mlp(spec=spec, weights=weights, biases=biases, seed=d["seed"])


def bank_to_doc(bank: ModelBank) -> dict:
    return {
        "format": _BANK_FORMAT,
        "version": _BANK_VERSION,
        "input_width": bank.input_width,
        "space": bank.space.to_dict(),
        "train_cfg": {
            "learning_rate": bank.train_cfg.learning_rate,
            "epochs": bank.train_cfg.epochs,
            "batch_size": bank.train_cfg.batch_size,
            "seed": bank.train_cfg.seed,
            "val_fraction": bank.train_cfg.val_fraction,
        },
        "skipped": [list(s) for s in bank.skipped],
        "states": [
            {
                "label": e.label,
                "model": _model_to_dict(e.model),
                "tau": e.tau,
                "mae_mean": e.mae_mean,
                "mae_median": e.mae_median,
                "n_rows": e.n_rows,
                "trials": [
                    {
                        "spec": t.spec.to_dict(),
                        "seed": t.seed,
                        "val_mae": t.val_mae,
                        "train_mae": t.train_mae,
                    }
                    for t in e.trials
                ],
            }
            for e in (bank.entries[lab] for lab in bank.labels)
        ],
        "global": {"model": _model_to_dict(bank.global_model), "tau": bank.global_tau},
    }


def save_bank(bank: ModelBank, path) -> None:
    with open(path, "w") as f:
        json.dump(bank_to_doc(bank), f)


def bank_from_doc(doc: dict) -> ModelBank:
    if doc.get("format") != _BANK_FORMAT:
        raise AutoencError(f"not a model bank file: format {doc.get('format')!r}")
    if doc.get("version") != _BANK_VERSION:
        raise AutoencError(f"unsupported model bank version {doc.get('version')!r}")
    entries = {}
    for s in doc["states"]:
        trials = [
            Trial(
                spec=MlpSpec.from_dict(t["spec"]),
                seed=t["seed"],
                val_mae=t["val_mae"],
                train_mae=t["train_mae"],
            )
            for t in s["trials"]
        ]
        entries[s["label"]] = StateEntry(
            label=s["label"],
            model=_model_from_dict(s["model"]),
            tau=s["tau"],
            mae_mean=s["mae_mean"],
            mae_median=s["mae_median"],
            n_rows=s["n_rows"],
            trials=trials,
        )
    cfg = TrainConfig(**doc["train_cfg"])
    return ModelBank(
        entries=entries,
        global_model=_model_from_dict(doc["global"]["model"]),
        global_tau=doc["global"]["tau"],
        input_width=doc["input_width"],
        space=SearchSpace.from_dict(doc["space"]),
        train_cfg=cfg,
        skipped=[tuple(s) for s in doc.get("skipped", [])],
    )


def load_bank(path) -> ModelBank:
    with open(path) as f:
        doc = json.load(f)
    return bank_from_doc(doc)
