"""Randomized architecture search over mirrored autoencoders.

Each trial samples a depth, per-layer hidden widths, a bottleneck width
and an activation, trains on the subset and keeps the candidate with the
lowest validation MAE. Trial seeds are derived by hashing so that the
outcome for one state does not depend on how many other states exist.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .mlp import AutoencError, Mlp, MlpSpec, TrainConfig, init, train


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tag tuple (ints and strings)."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") & 0x7FFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SearchSpace:
    depths: tuple[int, ...] = (1, 2)
    widths: tuple[int, ...] = (8, 16, 32)
    activations: tuple[str, ...] = ("tanh", "relu")
    budget: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        if not self.depths or any(d < 1 for d in self.depths):
            raise AutoencError(f"depths must be >= 1, got {self.depths}")
        if not self.widths or any(w < 1 for w in self.widths):
            raise AutoencError(f"widths must be >= 1, got {self.widths}")
        if not self.activations:
            raise AutoencError("need at least one activation")
        if self.budget < 1:
            raise AutoencError(f"budget must be >= 1, got {self.budget}")

    def to_dict(self) -> dict:
        return {
            "depths": list(self.depths),
            "widths": list(self.widths),
            "activations": list(self.activations),
            "budget": self.budget,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        return cls(
            depths=tuple(d["depths"]),
            widths=tuple(d["widths"]),
            activations=tuple(d["activations"]),
            budget=d["budget"],
            seed=d["seed"],
        )


@dataclass
class Trial:
    spec: MlpSpec
    seed: int
    val_mae: float
    train_mae: float


def sample_spec(space: SearchSpace, input_width: int, rng: np.random.Generator) -> MlpSpec:
    """One architecture draw; bottleneck is forced below the input width."""
    depth = int(rng.choice(np.array(space.depths)))
    enc = tuple(int(rng.choice(np.array(space.widths))) for _ in range(depth))
    # bottleneck sampled from widths when possible, else squeezed under d
    narrow = [w for w in space.widths if w < input_width]
    if narrow:
        bottleneck = int(rng.choice(np.array(narrow)))
    else:
        bottleneck = max(1, input_width // 2)
    act = str(rng.choice(np.array(space.activations)))
    return MlpSpec(
        input_width=input_width,
        encoder_widths=enc,
        bottleneck=bottleneck,
        encoder_activation=act,
        decoder_activation=act,
    )


def random_search(
    X,
    space: SearchSpace,
    train_cfg: TrainConfig | None = None,
    tag: str = "",
) -> tuple[MlpSpec, Mlp, list[Trial]]:
    """Train `budget` sampled candidates, return the best by validation MAE.

    Ties keep the earlier trial. `tag` isolates seed streams between
    callers sharing one SearchSpace (for example per-state training).
    """
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if data.ndim != 2:
        raise AutoencError(f"expected 2-d data, got shape {data.shape}")
    input_width = data.shape[1]
    if input_width < 2:
        raise AutoencError("need at least 2 features to compress")
    base_cfg = train_cfg if train_cfg is not None else TrainConfig()

    trials: list[Trial] = []
    best: tuple[float, int] | None = None
    best_model: Mlp | None = None
    for t in range(space.budget):
        trial_seed = derive_seed(space.seed, tag, t)
        rng = np.random.default_rng(trial_seed)
        spec = sample_spec(space, input_width, rng)
        model0 = init(spec, trial_seed)
        cfg = TrainConfig(
            learning_rate=base_cfg.learning_rate,
            epochs=base_cfg.epochs,
            batch_size=base_cfg.batch_size,
            seed=trial_seed,
            val_fraction=base_cfg.val_fraction,
        )
        model, history = train(model0, data, cfg)
        if history:
            train_mae, val_mae = min(history, key=lambda hv: hv[1])
        else:
            from .mlp import forward, loss_mae

            recon = forward(model, data)
            train_mae = val_mae = loss_mae(data, recon)
        trials.append(Trial(spec=spec, seed=trial_seed, val_mae=val_mae, train_mae=train_mae))
        if best is None or val_mae < best[0]:
            best = (val_mae, t)
            best_model = model

    assert best_model is not None
    return trials[best[1]].spec, best_model, trials
