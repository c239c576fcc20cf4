"""Loading, cleaning, normalization and splitting of multi-signal time series.

Also provides the seeded synthetic regime generator used throughout the test
and acceptance suites as a stand-in for plant data.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

MISSING_TOKENS = {"", "nan", "NaN", "NAN"}


class IngestError(ValueError):
    """Raised for malformed input files or violated preconditions."""


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 UTC timestamp to epoch seconds."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise IngestError(f"malformed timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch_s: int) -> str:
    """Epoch seconds to ISO-8601 UTC with trailing Z."""
    return datetime.fromtimestamp(int(epoch_s), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


@dataclass
class SignalSeries:
    """One named sensor signal on its own time axis. Values may be NaN."""

    name: str
    unit: str
    timestamps: np.ndarray  # int64 epoch seconds, strictly increasing
    values: np.ndarray      # float64, NaN = missing

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.timestamps) != len(self.values):
            raise IngestError(
                f"signal {self.name!r}: {len(self.values)} values for "
                f"{len(self.timestamps)} timestamps"
            )
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise IngestError(f"signal {self.name!r}: timestamps not strictly increasing")


@dataclass
class FeatureMatrix:
    """n timestamped datapoints by d named signals, column order fixed."""

    signals: list[str]
    units: list[str]
    timestamps: np.ndarray  # (n,) int64 epoch seconds, strictly increasing
    data: np.ndarray        # (n, d) float64, NaN = missing

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise IngestError(f"data must be 2-D, got shape {self.data.shape}")
        n, d = self.data.shape
        if n < 1 or d < 1:
            raise IngestError(f"matrix must be at least 1x1, got {n}x{d}")
        if len(self.signals) != d:
            raise IngestError(f"{len(self.signals)} signal names for {d} columns")
        if len(self.units) != d:
            raise IngestError(f"{len(self.units)} units for {d} columns")
        if len(self.timestamps) != n:
            raise IngestError(f"{len(self.timestamps)} timestamps for {n} rows")
        if n > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise IngestError("timestamps not strictly increasing")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.data).any())

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.signals.index(name)]

    def take_rows(self, idx: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            signals=list(self.signals),
            units=list(self.units),
            timestamps=self.timestamps[idx],
            data=self.data[idx],
        )


@dataclass
class NormalizationParams:
    """Per-signal min/max recorded at fit time; degenerate = min == max."""

    signals: list[str]
    x_min: np.ndarray
    x_max: np.ndarray
    degenerate: np.ndarray  # bool per signal

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=np.float64)
        self.x_max = np.asarray(self.x_max, dtype=np.float64)
        self.degenerate = np.asarray(self.degenerate, dtype=bool)
        if np.any(self.x_min > self.x_max):
            raise IngestError("normalization params violated: min > max")

    def to_dict(self) -> dict:
        return {
            "signals": list(self.signals),
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "degenerate": self.degenerate.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(
            signals=list(d["signals"]),
            x_min=np.array(d["x_min"], dtype=np.float64),
            x_max=np.array(d["x_max"], dtype=np.float64),
            degenerate=np.array(d["degenerate"], dtype=bool),
        )


@dataclass
class SplitSpec:
    """Time split: train = rows strictly before the boundary, test = rest."""

    boundary: int  # epoch seconds

    @classmethod
    def from_iso(cls, text: str) -> "SplitSpec":
        return cls(boundary=parse_timestamp(text))


@dataclass
class RegimeSpec:
    """One synthetic operating regime: per-signal mean and noise scale."""

    name: str
    means: np.ndarray
    noise: np.ndarray
    fraction: float

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.noise = np.asarray(self.noise, dtype=np.float64)
        if np.any(self.noise < 0):
            raise IngestError(f"regime {self.name!r}: negative noise scale")


@dataclass
class SynthConfig:
    """Seeded synthetic dataset: contiguous regime blocks on a fixed grid."""

    signals: list[str]
    units: list[str]
    regimes: list[RegimeSpec]
    n: int
    seed: int
    start: int = 1535760000        # 2018-09-01T00:00:00Z
    step_s: int = 600              # 10-minute cadence

    def __post_init__(self):
        if not self.regimes:
            raise IngestError("synthetic config needs at least one regime")
        total = sum(r.fraction for r in self.regimes)
        if abs(total - 1.0) > 1e-9:
            raise IngestError(f"occupancy fractions sum to {total}, expected 1")
        d = len(self.signals)
        for r in self.regimes:
            if len(r.means) != d or len(r.noise) != d:
                raise IngestError(f"regime {r.name!r} does not cover all {d} signals")

    @classmethod
    def from_json(cls, path: str) -> "SynthConfig":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        regimes = [
            RegimeSpec(
                name=r["name"],
                means=np.array(r["means"], dtype=np.float64),
                noise=np.array(r["noise"], dtype=np.float64),
                fraction=float(r["fraction"]),
            )
            for r in doc["regimes"]
        ]
        kwargs = {}
        if "start" in doc:
            s = doc["start"]
            kwargs["start"] = parse_timestamp(s) if isinstance(s, str) else int(s)
        if "step_s" in doc:
            kwargs["step_s"] = int(doc["step_s"])
        return cls(
            signals=list(doc["signals"]),
            units=list(doc.get("units", [""] * len(doc["signals"]))),
            regimes=regimes,
            n=int(doc["n"]),
            seed=int(doc["seed"]),
            **kwargs,
        )


def _split_header(col: str) -> tuple[str, str]:
    # header cell format: name or name:unit
    if ":" in col:
        name, unit = col.split(":", 1)
        return name.strip(), unit.strip()
    return col.strip(), ""


def load_csv(path: str) -> FeatureMatrix:
    """Load a CSV with a `timestamp` first column and one signal per column.

    Empty cells or a literal NaN mark missing values. Rows must arrive in
    strictly increasing timestamp order; duplicates and ragged rows are
    rejected with the offending line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if len(header) < 2:
            raise IngestError(f"{path}: header needs a timestamp column and at least one signal")
        names, units = zip(*(_split_header(c) for c in header[1:]))
        d = len(names)

        timestamps: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise IngestError(
                    f"{path}:{lineno}: expected {d + 1} cells, got {len(row)}"
                )
            try:
                ts = parse_timestamp(row[0])
            except IngestError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            if timestamps:
                if ts == timestamps[-1]:
                    raise IngestError(f"{path}:{lineno}: duplicate timestamp {row[0]}")
                if ts < timestamps[-1]:
                    raise IngestError(
                        f"{path}:{lineno}: timestamp {row[0]} not increasing"
                    )
            timestamps.append(ts)
            values = []
            for cell in row[1:]:
                if cell.strip() in MISSING_TOKENS:
                    values.append(np.nan)
                else:
                    try:
                        values.append(float(cell))
                    except ValueError:
                        raise IngestError(
                            f"{path}:{lineno}: cannot parse value {cell!r}"
                        ) from None
            rows.append(values)

    if not rows:
        raise IngestError(f"{path}: no data rows")
    return FeatureMatrix(
        signals=list(names),
        units=list(units),
        timestamps=np.array(timestamps, dtype=np.int64),
        data=np.array(rows, dtype=np.float64),
    )


def export_matrix_csv(m: FeatureMatrix, path) -> None:
    """Write a matrix in the same CSV layout load_csv reads.

    Header is `timestamp` plus `name:unit` per signal (bare name when the
    unit is empty); missing values become empty cells.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp"] + [
            f"{name}:{unit}" if unit else name
            for name, unit in zip(m.signals, m.units)
        ]
        writer.writerow(header)
        for i in range(m.n):
            cells = [format_timestamp(m.timestamps[i])]
            for v in m.data[i]:
                cells.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(cells)


def pad_missing(m: FeatureMatrix) -> FeatureMatrix:
    """Forward-fill gaps per column; leading gaps take the first valid value."""
    data = m.data.copy()
    for j, name in enumerate(m.signals):
        col = data[:, j]
        valid = ~np.isnan(col)
        if not valid.any():
            raise IngestError(f"signal {name!r} has no data")
        # forward fill: index of most recent valid row, then back-fill the head
        idx = np.where(valid, np.arange(m.n), -1)
        np.maximum.accumulate(idx, out=idx)
        first = np.argmax(valid)
        idx[idx < 0] = first
        data[:, j] = col[idx]
    return FeatureMatrix(m.signals, m.units, m.timestamps, data)


def band_filter(values: np.ndarray, low: float, high: float) -> np.ndarray:
    """Mask of rows whose value falls outside the closed band [low, high].

    NaN rows are left unmasked: they are already missing and handled by the
    padding rule.
    """
    if low >= high:
        raise IngestError(f"band filter needs low < high, got [{low}, {high}]")
    values = np.asarray(values, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        mask = (values < low) | (values > high)
    mask[np.isnan(values)] = False
    return mask


def apply_band_filter(m: FeatureMatrix, signal: str, low: float, high: float) -> FeatureMatrix:
    """Blank out-of-band values of one signal, then repair them by padding."""
    mask = band_filter(m.column(signal), low, high)
    data = m.data.copy()
    data[mask, m.signals.index(signal)] = np.nan
    return pad_missing(FeatureMatrix(m.signals, m.units, m.timestamps, data))


def normalize_fit(m: FeatureMatrix) -> tuple[FeatureMatrix, NormalizationParams]:
    """Min-max scale each column to [0, 1] and record the scaling params.

    A constant column cannot be scaled; it maps to all zeros and is flagged
    degenerate so later applications stay inert.
    """
    if m.has_missing():
        raise IngestError("normalize_fit requires a padded matrix (missing values present)")
    x_min = m.data.min(axis=0)
    x_max = m.data.max(axis=0)
    degenerate = x_max == x_min
    params = NormalizationParams(list(m.signals), x_min, x_max, degenerate)
    return normalize_apply(params, m), params


def normalize_apply(p: NormalizationParams, m: FeatureMatrix) -> FeatureMatrix:
    """Scale with previously fitted params. Unseen extremes are not clamped."""
    if list(m.signals) != list(p.signals):
        missing = sorted(set(p.signals) - set(m.signals))
        extra = sorted(set(m.signals) - set(p.signals))
        raise IngestError(
            f"signal mismatch: missing {missing or 'none'}, extra {extra or 'none'}"
        )
    span = p.x_max - p.x_min
    safe = np.where(p.degenerate, 1.0, span)
    data = (m.data - p.x_min) / safe
    data[:, p.degenerate] = 0.0
    return FeatureMatrix(m.signals, m.units, m.timestamps, data)


def split_by_time(m: FeatureMatrix, s: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Partition rows at the boundary: before it -> train, rest -> test."""
    train_mask = m.timestamps < s.boundary
    n_train = int(train_mask.sum())
    if n_train == 0:
        warnings.warn(f"split at {format_timestamp(s.boundary)} leaves an empty train set")
    if n_train == m.n:
        warnings.warn(f"split at {format_timestamp(s.boundary)} leaves an empty test set")
    return _take_maybe_empty(m, train_mask), _take_maybe_empty(m, ~train_mask)


def _take_maybe_empty(m: FeatureMatrix, mask: np.ndarray) -> FeatureMatrix:
    # FeatureMatrix requires n >= 1; an empty split side bypasses validation
    # on the data while keeping the signal metadata intact.
    out = FeatureMatrix.__new__(FeatureMatrix)
    out.signals = list(m.signals)
    out.units = list(m.units)
    out.timestamps = m.timestamps[mask]
    out.data = m.data[mask]
    return out


def _regime_counts(fractions: list[float], n: int) -> list[int]:
    # largest-remainder rounding so the counts sum exactly to n
    raw = [f * n for f in fractions]
    counts = [int(np.floor(x)) for x in raw]
    short = n - sum(counts)
    remainders = sorted(range(len(raw)), key=lambda i: (raw[i] - counts[i], -i), reverse=True)
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def synth_generate(c: SynthConfig) -> tuple[FeatureMatrix, np.ndarray]:
    """Draw a seeded synthetic dataset plus its ground-truth regime labels.

    Regimes occupy contiguous blocks in time, mimicking operating and
    shutdown episodes. Values are regime mean plus Gaussian noise.
    """
    rng = np.random.default_rng(c.seed)
    counts = _regime_counts([r.fraction for r in c.regimes], c.n)
    blocks = []
    labels = []
    for i, (regime, count) in enumerate(zip(c.regimes, counts)):
        if count == 0:
            continue
        noise = rng.standard_normal((count, len(c.signals))) * regime.noise
        blocks.append(regime.means + noise)
        labels.append(np.full(count, i, dtype=np.int64))
    data = np.vstack(blocks)
    timestamps = c.start + np.arange(c.n, dtype=np.int64) * c.step_s
    matrix = FeatureMatrix(list(c.signals), list(c.units), timestamps, data)
    return matrix, np.concatenate(labels)


def name_labels(c: SynthConfig, block_labels: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Collapse block-index labels to regime-name labels.

    A regime that occurs as several episodes contributes several blocks;
    name-level labels identify the regime itself. Returns (labels, names)
    with names ordered by first appearance.
    """
    names: list[str] = []
    index_of: dict[str, int] = {}
    mapping = np.empty(len(c.regimes), dtype=np.int64)
    for i, regime in enumerate(c.regimes):
        if regime.name not in index_of:
            index_of[regime.name] = len(names)
            names.append(regime.name)
        mapping[i] = index_of[regime.name]
    return mapping[block_labels], names


# Signal set modeled on a two-turbogenerator plant: power, hydraulics,
# temperatures, vibration, levels and pressures.
_HPP_SIGNALS = [
    "active_power", "reactive_power", "water_flow", "injector_opening",
    "rotation_speed", "temp_turbine", "temp_generator", "vibration",
    "elev_surge_tank", "elev_reservoir", "pressure_penstock", "pressure_control",
]
_HPP_UNITS = ["MW", "MVA", "m3/s", "mm", "RPM", "degC", "degC", "mm/s",
              "mNGF", "mNGF", "Pa", "Pa"]

_HPP_SHUTDOWN_MEANS = np.array([0.02, 0.01, 0.05, 0.5, 1.0, 15.0, 18.0, 0.05,
                                612.0, 615.0, 8.0e5, 2.0e5])
# At rest the machine itself is quiet; what moves is the water column:
# surge tank and reservoir levels drift as the penstock refills, and the
# control pressure cycles while valves are exercised during the outage.
_HPP_SHUTDOWN_NOISE = np.array([0.015, 0.008, 0.02, 0.2, 0.8, 0.15, 0.15, 0.01,
                                0.3, 0.25, 2.0e3, 2.5e4])
_HPP_OPERATING_MEANS = np.array([9.5, 2.5, 11.0, 85.0, 428.0, 42.0, 55.0, 1.8,
                                 612.6, 614.7, 7.6e5, 5.2e5])
# Under load the mechanical and thermal channels carry the fluctuation
# (power, flow, vibration, temperatures, penstock pressure) while the
# governor holds levels and control pressure nearly constant.
_HPP_OPERATING_NOISE = np.array([0.85, 0.55, 1.1, 9.0, 4.0, 2.8, 3.5, 0.35,
                                 0.04, 0.04, 1.6e4, 6.0e3])


def synth_hpp_v1() -> SynthConfig:
    """Standard two-regime validation fixture: shutdown vs operating.

    n = 8000 rows of 12 signals on a 10-minute grid, seed 42. The two
    regimes alternate as contiguous episodes (total occupancy 0.35
    shutdown / 0.65 operating) so that a 70/30 time split keeps both
    regimes on both sides, the way plant campaigns and outages alternate
    through a year. Shutdown sits near zero on power/flow/speed with low
    noise; operating runs high with moderate noise. Each regime fluctuates
    through its own channels (hydraulic levels during outages, mechanical
    and thermal load noise while running), so the two have genuinely
    different correlation structure, not just different means.
    """

    def block(name, means, noise, fraction):
        return RegimeSpec(name=name, means=means.copy(), noise=noise.copy(),
                          fraction=fraction)

    episodes = [
        block("shutdown", _HPP_SHUTDOWN_MEANS, _HPP_SHUTDOWN_NOISE, 0.20),
        block("operating", _HPP_OPERATING_MEANS, _HPP_OPERATING_NOISE, 0.45),
        block("shutdown", _HPP_SHUTDOWN_MEANS, _HPP_SHUTDOWN_NOISE, 0.15),
        block("operating", _HPP_OPERATING_MEANS, _HPP_OPERATING_NOISE, 0.20),
    ]
    return SynthConfig(
        signals=list(_HPP_SIGNALS),
        units=list(_HPP_UNITS),
        regimes=episodes,
        n=8000,
        seed=42,
    )
