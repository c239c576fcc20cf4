import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydromon.ingest import (
    FeatureMatrix,
    IngestError,
    SplitSpec,
    SynthConfig,
    RegimeSpec,
    apply_band_filter,
    band_filter,
    load_csv,
    name_labels,
    normalize_apply,
    normalize_fit,
    pad_missing,
    parse_timestamp,
    split_by_time,
    synth_generate,
    synth_hpp_v1,
)


def make_matrix(data, signals=None):
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    signals = signals or [f"s{j}" for j in range(d)]
    ts = 1000 + np.arange(n, dtype=np.int64) * 600
    return FeatureMatrix(signals, [""] * d, ts, data)


class TestLoadCsv:
    def test_identity_load(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(
            "timestamp,power:MW,flow:m3/s\n"
            "2020-01-01T00:00:00Z,1.5,10\n"
            "2020-01-01T00:10:00Z,2.5,11\n"
            "2020-01-01T00:20:00Z,3.5,12\n"
        )
        m = load_csv(str(p))
        assert m.signals == ["power", "flow"]
        assert m.units == ["MW", "m3/s"]
        assert m.data.shape == (3, 2)
        np.testing.assert_array_equal(m.data[:, 0], [1.5, 2.5, 3.5])

    def test_empty_cell_is_missing(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(
            "timestamp,a,b\n"
            "2020-01-01T00:00:00Z,1,2\n"
            "2020-01-01T00:10:00Z,,3\n"
        )
        m = load_csv(str(p))
        assert np.isnan(m.data[1, 0])
        assert m.data[1, 1] == 3

    def test_nan_token_is_missing(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("timestamp,a\n2020-01-01T00:00:00Z,NaN\n2020-01-01T00:10:00Z,1\n")
        m = load_csv(str(p))
        assert np.isnan(m.data[0, 0])

    def test_decreasing_timestamps_rejected_with_line(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(
            "timestamp,a\n"
            "2020-01-01T00:10:00Z,1\n"
            "2020-01-01T00:00:00Z,2\n"
        )
        with pytest.raises(IngestError, match=":3:"):
            load_csv(str(p))

    def test_duplicate_timestamp_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(
            "timestamp,a\n"
            "2020-01-01T00:00:00Z,1\n"
            "2020-01-01T00:00:00Z,2\n"
        )
        with pytest.raises(IngestError, match="duplicate"):
            load_csv(str(p))

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("timestamp,a,b\n2020-01-01T00:00:00Z,1\n")
        with pytest.raises(IngestError, match="expected 3 cells"):
            load_csv(str(p))

    def test_malformed_timestamp_names_line(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("timestamp,a\nnot-a-time,1\n")
        with pytest.raises(IngestError, match=":2:"):
            load_csv(str(p))


class TestPadMissing:
    def test_forward_fill(self):
        m = make_matrix(np.array([[1.0], [np.nan], [3.0]]))
        out = pad_missing(m)
        np.testing.assert_array_equal(out.data[:, 0], [1, 1, 3])

    def test_leading_backfill(self):
        m = make_matrix(np.array([[np.nan], [2.0], [2.0]]))
        out = pad_missing(m)
        np.testing.assert_array_equal(out.data[:, 0], [2, 2, 2])

    def test_all_missing_column_errors(self):
        m = make_matrix(np.array([[np.nan, 1.0], [np.nan, 2.0]]), signals=["dead", "ok"])
        with pytest.raises(IngestError, match="'dead' has no data"):
            pad_missing(m)

    @given(
        st.lists(
            st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False)),
            min_size=1,
            max_size=40,
        ).filter(lambda vs: any(v is not None for v in vs))
    )
    @settings(max_examples=200, deadline=None)
    def test_never_changes_present_values(self, cells):
        col = np.array([np.nan if v is None else v for v in cells])
        out = pad_missing(make_matrix(col[:, None]))
        present = ~np.isnan(col)
        np.testing.assert_array_equal(out.data[present, 0], col[present])
        assert not np.isnan(out.data).any()


class TestBandFilter:
    def test_mask_outside_band(self):
        mask = band_filter(np.array([5.0, 50.0, 7.0]), 0, 10)
        np.testing.assert_array_equal(mask, [False, True, False])

    def test_all_inside_identity(self):
        mask = band_filter(np.array([1.0, 2.0, 3.0]), 0, 10)
        assert not mask.any()

    def test_flagged_then_padded(self):
        m = make_matrix(np.array([[5.0], [50.0], [7.0]]), signals=["injector"])
        out = apply_band_filter(m, "injector", 0, 10)
        np.testing.assert_array_equal(out.data[:, 0], [5, 5, 7])

    def test_bad_band_rejected(self):
        with pytest.raises(IngestError, match="low < high"):
            band_filter(np.array([1.0]), 5, 5)


class TestNormalize:
    def test_direct_scaling(self):
        m = make_matrix(np.array([[2.0], [4.0], [6.0]]))
        out, params = normalize_fit(m)
        np.testing.assert_allclose(out.data[:, 0], [0, 0.5, 1])
        assert not params.degenerate[0]

    def test_degenerate_column_maps_to_zero(self):
        m = make_matrix(np.array([[7.0], [7.0]]))
        out, params = normalize_fit(m)
        np.testing.assert_array_equal(out.data[:, 0], [0, 0])
        assert params.degenerate[0]

    def test_negative_range(self):
        m = make_matrix(np.array([[-1.0], [1.0]]))
        out, _ = normalize_fit(m)
        np.testing.assert_allclose(out.data[:, 0], [0, 1])

    def test_missing_values_rejected(self):
        m = make_matrix(np.array([[1.0], [np.nan]]))
        with pytest.raises(IngestError, match="missing"):
            normalize_fit(m)

    def test_apply_extrapolates_unclamped(self):
        fit_m = make_matrix(np.array([[2.0], [4.0], [6.0]]))
        _, params = normalize_fit(fit_m)
        out = normalize_apply(params, make_matrix(np.array([[8.0]])))
        np.testing.assert_allclose(out.data[:, 0], [1.5])

    def test_apply_matches_fit_on_same_matrix(self):
        m = make_matrix(np.random.default_rng(0).normal(size=(20, 3)))
        fitted, params = normalize_fit(m)
        reapplied = normalize_apply(params, m)
        np.testing.assert_array_equal(fitted.data, reapplied.data)

    def test_degenerate_signal_any_value_maps_to_zero(self):
        fit_m = make_matrix(np.array([[7.0], [7.0]]))
        _, params = normalize_fit(fit_m)
        out = normalize_apply(params, make_matrix(np.array([[123.0]])))
        assert out.data[0, 0] == 0.0

    def test_signal_mismatch_lists_names(self):
        _, params = normalize_fit(make_matrix(np.zeros((2, 1)) + [[1.0], [2.0]], signals=["a"]))
        with pytest.raises(IngestError, match="missing \\['a'\\]"):
            normalize_apply(params, make_matrix(np.array([[1.0]]), signals=["b"]))

    def test_nondegenerate_columns_hit_exact_bounds(self):
        rng = np.random.default_rng(7)
        m = make_matrix(rng.normal(size=(200, 6)) * rng.uniform(0.1, 100, 6))
        out, params = normalize_fit(m)
        live = ~params.degenerate
        np.testing.assert_allclose(out.data[:, live].min(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(out.data[:, live].max(axis=0), 1, atol=1e-12)


class TestSplit:
    def test_basic_partition(self):
        m = make_matrix(np.arange(3.0)[:, None])
        boundary = int(m.timestamps[2])
        train, test = split_by_time(m, SplitSpec(boundary))
        assert train.data.shape[0] == 2
        assert test.data.shape[0] == 1

    def test_boundary_before_all_warns(self):
        m = make_matrix(np.arange(3.0)[:, None])
        with pytest.warns(UserWarning, match="empty train"):
            train, test = split_by_time(m, SplitSpec(0))
        assert train.data.shape[0] == 0
        assert test.data.shape[0] == 3

    def test_boundary_after_all_warns(self):
        m = make_matrix(np.arange(3.0)[:, None])
        with pytest.warns(UserWarning, match="empty test"):
            train, test = split_by_time(m, SplitSpec(10**9))
        assert test.data.shape[0] == 0

    @given(st.integers(0, 4000))
    @settings(max_examples=50, deadline=None)
    def test_counts_always_sum(self, offset):
        m = make_matrix(np.arange(6.0)[:, None])
        train, test = split_by_time(m, SplitSpec(1000 + offset))
        assert train.data.shape[0] + test.data.shape[0] == m.n


def two_regime_config(n=100, noise=(0.0, 0.0), seed=1):
    d = 2
    return SynthConfig(
        signals=["a", "b"],
        units=["", ""],
        regimes=[
            RegimeSpec("low", np.zeros(d), np.full(d, noise[0]), 0.5),
            RegimeSpec("high", np.full(d, 5.0), np.full(d, noise[1]), 0.5),
        ],
        n=n,
        seed=seed,
    )


class TestSynth:
    def test_occupancy_bookkeeping(self):
        m, labels = synth_generate(two_regime_config(n=100))
        assert m.data.shape == (100, 2)
        assert (labels == 0).sum() == 50
        assert (labels == 1).sum() == 50
        assert list(labels[:50]) == [0] * 50

    def test_determinism(self):
        c = two_regime_config(noise=(0.5, 0.5), seed=9)
        m1, l1 = synth_generate(c)
        m2, l2 = synth_generate(two_regime_config(noise=(0.5, 0.5), seed=9))
        np.testing.assert_array_equal(m1.data, m2.data)
        np.testing.assert_array_equal(l1, l2)

    def test_zero_noise_hits_means(self):
        m, labels = synth_generate(two_regime_config())
        np.testing.assert_array_equal(m.data[labels == 0], 0.0)
        np.testing.assert_array_equal(m.data[labels == 1], 5.0)

    def test_zero_regimes_rejected(self):
        with pytest.raises(IngestError, match="at least one regime"):
            SynthConfig(signals=["a"], units=[""], regimes=[], n=10, seed=0)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(IngestError, match="fractions sum"):
            SynthConfig(
                signals=["a"],
                units=[""],
                regimes=[RegimeSpec("x", np.zeros(1), np.zeros(1), 0.4)],
                n=10,
                seed=0,
            )

    def test_hpp_fixture_shape_and_balance(self):
        cfg = synth_hpp_v1()
        m, blocks = synth_generate(cfg)
        labels, names = name_labels(cfg, blocks)
        assert m.data.shape == (8000, 12)
        assert names == ["shutdown", "operating"]
        assert (labels == 0).sum() == 2800   # 0.35 occupancy
        assert (labels == 1).sum() == 5200
        # both regimes present on both sides of a 70/30 time split
        cut = 5600
        assert len(set(labels[:cut])) == 2
        assert len(set(labels[cut:])) == 2

    def test_config_json_roundtrip(self, tmp_path):
        cfg = two_regime_config(noise=(0.1, 0.2), seed=5)
        doc = {
            "signals": cfg.signals,
            "units": cfg.units,
            "n": cfg.n,
            "seed": cfg.seed,
            "regimes": [
                {"name": r.name, "means": r.means.tolist(),
                 "noise": r.noise.tolist(), "fraction": r.fraction}
                for r in cfg.regimes
            ],
        }
        p = tmp_path / "synth.json"
        p.write_text(__import__("json").dumps(doc))
        loaded = SynthConfig.from_json(str(p))
        m1, _ = synth_generate(cfg)
        m2, _ = synth_generate(loaded)
        np.testing.assert_array_equal(m1.data, m2.data)


def test_parse_timestamp_handles_offsets():
    assert parse_timestamp("2020-01-01T00:00:00Z") == parse_timestamp(
        "2020-01-01T01:00:00+01:00"
    )
