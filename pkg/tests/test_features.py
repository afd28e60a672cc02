import math

import numpy as np
import pytest

import oracles
from physiobias.errors import InsufficientData
from physiobias.features import (
    BEAT_FEATURES,
    FEATURE_COLUMNS,
    RRSeries,
    build_feature_matrix,
    detect_beats,
    eda_extra_features,
    extra_features,
    hrv_features,
    stat_features,
    window_features,
)
from physiobias.signals import Window


class TestStatFeatures:
    def test_hand_example(self):
        out = stat_features(np.array([1.0, 2.0, 3.0]), 4.0)
        assert out["mean"] == 2.0
        assert out["median"] == 2.0
        assert out["var"] == pytest.approx(2.0 / 3.0)
        assert out["mean_abs_dev"] == pytest.approx(2.0 / 3.0)

    def test_constant_slice(self):
        out = stat_features(np.array([5.0, 5.0, 5.0, 5.0]), 4.0)
        assert out["std"] == 0.0
        assert out["var"] == 0.0
        assert out["interq_range"] == 0.0
        assert out["distance"] == 3.0  # flat signal traverses 1 per step

    def test_distance_unit_spacing(self):
        out = stat_features(np.array([0.0, 1.0]), 4.0)
        assert out["distance"] == pytest.approx(math.sqrt(2.0))

    def test_too_short(self):
        with pytest.raises(InsufficientData):
            stat_features(np.array([1.0]), 4.0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=40)
        a = stat_features(x, 4.0)
        b = stat_features(x + 17.5, 4.0)
        for name in ("std", "var", "interq_range", "mean_abs_dev", "distance"):
            assert b[name] == pytest.approx(a[name], abs=1e-9)
        for name in ("max", "min", "median", "mean"):
            assert b[name] == pytest.approx(a[name] + 17.5, abs=1e-9)

    def test_scale_covariance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=40)
        c = 3.5
        a = stat_features(x, 4.0)
        b = stat_features(c * x, 4.0)
        assert b["mean"] == pytest.approx(c * a["mean"], rel=1e-12)
        assert b["std"] == pytest.approx(c * a["std"], rel=1e-12)
        assert b["var"] == pytest.approx(c * c * a["var"], rel=1e-12)


class TestExtraFeatures:
    def test_rms(self):
        out = extra_features(np.array([3.0, 4.0, 3.0, 4.0]), 4.0)
        assert out["rms"] == pytest.approx(math.sqrt(12.5))

    def test_alternating_signs(self):
        out = extra_features(np.array([1.0, -1.0, 1.0, -1.0]), 4.0)
        assert out["zero_cross"] == 3
        assert out["kurtosis"] == pytest.approx(-2.0)

    def test_num_peaks(self):
        out = extra_features(np.array([0.0, 1.0, 0.0, 2.0, 0.0]), 4.0)
        assert out["num_peaks"] == 2

    def test_zero_variance_moments_missing(self):
        out = extra_features(np.full(8, 3.3), 4.0)
        assert np.isnan(out["kurtosis"]) and np.isnan(out["skewness"])
        assert out["rms"] == pytest.approx(3.3)

    def test_power_spec_excludes_dc(self):
        # A pure offset has all its energy in the DC bin.
        out = extra_features(np.full(8, 2.0) + np.array([0, 1e-9] * 4), 4.0)
        assert out["power_spec"] < 1e-12

    def test_skew_kurt_scale_invariant(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=50)
        a = extra_features(x, 4.0)
        b = extra_features(4.2 * x, 4.0)
        assert b["skewness"] == pytest.approx(a["skewness"], abs=1e-9)
        assert b["kurtosis"] == pytest.approx(a["kurtosis"], abs=1e-9)

    def test_too_short(self):
        with pytest.raises(InsufficientData):
            extra_features(np.array([1.0, 2.0, 3.0]), 4.0)


class TestEdaExtraFeatures:
    def test_auc_triangle(self):
        out = eda_extra_features(np.array([0.0, 1.0, 0.0]), 4.0)
        assert out["auc"] == pytest.approx(0.25)

    def test_auc_and_max_peak(self):
        out = eda_extra_features(np.array([0.0, 2.0, 0.0, 3.0, 0.0]), 1.0)
        assert out["auc"] == pytest.approx(5.0)
        assert out["max_peak"] == 3.0

    def test_constant_has_no_peak(self):
        out = eda_extra_features(np.full(6, 1.0), 4.0)
        assert np.isnan(out["max_peak"])


class TestDetectBeats:
    def test_sinusoid_beats(self):
        t = np.arange(320) / 64.0
        rr = detect_beats(np.sin(2 * np.pi * 1.2 * t), 64.0)
        assert rr.peak_indices.size in (5, 6)
        # generator period is 1/1.2 s ~ 833 ms; grid quantization allows ~2%
        assert np.all(np.abs(rr.intervals - 833.3) < 20.0)

    def test_flat_slice(self):
        rr = detect_beats(np.zeros(320), 64.0)
        assert rr.intervals.size == 0
        assert rr.peak_indices.size == 0

    def test_refractory_rejects_close_spike(self):
        t = np.arange(320) / 64.0
        x = np.sin(2 * np.pi * 1.2 * t)
        clean = detect_beats(x, 64.0)
        true_peak = int(clean.peak_indices[1])
        spiked = x.copy()
        spike_at = true_peak + 6  # 0.094 s later, inside the 0.3 s refractory
        spiked[spike_at] += 1.5
        rr = detect_beats(spiked, 64.0)
        assert true_peak in rr.peak_indices
        assert spike_at not in rr.peak_indices

    def test_rate_gate(self):
        with pytest.raises(InsufficientData):
            detect_beats(np.zeros(100), 16.0)

    def test_length_gate(self):
        with pytest.raises(InsufficientData):
            detect_beats(np.zeros(30), 64.0)

    def test_rr_gating_drops_implausible_interval(self):
        # two peaks 0.2 s apart would give 200 ms (below the gate), but the
        # refractory rule already rejects the second; build 2.5 s gaps instead
        x = np.zeros(640)
        x[[100, 260, 600]] = 1.0  # gaps 2500 ms (gated out) and 5312 ms
        rr = detect_beats(x, 64.0)
        assert rr.peak_indices.size == 3
        assert rr.intervals.size == 0  # all gaps outside [300, 2000] ms


class TestHrvFeatures:
    def test_hand_example(self):
        rr = RRSeries(intervals=[800.0, 810.0, 790.0], peak_values=[1.0, 2.0, 3.0, 2.0])
        out = hrv_features(rr)
        assert out["sdnn"] == pytest.approx(8.16496580927726)
        assert out["rmssd"] == pytest.approx(math.sqrt((10 ** 2 + 20 ** 2) / 2.0))
        assert out["hr_mad"] == 10.0
        assert out["mean_peak"] == 2.0

    def test_pnn_strict_inequality(self):
        # successive differences 10, -20, 60: only |60| clears both gates
        rr = RRSeries(intervals=[800.0, 810.0, 790.0, 850.0])
        out = hrv_features(rr)
        assert out["pnn20"] == pytest.approx(1.0 / 3.0)
        assert out["pnn50"] == pytest.approx(1.0 / 3.0)

    def test_identical_intervals(self):
        rr = RRSeries(intervals=[800.0] * 4)
        out = hrv_features(rr)
        assert out["sdnn"] == 0.0
        assert out["rmssd"] == 0.0
        assert np.isnan(out["sd1_sd2"])

    def test_empty_series_all_missing(self):
        out = hrv_features(RRSeries())
        assert all(np.isnan(v) for v in out.values())

    def test_rmssd_sdsd_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            iv = rng.uniform(400, 1500, rng.integers(3, 12))
            out = hrv_features(RRSeries(intervals=iv))
            mean_diff = float(np.diff(iv).mean())
            assert out["rmssd"] ** 2 == pytest.approx(
                out["sdsd"] ** 2 + mean_diff ** 2, rel=1e-9, abs=1e-9
            )

    def test_breathingrate_requires_four_intervals(self):
        out = hrv_features(RRSeries(intervals=[800.0, 820.0, 780.0]))
        assert np.isnan(out["breathingrate"])

    def test_breathingrate_in_band(self):
        rng = np.random.default_rng(9)
        iv = 800.0 + 60.0 * np.sin(np.arange(12) * 2.0) + rng.normal(0, 5, 12)
        out = hrv_features(RRSeries(intervals=iv))
        assert 6.0 <= out["breathingrate"] <= 30.0  # 60 * [0.1, 0.5] Hz


class TestOracleEquivalence:
    """Spot checks against the independent brute-force implementations;
    the acceptance suite runs the full 1000-slice version."""

    def test_slice_features(self):
        rng = np.random.default_rng(123)
        for _ in range(60):
            n = int(rng.integers(20, 321))
            x = rng.normal(0, rng.uniform(0.5, 2.0), n) + rng.uniform(-1, 1)
            rate = float(rng.choice([1.0, 4.0, 32.0, 64.0]))
            for impl, oracle in (
                (stat_features, oracles.o_stat_features),
                (extra_features, oracles.o_extra_features),
                (eda_extra_features, oracles.o_eda_extra_features),
            ):
                got = impl(x, rate)
                want = oracle(list(x), rate)
                for name, value in got.items():
                    if np.isnan(value) and np.isnan(want[name]):
                        continue
                    assert value == pytest.approx(want[name], rel=1e-9, abs=1e-9), name

    def test_hrv(self):
        rng = np.random.default_rng(321)
        for _ in range(60):
            m = int(rng.integers(2, 14))
            iv = rng.uniform(400, 1400, m)
            pv = rng.uniform(5, 60, m + 1)
            got = hrv_features(RRSeries(intervals=iv, peak_values=pv))
            want = oracles.o_hrv_features(list(iv), list(pv))
            for name, value in got.items():
                if np.isnan(value) and np.isnan(want[name]):
                    continue
                assert value == pytest.approx(want[name], rel=1e-9, abs=1e-9), name

    def test_beats(self):
        rng = np.random.default_rng(55)
        for _ in range(40):
            n = int(rng.integers(64, 400))
            x = np.sin(
                2 * np.pi * rng.uniform(0.8, 2.0) * np.arange(n) / 64.0
                + rng.uniform(0, 6)
            ) + rng.normal(0, 0.3, n)
            got = detect_beats(x, 64.0)
            peaks, rr = oracles.o_detect_beats(list(x), 64.0)
            assert list(got.peak_indices) == peaks
            assert got.intervals == pytest.approx(rr, rel=1e-12)


def make_window(bvp=None) -> Window:
    rng = np.random.default_rng(77)
    t64 = np.arange(320) / 64.0
    channels = {
        "eda": rng.uniform(1, 3, 20),
        "eda_tonic": rng.uniform(1, 2, 20),
        "eda_phasic": rng.uniform(0, 1, 20),
        "bvp": np.sin(2 * np.pi * 1.1 * t64) if bvp is None else bvp,
        "hr": rng.uniform(60, 90, 5),
        "skt": rng.uniform(31, 34, 20),
        "magnitude": rng.uniform(0.9, 1.1, 160),
    }
    rates = {"eda": 4.0, "eda_tonic": 4.0, "eda_phasic": 4.0, "bvp": 64.0,
             "hr": 1.0, "skt": 4.0, "magnitude": 32.0}
    return Window("p1", 0, 0.0, 5.0, channels, rates)


class TestWindowFeatures:
    def test_column_vocabulary(self):
        assert len(FEATURE_COLUMNS) == 102
        vec = window_features(make_window())
        assert list(vec.features) == FEATURE_COLUMNS

    def test_hr_gets_stats_only(self):
        assert "hr_mean" in FEATURE_COLUMNS
        assert "hr_rms" not in FEATURE_COLUMNS
        assert "hr_auc" not in FEATURE_COLUMNS
        # hr_mad is a BVP beat feature, not an HR-channel one
        assert "bvp_hr_mad" in FEATURE_COLUMNS
        assert "hr_hr_mad" not in FEATURE_COLUMNS

    def test_flat_bvp_yields_missing_beat_features(self):
        vec = window_features(make_window(bvp=np.zeros(320)))
        for name in BEAT_FEATURES:
            assert np.isnan(vec.features[f"bvp_{name}"])

    def test_missing_channel_rejected(self):
        window = make_window()
        del window.channels["skt"]
        with pytest.raises(ValueError):
            window_features(window)


class TestBuildFeatureMatrix:
    def test_rows_columns_and_missing(self):
        vec_a = window_features(make_window())
        vec_b = window_features(make_window(bvp=np.zeros(320)))
        vec_b.window_index = 1
        data = build_feature_matrix([("pA", 1, [vec_a, vec_b]), ("pB", 0, [vec_a])])
        assert data.X.shape == (3, 102)
        assert list(data.column_names) == FEATURE_COLUMNS
        assert data.y.tolist() == [1, 1, 0]
        assert data.participant_ids.tolist() == ["pA", "pA", "pB"]
        row_b = data.X[1]
        assert np.isnan(row_b[FEATURE_COLUMNS.index("bvp_rmssd")])
        assert not np.isnan(row_b[FEATURE_COLUMNS.index("eda_mean")])
