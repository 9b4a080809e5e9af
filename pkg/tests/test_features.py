"""MAV extraction, calibration, and the level classifier."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myosonic.features import (ANALYZE_HEADER, CalibrationError,
                               CalibrationProfile, FeatureExtractor, Level,
                               LevelClassifier, analyze_frames, calibrate,
                               default_profile, mav, normalize,
                               write_feature_csv)
from myosonic.ingest import DeviceId, synth_emg

from .conftest import frames_from_array, random_frames
from .oracles import naive_mav, naive_windowed_mav


def unit_extractor(mvc: float = 128.0, **kw):
    """Extractor whose normalization is an exact power-of-two division,
    so normalized outputs can be compared to raw-MAV oracles losslessly
    and int8 data never hits the clamp ceiling."""
    from myosonic.features import DeviceCalibration
    cal = DeviceCalibration(rest_baseline=np.zeros(8),
                            mvc_max=np.full(8, mvc))
    return FeatureExtractor(DeviceId.LEFT_ARM, cal, **kw)


def test_mav_matches_definition(rng):
    window = rng.integers(-128, 128, size=(50, 8))
    assert mav(np.abs(window)) == pytest.approx(naive_mav(window), abs=1e-12)


def test_incremental_mav_equals_naive(rng):
    data = rng.integers(-128, 128, size=(500, 8))
    ex = unit_extractor()
    got = []
    for frame in frames_from_array(data):
        fv = ex.push(frame)
        if fv is not None and not fv.warm_up:
            got.append(fv.mav_per_channel)
    expected = naive_windowed_mav(data, window=50, hop=10) / 128.0
    assert len(got) == expected.shape[0]
    assert np.max(np.abs(np.asarray(got) - expected)) < 1e-9


def test_incremental_mav_long_stream_no_drift(rng):
    # The running sum refreshes periodically; drift must stay below 1e-9
    # far beyond the refresh interval.
    data = rng.integers(-128, 128, size=(20_000, 8))
    ex = unit_extractor()
    worst = 0.0
    naive = naive_windowed_mav(data, 50, 10) / 128.0
    i = 0
    for frame in frames_from_array(data):
        fv = ex.push(frame)
        if fv is not None and not fv.warm_up:
            worst = max(worst, float(np.max(np.abs(
                np.asarray(fv.mav_per_channel) - naive[i]))))
            i += 1
    assert i == naive.shape[0]
    assert worst < 1e-9


def test_hop_count_formula(rng):
    for n in (50, 59, 60, 61, 237, 1000):
        data = rng.integers(-128, 128, size=(n, 8))
        fvs = analyze_frames(frames_from_array(data))
        assert len(fvs) == math.floor((n - 50) / 10) + 1


def test_warm_up_flagged(rng):
    ex = unit_extractor()
    out = [ex.push(f) for f in random_frames(rng, 60)]
    emitted = [fv for fv in out if fv is not None]
    assert len(emitted) == 6  # every 10th push
    assert [fv.warm_up for fv in emitted] == [True] * 4 + [False] * 2


def test_feature_timestamps_newest_sample(rng):
    ex = unit_extractor()
    fvs = [ex.push(f) for f in random_frames(rng, 100)]
    settled = [fv for fv in fvs if fv is not None and not fv.warm_up]
    assert settled[0].timestamp_us == 49 * 5000
    assert settled[1].timestamp_us == 59 * 5000


def test_classifier_spec_sequence():
    clf = LevelClassifier()
    got = [clf.classify(x) for x in (0.079, 0.081, 0.079)]
    assert got == [Level.MICRO, Level.MESO, Level.MESO]


def test_classifier_thresholds():
    clf = LevelClassifier()
    assert clf.classify(0.0) is Level.MICRO
    assert clf.classify(0.08) is Level.MESO
    assert clf.classify(0.40) is Level.MACRO
    # Demotion waits for threshold - hysteresis.
    assert clf.classify(0.395) is Level.MACRO
    assert clf.classify(0.389) is Level.MESO
    assert clf.classify(0.071) is Level.MESO
    assert clf.classify(0.069) is Level.MICRO


def test_classifier_two_level_drop():
    clf = LevelClassifier()
    clf.classify(0.9)
    assert clf.level is Level.MACRO
    assert clf.classify(0.0) is Level.MICRO


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.5), st.floats(-0.004, 0.004), st.integers(2, 40))
def test_classifier_no_chatter_in_band(center, wobble, n):
    """A signal oscillating inside a 0.01-wide band changes label at most once."""
    clf = LevelClassifier()
    labels = []
    for i in range(n):
        x = center + (wobble if i % 2 else -wobble)
        labels.append(clf.classify(min(max(x, 0.0), 1.5)))
    changes = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
    assert changes <= 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.5), min_size=1, max_size=50))
def test_classifier_monotone_promotion(values):
    """Rising inputs never lower the label."""
    clf = LevelClassifier()
    order = [Level.MICRO, Level.MESO, Level.MACRO]
    prev = Level.MICRO
    for x in sorted(values):
        lvl = clf.classify(x)
        assert order.index(lvl) >= order.index(prev)
        prev = lvl


def test_normalize_clamps():
    from myosonic.features import DeviceCalibration
    cal = DeviceCalibration(rest_baseline=np.full(8, 2.0), mvc_max=np.full(8, 10.0))
    out = normalize(np.array([0.0, 2.0, 6.0, 10.0, 99.0, 2.0, 2.0, 2.0]), cal)
    assert out[0] == 0.0          # below rest clamps at zero
    assert out[1] == 0.0
    assert out[2] == pytest.approx(0.5)
    assert out[3] == pytest.approx(1.0)
    assert out[4] == 1.5          # ceiling


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 200), min_size=2, max_size=2).map(sorted))
def test_normalize_monotonic(pair):
    from myosonic.features import DeviceCalibration
    cal = DeviceCalibration(rest_baseline=np.full(8, 1.0), mvc_max=np.full(8, 50.0))
    lo, hi = pair
    a = normalize(np.full(8, lo), cal)
    b = normalize(np.full(8, hi), cal)
    assert np.all(b >= a)


def test_calibrate_round_trip(tmp_path):
    rest = synth_emg("rest", seed=1, duration_s=4.0) + synth_emg(
        "rest", seed=1, duration_s=4.0, device=DeviceId.RIGHT_CALF)
    mvc = synth_emg("macro", seed=2, duration_s=4.0) + synth_emg(
        "macro", seed=2, duration_s=4.0, device=DeviceId.RIGHT_CALF)
    profile = calibrate(rest, mvc)
    path = tmp_path / "cal.toml"
    profile.save(path)
    loaded = CalibrationProfile.load(path)
    for dev in (DeviceId.LEFT_ARM, DeviceId.RIGHT_CALF):
        a, b = profile.for_device(dev), loaded.for_device(dev)
        assert a.rest_baseline == pytest.approx(b.rest_baseline)
        assert a.mvc_max == pytest.approx(b.mvc_max)


def test_calibrate_rejects_short_streams():
    rest = synth_emg("rest", seed=1, duration_s=1.0)
    mvc = synth_emg("macro", seed=2, duration_s=1.0)
    with pytest.raises(CalibrationError, match="at least"):
        calibrate(rest, mvc)


def test_calibrate_rejects_no_separation():
    rest = synth_emg("meso", seed=1, duration_s=4.0)
    mvc = synth_emg("meso", seed=1, duration_s=4.0)  # identical streams
    with pytest.raises(CalibrationError, match="margin"):
        calibrate(rest, mvc)


def test_calibrate_rejects_device_mismatch():
    rest = synth_emg("rest", seed=1, duration_s=4.0)
    mvc = synth_emg("macro", seed=2, duration_s=4.0,
                    device=DeviceId.RIGHT_CALF)
    with pytest.raises(CalibrationError, match="devices"):
        calibrate(rest, mvc)


def test_level_regime_synthetic():
    rest = synth_emg("rest", seed=11, duration_s=5.0)
    mvc = synth_emg("macro", seed=12, duration_s=5.0)
    profile = calibrate(rest, mvc)
    cal = profile.for_device(DeviceId.LEFT_ARM)

    def fraction(profile_name: str, want: Level) -> float:
        frames = synth_emg(profile_name, seed=99, duration_s=5.0)
        ex = FeatureExtractor(DeviceId.LEFT_ARM, cal)
        hits = total = 0
        for f in frames:
            fv = ex.push(f)
            if fv is not None and not fv.warm_up:
                total += 1
                hits += fv.level is want
        return hits / total

    assert fraction("rest", Level.MICRO) >= 0.99
    assert fraction("macro", Level.MACRO) >= 0.99


def test_analyze_sorted_and_settled(rng):
    frames = sorted(
        synth_emg("meso", seed=7, duration_s=1.0)
        + synth_emg("micro", seed=8, duration_s=1.0,
                    device=DeviceId.RIGHT_CALF),
        key=lambda f: (f.timestamp_us, f.device_id.value))
    fvs = analyze_frames(frames)
    keys = [(fv.timestamp_us, fv.device_id.value) for fv in fvs]
    assert keys == sorted(keys)
    assert not any(fv.warm_up for fv in fvs)
    # floor((200-50)/10)+1 = 16 rows per device
    assert len(fvs) == 32


def test_feature_csv_round_trip(tmp_path, rng):
    frames = synth_emg("meso", seed=7, duration_s=1.0)
    fvs = analyze_frames(frames)
    path = tmp_path / "f.csv"
    write_feature_csv(fvs, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == ANALYZE_HEADER
    assert len(lines) == len(fvs) + 1
    first = lines[1].split(",")
    assert int(first[0]) == fvs[0].timestamp_us
    assert first[1] == fvs[0].device_id.value
    assert float(first[2]) == pytest.approx(fvs[0].mav_per_channel[0], abs=1e-9)
    assert first[-1] == fvs[0].level.value


def test_default_profile_usable():
    profile = default_profile()
    for dev in DeviceId:
        cal = profile.for_device(dev)
        assert np.all(cal.mvc_max > cal.rest_baseline)
