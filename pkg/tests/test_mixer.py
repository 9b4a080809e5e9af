"""Pan law, gain ramps, metering, mute, and control application."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myosonic.control import ControlError, ControlEvent, Source
from myosonic.mixer import (GAIN_DB_MAX, GAIN_DB_MIN, Mixer, MixerState,
                            StripState, apply_control, db_to_linear,
                            pan_gains)

from .oracles import db_to_linear as oracle_db


def ev(address: str, value) -> ControlEvent:
    return ControlEvent(source=Source.WS, address=address, value=value,
                        timestamp_us=0)


def make_mixer(states: dict[str, StripState] | None = None,
               master_db: float = 0.0, sr: int = 48000) -> Mixer:
    states = states or {"a": StripState()}
    m = Mixer(list(states), sr)
    m.sync_targets(MixerState(strips=states, master_gain_db=master_db))
    m.snap()
    return m


# -- laws --------------------------------------------------------------

def test_pan_center():
    gl, gr = pan_gains(0.0)
    assert gl == pytest.approx(0.70711, abs=1e-5)
    assert gr == pytest.approx(0.70711, abs=1e-5)


def test_pan_extremes():
    gl, gr = pan_gains(-1.0)
    assert gl == pytest.approx(1.0)
    assert gr == pytest.approx(0.0, abs=1e-12)
    gl, gr = pan_gains(1.0)
    assert gl == pytest.approx(0.0, abs=1e-12)
    assert gr == pytest.approx(1.0)


def test_pan_equal_power_1001():
    pans = np.linspace(-1.0, 1.0, 1001)
    for p in pans:
        gl, gr = pan_gains(float(p))
        assert abs(gl * gl + gr * gr - 1.0) <= 1e-6


def test_db_conversion_against_oracle():
    for db in (-60.0, -6.0206, -6.0, 0.0, 3.0, 6.0):
        assert db_to_linear(db) == pytest.approx(oracle_db(db), rel=1e-12)
    assert db_to_linear(-6.0206) == pytest.approx(0.5, abs=1e-5)


def test_hard_left_at_minus_6dB():
    m = make_mixer({"a": StripState(gain_db=-6.0206, pan=-1.0)})
    out, _, _ = m.mix({"a": np.ones(64)})
    assert out[:, 0] == pytest.approx(np.full(64, 0.5), abs=1e-5)
    assert out[:, 1] == pytest.approx(np.zeros(64), abs=1e-12)


def test_mixer_linearity():
    m1 = make_mixer({"a": StripState(gain_db=-3.0, pan=0.25)})
    m2 = make_mixer({"a": StripState(gain_db=-3.0, pan=0.25)})
    rng = np.random.default_rng(1)
    x = rng.standard_normal(256)
    y = rng.standard_normal(256)
    out_sum, _, _ = m1.mix({"a": x + 2.0 * y})
    a, _, _ = m2.mix({"a": x})
    m3 = make_mixer({"a": StripState(gain_db=-3.0, pan=0.25)})
    b, _, _ = m3.mix({"a": y})
    assert np.max(np.abs(out_sum - (a + 2.0 * b))) < 1e-6


def test_two_strips_sum():
    m = make_mixer({"a": StripState(), "b": StripState()})
    out, _, _ = m.mix({"a": np.ones(16), "b": np.ones(16)})
    # Both center-panned at unity: 2 * cos(pi/4) per side.
    assert out[:, 0] == pytest.approx(np.full(16, 2 * math.cos(math.pi / 4)))


# -- ramps --------------------------------------------------------------

def test_gain_ramp_is_slope_limited():
    m = make_mixer({"a": StripState(gain_db=-60.0)})
    m.sync_targets(MixerState(strips={"a": StripState(gain_db=0.0)}))
    # 10 ms at 48 kHz = 480 samples to traverse the full step.
    out1, _, _ = m.mix({"a": np.ones(256)})
    out2, _, _ = m.mix({"a": np.ones(256)})
    gain_path = np.concatenate([out1[:, 0], out2[:, 0]]) / math.cos(math.pi / 4)
    step = np.diff(np.concatenate([[db_to_linear(-60)], gain_path]))
    bound = (1.0 - db_to_linear(-60)) / 480
    assert np.all(step <= bound * (1 + 1e-9))
    assert gain_path[479] == pytest.approx(1.0, rel=1e-9)
    assert gain_path[-1] == pytest.approx(1.0)


def test_ramp_completes_within_10ms():
    m = make_mixer({"a": StripState(pan=-1.0)})
    m.sync_targets(MixerState(strips={"a": StripState(pan=1.0)}))
    m.mix({"a": np.zeros(480)})
    out, _, _ = m.mix({"a": np.ones(16)})
    gl, gr = pan_gains(1.0)
    assert out[0, 1] == pytest.approx(gr)
    assert out[0, 0] == pytest.approx(gl, abs=1e-12)


def test_no_zipper_discontinuity():
    m = make_mixer({"a": StripState(gain_db=0.0)})
    m.sync_targets(MixerState(strips={"a": StripState(gain_db=-20.0)}))
    out, _, _ = m.mix({"a": np.ones(1024)})
    jumps = np.abs(np.diff(out[:, 0]))
    assert np.max(jumps) < 0.005  # per-sample continuity


# -- mute and meters --------------------------------------------------------

def test_mute_exact_zeros():
    m = make_mixer({"a": StripState(mute=True)})
    out, send, meters = m.mix({"a": np.ones(128)})
    assert np.all(out == 0.0)
    assert np.all(send == 0.0)
    assert meters["a"].peak == 0.0
    assert meters["a"].rms == 0.0


def test_mute_still_advances_ramps():
    m = make_mixer({"a": StripState(gain_db=-60.0, mute=True)})
    m.sync_targets(MixerState(strips={"a": StripState(gain_db=0.0, mute=True)}))
    m.mix({"a": np.ones(480)})
    # Unmute: gain already settled at unity, so output jumps straight there.
    m.sync_targets(MixerState(strips={"a": StripState(gain_db=0.0)}))
    out, _, _ = m.mix({"a": np.ones(8)})
    assert out[0, 0] == pytest.approx(math.cos(math.pi / 4))


def test_meters_post_gain_pre_pan():
    m = make_mixer({"a": StripState(gain_db=-6.0206, pan=-1.0)})
    x = np.ones(64) * 0.8
    _, _, meters = m.mix({"a": x})
    assert meters["a"].peak == pytest.approx(0.4, abs=1e-4)  # gain applied
    assert meters["a"].rms == pytest.approx(0.4, abs=1e-4)   # pan not applied


def test_send_bus_post_gain():
    m = make_mixer({"a": StripState(gain_db=-6.0206, send_breath=0.5)})
    _, send, _ = m.mix({"a": np.ones(32)})
    assert send == pytest.approx(np.full(32, 0.25), abs=1e-4)


def test_fx_return_pre_master():
    m = make_mixer({"a": StripState(mute=True)}, master_db=-6.0206)
    ret = np.ones((16, 2))
    out, _, _ = m.mix({"a": np.zeros(16)}, fx_return=ret)
    assert out[:, 0] == pytest.approx(np.full(16, 0.5), abs=1e-4)


def test_block_length_mismatch_raises():
    m = make_mixer({"a": StripState(), "b": StripState()})
    with pytest.raises(ValueError, match="mismatch"):
        m.mix({"a": np.ones(16), "b": np.ones(8)})


# -- control application ------------------------------------------------------

def test_apply_control_gain():
    state = MixerState(strips={"friction": StripState()})
    out = apply_control(state, ev("/mix/strip/friction/gain_db", -12.0))
    assert out.strips["friction"].gain_db == -12.0
    assert state.strips["friction"].gain_db == 0.0  # immutability


def test_apply_control_clamps():
    state = MixerState(strips={"friction": StripState()})
    out = apply_control(state, ev("/mix/strip/friction/gain_db", 99.0))
    assert out.strips["friction"].gain_db == GAIN_DB_MAX
    out = apply_control(state, ev("/mix/strip/friction/gain_db", -999.0))
    assert out.strips["friction"].gain_db == GAIN_DB_MIN
    out = apply_control(state, ev("/mix/strip/friction/pan", -3.0))
    assert out.strips["friction"].pan == -1.0


def test_apply_control_mute_threshold():
    state = MixerState(strips={"friction": StripState()})
    assert apply_control(state, ev("/mix/strip/friction/mute", 0.5)).strips[
        "friction"].mute is True
    assert apply_control(state, ev("/mix/strip/friction/mute", 0.49)).strips[
        "friction"].mute is False


def test_apply_control_master():
    state = MixerState(strips={})
    assert apply_control(state, ev("/mix/master/gain_db", -9.0)).master_gain_db == -9.0


def test_apply_control_unknown_strip():
    state = MixerState(strips={"friction": StripState()})
    with pytest.raises(ControlError, match="strip"):
        apply_control(state, ev("/mix/strip/zither/gain_db", 0.0))


def test_apply_control_unknown_address():
    state = MixerState(strips={})
    with pytest.raises(ControlError):
        apply_control(state, ev("/mix/nothing/here", 0.0))


def test_midi_cc7_full_scale_is_plus_6():
    from myosonic.control import CcMapEntry, translate_midi
    cc_map = [CcMapEntry(channel=1, cc=7, address="/mix/master/gain_db",
                         min=GAIN_DB_MIN, max=GAIN_DB_MAX)]
    out = translate_midi((0xB0, 7, 127), cc_map)
    assert out is not None
    assert out.value == pytest.approx(6.0)
    mid = translate_midi((0xB0, 7, 0), cc_map)
    assert mid.value == pytest.approx(-60.0)
    assert translate_midi((0xB1, 7, 127), cc_map) is None  # wrong channel
    assert translate_midi((0x90, 60, 100), cc_map) is None  # note-on ignored


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1))
def test_pan_law_property(p):
    gl, gr = pan_gains(p)
    assert gl * gl + gr * gr == pytest.approx(1.0, abs=1e-9)
    assert 0.0 <= gl <= 1.0 and 0.0 <= gr <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(GAIN_DB_MIN, GAIN_DB_MAX), st.floats(-1, 1),
       st.booleans())
def test_mix_output_bounded_by_inputs(gain_db, pan, mute):
    m = make_mixer({"a": StripState(gain_db=gain_db, pan=pan, mute=mute)})
    x = np.ones(64)
    out, _, _ = m.mix({"a": x})
    assert np.max(np.abs(out)) <= db_to_linear(GAIN_DB_MAX) + 1e-9
