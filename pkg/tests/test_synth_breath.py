"""Breath effect chain: reverberation time, mix law, FDN behavior."""

from __future__ import annotations

import numpy as np
import pytest

from myosonic.synth.breathfx import BreathChain

from .oracles import schroeder_rt60

SR = 48000
BLOCK = 256


def impulse_response(rt60_s: float, feedback: float = 0.0,
                     seconds: float | None = None,
                     both: bool = False) -> np.ndarray:
    chain = BreathChain(SR)
    chain.params["rt60_s"].snap(rt60_s)
    chain.params["feedback"].snap(feedback)
    chain.params["mix"].snap(1.0)
    seconds = seconds if seconds is not None else rt60_s + 1.0
    n = int(seconds * SR)
    x = np.zeros(n)
    x[0] = 1.0
    out = np.concatenate(
        [chain.process(x[i:i + BLOCK]) for i in range(0, n, BLOCK)])
    return out if both else out[:, 0]


@pytest.mark.parametrize("rt60", [0.5, 1.0, 2.0, 3.0])
def test_rt60_within_15_percent(rt60):
    ir = impulse_response(rt60)
    measured = schroeder_rt60(ir, SR)
    assert abs(measured - rt60) / rt60 < 0.15


def test_mix_zero_is_exact_dry():
    chain = BreathChain(SR)
    chain.params["mix"].snap(0.0)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1024)
    out = chain.process(x)
    assert np.array_equal(out[:, 0], x)
    assert np.array_equal(out[:, 1], x)


def test_mix_blends_linearly():
    def once(mix):
        chain = BreathChain(SR)
        chain.params["mix"].snap(mix)
        chain.params["rt60_s"].snap(1.0)
        rng = np.random.default_rng(1)
        x = rng.standard_normal(2048)
        return chain.process(x)

    dry = once(0.0)
    wet = once(1.0)
    half = once(0.5)
    assert np.max(np.abs(half - 0.5 * (dry + wet))) < 1e-9


def test_stereo_channels_decorrelated():
    # the cross-coupled delay lines feed the two channels differently,
    # so any nonzero feedback opens the stereo field
    out = impulse_response(1.0, feedback=0.5, seconds=1.5, both=True)
    l, r = out[:, 0], out[:, 1]
    assert not np.array_equal(l, r)
    corr = float(np.dot(l, r) / (np.linalg.norm(l) * np.linalg.norm(r)))
    assert corr < 0.98
    again = impulse_response(1.0, feedback=0.5, seconds=1.5)
    assert again == pytest.approx(l)  # deterministic


def test_feedback_zero_is_mono_comb_cascade():
    out = impulse_response(0.5, feedback=0.0, seconds=1.0, both=True)
    assert np.array_equal(out[:, 0], out[:, 1])


def test_fdn_feedback_lengthens_tail():
    short = impulse_response(1.0, feedback=0.0, seconds=3.0)
    long_ = impulse_response(1.0, feedback=0.9, seconds=3.0)
    tail = slice(int(2.0 * SR), int(2.8 * SR))
    e_short = float(np.sum(short[tail] ** 2))
    e_long = float(np.sum(long_[tail] ** 2))
    assert e_long > e_short * 2.0


def test_stability_at_max_settings():
    chain = BreathChain(SR)
    chain.params["rt60_s"].snap(6.0)
    chain.params["feedback"].snap(0.95)
    chain.params["mix"].snap(1.0)
    rng = np.random.default_rng(2)
    peak = 0.0
    for _ in range(400):
        out = chain.process(rng.standard_normal(BLOCK))
        assert np.all(np.isfinite(out))
        peak = max(peak, float(np.max(np.abs(out))))
    assert chain.faults == 0
    assert peak < 50.0  # bounded, not unity: it is a reverb bus


def test_nan_input_contained():
    chain = BreathChain(SR)
    x = np.zeros(BLOCK)
    x[3] = np.nan
    out = chain.process(x)
    assert np.all(out == 0.0)
    assert chain.faults == 1
    clean = chain.process(np.zeros(BLOCK))
    assert np.all(np.isfinite(clean))


def test_reset_clears_tail():
    chain = BreathChain(SR)
    chain.params["mix"].snap(1.0)
    x = np.zeros(BLOCK)
    x[0] = 1.0
    chain.process(x)
    chain.reset()
    out = chain.process(np.zeros(BLOCK * 4))
    assert np.all(out == 0.0)
