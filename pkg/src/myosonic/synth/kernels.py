"""Sample-rate recursive kernels, JIT compiled.

Everything here is a tight per-sample loop over float64 state. Kernels
mutate the state arrays passed in and return scalar state through the
return value, so callers own all state and offline renders stay
bit-reproducible.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def friction_kernel(force, pressure, stiffness, dissipation, velocity, fc,
                    z, mode_r, mode_cosw, mode_b0, mode_y1, mode_y2,
                    bp_state, fb_gain, sr, out):
    """Elasto-plastic bristle rubbing a tunable resonant surface.

    The bristle state z integrates with an exact exponential step, which
    is unconditionally stable for any stiffness. The narrow-Q bandpass is
    the rubbed surface: friction force drives it and its state velocity
    feeds back into the relative sliding velocity (force and velocity are
    collocated, so energy enters only through the Stribeck slope and
    stick-slip limit cycles form at fc). The fixed modal bank sits outside
    the loop and colors the radiated sound. Coefficients track fc per
    sample.
    """
    n = out.size
    dt = 1.0 / sr
    n_modes = mode_r.size
    q = 30.0
    bx1 = bp_state[0]
    bx2 = bp_state[1]
    by1 = bp_state[2]
    by2 = bp_state[3]
    for i in range(n):
        normal = force[i] * pressure[i]
        # surface velocity: backward difference of the bandpass output
        # scaled to units/s
        vfb = (by1 - by2) * sr
        v = 0.5 * velocity[i] - fb_gain * vfb
        if v > 2.0:
            v = 2.0
        elif v < -2.0:
            v = -2.0
        sigma0 = 1000.0 + 9000.0 * stiffness[i]
        sigma1 = 0.02 + 0.5 * dissipation[i]
        # Stribeck curve: static 1.4x kinetic, falloff spanning the
        # mapped velocity range so steady sliding sits on the unstable slope
        ratio = v / 0.25
        g = normal * (1.0 + 0.4 * math.exp(-ratio * ratio)) + 1e-6
        a = sigma0 * abs(v) / g
        if a * dt > 1e-9:
            zss = v / a
            e = math.exp(-a * dt)
            z = zss + (z - zss) * e
        else:
            z = z + v * dt
        zdot = v - a * z
        if zdot > 4.0:
            zdot = 4.0
        elif zdot < -4.0:
            zdot = -4.0
        fr = sigma0 * z + sigma1 * zdot + 0.05 * v
        if fr > 10.0:
            fr = 10.0
        elif fr < -10.0:
            fr = -10.0
        w = TWO_PI * fc[i] / sr
        alpha = math.sin(w) / (2.0 * q)
        inv_a0 = 1.0 / (1.0 + alpha)
        b0 = alpha * inv_a0
        a1 = -2.0 * math.cos(w) * inv_a0
        a2 = (1.0 - alpha) * inv_a0
        ybp = b0 * fr - b0 * bx2 - a1 * by1 - a2 * by2
        if -1e-30 < ybp < 1e-30:
            ybp = 0.0
        bx2 = bx1
        bx1 = fr
        by2 = by1
        by1 = ybp
        # velocity-normalized surface output keeps loudness flat across fc
        u = w * ybp
        s = 0.0
        for m in range(n_modes):
            y0 = (2.0 * mode_r[m] * mode_cosw[m] * mode_y1[m]
                  - mode_r[m] * mode_r[m] * mode_y2[m] + mode_b0[m] * u)
            mode_y2[m] = mode_y1[m]
            mode_y1[m] = y0
            s += y0
        out[i] = u + s
    bp_state[0] = bx1
    bp_state[1] = bx2
    bp_state[2] = by1
    bp_state[3] = by2
    return z


@njit(cache=True)
def breath_chain_kernel(x, rt60, feedback,
                        comb_buf, comb_idx, comb_delay,
                        ap_buf, ap_idx, ap_delay,
                        fdn_buf, fdn_idx, fdn_delay, fdn_matrix,
                        sr, wet_l, wet_r):
    """Parallel combs -> series allpasses -> 3-line feedback delay network.

    Comb gains track rt60 per sample (g = 10^(-3 d / rt60)); the FDN mixes
    through an orthogonal matrix scaled by the feedback parameter, so the
    loop stays contractive for feedback < 1. The FDN's output taps are
    scaled by feedback as well: at feedback 0 the chain is exactly the
    comb/allpass cascade, so short reverb tails are not smeared by the
    long fixed delays.
    """
    n = x.size
    n_comb = comb_delay.size
    n_ap = ap_delay.size
    n_fdn = fdn_delay.size
    ln10_3 = 3.0 * math.log(10.0)
    for i in range(n):
        # parallel combs
        cm = 0.0
        for c in range(n_comb):
            idx = comb_idx[c]
            d_out = comb_buf[c, idx]
            g = math.exp(-ln10_3 * (comb_delay[c] / sr) / rt60[i])
            comb_buf[c, idx] = x[i] + g * d_out
            comb_idx[c] = (idx + 1) % comb_delay[c]
            cm += d_out
        cm *= 0.25
        # series allpasses, g = 0.7
        ap = cm
        for a in range(n_ap):
            idx = ap_idx[a]
            d_out = ap_buf[a, idx]
            y = -0.7 * ap + d_out
            ap_buf[a, idx] = ap + 0.7 * y
            ap_idx[a] = (idx + 1) % ap_delay[a]
            ap = y
        # feedback delay network
        o0 = fdn_buf[0, fdn_idx[0]]
        o1 = fdn_buf[1, fdn_idx[1]]
        o2 = fdn_buf[2, fdn_idx[2]]
        fb = feedback[i]
        f0 = fb * (fdn_matrix[0, 0] * o0 + fdn_matrix[0, 1] * o1
                   + fdn_matrix[0, 2] * o2)
        f1 = fb * (fdn_matrix[1, 0] * o0 + fdn_matrix[1, 1] * o1
                   + fdn_matrix[1, 2] * o2)
        f2 = fb * (fdn_matrix[2, 0] * o0 + fdn_matrix[2, 1] * o1
                   + fdn_matrix[2, 2] * o2)
        inj = 0.5 * ap
        fdn_buf[0, fdn_idx[0]] = inj + f0
        fdn_buf[1, fdn_idx[1]] = inj + f1
        fdn_buf[2, fdn_idx[2]] = inj + f2
        fdn_idx[0] = (fdn_idx[0] + 1) % fdn_delay[0]
        fdn_idx[1] = (fdn_idx[1] + 1) % fdn_delay[1]
        fdn_idx[2] = (fdn_idx[2] + 1) % fdn_delay[2]
        wet_l[i] = ap + fb * (o0 + 0.7 * o2)
        wet_r[i] = ap + fb * (o1 + 0.7 * o2)


@njit(cache=True)
def scrub_kernel(x, center, depth, wet, buf, widx, lfo_phase, lfo_inc,
                 sr, out):
    """Sinusoidally scrubbed delay line with linear interpolation.

    out = dry + wet * delayed; no feedback, so the gain bound is 1 + wet.
    """
    n = x.size
    size = buf.size
    for i in range(n):
        buf[widx] = x[i]
        d = (center[i] + depth[i] * math.sin(TWO_PI * lfo_phase)) * sr
        if d < 0.0:
            d = 0.0
        max_d = size - 2.0
        if d > max_d:
            d = max_d
        rp = widx - d
        if rp < 0.0:
            rp += size
        i0 = int(rp)
        frac = rp - i0
        i1 = i0 + 1
        if i1 >= size:
            i1 -= size
        delayed = buf[i0] * (1.0 - frac) + buf[i1] * frac
        out[i] = x[i] + wet[i] * delayed
        widx += 1
        if widx >= size:
            widx = 0
        lfo_phase += lfo_inc
        if lfo_phase >= 1.0:
            lfo_phase -= 1.0
    return widx, lfo_phase
