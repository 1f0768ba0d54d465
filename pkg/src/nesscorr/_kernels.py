"""Jit-compiled event loops: exact jump simulation and walk averaging.

All kernels draw from an inlined splitmix64 stream seeded per trajectory,
and each trajectory writes only its own output row, so results are
bit-identical for a fixed (seed, trajectory count) no matter how many
threads execute the loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange
from numba import uint64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always", cache=True)
def _next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    z = z ^ (z >> uint64(31))
    return state, z


@njit(inline="always", cache=True)
def _uniform(state):
    state, z = _next(state)
    return state, ((z >> uint64(11)) + uint64(1)) * _INV53  # (0, 1]


@njit(cache=True)
def _stream_seed(seed, idx):
    """Per-trajectory stream state: (seed, idx) pushed twice through the
    splitmix finalizer, so the set of stream states carries no arithmetic
    structure across trajectories (a single xor/add offset does)."""
    s = uint64(seed) * _MIX2 + uint64(idx + 1) * _GOLDEN
    s, z = _next(s)
    _, z2 = _next(z)
    return z2


# ---------------------------------------------------------------------------
# rate family: eta(x)(c + d eta(y)) with reservoir exchange


@njit(cache=True)
def _rf_refresh(rates, eta, n, c, d, lamm, lamp, rhom, rhop, with_boundary, x):
    """Recompute every rate entry that reads site x (0-based slots)."""
    for b in (x - 1, x):
        if 0 <= b < n - 1:
            rates[2 * b] = eta[b] * (c + d * eta[b + 1])
            rates[2 * b + 1] = eta[b + 1] * (c + d * eta[b])
    base = 2 * (n - 1)
    if with_boundary:
        if x == 0:
            rates[base] = lamm * rhom * (c + d * eta[0])
            rates[base + 1] = lamm * eta[0] * (c + d * rhom)
        if x == n - 1:
            rates[base + 2] = lamp * rhop * (c + d * eta[n - 1])
            rates[base + 3] = lamp * eta[n - 1] * (c + d * rhop)


@njit(cache=True)
def _rf_run(eta, c, d, lamm, lamp, rhom, rhop, t_end, state, with_boundary):
    """One trajectory to microscopic time t_end; returns 0 or an error code."""
    n = eta.shape[0]
    m = 2 * (n - 1) + 4
    rates = np.zeros(m)
    for x in range(n):
        _rf_refresh(rates, eta, n, c, d, lamm, lamp, rhom, rhop, with_boundary, x)
    t = 0.0
    while True:
        total = 0.0
        for k in range(m):
            total += rates[k]
        if total <= 0.0:
            return 0
        state, u = _uniform(state)
        t -= np.log(u) / total
        if t > t_end:
            return 0
        state, u = _uniform(state)
        target = u * total
        acc = 0.0
        k = -1
        for kk in range(m):
            acc += rates[kk]
            if acc >= target:
                k = kk
                break
        if k < 0:  # rounding fell off the end: take the last live event
            for kk in range(m - 1, -1, -1):
                if rates[kk] > 0.0:
                    k = kk
                    break
        if k < 2 * (n - 1):
            b = k // 2
            if k % 2 == 0:
                eta[b] -= 1
                eta[b + 1] += 1
            else:
                eta[b + 1] -= 1
                eta[b] += 1
            for x in (b - 1, b, b + 1, b + 2):
                if 0 <= x < n:
                    _rf_refresh(rates, eta, n, c, d, lamm, lamp,
                                rhom, rhop, with_boundary, x)
        else:
            kb = k - 2 * (n - 1)
            if kb == 0:
                eta[0] += 1
            elif kb == 1:
                eta[0] -= 1
            elif kb == 2:
                eta[n - 1] += 1
            else:
                eta[n - 1] -= 1
            x = 0 if kb < 2 else n - 1
            for xx in (x - 1, x, x + 1):
                if 0 <= xx < n:
                    _rf_refresh(rates, eta, n, c, d, lamm, lamp,
                                rhom, rhop, with_boundary, xx)
        if eta[0] < 0 or eta[n - 1] < 0:
            return 1  # rate bookkeeping broke: should be unreachable


@njit(cache=True, parallel=True)
def rate_family_ensemble(eta0, c, d, lamm, lamp, rhom, rhop,
                         t_end, seed, with_boundary):
    """Evolve M independent trajectories; eta0 is (M, n) and is modified."""
    M = eta0.shape[0]
    status = np.zeros(M, dtype=np.int64)
    for i in prange(M):
        st = _stream_seed(seed, i)
        status[i] = _rf_run(eta0[i], c, d, lamm, lamp, rhom, rhop,
                            t_end, st, with_boundary)
    return status


# ---------------------------------------------------------------------------
# piles: block jumps with logarithmic-series injections


@njit(inline="always", cache=True)
def _pick_block(hcum, m, u):
    """Inverse-CDF block size from the pile-kernel row for occupation m."""
    target = u * hcum[m, m - 1]
    for k in range(m):
        if hcum[m, k] >= target:
            return k + 1
    return m


@njit(cache=True)
def _piles_run(eta, hcum, htot, logcum_m, logcum_p, in_rate_m, in_rate_p,
               t_end, state, with_boundary):
    n = eta.shape[0]
    mmax = hcum.shape[0] - 1
    # per-site outbound rate per direction (left, right incl. reservoirs)
    out = np.zeros(n)
    for x in range(n):
        if eta[x] > mmax:
            return 2
        out[x] = htot[eta[x]]
    t = 0.0
    while True:
        total = 0.0
        for x in range(n):
            ndir = 2.0
            if not with_boundary and (x == 0 or x == n - 1):
                ndir = 1.0 if n > 1 else 0.0
            total += ndir * out[x]
        if with_boundary:
            total += in_rate_m + in_rate_p
        if total <= 0.0:
            return 0
        state, u = _uniform(state)
        t -= np.log(u) / total
        if t > t_end:
            return 0
        state, u = _uniform(state)
        target = u * total
        acc = 0.0
        done = False
        for x in range(n):
            for side in range(2):  # 0: left, 1: right
                if not with_boundary and ((x == 0 and side == 0) or
                                          (x == n - 1 and side == 1)):
                    continue
                acc += out[x]
                if acc >= target:
                    m = eta[x]
                    state, u2 = _uniform(state)
                    k = _pick_block(hcum, m, u2)
                    eta[x] -= k
                    out[x] = htot[eta[x]]
                    dst = x - 1 if side == 0 else x + 1
                    if 0 <= dst < n:
                        eta[dst] += k
                        if eta[dst] > mmax:
                            return 2
                        out[dst] = htot[eta[dst]]
                    done = True
                    break
            if done:
                break
        if done or not with_boundary:
            continue
        # reservoir injections
        acc += in_rate_m
        if acc >= target:
            state, u2 = _uniform(state)
            k = _log_pick(logcum_m, u2)
            eta[0] += k
            if eta[0] > mmax:
                return 2
            out[0] = htot[eta[0]]
        else:
            state, u2 = _uniform(state)
            k = _log_pick(logcum_p, u2)
            eta[n - 1] += k
            if eta[n - 1] > mmax:
                return 2
            out[n - 1] = htot[eta[n - 1]]


@njit(inline="always", cache=True)
def _log_pick(logcum, u):
    target = u * logcum[-1]
    for k in range(logcum.shape[0]):
        if logcum[k] >= target:
            return k + 1
    return logcum.shape[0]


@njit(cache=True, parallel=True)
def piles_ensemble(eta0, hcum, htot, logcum_m, logcum_p, in_rate_m, in_rate_p,
                   t_end, seed, with_boundary):
    M = eta0.shape[0]
    status = np.zeros(M, dtype=np.int64)
    for i in prange(M):
        st = _stream_seed(seed, i)
        status[i] = _piles_run(eta0[i], hcum, htot, logcum_m, logcum_p,
                               in_rate_m, in_rate_p, t_end, st, with_boundary)
    return status


# ---------------------------------------------------------------------------
# diffusions: Euler-Maruyama with full truncation for the energy process


@njit(inline="always", cache=True)
def _normal(state):
    state, u1 = _uniform(state)
    state, u2 = _uniform(state)
    return state, np.sqrt(-2.0 * np.log(u1)) * np.cos(6.283185307179586 * u2)


@njit(cache=True)
def _em_run(z, is_gl, alpha, gm_drift, gp_drift, noise_m_coef, noise_p_coef,
            with_boundary, steps, h, state):
    """One trajectory; gm_drift/gp_drift are the reservoir drift constants
    and noise_*_coef the bath noise prefactors (2*T or 2 for the printed
    form; bath noise is sqrt(coef * z) for the energy model)."""
    n = z.shape[0]
    sq = np.sqrt(h)
    drift = np.empty(n)
    amp = np.empty(n - 1)
    nw = n + 1  # bond noises plus the two reservoir noises
    wbuf = np.empty(nw + 1)
    for _ in range(steps):
        j = 0
        while j < nw:  # paired Box-Muller fills the step's noise buffer
            state, u1 = _uniform(state)
            state, u2 = _uniform(state)
            r = np.sqrt(-2.0 * np.log(u1))
            a = 6.283185307179586 * u2
            wbuf[j] = r * np.cos(a)
            wbuf[j + 1] = r * np.sin(a)
            j += 2
        # coefficients from the pre-step state
        for x in range(n):
            drift[x] = 0.0
        for b in range(n - 1):
            g = z[b] - z[b + 1]
            if is_gl:
                drift[b] -= g
                drift[b + 1] += g
                amp[b] = 1.4142135623730951
            else:
                drift[b] -= alpha * g
                drift[b + 1] += alpha * g
                amp[b] = np.sqrt(2.0 * z[b] * z[b + 1])
        sm = 0.0
        sp = 0.0
        if with_boundary:
            if is_gl:
                drift[0] += gm_drift - z[0]
                drift[n - 1] += gp_drift - z[n - 1]
                sm = 1.4142135623730951
                sp = 1.4142135623730951
            else:
                drift[0] += gm_drift - 0.5 * z[0]
                drift[n - 1] += gp_drift - 0.5 * z[n - 1]
                sm = np.sqrt(noise_m_coef * z[0])
                sp = np.sqrt(noise_p_coef * z[n - 1])
        for x in range(n):
            z[x] += drift[x] * h
        for b in range(n - 1):
            inc = amp[b] * wbuf[b] * sq
            z[b] -= inc
            z[b + 1] += inc
        if with_boundary:
            z[0] += sm * wbuf[n - 1] * sq
            z[n - 1] += sp * wbuf[n] * sq
        if not is_gl:
            for x in range(n):
                if z[x] < 0.0:
                    z[x] = 0.0
    return 0


@njit(cache=True, parallel=True)
def diffusion_ensemble(z, is_gl, alpha, gm_drift, gp_drift, noise_m_coef,
                       noise_p_coef, with_boundary, steps, h, seed):
    M = z.shape[0]
    for i in prange(M):
        st = _stream_seed(seed, i)
        _em_run(z[i], is_gl, alpha, gm_drift, gp_drift, noise_m_coef,
                noise_p_coef, with_boundary, steps, h, st)
    return z


# ---------------------------------------------------------------------------
# absorbed pair walk: Duhamel averaging over the generator's jump chain


@njit(cache=True)
def _walk_one(indptr, indices, rates, out_rate, s, t_end, phi0, source, st):
    t = 0.0
    acc = 0.0
    while True:
        r = out_rate[s]
        if r <= 0.0:
            break
        st, u = _uniform(st)
        dt = -np.log(u) / r
        if t + dt >= t_end:
            acc += source[s] * (t_end - t)
            break
        acc += source[s] * dt
        t += dt
        st, u = _uniform(st)
        target = u * r
        run = 0.0
        nxt = s
        for p in range(indptr[s], indptr[s + 1]):
            run += rates[p]
            if run >= target:
                nxt = indices[p]
                break
        s = nxt
    return acc + phi0[s]


@njit(cache=True, parallel=True)
def walk_duhamel(indptr, indices, rates, out_rate, starts, t_end,
                 phi0, source, seed):
    """Per-walker phi0(X_t) + integral of source along the path.

    CSR arrays describe off-diagonal jump rates of the (speeded) pair
    generator; rows with zero out-rate are absorbing.
    """
    M = starts.shape[0]
    vals = np.zeros(M)
    for i in prange(M):
        st = _stream_seed(seed, i)
        vals[i] = _walk_one(indptr, indices, rates, out_rate, starts[i],
                            t_end, phi0, source, st)
    return vals
