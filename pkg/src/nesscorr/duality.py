"""Moment-transfer identities between the open models and absorbing walkers.

The open jump models are intertwined with their absorbing-boundary
counterparts through product-form functions: annihilating one dual
particle at a reservoir trades a falling-factorial factor for the
reservoir mean of that factor.  The checks here evaluate both sides of
the intertwining on full enumerations and compare the assembled one- and
two-walker generators with the profile and pair operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from itertools import product

import numpy as np
import scipy.sparse as sp

from .correlation import MODE_MOMENT, build_generator2d
from .density import lap1d_system
from .lattice import build_geometry
from .models import (
    BEPSpec,
    PilesSpec,
    RateFamilySpec,
    ResourceError,
    UsageError,
    logseries_total_rate,
    occupancy_cap,
    pile_block_row,
)

__all__ = [
    "duality_function",
    "dual_generator_apply",
    "primal_generator_apply",
    "DualityReport",
    "check_duality_identity",
    "one_particle_dual_matrix",
    "two_particle_dual_matrix",
    "dual_spec_for",
]

_ENUM_LIMIT = 2 * 10 ** 6


def _falling(n: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= n - i
    return out


def dual_spec_for(spec):
    """Bulk parameters (c, d) and absorption rates (left, right) of the dual."""
    if isinstance(spec, RateFamilySpec):
        return spec.c, spec.d, spec.c * spec.lam_minus, spec.c * spec.lam_plus
    if isinstance(spec, BEPSpec):
        # inclusion walkers with absorption at rate c*lambda = alpha/(2 alpha) = 1/2
        return spec.alpha, 1.0, 0.5, 0.5
    raise UsageError("dual bulk parameters are defined for jump/energy models")


def _site_factor(spec, occ: float, k: int) -> float:
    """Single-site duality factor d(occ, k)."""
    if k == 0:
        return 1.0
    if isinstance(spec, RateFamilySpec):
        c, d = spec.c, spec.d
        if d < 0:
            if k > occupancy_cap(spec):
                return 0.0
            # eta!/(eta-k)! * (c-k)!/c! with c = alpha (integer)
            return _falling(occ, k) / _falling(c, k)
        if d > 0:
            # eta!/(eta-k)! * Gamma(c)/Gamma(c+k)
            denom = 1.0
            for i in range(k):
                denom *= c + i
            return _falling(occ, k) / denom
        return _falling(occ, k)
    if isinstance(spec, PilesSpec):
        denom = 1.0
        for i in range(k):
            denom *= spec.alpha + i
        return _falling(occ, k) / denom
    if isinstance(spec, BEPSpec):
        denom = 1.0
        for i in range(k):
            denom *= spec.alpha + i
        return occ ** k / denom
    raise UsageError(f"no duality factor for {spec!r}")


def absorbed_factors(spec):
    """Values credited per dual particle absorbed at the two reservoirs.

    Equal to the reservoir-equilibrium mean of the single-particle site
    factor: rho/c for exclusion/inclusion, rho for independent walkers,
    beta/(1-beta) for piles, 2T for the energy diffusion.
    """
    if isinstance(spec, RateFamilySpec):
        if spec.d == 0.0:
            return spec.rho_minus, spec.rho_plus
        return spec.rho_minus / spec.c, spec.rho_plus / spec.c
    if isinstance(spec, PilesSpec):
        return (spec.beta_minus / (1 - spec.beta_minus),
                spec.beta_plus / (1 - spec.beta_plus))
    if isinstance(spec, BEPSpec):
        return 2.0 * spec.T_minus, 2.0 * spec.T_plus
    raise UsageError(f"no duality for {spec!r}")


def duality_function(spec, eta: np.ndarray, xi: np.ndarray) -> float:
    """Product duality function D(eta, xi).

    xi has length N+1: xi[0] and xi[N] count absorbed dual particles, the
    rest live on the bulk.  Returns 0 when a falling factorial underflows.
    """
    n = spec.N - 1
    xi = np.asarray(xi, dtype=np.int64)
    if xi.shape != (spec.N + 1,):
        raise UsageError("xi must cover sites 0..N")
    fm, fp = absorbed_factors(spec)
    out = fm ** int(xi[0]) * fp ** int(xi[spec.N])
    for x in range(n):
        out *= _site_factor(spec, float(eta[x]), int(xi[x + 1]))
        if out == 0.0:
            return 0.0
    return float(out)


# ---------------------------------------------------------------------------
# generator applications


def primal_generator_apply(spec, f, eta: np.ndarray, series_tol: float = 1e-14):
    """(L f)(eta) for the open model; returns (value, tail_bound).

    The tail bound is nonzero only for piles, whose reservoir injections
    form an infinite series truncated once the summands fall below
    series_tol times the running scale.
    """
    eta = np.asarray(eta, dtype=np.int64)
    n = spec.N - 1
    base = f(eta)
    total = 0.0
    if isinstance(spec, RateFamilySpec):
        c, d = spec.c, spec.d
        for x in range(n - 1):
            r = eta[x] * (c + d * eta[x + 1])
            if r > 0:
                total += r * (f(_move(eta, x, x + 1)) - base)
            r = eta[x + 1] * (c + d * eta[x])
            if r > 0:
                total += r * (f(_move(eta, x + 1, x)) - base)
        r = spec.lam_minus * spec.rho_minus * (c + d * eta[0])
        if r != 0:
            total += r * (f(_bump(eta, 0, +1)) - base)
        if eta[0] > 0:
            total += spec.lam_minus * eta[0] * (c + d * spec.rho_minus) * (
                f(_bump(eta, 0, -1)) - base)
        r = spec.lam_plus * spec.rho_plus * (c + d * eta[-1])
        if r != 0:
            total += r * (f(_bump(eta, n - 1, +1)) - base)
        if eta[-1] > 0:
            total += spec.lam_plus * eta[-1] * (c + d * spec.rho_plus) * (
                f(_bump(eta, n - 1, -1)) - base)
        return total * spec.N ** 2, 0.0
    if isinstance(spec, PilesSpec):
        a = spec.alpha
        for x in range(n - 1):
            for (src, dst) in ((x, x + 1), (x + 1, x)):
                hr = pile_block_row(a, int(eta[src]))
                for k in range(1, int(eta[src]) + 1):
                    total += hr[k - 1] * (f(_block(eta, src, dst, k)) - base)
        tail = 0.0
        for side, x, beta in (("-", 0, spec.beta_minus), ("+", n - 1, spec.beta_plus)):
            hr = pile_block_row(a, int(eta[x]))
            for k in range(1, int(eta[x]) + 1):
                total += hr[k - 1] * (f(_bump(eta, x, -k)) - base)
            k, scale = 1, max(1.0, abs(base))
            while True:
                term = beta ** k / k * (f(_bump(eta, x, +k)) - base)
                total += term
                scale = max(scale, abs(total))
                if abs(term) < series_tol * scale and k >= 8:
                    # geometric envelope of what was dropped
                    tail += abs(term) * beta / (1.0 - beta)
                    break
                k += 1
                if k > 10000:
                    raise ResourceError("injection series did not converge")
        return total * spec.N ** 2, tail * spec.N ** 2
    raise UsageError("primal application covers the jump models")


def _move(eta, src, dst):
    out = eta.copy()
    out[src] -= 1
    out[dst] += 1
    return out


def _bump(eta, x, dk):
    out = eta.copy()
    out[x] += dk
    return out


def _block(eta, src, dst, k):
    out = eta.copy()
    out[src] -= k
    out[dst] += k
    return out


def dual_generator_apply(spec, f, xi: np.ndarray) -> float:
    """(L_dual f)(xi): bulk as the primal, reservoirs absorb into 0 and N."""
    xi = np.asarray(xi, dtype=np.int64)
    n = spec.N - 1
    base = f(xi)
    total = 0.0
    if isinstance(spec, (RateFamilySpec, BEPSpec)):
        c, d, abs_m, abs_p = dual_spec_for(spec)
        for x in range(1, n):  # bulk bonds between xi[x] and xi[x+1]
            r = xi[x] * (c + d * xi[x + 1])
            if r > 0:
                total += r * (f(_move(xi, x, x + 1)) - base)
            r = xi[x + 1] * (c + d * xi[x])
            if r > 0:
                total += r * (f(_move(xi, x + 1, x)) - base)
        if xi[1] > 0:
            total += abs_m * xi[1] * (f(_move(xi, 1, 0)) - base)
        if xi[n] > 0:
            total += abs_p * xi[n] * (f(_move(xi, n, n + 1)) - base)
        return total * spec.N ** 2
    if isinstance(spec, PilesSpec):
        a = spec.alpha
        for x in range(1, n):
            for (src, dst) in ((x, x + 1), (x + 1, x)):
                hr = pile_block_row(a, int(xi[src]))
                for k in range(1, int(xi[src]) + 1):
                    total += hr[k - 1] * (f(_block(xi, src, dst, k)) - base)
        for x, tgt in ((1, 0), (n, n + 1)):
            hr = pile_block_row(a, int(xi[x]))
            for k in range(1, int(xi[x]) + 1):
                total += hr[k - 1] * (f(_block(xi, x, tgt, k)) - base)
        return total * spec.N ** 2
    raise UsageError("dual application covers jump/energy models")


# ---------------------------------------------------------------------------
# enumeration check and operator-level reductions


@dataclass
class DualityReport:
    model: str
    N: int
    cap: int
    budget: int
    max_residual: float
    tail_bound: float

    def to_json(self) -> dict:
        return asdict(self)


def check_duality_identity(spec, cap: int, budget: int = 2,
                           series_tol: float = 1e-14) -> DualityReport:
    """Max |L D(., xi)(eta) - L_dual D(eta, .)(xi)| over a full enumeration.

    eta runs over all configurations with occupations <= cap, xi over all
    dual configurations with at most `budget` particles (absorbed slots
    included).
    """
    if isinstance(spec, BEPSpec):
        raise UsageError("use the operator-level reduction for the energy model")
    n = spec.N - 1
    if isinstance(spec, RateFamilySpec) and spec.d < 0:
        cap = min(cap, occupancy_cap(spec))
    if (cap + 1) ** n > _ENUM_LIMIT:
        raise ResourceError("enumeration budget exceeded; lower cap or N")
    etas = list(product(range(cap + 1), repeat=n))

    xis = []
    slots = spec.N + 1
    xis.append(np.zeros(slots, dtype=np.int64))
    for b in range(1, budget + 1):
        for combo in product(range(slots), repeat=b):
            if list(combo) != sorted(combo):
                continue
            xi = np.zeros(slots, dtype=np.int64)
            for pos in combo:
                xi[pos] += 1
            if isinstance(spec, RateFamilySpec) and spec.d < 0:
                if np.any(xi[1:-1] > occupancy_cap(spec)):
                    continue
            xis.append(xi)

    worst, tail_worst = 0.0, 0.0
    for xi in xis:
        def f_eta(eta, _xi=xi):
            return duality_function(spec, eta, _xi)

        for eta_t in etas:
            eta = np.array(eta_t, dtype=np.int64)
            lhs, tail = primal_generator_apply(spec, f_eta, eta, series_tol)

            def f_xi(x, _eta=eta):
                return duality_function(spec, _eta, x)

            rhs = dual_generator_apply(spec, f_xi, xi)
            worst = max(worst, abs(lhs - rhs))
            tail_worst = max(tail_worst, tail)
    return DualityReport(spec.kind, spec.N, cap, budget, worst, tail_worst)


def one_particle_dual_matrix(spec) -> np.ndarray:
    """Generator of a single dual walker restricted to the bulk sites.

    Equals the interior profile operator: moving one walker by the dual
    dynamics is the weighted segment walk with absorption at 0 and N.
    """
    n = spec.N - 1
    out = np.zeros((n, n))
    for x in range(n):
        xi = np.zeros(spec.N + 1, dtype=np.int64)
        xi[x + 1] = 1
        for y in range(n):
            def f(z, _y=y):
                return 1.0 if z[_y + 1] >= 1 and z[0] == 0 and z[-1] == 0 else 0.0
            # indicator of the walker sitting at bulk site y+1
            out[x, y] = dual_generator_apply(spec, f, xi)
    return out


def two_particle_dual_matrix(spec) -> sp.csr_matrix:
    """Generator of the dual pair, indexed like the pair-walk triangle.

    Row (x, y) collects the dual rates out of xi = delta_x + delta_y;
    states with an absorbed particle carry pair value zero, matching the
    pinned frame of the correlation operator.
    """
    geom = build_geometry(spec.N)
    gen = build_generator2d(spec, MODE_MOMENT)
    act = gen.interior_index
    pos = {int(i): k for k, i in enumerate(act)}
    n = spec.N - 1
    rows, cols, vals = [], [], []
    for k, i in enumerate(act):
        x, y = int(geom.xs[i]), int(geom.ys[i])
        xi = np.zeros(spec.N + 1, dtype=np.int64)
        xi[x] += 1
        xi[y] += 1

        seen = {}

        def collect(z):
            if z[0] > 0 or z[-1] > 0:
                return 0.0  # absorbed: frame value, pinned to zero
            sites = np.flatnonzero(z[1:-1])
            if sites.size == 1:
                key = (int(sites[0]) + 1, int(sites[0]) + 1)
            else:
                key = (int(sites[0]) + 1, int(sites[1]) + 1)
            seen[key] = seen.get(key, 0.0)
            return 0.0

        # walk the reachable moves through the generator by probing deltas
        def f(z):
            collect(z)
            return 0.0

        dual_generator_apply(spec, f, xi)
        for (xt, yt) in seen:
            def ind(z, _xt=xt, _yt=yt):
                if z[0] > 0 or z[-1] > 0:
                    return 0.0
                sites = np.flatnonzero(z[1:-1])
                if sites.size == 1:
                    got = (int(sites[0]) + 1, int(sites[0]) + 1)
                else:
                    got = (int(sites[0]) + 1, int(sites[1]) + 1)
                return 1.0 if got == (_xt, _yt) else 0.0

            rate = dual_generator_apply(spec, ind, xi)
            j = geom.index(xt, yt)
            if j in pos and rate != 0.0:
                rows.append(k)
                cols.append(pos[j])
                vals.append(rate)
    m = len(act)
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
