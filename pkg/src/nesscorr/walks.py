"""Potential theory for the absorbed pair walk.

Occupation times of the source set, the polynomial closed forms available
at unit boundary couplings, maximum-principle comparisons between tuned
and untuned boundaries, and stationary correlation solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .correlation import (
    MODE_EXCLUDED,
    CorrelationField,
    TwoDGenerator,
    build_generator2d,
    source_term,
    zero_field,
)
from .density import stationary_density
from .lattice import LatticeGeometry, build_geometry
from .models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    UnsupportedError,
    UsageError,
)

__all__ = [
    "OccupationTimeField",
    "occupation_time_solve",
    "occupation_time_closed",
    "piles_occupation_time_closed",
    "MaxPrincipleReport",
    "max_principle_compare",
    "stationary_correlation_solve",
    "stationary_correlation_closed",
]

_RESIDUAL_TOL = 1e-12


@dataclass
class OccupationTimeField:
    """Expected time the absorbed pair walk spends on the source set."""

    geom: LatticeGeometry
    values: np.ndarray
    support: str  # "upper" or "diagonal"

    @property
    def N(self) -> int:
        return self.geom.N

    def value(self, x: int, y: int) -> float:
        if x > y:
            x, y = y, x
        return float(self.values[self.geom.index(x, y)])

    def max_over_triangle(self) -> float:
        return float(np.max(self.values[~self.geom.is_boundary]))


def _solve_interior(gen: TwoDGenerator, rhs_interior: np.ndarray) -> np.ndarray:
    A = gen.matrix_interior.tocsc()
    try:
        sol = spla.spsolve(A, rhs_interior)
    except Exception as exc:  # singular factorization
        raise UnsupportedError(f"pair-walk system is singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise UnsupportedError("pair-walk system is singular (no absorption)")
    resid = np.max(np.abs(A @ sol - rhs_interior)) if rhs_interior.size else 0.0
    scale = max(1.0, np.max(np.abs(rhs_interior))) if rhs_interior.size else 1.0
    if resid > 1e-9 * scale:
        raise RuntimeError(f"linear solve residual too large: {resid}")
    return sol


def occupation_time_solve(spec, support: str | None = None) -> OccupationTimeField:
    """Solve A T = -1 on the source set (diagonal for piles, else first
    off-diagonal).

    The walk lives on the full triangle even when the correlation's
    diagonal is excluded (exclusion at alpha = 1), so the moment-mode
    operator is used here.
    """
    gen = build_generator2d(spec, diagonal_mode="moment")
    geom = gen.geom
    if support is None:
        support = gen.source_support
    rhs = np.zeros(geom.n_points)
    if support == "upper":
        rhs[geom.is_upper_diagonal] = -1.0
    elif support == "diagonal":
        rhs[geom.is_diagonal] = -1.0
    else:
        raise UsageError("support must be 'upper' or 'diagonal'")
    sol = _solve_interior(gen, rhs[gen.interior_index])
    vals = np.zeros(geom.n_points)
    vals[gen.interior_index] = sol
    return OccupationTimeField(geom, vals, support)


def occupation_time_closed(N: int, c: float, d: float) -> OccupationTimeField:
    """Polynomial occupation time of the first off-diagonal, valid only for
    unit boundary couplings:

        T(x, y) = (N - y) x / (N^2 (cN + d)) - 1_{x=y} / (2N (cN + d)).
    """
    geom = build_geometry(N)
    denom = c * N + d
    vals = np.zeros(geom.n_points)
    for i in np.flatnonzero(~geom.is_boundary):
        x, y = int(geom.xs[i]), int(geom.ys[i])
        vals[i] = (N - y) * x / (N * N * denom)
        if x == y:
            vals[i] -= 1.0 / (2.0 * N * denom)
    return OccupationTimeField(geom, vals, "upper")


def occupation_time_closed_for(spec: RateFamilySpec) -> OccupationTimeField:
    """Closed form gated on its validity condition lambda_- = lambda_+ = 1."""
    if not isinstance(spec, RateFamilySpec):
        raise UnsupportedError("closed occupation time applies to the rate family")
    if spec.lam_minus != 1.0 or spec.lam_plus != 1.0:
        raise UnsupportedError(
            "closed occupation time requires lambda_- = lambda_+ = 1 "
            "(the tuned solution is not polynomial)")
    return occupation_time_closed(spec.N, spec.c, spec.d)


def piles_occupation_time_closed(spec: PilesSpec) -> OccupationTimeField:
    """Closed occupation time of the diagonal for the piles pair walk:

        T(x, y) = alpha (alpha + 1) (N - y) x / (2 N^2 (alpha N + 1)).
    """
    if spec.boundary_mode != "generator":
        raise UnsupportedError("closed form available for the generator-derived operator")
    a = spec.alpha
    geom = build_geometry(spec.N)
    N = spec.N
    vals = np.zeros(geom.n_points)
    mask = ~geom.is_boundary
    vals[mask] = (a * (a + 1.0) * (N - geom.ys[mask]) * geom.xs[mask]
                  / (2.0 * N * N * (a * N + 1.0)))
    return OccupationTimeField(geom, vals, "diagonal")


@dataclass
class MaxPrincipleReport:
    """Elementwise ordering of tuned vs unit-coupling occupation times.

    Weaker boundary absorption lengthens the walk's life, so the unit
    couplings minimize the occupation time: T_unit <= T_tuned holds
    elementwise (ok tracks that ordering).  max_violation_tuned_le_unit
    reports the opposite ordering for callers that want to inspect it; it
    is strictly positive whenever some lambda < 1.
    """

    max_violation_unit_le_tuned: float
    max_violation_tuned_le_unit: float
    max_gap: float
    ok: bool


def max_principle_compare(spec_tuned: RateFamilySpec,
                          spec_unit: RateFamilySpec,
                          tol: float = _RESIDUAL_TOL) -> MaxPrincipleReport:
    """Compare occupation times of tuned vs unit boundary couplings.

    The difference u = T_tuned - T_unit vanishes on the frame and
    satisfies A_tuned u(1, y) = -c (1 - lambda_-) N^2 T_unit(1, y) <= 0
    (mirrored at y = N-1), zero elsewhere; by the discrete maximum
    principle u >= 0 everywhere, i.e. unit couplings minimize T.
    """
    if (spec_tuned.N, spec_tuned.c, spec_tuned.d) != (spec_unit.N, spec_unit.c, spec_unit.d):
        raise UsageError("comparison requires matching (N, c, d)")
    t_tuned = occupation_time_solve(spec_tuned)
    t_unit = occupation_time_solve(spec_unit)
    diff = t_tuned.values - t_unit.values
    mask = ~t_tuned.geom.is_boundary
    above = float(np.max(diff[mask]))       # how far tuned exceeds unit
    below = float(np.max(-diff[mask]))      # violations of unit <= tuned
    return MaxPrincipleReport(
        max_violation_unit_le_tuned=max(below, 0.0),
        max_violation_tuned_le_unit=max(above, 0.0),
        max_gap=above,
        ok=below <= tol,
    )


# ---------------------------------------------------------------------------
# stationary correlations


def stationary_correlation_solve(spec) -> CorrelationField:
    """Stationary pair field: solve A phi = -g with the stationary profile."""
    gen = build_generator2d(spec)
    rho = stationary_density(spec)
    g = source_term(spec, rho)
    sol = _solve_interior(gen, -g.values[gen.interior_index])
    out = zero_field(spec)
    out.values[gen.interior_index] = sol
    return out


def stationary_correlation_closed(spec) -> CorrelationField:
    """Closed stationary pair field, each model under its validity condition.

    Rate family (unit couplings): d (rho_+ - rho_-)^2 T_closed, the diagonal
    omitted for exclusion at alpha = 1.  Interface diffusion: unit diagonal.
    Energy diffusion: occupation-time form N^2 (grad e)^2 T (T from the
    model's own pair walk).  Piles: A^2 (N - y) x / (alpha N + 1) with A the
    bulk slope of the stationary profile (generator mode; the printed form
    alpha (alpha+1) a^2 (N-y) x / (N^2 (N+1)) in paper mode).
    """
    if isinstance(spec, RateFamilySpec):
        tfield = occupation_time_closed_for(spec)
        amp = spec.d * (spec.rho_plus - spec.rho_minus) ** 2
        out = zero_field(spec)
        mask = ~out.geom.is_boundary
        if out.diagonal_mode == MODE_EXCLUDED:
            mask = mask & ~out.geom.is_diagonal
        out.values[mask] = amp * tfield.values[mask]
        return out
    if isinstance(spec, GLSpec):
        out = zero_field(spec)
        out.values[out.geom.is_diagonal] = 1.0
        return out
    if isinstance(spec, BEPSpec):
        rho = stationary_density(spec)
        slope = rho.values[2] - rho.values[1]  # uniform over bulk bonds
        tfield = occupation_time_solve(spec, support="upper")
        out = zero_field(spec)
        mask = ~out.geom.is_boundary
        out.values[mask] = (spec.N ** 2) * slope ** 2 * tfield.values[mask]
        return out
    if isinstance(spec, PilesSpec):
        rho = stationary_density(spec)
        N, a = spec.N, spec.alpha
        out = zero_field(spec)
        geom = out.geom
        mask = ~geom.is_boundary
        if spec.boundary_mode == "generator":
            slope = (rho.values[-1] - rho.values[0]) / N
            out.values[mask] = (slope ** 2 * (N - geom.ys[mask]) * geom.xs[mask]
                                / (a * N + 1.0))
        else:
            slope = (rho.values[-1] - rho.values[0]) / N
            out.values[mask] = (a * (a + 1.0) * slope ** 2
                                * (N - geom.ys[mask]) * geom.xs[mask] / (N + 1.0))
        return out
    raise UsageError(f"unknown spec {spec!r}")
