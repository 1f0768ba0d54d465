"""Closed evolution of the two-point correlation field.

The correlation lives on the triangle plus its absorbing frame (frame
pinned to 0) and solves d/dt phi = A phi + g, where A generates a pair
walk whose rates are the bond conductances of the model, with a
model-dependent diagonal treatment:

* rate family / energy diffusion: nearest-neighbour walk plus the
  d-weighted stencil d*[f(x,x) + f(x+1,x+1) - 2 f(x,x+1)] on the first
  off-diagonal; source d*N^2*(grad rho)^2 there.
* interface diffusion: d = 0 walk; source -2 N^2 on the first
  off-diagonal and +4 N^2 on the diagonal, removed exactly by the unit
  diagonal shift.
* piles: uniform 1/alpha walk off the diagonal; on the diagonal the pair
  moves like two dual particles sharing a pile (single splits at
  2/(alpha+1), pair moves at 1/(alpha(alpha+1))); source
  N^2 [(grad rho)^2 + (grad rho)^2] / (alpha(alpha+1)) on the diagonal.

Exclusion at alpha = 1 suppresses jumps onto the diagonal, so the
diagonal is excluded from the state there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .density import DensityField, lap1d_system, stationary_density
from .lattice import LatticeGeometry, build_geometry
from .models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    UsageError,
    boundary_values,
    conductances,
)

__all__ = [
    "CorrelationField",
    "TwoDGenerator",
    "SourceTerm",
    "MODE_EXCLUDED",
    "MODE_MOMENT",
    "MODE_SHIFTED",
    "default_diagonal_mode",
    "diagonal_value",
    "build_generator2d",
    "source_term",
    "evolve_correlation",
    "evolve_coupled",
    "gl_shift",
    "gl_unshift",
]

MODE_EXCLUDED = "excluded"
MODE_MOMENT = "moment"
MODE_SHIFTED = "shifted"


def default_diagonal_mode(spec) -> str:
    """Excluded for exclusion at alpha=1 (c+d=0), moment-extended otherwise."""
    if isinstance(spec, RateFamilySpec) and abs(spec.c + spec.d) < 1e-12:
        return MODE_EXCLUDED
    return MODE_MOMENT


@dataclass
class CorrelationField:
    """Symmetric pair field on the triangle, zero on the absorbing frame."""

    geom: LatticeGeometry
    values: np.ndarray
    diagonal_mode: str = MODE_MOMENT
    time_label: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.geom.n_points,):
            raise UsageError("values must cover every stored lattice point")

    @property
    def N(self) -> int:
        return self.geom.N

    def value(self, x: int, y: int) -> float:
        if x > y:
            x, y = y, x
        if x == y and self.diagonal_mode == MODE_EXCLUDED:
            raise UsageError("diagonal is undefined for exclusion at alpha = 1")
        return float(self.values[self.geom.index(x, y)])

    def triangle_table(self):
        """Rows (x, y, value) over the stored triangle, diagonal included
        where defined."""
        g = self.geom
        rows = []
        for i in np.flatnonzero(~g.is_boundary):
            x, y = int(g.xs[i]), int(g.ys[i])
            if x == y and self.diagonal_mode == MODE_EXCLUDED:
                continue
            rows.append((x, y, float(self.values[i])))
        return rows

    def max_abs(self) -> float:
        g = self.geom
        mask = ~g.is_boundary
        if self.diagonal_mode == MODE_EXCLUDED:
            mask = mask & ~g.is_diagonal
        return float(np.max(np.abs(self.values[mask]))) if mask.any() else 0.0

    def copy(self) -> "CorrelationField":
        return CorrelationField(self.geom, self.values.copy(),
                                self.diagonal_mode, self.time_label)


def zero_field(spec, diagonal_mode: str | None = None) -> CorrelationField:
    geom = build_geometry(spec.N)
    mode = diagonal_mode or default_diagonal_mode(spec)
    vals = np.zeros(geom.n_points)
    if mode == MODE_EXCLUDED:
        vals[geom.is_diagonal] = np.nan
    return CorrelationField(geom, vals, mode)


def field_from_function(spec, fn, diagonal_mode: str | None = None) -> CorrelationField:
    """Fill a field from fn(x, y) over the triangle (frame forced to 0)."""
    out = zero_field(spec, diagonal_mode)
    g = out.geom
    for i in np.flatnonzero(~g.is_boundary):
        x, y = int(g.xs[i]), int(g.ys[i])
        if x == y and out.diagonal_mode == MODE_EXCLUDED:
            continue
        out.values[i] = fn(x, y)
    return out


def diagonal_value(spec, second_factorial_moment: float, mean: float) -> float:
    """Model-specific diagonal extension of the correlation function.

    Rate family: c/(c+d) E[eta(eta-1)] - mean^2 (undefined when c+d=0);
    energy diffusion: alpha/(alpha+1) E[z^2] - mean^2 (pass E[z^2]);
    piles: alpha/(alpha+1) E[eta(eta-1)] - mean^2.
    """
    if isinstance(spec, RateFamilySpec):
        if abs(spec.c + spec.d) < 1e-12:
            raise UsageError("diagonal undefined when c + d = 0 (exclusion, alpha=1)")
        return spec.c / (spec.c + spec.d) * second_factorial_moment - mean ** 2
    if isinstance(spec, (BEPSpec, PilesSpec)):
        a = spec.alpha
        return a / (a + 1.0) * second_factorial_moment - mean ** 2
    if isinstance(spec, GLSpec):
        return second_factorial_moment - mean ** 2
    raise UsageError(f"unknown spec {spec!r}")


# ---------------------------------------------------------------------------
# generator assembly


@dataclass
class TwoDGenerator:
    """Absorbed pair-walk generator as one square matrix over all points.

    Frame rows are identically zero (absorption); `interior_index` lists
    the active unknowns (triangle, diagonal dropped in excluded mode) and
    `matrix_interior` the restriction used by solvers.
    """

    spec: object
    geom: LatticeGeometry
    diagonal_mode: str
    matrix: sp.csr_matrix
    interior_index: np.ndarray
    matrix_interior: sp.csr_matrix
    source_support: str  # "upper" or "diagonal"


def build_generator2d(spec, diagonal_mode: str | None = None) -> TwoDGenerator:
    """Assemble the model's pair-walk generator (N^2 speed included)."""
    mode = diagonal_mode or default_diagonal_mode(spec)
    geom = build_geometry(spec.N)
    N = spec.N
    kap = conductances(spec)
    rows, cols, vals = [], [], []

    def add(i, xt, yt, rate):
        if rate == 0.0:
            return
        j = geom.index(xt, yt)
        rows.append(i)
        cols.append(j)
        vals.append(rate)
        rows.append(i)
        cols.append(i)
        vals.append(-rate)

    piles = isinstance(spec, PilesSpec)
    d_corr = 0.0
    if isinstance(spec, RateFamilySpec):
        d_corr = spec.d
    elif isinstance(spec, BEPSpec):
        d_corr = 1.0

    for i in np.flatnonzero(~geom.is_boundary):
        x, y = int(geom.xs[i]), int(geom.ys[i])
        if x == y:
            if piles:
                a = spec.alpha
                if spec.boundary_mode == "generator":
                    single, pair = 2.0 / (a + 1.0), 1.0 / (a * (a + 1.0))
                else:
                    single, pair = 2.0 / (a * (a + 1.0)), 1.0 / (a * (a + 1.0))
                add(i, x - 1, y, single)
                add(i, x, y + 1, single)
                add(i, x - 1, y - 1, pair)
                add(i, x + 1, y + 1, pair)
            else:
                add(i, x - 1, y, 2.0 * kap[x - 1])
                add(i, x, y + 1, 2.0 * kap[x])
        else:
            add(i, x - 1, y, kap[x - 1])
            add(i, x + 1, y, kap[x])
            add(i, x, y - 1, kap[y - 1])
            add(i, x, y + 1, kap[y])
            if y == x + 1 and d_corr != 0.0:
                add(i, x, x, d_corr)
                add(i, x + 1, x + 1, d_corr)

    n = geom.n_points
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    mat = mat * float(N * N)

    active = geom.triangle_indices(include_diagonal=(mode != MODE_EXCLUDED))
    if mode == MODE_EXCLUDED:
        # exclusion at alpha=1: couplings onto the diagonal must vanish
        diag_idx = np.flatnonzero(geom.is_diagonal)
        sub = mat[active][:, diag_idx]
        if sub.nnz and np.max(np.abs(sub.data)) > 1e-9 * N * N:
            raise UsageError("excluded diagonal mode requires c + d = 0")
    interior = mat[active][:, active].tocsr()
    support = "diagonal" if piles else "upper"
    return TwoDGenerator(spec, geom, mode, mat, active, interior, support)


# ---------------------------------------------------------------------------
# source term


@dataclass
class SourceTerm:
    """Inhomogeneity of the closed pair equation, stored over all points."""

    geom: LatticeGeometry
    values: np.ndarray
    support: str  # "upper" or "diagonal"

    def on_interior(self, interior_index: np.ndarray) -> np.ndarray:
        return self.values[interior_index]


def source_term(spec, rho: DensityField, shifted: bool = False) -> SourceTerm:
    """Evaluate the source for the given mean profile (ghosts included)."""
    if rho.N != spec.N:
        raise UsageError("profile size does not match spec")
    geom = build_geometry(spec.N)
    vals = np.zeros(geom.n_points)
    nn = float(spec.N * spec.N)
    r = rho.values
    if isinstance(spec, RateFamilySpec) or isinstance(spec, BEPSpec):
        d = spec.d if isinstance(spec, RateFamilySpec) else 1.0
        for x in range(1, spec.N - 1):
            i = geom.index(x, x + 1)
            vals[i] = d * nn * (r[x + 1] - r[x]) ** 2
        return SourceTerm(geom, vals, "upper")
    if isinstance(spec, GLSpec):
        if not shifted:
            for x in range(1, spec.N - 1):
                vals[geom.index(x, x + 1)] = -2.0 * nn
            for x in range(1, spec.N):
                vals[geom.index(x, x)] = 4.0 * nn
        return SourceTerm(geom, vals, "upper")
    if isinstance(spec, PilesSpec):
        a = spec.alpha
        coef = 1.0 / (a * (a + 1.0)) if spec.boundary_mode == "generator" else 1.0
        for x in range(1, spec.N):
            i = geom.index(x, x)
            vals[i] = coef * nn * ((r[x] - r[x - 1]) ** 2 + (r[x + 1] - r[x]) ** 2)
        return SourceTerm(geom, vals, "diagonal")
    raise UsageError(f"unknown spec {spec!r}")


# ---------------------------------------------------------------------------
# evolution


def gl_shift(psi: CorrelationField) -> CorrelationField:
    """Subtract the unit diagonal: the shifted field evolves source-free."""
    if psi.diagonal_mode != MODE_MOMENT:
        raise UsageError("gl_shift expects an unshifted moment-extended field")
    out = psi.copy()
    out.values = out.values.copy()
    out.values[psi.geom.is_diagonal] -= 1.0
    out.diagonal_mode = MODE_SHIFTED
    return out


def gl_unshift(psi_shifted: CorrelationField) -> CorrelationField:
    if psi_shifted.diagonal_mode != MODE_SHIFTED:
        raise UsageError("gl_unshift expects a shifted field")
    out = psi_shifted.copy()
    out.values[psi_shifted.geom.is_diagonal] += 1.0
    out.diagonal_mode = MODE_MOMENT
    return out


def _check_field(spec, phi0: CorrelationField):
    expected = default_diagonal_mode(spec)
    if phi0.diagonal_mode != expected:
        raise UsageError(
            f"diagonal mode {phi0.diagonal_mode!r} does not match the spec "
            f"(expected {expected!r})")
    if phi0.N != spec.N:
        raise UsageError("field size does not match spec")
    frame = phi0.values[phi0.geom.is_boundary]
    if np.max(np.abs(frame)) > 0:
        raise UsageError("correlation field must vanish on the absorbing frame")


def evolve_coupled(spec, phi0: CorrelationField, rho0: DensityField, t: float,
                   rtol: float = 1e-11, atol: float = 1e-13):
    """Integrate the coupled (profile, correlation) system to time t.

    One augmented ODE, so the time-dependent source needs no interpolation.
    Returns (rho_t, phi_t).
    """
    if t < 0:
        raise UsageError("t must be non-negative")
    _check_field(spec, phi0)
    if rho0.N != spec.N:
        raise UsageError("profile size does not match spec")
    gen = build_generator2d(spec, phi0.diagonal_mode)
    geom, act = gen.geom, gen.interior_index
    is_gl = isinstance(spec, GLSpec)

    work0 = gl_shift(phi0) if is_gl else phi0

    if t == 0:
        out = phi0.copy()
        out.time_label = 0.0
        return rho0.copy(), out

    L1, b1 = lap1d_system(spec)
    A = gen.matrix_interior
    n1 = spec.N - 1
    gm, gp = boundary_values(spec)

    phi_int0 = work0.values[act]

    def rhs(_, u):
        rho_i = u[:n1]
        phi_i = u[n1:]
        drho = L1 @ rho_i + b1
        if is_gl:
            dphi = A @ phi_i
        else:
            rho_full = np.concatenate(([gm], rho_i, [gp]))
            g = source_term(spec, DensityField(spec.N, rho_full))
            dphi = A @ phi_i + g.values[act]
        return np.concatenate((drho, dphi))

    u0 = np.concatenate((rho0.interior, phi_int0))
    sol = solve_ivp(rhs, (0.0, t), u0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"correlation integration failed: {sol.message}")
    u = sol.y[:, -1]

    rho_t = DensityField(spec.N, np.concatenate(([gm], u[:n1], [gp])), t)
    vals = np.zeros(geom.n_points)
    if phi0.diagonal_mode == MODE_EXCLUDED:
        vals[geom.is_diagonal] = np.nan
    vals[act] = u[n1:]
    if is_gl:
        phi_t = gl_unshift(CorrelationField(geom, vals, MODE_SHIFTED, t))
        phi_t.time_label = t
    else:
        phi_t = CorrelationField(geom, vals, phi0.diagonal_mode, t)
    return rho_t, phi_t


def evolve_correlation(spec, phi0: CorrelationField, rho0: DensityField,
                       t: float, rtol: float = 1e-11, atol: float = 1e-13,
                       ) -> CorrelationField:
    """Correlation at macroscopic time t (profile evolved alongside)."""
    _, phi_t = evolve_coupled(spec, phi0, rho0, t, rtol=rtol, atol=atol)
    return phi_t


def equilibrium_initial(spec) -> tuple[CorrelationField, DensityField]:
    """Product-measure start: flat profile at the mean ghost value, phi = 0."""
    from .density import constant_field

    return zero_field(spec), constant_field(spec)


def local_equilibrium_initial(spec) -> tuple[CorrelationField, DensityField]:
    """Product-measure start matched to the stationary profile: phi = 0."""
    return zero_field(spec), stationary_density(spec)
