"""Mean profiles: the discrete heat equation with reservoir ghosts.

The profile lives on sites 0..N with the two ghost entries pinned to the
model's reservoir values.  The weighted Laplacian uses the bond
conductances from :mod:`nesscorr.models` and carries the diffusive N^2
speed-up, so all times here are macroscopic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .models import UsageError, boundary_values, conductances, RateFamilySpec

__all__ = [
    "DensityField",
    "apply_lap1d",
    "evolve_density",
    "stationary_density",
    "stationary_density_tridiag",
    "rate_family_profile_coefficients",
]

# dense matrix exponential below this size, adaptive integrator above
_EXPM_MAX_N = 128


@dataclass
class DensityField:
    """Profile on sites 0..N; entries 0 and N are pinned ghosts."""

    N: int
    values: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.N + 1,):
            raise UsageError(f"values must have shape ({self.N + 1},)")

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def copy(self) -> "DensityField":
        return DensityField(self.N, self.values.copy(), self.time_label)


def field_from_interior(spec, interior: np.ndarray, time_label: float = 0.0) -> DensityField:
    """Wrap interior values with the spec's pinned ghosts."""
    gm, gp = boundary_values(spec)
    vals = np.concatenate(([gm], np.asarray(interior, dtype=float), [gp]))
    return DensityField(spec.N, vals, time_label)


def constant_field(spec, value: float | None = None) -> DensityField:
    """Flat profile; defaults to the mean of the two ghost values."""
    gm, gp = boundary_values(spec)
    if value is None:
        value = 0.5 * (gm + gp)
    vals = np.full(spec.N + 1, float(value))
    vals[0], vals[-1] = gm, gp
    return DensityField(spec.N, vals)


def lap1d_system(spec):
    """Interior matrix L and injection vector b of d/dt f = L f + b.

    Row x covers sites 1..N-1; the pinned ghosts contribute through b.
    Both carry the N^2 factor.
    """
    N = spec.N
    kap = conductances(spec)
    gm, gp = boundary_values(spec)
    n = N - 1
    L = np.zeros((n, n))
    b = np.zeros(n)
    for i in range(n):
        kl, kr = kap[i], kap[i + 1]
        L[i, i] = -(kl + kr)
        if i > 0:
            L[i, i - 1] = kl
        else:
            b[i] += kl * gm
        if i < n - 1:
            L[i, i + 1] = kr
        else:
            b[i] += kr * gp
    nn = float(N * N)
    return L * nn, b * nn


def apply_lap1d(spec, f: DensityField) -> DensityField:
    """Weighted Laplacian of a pinned profile; ghost entries of the result are 0."""
    if f.N != spec.N:
        raise UsageError("field size does not match spec")
    kap = conductances(spec)
    v = f.values
    out = np.zeros_like(v)
    out[1:-1] = kap[:-1] * (v[:-2] - v[1:-1]) + kap[1:] * (v[2:] - v[1:-1])
    out[1:-1] *= spec.N * spec.N
    return DensityField(spec.N, out, f.time_label)


def stationary_density(spec) -> DensityField:
    """Closed-form stationary profile: constant flux through every bond."""
    N = spec.N
    kap = conductances(spec)
    gm, gp = boundary_values(spec)
    resist = np.cumsum(1.0 / kap)
    flux = (gp - gm) / resist[-1]
    vals = np.empty(N + 1)
    vals[0] = gm
    vals[1:] = gm + flux * resist
    return DensityField(N, vals)


def stationary_density_tridiag(spec) -> DensityField:
    """Independent check: solve the banded linear system L f = -b directly."""
    L, b = lap1d_system(spec)
    n = L.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = np.diag(L, 1)
    ab[1, :] = np.diag(L)
    ab[2, :-1] = np.diag(L, -1)
    interior = scipy.linalg.solve_banded((1, 1), ab, -b)
    return field_from_interior(spec, interior)


def rate_family_profile_coefficients(spec: RateFamilySpec):
    """Slope/intercept (a_N, b_N) of the stationary profile a_N x + b_N."""
    lm, lp = spec.lam_minus, spec.lam_plus
    rm, rp = spec.rho_minus, spec.rho_plus
    N = spec.N
    b = (lp * rp * (1 - lm) + lm * rm * (1 + lp * (N - 1))) / (
        lp * (1 - lm) + lm * (1 + lp * (N - 1)))
    a = lp * (rp - b) / (1 + lp * (N - 1))
    return a, b


def evolve_density(spec, f0: DensityField, t: float) -> DensityField:
    """Propagate the pinned heat equation to macroscopic time t.

    Affine-exact: f_t = f_ss + e^{tL}(f_0 - f_ss), with a dense exponential
    up to N=128 and an adaptive explicit integrator beyond.
    """
    if t < 0:
        raise UsageError("t must be non-negative")
    if f0.N != spec.N:
        raise UsageError("field size does not match spec")
    if t == 0:
        out = f0.copy()
        out.time_label = 0.0
        return out
    L, b = lap1d_system(spec)
    fss = stationary_density(spec)
    u0 = f0.interior - fss.interior
    if spec.N <= _EXPM_MAX_N:
        u = scipy.linalg.expm(L * t) @ u0
    else:
        from scipy.integrate import solve_ivp

        sol = solve_ivp(lambda _, u: L @ u, (0.0, t), u0, method="DOP853",
                        rtol=1e-10, atol=1e-13)
        u = sol.y[:, -1]
    return field_from_interior(spec, fss.interior + u, time_label=t)
