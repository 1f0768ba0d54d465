"""Trajectory simulation and ensemble estimation.

Jump models run an exact-in-law event loop (numba); the two diffusions use
Euler-Maruyama with full truncation for the energy process.  Ensembles are
embarrassingly parallel with per-trajectory seed streams and index-keyed
reduction, so estimates are bit-identical for a fixed (seed, M) whatever
the thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .density import DensityField
from .lattice import build_geometry
from .models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    DomainError,
    UsageError,
    ResourceError,
    equilibrium_pmf,
    logseries_total_rate,
    occupancy_cap,
    pile_block_row,
    sde_coefficients,
)

__all__ = [
    "EnsembleEstimate",
    "simulate_jump",
    "simulate_diffusion",
    "estimate_fields",
    "sample_initial",
    "sample_initial_ensemble",
]

_PILE_TABLE_MAX = 320
_DEFAULT_DT_MICRO = 1e-3
_pile_table_cache: dict = {}


def _pile_tables(alpha: int):
    if alpha in _pile_table_cache:
        return _pile_table_cache[alpha]
    hcum = np.zeros((_PILE_TABLE_MAX + 1, _PILE_TABLE_MAX))
    htot = np.zeros(_PILE_TABLE_MAX + 1)
    for m in range(1, _PILE_TABLE_MAX + 1):
        row = pile_block_row(alpha, m)
        hcum[m, :m] = np.cumsum(row)
        htot[m] = hcum[m, m - 1]
    _pile_table_cache[alpha] = (hcum, htot)
    return hcum, htot


def _log_series_cum(beta: float, tol: float = 1e-15):
    terms = []
    k, total = 1, logseries_total_rate(beta)
    acc = 0.0
    while acc < total * (1.0 - tol) or k <= 4:
        term = beta ** k / k
        acc += term
        terms.append(acc)
        k += 1
        if k > 100000:
            break
    return np.asarray(terms)


def _admissible(spec, eta: np.ndarray):
    if isinstance(spec, RateFamilySpec):
        if np.any(eta < 0):
            raise DomainError("occupations must be non-negative")
        cap = occupancy_cap(spec)
        if cap is not None and np.any(eta > cap):
            raise DomainError(f"occupations exceed the exclusion cap {cap}")
    elif isinstance(spec, PilesSpec):
        if np.any(eta < 0):
            raise DomainError("occupations must be non-negative")
    elif isinstance(spec, BEPSpec):
        if np.any(eta < 0):
            raise DomainError("energies must be non-negative")


def simulate_jump(spec, eta0: np.ndarray, t: float, seed: int,
                  with_boundary: bool = True) -> np.ndarray:
    """Exact continuous-time trajectory of a jump model to macroscopic t."""
    if t < 0:
        raise UsageError("t must be non-negative")
    eta0 = np.asarray(eta0, dtype=np.int64)
    if eta0.shape != (spec.N - 1,):
        raise UsageError(f"configuration must have shape ({spec.N - 1},)")
    _admissible(spec, eta0)
    out = sample_paths(spec, eta0[None, :].copy(), t, seed,
                       with_boundary=with_boundary)
    return out[0]


def sample_paths(spec, eta0s: np.ndarray, t: float, seed: int,
                 with_boundary: bool = True) -> np.ndarray:
    """Evolve a batch of jump-model configurations in place; returns them."""
    t_micro = t * spec.N ** 2
    if isinstance(spec, RateFamilySpec):
        status = _kernels.rate_family_ensemble(
            eta0s, spec.c, spec.d, spec.lam_minus, spec.lam_plus,
            spec.rho_minus, spec.rho_plus, t_micro, seed, with_boundary)
        if np.any(status != 0):
            raise RuntimeError("jump kernel reported inconsistent rates")
        return eta0s
    if isinstance(spec, PilesSpec):
        hcum, htot = _pile_tables(spec.alpha)
        lm = _log_series_cum(spec.beta_minus)
        lp = _log_series_cum(spec.beta_plus)
        status = _kernels.piles_ensemble(
            eta0s, hcum, htot, lm, lp,
            logseries_total_rate(spec.beta_minus),
            logseries_total_rate(spec.beta_plus),
            t_micro, seed, with_boundary)
        if np.any(status == 2):
            raise ResourceError("pile occupation exceeded the kernel table")
        return eta0s
    raise UsageError("simulate_jump covers the jump models")


def simulate_diffusion(spec, z0: np.ndarray, t: float, dt: float, seed: int,
                       with_boundary: bool = True) -> np.ndarray:
    """Euler-Maruyama trajectory of a diffusion model to macroscopic t.

    dt is the microscopic step; weak error O(dt).  Energy positivity is
    enforced by clamping proposals at zero (full truncation).
    """
    z0 = np.asarray(z0, dtype=float)
    if z0.ndim == 1:
        return diffusion_paths(spec, z0[None, :].copy(), t, dt, seed,
                               with_boundary=with_boundary)[0]
    raise UsageError("z0 must be a single configuration")


def diffusion_paths(spec, z: np.ndarray, t: float, dt: float, seed: int,
                    with_boundary: bool = True) -> np.ndarray:
    """Euler-Maruyama for a batch (M, n), per-trajectory seed streams."""
    if not isinstance(spec, (GLSpec, BEPSpec)):
        raise UsageError("simulate_diffusion covers gl and bep")
    if dt <= 0:
        raise UsageError("dt must be positive")
    if t < 0:
        raise UsageError("t must be non-negative")
    if isinstance(spec, BEPSpec) and np.any(z < 0):
        raise DomainError("energies must be non-negative")
    n = spec.N - 1
    if z.shape[1] != n:
        raise UsageError(f"configurations must have shape (M, {n})")
    t_micro = t * spec.N ** 2
    steps = int(math.ceil(t_micro / dt))
    if steps == 0:
        return z
    h = t_micro / steps
    is_gl = isinstance(spec, GLSpec)
    if is_gl:
        args = (True, 0.0, spec.phi_minus, spec.phi_plus, 2.0, 2.0)
    else:
        a = spec.alpha
        if spec.boundary_mode == "generator":
            coefs = (2.0 * spec.T_minus, 2.0 * spec.T_plus)
        else:
            coefs = (2.0, 2.0)
        args = (False, a, spec.T_minus * a, spec.T_plus * a, *coefs)
    _kernels.diffusion_ensemble(z, *args, with_boundary, steps, h, seed)
    return z


# ---------------------------------------------------------------------------
# initial measures


_FAMILIES = ("binomial", "negative-binomial", "poisson", "gamma", "gaussian",
             "deterministic")


def _family_compatible(spec, family: str) -> bool:
    if family == "deterministic":
        return True
    if isinstance(spec, RateFamilySpec):
        if spec.d < 0:
            return family == "binomial"
        if spec.d > 0:
            return family == "negative-binomial"
        return family == "poisson"
    if isinstance(spec, PilesSpec):
        return family == "negative-binomial"
    if isinstance(spec, BEPSpec):
        return family == "gamma"
    if isinstance(spec, GLSpec):
        return family == "gaussian"
    return False


def sample_initial(spec, profile: DensityField, family: str, seed: int) -> np.ndarray:
    """Independent per-site draws with means matching the profile."""
    return sample_initial_ensemble(spec, profile, family, 1, seed)[0]


def sample_initial_ensemble(spec, profile: DensityField, family: str,
                            M: int, seed: int) -> np.ndarray:
    """(M, n) array of independent configurations, mean-matched sitewise."""
    if family not in _FAMILIES:
        raise UsageError(f"unknown family {family!r}")
    if not _family_compatible(spec, family):
        raise UsageError(f"family {family!r} incompatible with model {spec.kind!r}")
    if profile.N != spec.N:
        raise UsageError("profile size does not match spec")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    mean = profile.interior
    n = spec.N - 1
    if family == "deterministic":
        if isinstance(spec, (RateFamilySpec, PilesSpec)):
            vals = np.rint(mean).astype(np.int64)
            cap = occupancy_cap(spec) if isinstance(spec, RateFamilySpec) else None
            vals = np.clip(vals, 0, cap if cap is not None else None)
            return np.broadcast_to(vals, (M, n)).copy()
        return np.broadcast_to(mean.astype(float), (M, n)).copy()
    if family == "binomial":
        alpha = int(round(occupancy_cap(spec)))
        p = np.clip(mean / alpha, 0.0, 1.0)
        return rng.binomial(alpha, p, size=(M, n)).astype(np.int64)
    if family == "negative-binomial":
        alpha = spec.alpha if isinstance(spec, PilesSpec) else spec.c
        p = alpha / (alpha + mean)  # numpy counts failures at success prob p
        return rng.negative_binomial(alpha, p, size=(M, n)).astype(np.int64)
    if family == "poisson":
        return rng.poisson(mean, size=(M, n)).astype(np.int64)
    if family == "gamma":
        shape = spec.alpha
        scale = mean / shape
        return rng.gamma(shape, scale, size=(M, n))
    # gaussian: unit variance around the profile
    return mean + rng.standard_normal((M, n))


# ---------------------------------------------------------------------------
# ensemble estimation


@dataclass
class EnsembleEstimate:
    """Sample means and delta-method standard errors at one observation time."""

    spec: object
    t: float
    M: int
    seed: int
    rho_mean: np.ndarray
    rho_se: np.ndarray
    pairs: list  # (x, y, mean, se) over the triangle, diagonal where defined

    def pair(self, x: int, y: int):
        if x > y:
            x, y = y, x
        for (px, py, m, s) in self.pairs:
            if (px, py) == (x, y):
                return m, s
        raise KeyError((x, y))


def _pair_observable(spec, samples: np.ndarray, x: int, y: int):
    """Per-trajectory products whose mean is the raw pair moment."""
    a, b = samples[:, x - 1], samples[:, y - 1]
    if x != y:
        return a * b
    if isinstance(spec, RateFamilySpec):
        c, d = spec.c, spec.d
        return (c / (c + d)) * a * (a - 1.0)
    if isinstance(spec, PilesSpec):
        al = spec.alpha
        return al / (al + 1.0) * a * (a - 1.0)
    if isinstance(spec, BEPSpec):
        al = spec.alpha
        return al / (al + 1.0) * a * a
    if isinstance(spec, GLSpec):
        return a * a
    raise UsageError(f"unknown spec {spec!r}")


def estimate_fields(spec, profile: DensityField, family: str, t: float,
                    M: int, seed: int, dt: float = _DEFAULT_DT_MICRO,
                    with_boundary: bool = True) -> EnsembleEstimate:
    """Monte Carlo profile and pair-field estimates at macroscopic time t.

    Pair covariances use phi_hat = mean(prod) - rho_hat rho_hat with the
    delta-method standard error; the diagonal uses the model's extension.
    """
    if M < 2:
        raise UsageError("need at least two trajectories")
    init = sample_initial_ensemble(spec, profile, family, M, seed)
    if isinstance(spec, (RateFamilySpec, PilesSpec)):
        samples = sample_paths(spec, init, t, seed, with_boundary=with_boundary)
        samples = samples.astype(float)
    else:
        samples = diffusion_paths(spec, init.astype(float), t, dt, seed,
                                  with_boundary=with_boundary)
    n = spec.N - 1
    rho_mean = samples.mean(axis=0)
    rho_se = samples.std(axis=0, ddof=1) / math.sqrt(M)
    exclude_diag = (isinstance(spec, RateFamilySpec)
                    and abs(spec.c + spec.d) < 1e-12)
    pairs = []
    for x in range(1, n + 1):
        for y in range(x, n + 1):
            if x == y and exclude_diag:
                continue
            prod = _pair_observable(spec, samples, x, y)
            if x == y:
                mean_est = prod.mean() - rho_mean[x - 1] ** 2
                lin = prod - 2.0 * rho_mean[x - 1] * samples[:, x - 1]
            else:
                mean_est = prod.mean() - rho_mean[x - 1] * rho_mean[y - 1]
                lin = (prod - rho_mean[y - 1] * samples[:, x - 1]
                       - rho_mean[x - 1] * samples[:, y - 1])
            se = lin.std(ddof=1) / math.sqrt(M)
            pairs.append((x, y, float(mean_est), float(se)))
    return EnsembleEstimate(spec, t, M, seed, rho_mean, rho_se, pairs)


def set_threads(n_jobs: int):
    """Cap the numba thread pool (estimates stay bit-identical regardless)."""
    import numba

    numba.set_num_threads(max(1, int(n_jobs)))
