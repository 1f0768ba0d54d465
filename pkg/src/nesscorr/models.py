"""Model catalogue: parameters, elementary rates, and reference marginals.

Six dynamics share the machinery downstream:

* the nearest-neighbour rate family eta(x)(c + d*eta(y)) with reservoir
  couplings lambda+-, rho+- (presets: exclusion d=-1, inclusion d=+1,
  independent walkers d=0),
* a linear interface diffusion (gl) driven at two levels,
* the energy-exchange diffusion (bep) driven by two thermal baths,
* block-jump piles with logarithmic-series reservoir injections.

Everything here is a pure function of (spec, configuration); simulators and
solvers keep their own incremental tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Union

import numpy as np
from scipy.special import gammaln

__all__ = [
    "UsageError",
    "DomainError",
    "UnsupportedError",
    "ResourceError",
    "RateFamilySpec",
    "GLSpec",
    "BEPSpec",
    "PilesSpec",
    "ModelSpec",
    "sep",
    "sip",
    "irw",
    "bulk_rate",
    "boundary_rates",
    "pile_block_rate",
    "pile_block_row",
    "logseries_total_rate",
    "SdeCoefficients",
    "sde_coefficients",
    "conductances",
    "boundary_values",
    "occupancy_cap",
    "equilibrium_pmf",
    "spec_to_json",
    "spec_from_json",
]


class UsageError(ValueError):
    """Caller broke an API precondition."""


class DomainError(ValueError):
    """A configuration or parameter left the model's admissible set."""


class UnsupportedError(ValueError):
    """Requested a closed form or mapping outside its validity range."""


class ResourceError(RuntimeError):
    """Requested computation exceeds the configured resource budget."""


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class RateFamilySpec:
    """Jump model with rates eta(x)(c + d*eta(y)) and reservoir couplings."""

    N: int
    c: float
    d: float
    lam_minus: float = 1.0
    lam_plus: float = 1.0
    rho_minus: float = 0.5
    rho_plus: float = 0.5
    kind: str = "rate_family"  # rate_family | sep | sip | irw

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("N must be >= 3")
        if self.c <= 0:
            raise DomainError("c must be positive")
        for lam in (self.lam_minus, self.lam_plus):
            if not (0.0 < lam <= 1.0):
                raise DomainError("lambda_- and lambda_+ must lie in (0, 1]")
        if self.d < 0:
            cap = math.floor(-self.c / self.d)
            if cap < 1:
                raise DomainError("d < 0 requires floor(-c/d) >= 1")
            hi = -self.c / self.d
            for rho in (self.rho_minus, self.rho_plus):
                if not (0.0 < rho < hi):
                    raise DomainError(f"reservoir densities must lie in (0, {hi}) for d < 0")
        else:
            for rho in (self.rho_minus, self.rho_plus):
                if rho <= 0.0:
                    raise DomainError("reservoir densities must be positive")
        if self.kind == "sep":
            if self.d != -1.0 or abs(self.c - round(self.c)) > 1e-12:
                raise DomainError("sep preset requires integer c = alpha and d = -1")
        if self.kind == "sip" and self.d != 1.0:
            raise DomainError("sip preset requires d = 1")
        if self.kind == "irw" and self.d != 0.0:
            raise DomainError("irw preset requires d = 0")


@dataclass(frozen=True)
class GLSpec:
    """Interface diffusion with linear interaction and pinned boundary levels."""

    N: int
    phi_minus: float
    phi_plus: float
    kind: str = "gl"

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("N must be >= 3")


@dataclass(frozen=True)
class BEPSpec:
    """Energy-exchange diffusion coupled to thermal baths at T-+.

    boundary_mode selects the reservoir bookkeeping: "generator" is the
    self-consistent form derived from the bath generator (conductance 1/2
    toward ghost energy 2*alpha*T, bath noise sqrt(2*T*z)); "paper" keeps
    the printed mapping (conductance alpha*T, bath noise sqrt(2*z)) for
    side-by-side comparison.  The two coincide when T = 1/(2*alpha).
    """

    N: int
    alpha: float
    T_minus: float
    T_plus: float
    boundary_mode: str = "generator"
    kind: str = "bep"

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("N must be >= 3")
        if self.alpha <= 0:
            raise DomainError("alpha must be positive")
        if self.T_minus <= 0 or self.T_plus <= 0:
            raise DomainError("bath temperatures must be positive")
        if self.boundary_mode not in ("generator", "paper"):
            raise UsageError("boundary_mode must be 'generator' or 'paper'")


@dataclass(frozen=True)
class PilesSpec:
    """Block-jump piles with logarithmic-series reservoir injections.

    boundary_mode as in BEPSpec: "generator" uses ghost values
    alpha*beta/(1-beta) and the duality-consistent pair operator;
    "paper" keeps the printed ghost beta/(1-beta) and diagonal stencil.
    """

    N: int
    alpha: int
    beta_minus: float
    beta_plus: float
    boundary_mode: str = "generator"
    kind: str = "piles"

    def __post_init__(self):
        if self.N < 3:
            raise DomainError("N must be >= 3")
        if not (isinstance(self.alpha, (int, np.integer)) and self.alpha >= 1):
            raise DomainError("alpha must be a positive integer")
        for beta in (self.beta_minus, self.beta_plus):
            if not (0.0 < beta < 1.0):
                raise DomainError("beta_- and beta_+ must lie in (0, 1)")
        if self.boundary_mode not in ("generator", "paper"):
            raise UsageError("boundary_mode must be 'generator' or 'paper'")


ModelSpec = Union[RateFamilySpec, GLSpec, BEPSpec, PilesSpec]


def sep(N, alpha, lam_minus=1.0, lam_plus=1.0, rho_minus=0.25, rho_plus=0.75):
    """Partial exclusion preset: c = alpha (integer), d = -1."""
    return RateFamilySpec(N, float(alpha), -1.0, lam_minus, lam_plus,
                          rho_minus, rho_plus, kind="sep")


def sip(N, alpha, lam_minus=1.0, lam_plus=1.0, rho_minus=0.25, rho_plus=0.75):
    """Inclusion preset: c = alpha, d = +1."""
    return RateFamilySpec(N, float(alpha), 1.0, lam_minus, lam_plus,
                          rho_minus, rho_plus, kind="sip")


def irw(N, c=1.0, lam_minus=1.0, lam_plus=1.0, rho_minus=0.25, rho_plus=0.75):
    """Independent-walker preset: d = 0."""
    return RateFamilySpec(N, float(c), 0.0, lam_minus, lam_plus,
                          rho_minus, rho_plus, kind="irw")


def occupancy_cap(spec: RateFamilySpec):
    """Per-site occupation cap for d < 0, else None (unbounded)."""
    if spec.d < 0:
        return math.floor(-spec.c / spec.d)
    return None


# ---------------------------------------------------------------------------
# elementary rates


def bulk_rate(spec: RateFamilySpec, eta: np.ndarray, x: int, y: int) -> float:
    """Jump rate x -> y for adjacent bulk sites (paper labels 1..N-1)."""
    if abs(x - y) != 1 or not (1 <= x <= spec.N - 1 and 1 <= y <= spec.N - 1):
        raise UsageError(f"sites ({x},{y}) are not an adjacent bulk pair")
    return float(eta[x - 1] * (spec.c + spec.d * eta[y - 1]))


def boundary_rates(spec: RateFamilySpec, eta: np.ndarray):
    """Reservoir exchange rates (r_{0,1}, r_{1,0}, r_{N-1,N}, r_{N,N-1})."""
    c, d = spec.c, spec.d
    e1, eN = float(eta[0]), float(eta[spec.N - 2])
    r01 = spec.lam_minus * spec.rho_minus * (c + d * e1)
    r10 = spec.lam_minus * e1 * (c + d * spec.rho_minus)
    rNm = spec.lam_plus * eN * (c + d * spec.rho_plus)
    rNp = spec.lam_plus * spec.rho_plus * (c + d * eN)
    return r01, r10, rNm, rNp


def pile_block_rate(alpha: int, j: int, m: int) -> float:
    """Rate of a block of j particles leaving a pile of m (log-gamma form)."""
    if j < 1 or j > m or m < 0:
        return 0.0
    lg = (gammaln(m + 1) + gammaln(m - j + alpha)
          - gammaln(m - j + 1) - gammaln(m + alpha))
    return math.exp(lg) / j


def pile_block_row(alpha: int, m: int) -> np.ndarray:
    """Vector h_alpha(1..m, m); empty for m = 0."""
    if m <= 0:
        return np.zeros(0)
    j = np.arange(1, m + 1)
    lg = (gammaln(m + 1) + gammaln(m - j + alpha)
          - gammaln(m - j + 1) - gammaln(m + alpha))
    return np.exp(lg) / j


def logseries_total_rate(beta: float) -> float:
    """Total reservoir injection rate sum_k beta^k / k = -log(1 - beta)."""
    return -math.log1p(-beta)


# ---------------------------------------------------------------------------
# diffusion coefficients (gl / bep)


@dataclass(frozen=True)
class SdeCoefficients:
    """Ito coefficients matching the second-order generators.

    drift: per bulk site; bond_noise: amplitude on each bulk bond, entering
    site x with sign -1 and site x+1 with sign +1; site noises act on the
    two reservoir-coupled sites.
    """

    drift: np.ndarray
    bond_noise: np.ndarray
    site_noise_minus: float
    site_noise_plus: float


def sde_coefficients(spec, state: np.ndarray) -> SdeCoefficients:
    """Drift and noise amplitudes for the interface / energy diffusions."""
    n = spec.N - 1
    z = np.asarray(state, dtype=float)
    if z.shape != (n,):
        raise UsageError(f"state must have shape ({n},)")
    if isinstance(spec, GLSpec):
        drift = np.zeros(n)
        drift[:-1] -= z[:-1] - z[1:]
        drift[1:] += z[:-1] - z[1:]
        drift[0] += spec.phi_minus - z[0]
        drift[-1] += spec.phi_plus - z[-1]
        return SdeCoefficients(drift, np.full(n - 1, math.sqrt(2.0)),
                               math.sqrt(2.0), math.sqrt(2.0))
    if isinstance(spec, BEPSpec):
        if np.any(z < 0):
            raise DomainError("bep state must be non-negative")
        a = spec.alpha
        drift = np.zeros(n)
        grad = z[:-1] - z[1:]
        drift[:-1] -= a * grad
        drift[1:] += a * grad
        drift[0] += spec.T_minus * a - 0.5 * z[0]
        drift[-1] += spec.T_plus * a - 0.5 * z[-1]
        bond = np.sqrt(2.0 * z[:-1] * z[1:])
        if spec.boundary_mode == "generator":
            sm = math.sqrt(2.0 * spec.T_minus * z[0])
            sp = math.sqrt(2.0 * spec.T_plus * z[-1])
        else:
            sm = math.sqrt(2.0 * z[0])
            sp = math.sqrt(2.0 * z[-1])
        return SdeCoefficients(drift, bond, sm, sp)
    raise UsageError("sde_coefficients applies to gl and bep specs only")


# ---------------------------------------------------------------------------
# conductances and ghost values shared by the 1D/2D operators


def conductances(spec) -> np.ndarray:
    """Bond conductances kappa[i] for bonds (i, i+1), i = 0..N-1."""
    N = spec.N
    if isinstance(spec, RateFamilySpec):
        kap = np.full(N, spec.c)
        kap[0] = spec.c * spec.lam_minus
        kap[-1] = spec.c * spec.lam_plus
    elif isinstance(spec, GLSpec):
        kap = np.ones(N)
    elif isinstance(spec, BEPSpec):
        kap = np.full(N, spec.alpha)
        if spec.boundary_mode == "generator":
            kap[0] = kap[-1] = 0.5
        else:
            kap[0] = spec.alpha * spec.T_minus
            kap[-1] = spec.alpha * spec.T_plus
    elif isinstance(spec, PilesSpec):
        kap = np.full(N, 1.0 / spec.alpha)
    else:
        raise UsageError(f"unknown spec {spec!r}")
    return kap


def boundary_values(spec):
    """Pinned ghost values (left, right) of the mean profile."""
    if isinstance(spec, RateFamilySpec):
        return spec.rho_minus, spec.rho_plus
    if isinstance(spec, GLSpec):
        return spec.phi_minus, spec.phi_plus
    if isinstance(spec, BEPSpec):
        return 2.0 * spec.alpha * spec.T_minus, 2.0 * spec.alpha * spec.T_plus
    if isinstance(spec, PilesSpec):
        rm = spec.beta_minus / (1.0 - spec.beta_minus)
        rp = spec.beta_plus / (1.0 - spec.beta_plus)
        if spec.boundary_mode == "generator":
            return spec.alpha * rm, spec.alpha * rp
        return rm, rp
    raise UsageError(f"unknown spec {spec!r}")


# ---------------------------------------------------------------------------
# reference single-site marginals (equilibrium product measures)


def equilibrium_pmf(spec, mean: float, kmax: int | None = None,
                    tail: float = 1e-16) -> np.ndarray:
    """Single-site equilibrium pmf at the given mean occupation.

    Built from detailed balance of the reservoir exchange: successive
    ratios mean*(c + d*k) / ((k+1)(c + d*mean)).  Reduces to
    Binomial(alpha, mean/alpha) for exclusion, NegBin for inclusion,
    Poisson(mean) for independent walkers.
    """
    if isinstance(spec, PilesSpec):
        raise UsageError("use piles_equilibrium_pmf (parameterized by beta)")
    if not isinstance(spec, RateFamilySpec):
        raise UsageError("equilibrium_pmf applies to jump models")
    c, d = spec.c, spec.d
    if d < 0:
        hi = occupancy_cap(spec)
        if not (0.0 < mean < -c / d):
            raise DomainError("mean outside the admissible density range")
        kmax = hi if kmax is None else min(kmax, hi)
    elif kmax is None:
        kmax = 1
        w, k = 1.0, 0
        while True:
            w *= mean * (c + d * k) / ((k + 1) * (c + d * mean))
            k += 1
            if w < tail and k > 4 * (mean + 1):
                break
            kmax = k
            if k > 100000:
                raise ResourceError("equilibrium pmf support too large")
    p = np.zeros(kmax + 1)
    p[0] = 1.0
    for k in range(kmax):
        p[k + 1] = p[k] * mean * (c + d * k) / ((k + 1) * (c + d * mean))
    return p / p.sum()


def piles_equilibrium_pmf(alpha: int, beta: float, kmax: int) -> np.ndarray:
    """NegBin(alpha, beta) pmf on 0..kmax (unnormalized tail dropped)."""
    k = np.arange(kmax + 1)
    lg = gammaln(k + alpha) - gammaln(alpha) - gammaln(k + 1)
    p = np.exp(lg + k * math.log(beta) + alpha * math.log1p(-beta))
    return p / p.sum()


# ---------------------------------------------------------------------------
# JSON wire format (field names are part of the contract)

_JSON_FIELDS = {
    "sep": ("alpha", "lambda_minus", "lambda_plus", "rho_minus", "rho_plus"),
    "sip": ("alpha", "lambda_minus", "lambda_plus", "rho_minus", "rho_plus"),
    "irw": ("c", "lambda_minus", "lambda_plus", "rho_minus", "rho_plus"),
    "rate_family": ("c", "d", "lambda_minus", "lambda_plus", "rho_minus", "rho_plus"),
    "gl": ("phi_minus", "phi_plus"),
    "bep": ("alpha", "T_minus", "T_plus", "boundary_mode"),
    "piles": ("alpha", "beta_minus", "beta_plus", "boundary_mode"),
}


def spec_to_json(spec) -> dict:
    """Serialize a spec to the documented JSON document."""
    doc = {"model": spec.kind, "N": spec.N}
    if isinstance(spec, RateFamilySpec):
        if spec.kind in ("sep", "sip"):
            doc["alpha"] = spec.c
        elif spec.kind == "irw":
            doc["c"] = spec.c
        else:
            doc["c"] = spec.c
            doc["d"] = spec.d
        doc["lambda_minus"] = spec.lam_minus
        doc["lambda_plus"] = spec.lam_plus
        doc["rho_minus"] = spec.rho_minus
        doc["rho_plus"] = spec.rho_plus
    elif isinstance(spec, GLSpec):
        doc["phi_minus"] = spec.phi_minus
        doc["phi_plus"] = spec.phi_plus
    elif isinstance(spec, BEPSpec):
        doc["alpha"] = spec.alpha
        doc["T_minus"] = spec.T_minus
        doc["T_plus"] = spec.T_plus
        doc["boundary_mode"] = spec.boundary_mode
    elif isinstance(spec, PilesSpec):
        doc["alpha"] = spec.alpha
        doc["beta_minus"] = spec.beta_minus
        doc["beta_plus"] = spec.beta_plus
        doc["boundary_mode"] = spec.boundary_mode
    return doc


def spec_from_json(doc: dict):
    """Parse the JSON document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise UsageError("model spec must be a JSON object")
    d = dict(doc)
    try:
        model = d.pop("model")
        N = int(d.pop("N"))
    except KeyError as exc:
        raise UsageError(f"model spec missing required key {exc}") from None
    if model not in _JSON_FIELDS:
        raise UsageError(f"unknown model {model!r}")
    allowed = set(_JSON_FIELDS[model])
    unknown = set(d) - allowed
    if unknown:
        raise UsageError(f"unknown keys for model {model!r}: {sorted(unknown)}")

    def take(name, default=None):
        if name in d:
            return d.pop(name)
        if default is None:
            raise UsageError(f"model {model!r} requires field {name!r}")
        return default

    if model in ("sep", "sip", "irw", "rate_family"):
        if model == "sep":
            c, dd = float(take("alpha")), -1.0
        elif model == "sip":
            c, dd = float(take("alpha")), 1.0
        elif model == "irw":
            c, dd = float(take("c", 1.0)), 0.0
        else:
            c, dd = float(take("c")), float(take("d"))
        return RateFamilySpec(
            N, c, dd,
            float(take("lambda_minus", 1.0)), float(take("lambda_plus", 1.0)),
            float(take("rho_minus")), float(take("rho_plus")), kind=model)
    if model == "gl":
        return GLSpec(N, float(take("phi_minus")), float(take("phi_plus")))
    if model == "bep":
        return BEPSpec(N, float(take("alpha")), float(take("T_minus")),
                       float(take("T_plus")), str(take("boundary_mode", "generator")))
    return PilesSpec(N, int(take("alpha")), float(take("beta_minus")),
                     float(take("beta_plus")), str(take("boundary_mode", "generator")))
