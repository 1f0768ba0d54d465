"""Exact master-equation engine on truncated state spaces.

Desk-scale ground truth: enumerate every configuration up to a per-site
occupation cap, assemble the exact rate matrix (transitions that would
exceed the cap are redirected to a tracked loss sink, never dropped), and
evolve distributions with the matrix exponential.  Moments extracted here
are the independent check for every closure and stationarity claim about
the jump models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .correlation import (
    CorrelationField,
    default_diagonal_mode,
    diagonal_value,
    zero_field,
)
from .density import DensityField
from .models import (
    PilesSpec,
    RateFamilySpec,
    ResourceError,
    UsageError,
    boundary_values,
    equilibrium_pmf,
    logseries_total_rate,
    occupancy_cap,
    pile_block_row,
    piles_equilibrium_pmf,
)

__all__ = [
    "TruncatedStateSpace",
    "build_state_space",
    "build_master_generator",
    "product_distribution",
    "oracle_moments",
    "stationary_residual",
]

_MAX_STATES = 10 ** 6
_DENSE_MAX = 4000


@dataclass(frozen=True)
class TruncatedStateSpace:
    """Enumerated configurations with per-site occupations 0..cap."""

    N: int
    cap: int
    states: np.ndarray  # (S, n) with n = N - 1 bulk sites

    @property
    def n_sites(self) -> int:
        return self.N - 1

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def index_of(self, eta) -> int:
        idx = 0
        for v in eta:
            idx = idx * (self.cap + 1) + int(v)
        return idx


def build_state_space(spec, cap: int | None = None) -> TruncatedStateSpace:
    """Enumerate the truncated space; exclusion models use their native cap."""
    n = spec.N - 1
    if cap is None:
        if isinstance(spec, RateFamilySpec) and spec.d < 0:
            cap = occupancy_cap(spec)
        else:
            raise UsageError("unbounded models need an explicit occupation cap")
    n_states = (cap + 1) ** n
    if n_states > _MAX_STATES:
        raise ResourceError(f"state space too large: {(cap + 1)}^{n} = {n_states}")
    grids = np.meshgrid(*([np.arange(cap + 1)] * n), indexing="ij")
    states = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
    return TruncatedStateSpace(spec.N, cap, states)


def build_master_generator(spec, space: TruncatedStateSpace) -> sp.csr_matrix:
    """Exact rate matrix on states plus a final loss-sink row/column.

    Rows sum to zero (the sink absorbs cap-exceeding flux); the sink row is
    zero.  The diffusive N^2 factor is included.
    """
    S, n, cap = space.n_states, space.n_sites, space.cap
    rows, cols, vals = [], [], []

    def add(i, j, rate):
        if rate <= 0.0:
            return
        rows.append(i)
        cols.append(j)
        vals.append(rate)
        rows.append(i)
        cols.append(i)
        vals.append(-rate)

    sink = S
    radix = (cap + 1) ** np.arange(n - 1, -1, -1)

    if isinstance(spec, RateFamilySpec):
        c, d = spec.c, spec.d
        for i in range(S):
            eta = space.states[i]
            for x in range(n - 1):
                r = eta[x] * (c + d * eta[x + 1])
                if r > 0:
                    j = sink if eta[x + 1] + 1 > cap else i - radix[x] + radix[x + 1]
                    add(i, j, r)
                r = eta[x + 1] * (c + d * eta[x])
                if r > 0:
                    j = sink if eta[x] + 1 > cap else i + radix[x] - radix[x + 1]
                    add(i, j, r)
            r = spec.lam_minus * spec.rho_minus * (c + d * eta[0])
            if r > 0:
                add(i, sink if eta[0] + 1 > cap else i + radix[0], r)
            if eta[0] > 0:
                add(i, i - radix[0], spec.lam_minus * eta[0] * (c + d * spec.rho_minus))
            r = spec.lam_plus * spec.rho_plus * (c + d * eta[-1])
            if r > 0:
                add(i, sink if eta[-1] + 1 > cap else i + radix[-1], r)
            if eta[-1] > 0:
                add(i, i - radix[-1], spec.lam_plus * eta[-1] * (c + d * spec.rho_plus))
    elif isinstance(spec, PilesSpec):
        a = spec.alpha
        h_rows = [pile_block_row(a, m) for m in range(cap + 1)]
        total_in = {s: logseries_total_rate(b)
                    for s, b in (("-", spec.beta_minus), ("+", spec.beta_plus))}
        for i in range(S):
            eta = space.states[i]
            for x in range(n - 1):
                for (src, dst) in ((x, x + 1), (x + 1, x)):
                    m = eta[src]
                    hr = h_rows[m]
                    for k in range(1, m + 1):
                        over = eta[dst] + k > cap
                        j = sink if over else i - k * radix[src] + k * radix[dst]
                        add(i, j, hr[k - 1])
            for side, x in (("-", 0), ("+", n - 1)):
                beta = spec.beta_minus if side == "-" else spec.beta_plus
                m = eta[x]
                hr = h_rows[m]
                for k in range(1, m + 1):
                    add(i, i - k * radix[x], hr[k - 1])
                room = cap - m
                used = 0.0
                for k in range(1, room + 1):
                    r = beta ** k / k
                    add(i, i + k * radix[x], r)
                    used += r
                add(i, sink, total_in[side] - used)
    else:
        raise UsageError("the master-equation engine covers the jump models only")

    nn = float(spec.N ** 2)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(S + 1, S + 1)).tocsr()
    return Q * nn


def product_distribution(spec, space: TruncatedStateSpace,
                         marginals: list[np.ndarray]) -> np.ndarray:
    """Product measure from per-site pmfs, truncated at the cap and
    renormalized; the sink starts empty."""
    n, cap = space.n_sites, space.cap
    mu = np.ones(space.n_states)
    for x in range(n):
        p = np.zeros(cap + 1)
        m = np.asarray(marginals[x], dtype=float)
        p[: min(m.size, cap + 1)] = m[: cap + 1]
        p = p / p.sum()
        mu *= p[space.states[:, x]]
    return np.concatenate((mu, [0.0]))


def equilibrium_marginals(spec, space: TruncatedStateSpace, mean=None):
    """Matched per-site equilibrium marginals (constant profile)."""
    if isinstance(spec, PilesSpec):
        if spec.beta_minus != spec.beta_plus:
            raise UsageError("equilibrium marginals need matched reservoirs")
        p = piles_equilibrium_pmf(spec.alpha, spec.beta_minus, space.cap)
    else:
        if mean is None:
            if spec.rho_minus != spec.rho_plus:
                raise UsageError("equilibrium marginals need matched reservoirs")
            mean = spec.rho_minus
        p = equilibrium_pmf(spec, mean, kmax=space.cap)
        q = np.zeros(space.cap + 1)
        q[: p.size] = p
        p = q / q.sum()
    return [p] * space.n_sites


def _propagate(Q: sp.csr_matrix, mu0: np.ndarray, t: float) -> np.ndarray:
    if t == 0:
        return mu0.copy()
    QT = Q.T.tocsc()
    if Q.shape[0] <= _DENSE_MAX:
        return scipy.linalg.expm(QT.toarray() * t) @ mu0
    return expm_multiply(QT * t, mu0)


def oracle_moments(spec, space: TruncatedStateSpace, mu0: np.ndarray, t: float):
    """Evolve mu0 and extract (profile, pair field, loss mass) at time t.

    The pair field uses the model's diagonal extension; for exclusion at
    alpha = 1 the diagonal is excluded.
    """
    if mu0.shape != (space.n_states + 1,):
        raise UsageError("mu0 must include the loss-sink entry")
    Q = build_master_generator(spec, space)
    mu = _propagate(Q, mu0, t)
    return moments_from_distribution(spec, space, mu, time_label=t)


def moments_from_distribution(spec, space: TruncatedStateSpace, mu: np.ndarray,
                              time_label: float = 0.0):
    """Profile and pair field of a distribution over the truncated space."""
    states = space.states.astype(float)
    w = mu[:-1]
    loss = float(mu[-1])
    rho_int = states.T @ w
    rho = DensityField(spec.N, np.concatenate((
        [0.0], rho_int, [0.0])), time_label)
    rho.values[0], rho.values[-1] = boundary_values(spec)

    phi = zero_field(spec)
    phi.time_label = time_label
    geom = phi.geom
    mode = phi.diagonal_mode
    n = space.n_sites
    for a_ in range(n):
        for b_ in range(a_, n):
            x, y = a_ + 1, b_ + 1
            if a_ == b_:
                if mode == "excluded":
                    continue
                sfm = float(((states[:, a_] * (states[:, a_] - 1.0))) @ w)
                phi.values[geom.index(x, y)] = diagonal_value(spec, sfm, rho_int[a_])
            else:
                m2 = float((states[:, a_] * states[:, b_]) @ w)
                phi.values[geom.index(x, y)] = m2 - rho_int[a_] * rho_int[b_]
    return rho, phi, loss


def stationary_residual(spec, space: TruncatedStateSpace, mu: np.ndarray) -> float:
    """Max-norm of d(mu)/dt: zero for an exact invariant distribution."""
    Q = build_master_generator(spec, space)
    return float(np.max(np.abs(Q.T @ mu)))
