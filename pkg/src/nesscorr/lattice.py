"""Discrete geometry shared by every solver and simulator.

Sites 1..N-1 are the bulk of the open segment; 0 and N are reservoir
ghosts.  Pair fields (correlations, occupation times) live on the closed
triangle ``{(x, y): 1 <= x <= y <= N-1}`` together with its absorbing
frame, the column ``x = 0`` and the row ``y = N``.  Queries below the
diagonal are answered by symmetry; callers never store ``x > y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatticeGeometry",
    "build_geometry",
    "classify",
    "INTERIOR",
    "UPPER_DIAGONAL",
    "DIAGONAL",
    "BOUNDARY",
    "OUTSIDE",
]

INTERIOR = "interior"
UPPER_DIAGONAL = "upper-diagonal"
DIAGONAL = "diagonal"
BOUNDARY = "boundary"
OUTSIDE = "outside"


class LatticeError(ValueError):
    """Raised for invalid lattice sizes or out-of-store queries."""


@dataclass(frozen=True)
class LatticeGeometry:
    """Index bookkeeping for the segment and the pair triangle.

    Points are enumerated row-major in x then y (x ascending, then y), the
    absorbing frame included, so the pair operators can be assembled as a
    single square matrix with zeroed rows on the frame.
    """

    N: int
    xs: np.ndarray
    ys: np.ndarray
    index_map: np.ndarray  # (N+1, N+1), -1 where no point is stored
    is_boundary: np.ndarray
    is_diagonal: np.ndarray
    is_upper_diagonal: np.ndarray

    @property
    def n_points(self) -> int:
        return int(self.xs.size)

    @property
    def n_sites(self) -> int:
        """Number of bulk sites |Λ_N| = N - 1."""
        return self.N - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(1, self.N)

    def index(self, x: int, y: int) -> int:
        """Flat index of a stored point; symmetrizes x > y queries."""
        if x > y:
            x, y = y, x
        if not (0 <= x <= self.N and 0 <= y <= self.N):
            raise LatticeError(f"point ({x},{y}) outside the stored domain")
        idx = int(self.index_map[x, y])
        if idx < 0:
            raise LatticeError(f"point ({x},{y}) outside the stored domain")
        return idx

    def triangle_mask(self) -> np.ndarray:
        """True for points of the closed triangle (frame excluded)."""
        return ~self.is_boundary

    def triangle_indices(self, include_diagonal: bool = True) -> np.ndarray:
        mask = self.triangle_mask()
        if not include_diagonal:
            mask = mask & ~self.is_diagonal
        return np.flatnonzero(mask)


def build_geometry(N: int) -> LatticeGeometry:
    """Enumerate the triangle and its absorbing frame for scaling parameter N."""
    if N < 3:
        raise LatticeError(f"lattice size must satisfy N >= 3, got {N}")
    pts = []
    for x in range(0, N + 1):
        if x == 0:
            ys = range(0, N + 1)
        elif x < N:
            ys = list(range(x, N)) + [N]
        else:
            ys = [N]
        for y in ys:
            pts.append((x, y))
    xs = np.array([p[0] for p in pts], dtype=np.int64)
    ys = np.array([p[1] for p in pts], dtype=np.int64)
    index_map = -np.ones((N + 1, N + 1), dtype=np.int64)
    index_map[xs, ys] = np.arange(xs.size)
    on_frame = (xs == 0) | (ys == N)
    on_diag = (xs == ys) & ~on_frame
    on_upper = (ys == xs + 1) & ~on_frame
    return LatticeGeometry(
        N=N,
        xs=xs,
        ys=ys,
        index_map=index_map,
        is_boundary=on_frame,
        is_diagonal=on_diag,
        is_upper_diagonal=on_upper,
    )


def classify(geom: LatticeGeometry, x: int, y: int) -> str:
    """Point class in the pair domain; classes partition the whole plane.

    Points below the diagonal are ``outside``: callers must symmetrize.
    """
    N = geom.N
    if (x == 0 and 0 <= y <= N) or (y == N and 0 <= x <= N):
        return BOUNDARY
    if 1 <= x <= N - 1 and x == y:
        return DIAGONAL
    if 1 <= x <= N - 2 and y == x + 1:
        return UPPER_DIAGONAL
    if 1 <= x < y <= N - 1:
        return INTERIOR
    return OUTSIDE
