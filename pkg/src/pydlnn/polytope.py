"""Newton polytopes and mixed volumes by random lifting.

The mixed volume is the number of mixed cells of a fine mixed subdivision
induced by a random integer lifting, each weighted by its lattice volume.
Cells are enumerated depth first; every partial cell is kept only while a
linear program finds an inner normal ``(alpha, 1)`` that selects exactly the
chosen pair of points in each lifted support.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from pydlnn.polynomial import Polynomial

logger = logging.getLogger(__name__)

LIFT_RANGE = 1 << 12
# Minimum LP slack for a face to count as exactly the chosen pair.
SLACK_TOL = 1e-7


@dataclass(frozen=True)
class NewtonPolytope:
    """Lattice points spanning a Newton polytope in ``R^dim_ambient``."""

    points: FrozenSet[Tuple[int, ...]]
    dim_ambient: int

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("A Newton polytope needs at least one point")
        for p in self.points:
            if len(p) != self.dim_ambient:
                raise ValueError(f"Point {p} does not live in R^{self.dim_ambient}")
            if any(e < 0 for e in p):
                raise ValueError(f"Point {p} has a negative coordinate")

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> "NewtonPolytope":
        pts = frozenset(tuple(int(e) for e in p) for p in points)
        dim = len(next(iter(pts))) if pts else 0
        return cls(pts, dim)

    @classmethod
    def of(cls, poly: Polynomial) -> "NewtonPolytope":
        """Newton polytope of a nonzero polynomial."""
        if poly.is_zero:
            raise ValueError("The zero polynomial has no Newton polytope")
        return cls(frozenset(m.exponents for m in poly.support()), poly.nvars)

    @classmethod
    def simplex(cls, dim: int, scale: int = 1) -> "NewtonPolytope":
        """Vertices of ``scale * conv{0, e_1, ..., e_dim}``."""
        points = [(0,) * dim]
        for i in range(dim):
            v = [0] * dim
            v[i] = scale
            points.append(tuple(v))
        return cls(frozenset(points), dim)

    def with_origin(self) -> "NewtonPolytope":
        return NewtonPolytope(self.points | {(0,) * self.dim_ambient}, self.dim_ambient)

    def scaled(self, k: int) -> "NewtonPolytope":
        """Minkowski multiple ``k * P`` (as the dilated point set)."""
        if k < 1:
            raise ValueError("Scale factor must be a positive integer")
        return NewtonPolytope(
            frozenset(tuple(k * e for e in p) for p in self.points), self.dim_ambient
        )

    def minkowski_sum(self, other: "NewtonPolytope") -> "NewtonPolytope":
        return NewtonPolytope(
            frozenset(
                tuple(a + b for a, b in zip(p, q)) for p in self.points for q in other.points
            ),
            self.dim_ambient,
        )

    def contained_in_simplex(self, scale: int) -> bool:
        """Whether every point lies in ``scale * conv{0, e_1, ..., e_n}``."""
        return all(sum(p) <= scale for p in self.points)

    def as_array(self) -> np.ndarray:
        return np.array(sorted(self.points), dtype=np.int64)


def normalized_volume(points: np.ndarray) -> int:
    """``n!`` times the Euclidean volume of the hull; 0 when the hull is flat."""
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    if len(points) <= n:
        return 0
    if np.linalg.matrix_rank(points[1:] - points[0]) < n:
        return 0
    if n == 1:
        return int(round(points.max() - points.min()))
    try:
        hull = ConvexHull(points)
    except QhullError:
        return 0
    return int(round(hull.volume * math.factorial(n)))


def mixed_volume_oracle(polytopes: Sequence[NewtonPolytope]) -> int:
    """Mixed volume by inclusion-exclusion over Minkowski sums (small ``n`` only)."""
    n = len(polytopes)
    total = 0
    for size in range(1, n + 1):
        for subset in itertools.combinations(polytopes, size):
            acc = subset[0]
            for p in subset[1:]:
                acc = acc.minkowski_sum(p)
            total += (-1) ** (n - size) * normalized_volume(acc.as_array())
    return total


class NonGenericLiftingError(RuntimeError):
    """Raised when a lifting produces a degenerate mixed cell."""

    pass


class _CellEnumerator:
    """Depth-first enumeration of the mixed cells for one lifting."""

    def __init__(self, supports: List[np.ndarray], lifts: List[np.ndarray]):
        self.n = supports[0].shape[1]
        # smaller supports first keeps the search tree narrow near the root
        order = sorted(range(len(supports)), key=lambda i: len(supports[i]))
        self.supports = [supports[i].astype(float) for i in order]
        self.lifts = [lifts[i].astype(float) for i in order]

    def _constraints(
        self, level: int, pair: Tuple[int, ...], strict: bool
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Rows over the variables ``(alpha, s)`` for one level.

        Points outside ``pair`` must sit at least ``s`` (or 0 when not
        strict) above the face spanned by ``pair``.
        """
        pts, lift = self.supports[level], self.lifts[level]
        a = pair[0]
        others = [c for c in range(len(pts)) if c not in pair]
        A_ub = np.zeros((len(others), self.n + 1))
        b_ub = np.zeros(len(others))
        for row, c in enumerate(others):
            A_ub[row, : self.n] = -(pts[c] - pts[a])
            A_ub[row, self.n] = 1.0 if strict else 0.0
            b_ub[row] = lift[c] - lift[a]
        A_eq = np.zeros((len(pair) - 1, self.n + 1))
        b_eq = np.zeros(len(pair) - 1)
        for row, b in enumerate(pair[1:]):
            A_eq[row, : self.n] = pts[b] - pts[a]
            b_eq[row] = lift[a] - lift[b]
        return A_ub, b_ub, A_eq, b_eq

    def _feasible(self, blocks: List[Tuple[np.ndarray, ...]]) -> bool:
        A_ub: Optional[np.ndarray] = np.vstack([b[0] for b in blocks])
        b_ub: Optional[np.ndarray] = np.concatenate([b[1] for b in blocks])
        if A_ub is not None and A_ub.shape[0] == 0:
            A_ub = b_ub = None
        eq_blocks = [b for b in blocks if b[2].shape[0]]
        A_eq = np.vstack([b[2] for b in eq_blocks]) if eq_blocks else None
        b_eq = np.concatenate([b[3] for b in eq_blocks]) if eq_blocks else None
        cost = np.zeros(self.n + 1)
        cost[self.n] = -1.0
        bounds = [(None, None)] * self.n + [(None, 1.0)]
        result = linprog(
            cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs"
        )
        return result.status == 0 and -result.fun > SLACK_TOL

    def _children(
        self, level: int, blocks: List[Tuple[np.ndarray, ...]]
    ) -> List[Tuple[Tuple[int, int], Tuple[np.ndarray, ...]]]:
        """Feasible pairs of ``level`` given the constraints chosen above it."""
        npts = len(self.supports[level])
        # one-point test: a point that is never a lower vertex cannot be in a pair
        if blocks:
            candidates = [
                a
                for a in range(npts)
                if self._feasible(blocks + [self._constraints(level, (a,), False)])
            ]
        else:
            candidates = list(range(npts))
        children = []
        for a, b in itertools.combinations(candidates, 2):
            block = self._constraints(level, (a, b), True)
            if self._feasible(blocks + [block]):
                children.append(((a, b), block))
        return children

    def _volume(self, pairs: List[Tuple[int, int]]) -> int:
        edges = np.array(
            [self.supports[i][b] - self.supports[i][a] for i, (a, b) in enumerate(pairs)]
        )
        det = int(round(abs(np.linalg.det(edges))))
        if det == 0:
            raise NonGenericLiftingError("Mixed cell with zero volume")
        return det

    def _descend(
        self, level: int, pairs: List[Tuple[int, int]], blocks: List[Tuple[np.ndarray, ...]]
    ) -> Tuple[int, int]:
        if level == self.n:
            return self._volume(pairs), 1
        volume = cells = 0
        for pair, block in self._children(level, blocks):
            v, c = self._descend(level + 1, pairs + [pair], blocks + [block])
            volume += v
            cells += c
        return volume, cells

    def count(self, threads: int = 1) -> Tuple[int, int]:
        """Return ``(mixed volume, number of mixed cells)``."""
        roots = self._children(0, [])
        if threads > 1 and len(roots) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(
                    pool.map(lambda child: self._descend(1, [child[0]], [child[1]]), roots)
                )
        else:
            parts = [self._descend(1, [pair], [block]) for pair, block in roots]
        return sum(p[0] for p in parts), sum(p[1] for p in parts)


def mixed_volume(
    polytopes: Sequence[NewtonPolytope],
    seed: int = 0,
    threads: int = 1,
    max_attempts: int = 5,
) -> int:
    """Normalized mixed volume of ``n`` polytopes in ``R^n``.

    ``n`` copies of the unit simplex give 1. The result is independent of
    ``seed`` and ``threads``; the seed only picks the lifting.
    """
    n = len(polytopes)
    if n == 0:
        raise ValueError("Need at least one polytope")
    for p in polytopes:
        if p.dim_ambient != n:
            raise ValueError(f"Expected {n} polytopes in R^{n}, got one in R^{p.dim_ambient}")
    supports = [p.as_array() for p in polytopes]
    if any(len(s) < 2 for s in supports):
        return 0
    directions = np.vstack([s[1:] - s[0] for s in supports])
    if np.linalg.matrix_rank(directions.astype(float)) < n:
        logger.debug("Supports span less than R^%d; mixed volume is 0", n)
        return 0
    if n == 1:
        return int(supports[0].max() - supports[0].min())

    for attempt in range(max_attempts):
        rng = np.random.Generator(np.random.PCG64(seed + attempt))
        lifts = [rng.integers(0, LIFT_RANGE, size=len(s)) for s in supports]
        try:
            volume, cells = _CellEnumerator(supports, lifts).count(threads)
        except NonGenericLiftingError:
            logger.warning("Lifting %d was not generic, retrying", attempt)
            continue
        logger.debug("Mixed volume %d from %d mixed cells (n=%d)", volume, cells, n)
        return volume
    raise NonGenericLiftingError(f"No generic lifting found in {max_attempts} attempts")


def system_polytopes(
    polys: Sequence[Polynomial], with_origin: bool = False
) -> List[NewtonPolytope]:
    polytopes = [NewtonPolytope.of(p) for p in polys]
    if with_origin:
        polytopes = [p.with_origin() for p in polytopes]
    return polytopes
