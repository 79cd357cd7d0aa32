"""Root-count bounds for gradient systems.

Four families are computed: the classical Bezout bound ``(2H+1)^N``, the
BKK bound on ``(C*)^N`` and its origin-augmented variant on ``C^N``, and the
closed forms ``(4p)^d`` and ``(1+4p)^d`` that hold for one hidden layer and
one data point.
"""

import logging
from dataclasses import asdict, dataclass
from math import comb
from typing import Dict, List, Optional, Tuple

from pydlnn.network import Architecture, build_gradient_system, sample_instance
from pydlnn.polynomial import PolySystem
from pydlnn.polytope import mixed_volume, system_polytopes

logger = logging.getLogger(__name__)

DEFAULT_BKK_MAX_VARS = 12


@dataclass(frozen=True)
class BoundsReport:
    """Bounds for one architecture; ``None`` marks a skipped or inapplicable value."""

    N: int
    cbb: int
    bkk_torus: Optional[int] = None
    bkk_affine: Optional[int] = None
    b_cstar: Optional[int] = None
    b_c: Optional[int] = None

    @property
    def bkk_skipped(self) -> bool:
        return self.bkk_affine is None

    def to_dict(self) -> Dict[str, Optional[int]]:
        return asdict(self)

    def csv_fields(self) -> List[str]:
        """``N, CBB, BKK_torus, BKK_affine, B_C*, B_C`` with ``skipped``/empty cells."""
        return [
            str(self.N),
            str(self.cbb),
            "skipped" if self.bkk_torus is None else str(self.bkk_torus),
            "skipped" if self.bkk_affine is None else str(self.bkk_affine),
            "" if self.b_cstar is None else str(self.b_cstar),
            "" if self.b_c is None else str(self.b_c),
        ]


def bezout_bound(arch: Architecture) -> int:
    """``(2H+1)^N`` as an exact integer."""
    return arch.degree**arch.N


def bkk_bounds(system: PolySystem, seed: int = 0, threads: int = 1) -> Tuple[int, int]:
    """Mixed volumes of the supports, without and with the origin added.

    Returns:
        ``(bkk_torus, bkk_affine)``.
    """
    system.require_square()
    if any(p.is_zero for p in system):
        logger.warning("System contains a zero polynomial; BKK bounds are 0")
        return 0, 0
    torus = mixed_volume(system_polytopes(system.polys), seed=seed, threads=threads)
    affine = mixed_volume(
        system_polytopes(system.polys, with_origin=True), seed=seed, threads=threads
    )
    logger.debug("BKK bounds: torus=%d affine=%d", torus, affine)
    return torus, affine


def closed_form_bounds_h1m1(d: int, p: int) -> Tuple[int, int]:
    """``((4p)^d, (1+4p)^d)`` for hidden width ``d`` and output dimension ``p``.

    The first bounds critical points in the torus, the second all critical
    points of a network with one hidden layer trained on one data point.
    """
    if d < 1 or p < 1:
        raise ValueError("d and p must be positive integers")
    return (4 * p) ** d, (1 + 4 * p) ** d


def admissible_bucket_bounds(d: int, p: int) -> List[int]:
    """Bound on critical points with exactly ``r`` zero rows of ``W_1``, for ``r = 0..d``.

    Entry ``r`` is ``C(d, r) (4p)^(d-r)``; the entries sum to ``(1+4p)^d``.
    """
    if d < 1 or p < 1:
        raise ValueError("d and p must be positive integers")
    return [comb(d, r) * (4 * p) ** (d - r) for r in range(d + 1)]


def compute_bounds(
    arch: Architecture,
    seed: int = 0,
    force_bkk: bool = False,
    bkk_max_vars: int = DEFAULT_BKK_MAX_VARS,
    threads: int = 1,
) -> BoundsReport:
    """All bounds for ``arch`` on a generic instance drawn from ``seed``.

    BKK values are left empty for ``N > bkk_max_vars`` unless ``force_bkk``.
    """
    cbb = bezout_bound(arch)
    b_cstar = b_c = None
    if arch.H == 1 and arch.m == 1:
        b_cstar, b_c = closed_form_bounds_h1m1(arch.hidden[0], arch.d_y)

    if arch.N > bkk_max_vars and not force_bkk:
        logger.info(
            "Skipping BKK for %s: N=%d exceeds %d", arch.to_string(), arch.N, bkk_max_vars
        )
        return BoundsReport(arch.N, cbb, None, None, b_cstar, b_c)

    system = build_gradient_system(arch, sample_instance(arch, seed))
    torus, affine = bkk_bounds(system, seed=seed, threads=threads)
    return BoundsReport(arch.N, cbb, torus, affine, b_cstar, b_c)


def bkk_swap_symmetric(arch: Architecture, seed: int = 0, threads: int = 1) -> Tuple[int, int]:
    """Affine BKK of ``arch`` and of the same network with ``d_x`` and ``d_y`` swapped."""
    values = []
    for candidate in (arch, arch.swapped()):
        system = build_gradient_system(candidate, sample_instance(candidate, seed))
        values.append(bkk_bounds(system, seed=seed, threads=threads)[1])
    return values[0], values[1]
