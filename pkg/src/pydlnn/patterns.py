"""Zero patterns of critical points and the structural laws they obey.

For a network trained on one data point every critical point satisfies:

* no stray zeros: a zero entry of ``W_k`` sits in a zero row or a zero column;
* row/column pairing: row ``i`` of ``W_{k-1}`` is zero iff column ``i`` of
  ``W_k`` is zero;
* zeros of ``W_1`` fill whole rows and zeros of ``W_{H+1}`` whole columns.

A lawful pattern is therefore fixed by the set of dead neurons in each
hidden layer. The census below counts realized patterns and reports every
law violation.
"""

import itertools
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from pydlnn.bounds import admissible_bucket_bounds
from pydlnn.compiled import CompiledSystem
from pydlnn.config import SolverOptions
from pydlnn.network import Architecture, build_gradient_system, sample_instance
from pydlnn.polynomial import PolySystem
from pydlnn.tracker import Solution, classify, dedupe, refine, solve_total_degree

logger = logging.getLogger(__name__)

NO_STRAY_ZEROS = "no-stray-zeros"
ROW_COLUMN_PAIRING = "row-column-pairing"
W1_ROWS = "w1-rows"
WLAST_COLUMNS = "wlast-columns"
LAWS = (NO_STRAY_ZEROS, ROW_COLUMN_PAIRING, W1_ROWS, WLAST_COLUMNS)

# Newton target used when a law violation is double-checked.
TIGHT_REFINE_TOL = 1e-14
ADMISSIBLE_LIMIT = 4096

Mask = Tuple[Tuple[bool, ...], ...]


@dataclass(frozen=True)
class ZeroPattern:
    """Zero masks of ``W_1 .. W_{H+1}`` (``True`` = entry is zero)."""

    masks: Tuple[Mask, ...]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "ZeroPattern":
        return cls(
            tuple(tuple(tuple(bool(v) for v in row) for row in np.asarray(a)) for a in arrays)
        )

    @classmethod
    def from_mask(cls, zero_mask: Sequence[bool], arch: Architecture) -> "ZeroPattern":
        """Split a flat zero mask into per-layer matrices."""
        if len(zero_mask) != arch.N:
            raise ValueError(f"Mask has length {len(zero_mask)}, expected {arch.N}")
        return cls.from_arrays(arch.split_weights(np.asarray(zero_mask, dtype=bool)))

    @classmethod
    def from_solution(cls, sol: Solution, arch: Architecture) -> "ZeroPattern":
        return cls.from_mask(sol.zero_mask, arch)

    @classmethod
    def from_dead_neurons(
        cls, arch: Architecture, dead: Sequence[FrozenSet[int]]
    ) -> "ZeroPattern":
        """Lawful pattern where neuron ``i`` of hidden layer ``k`` is dead iff ``i in dead[k-1]``.

        A dead neuron zeroes row ``i`` of ``W_k`` and column ``i`` of ``W_{k+1}``.
        """
        if len(dead) != arch.H:
            raise ValueError(f"Expected {arch.H} dead-neuron sets, got {len(dead)}")
        arrays = []
        for layer, (rows, cols) in enumerate(arch.layer_shapes, start=1):
            mask = np.zeros((rows, cols), dtype=bool)
            if layer <= arch.H:
                for i in dead[layer - 1]:
                    mask[i, :] = True
            if layer >= 2:
                for j in dead[layer - 2]:
                    mask[:, j] = True
            arrays.append(mask)
        return cls.from_arrays(arrays)

    def arrays(self) -> List[np.ndarray]:
        return [np.array(m, dtype=bool) for m in self.masks]

    @property
    def is_origin(self) -> bool:
        return all(all(all(row) for row in m) for m in self.masks)

    @property
    def is_full_support(self) -> bool:
        return not any(any(any(row) for row in m) for m in self.masks)

    def zero_rows(self, layer: int) -> List[int]:
        """Indices of the all-zero rows of ``W_layer``."""
        return [i for i, row in enumerate(self.masks[layer - 1]) if all(row)]

    def zero_columns(self, layer: int) -> List[int]:
        mask = self.arrays()[layer - 1]
        return [j for j in range(mask.shape[1]) if mask[:, j].all()]

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        flat = tuple(int(v) for m in self.masks for row in m for v in row)
        return sum(flat), flat

    def grid(self, layer: int) -> str:
        """``W_layer`` drawn with ``*`` for nonzero and ``0`` for zero, rows split by ``/``."""
        return " / ".join(
            " ".join("0" if v else "*" for v in row) for row in self.masks[layer - 1]
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"masks": [[[int(v) for v in row] for row in m] for m in self.masks]}


def _check_no_stray(pattern: ZeroPattern) -> bool:
    for mask in pattern.arrays():
        rows_zero = mask.all(axis=1)
        cols_zero = mask.all(axis=0)
        stray = mask & ~rows_zero[:, None] & ~cols_zero[None, :]
        if stray.any():
            return False
    return True


def _check_pairing(pattern: ZeroPattern) -> bool:
    arrays = pattern.arrays()
    for k in range(1, len(arrays)):
        rows_zero = arrays[k - 1].all(axis=1)
        cols_zero = arrays[k].all(axis=0)
        if not np.array_equal(rows_zero, cols_zero):
            return False
    return True


def _check_w1_rows(pattern: ZeroPattern) -> bool:
    mask = pattern.arrays()[0]
    return bool(np.all(mask.any(axis=1) <= mask.all(axis=1)))


def _check_wlast_columns(pattern: ZeroPattern) -> bool:
    mask = pattern.arrays()[-1]
    return bool(np.all(mask.any(axis=0) <= mask.all(axis=0)))


_CHECKS = {
    NO_STRAY_ZEROS: _check_no_stray,
    ROW_COLUMN_PAIRING: _check_pairing,
    W1_ROWS: _check_w1_rows,
    WLAST_COLUMNS: _check_wlast_columns,
}


def check_no_stray_zeros(sol: Solution, arch: Architecture) -> bool:
    """Every zero of every ``W_k`` lies in a zero row or a zero column of ``W_k``."""
    return _check_no_stray(ZeroPattern.from_solution(sol, arch))


def check_row_column_pairing(sol: Solution, arch: Architecture) -> bool:
    """Row ``i`` of ``W_{k-1}`` is zero exactly when column ``i`` of ``W_k`` is."""
    return _check_pairing(ZeroPattern.from_solution(sol, arch))


def check_w1_rows(sol: Solution, arch: Architecture) -> bool:
    return _check_w1_rows(ZeroPattern.from_solution(sol, arch))


def check_wlast_columns(sol: Solution, arch: Architecture) -> bool:
    return _check_wlast_columns(ZeroPattern.from_solution(sol, arch))


def violated_laws(pattern: ZeroPattern) -> List[str]:
    return [law for law in LAWS if not _CHECKS[law](pattern)]


def enumerate_admissible(arch: Architecture) -> List[ZeroPattern]:
    """All lawful patterns: a proper subset of dead neurons per hidden layer, plus the origin.

    A fully dead layer zeroes a whole weight matrix, which by the pairing
    law forces every other matrix to vanish as well.
    """
    per_layer = []
    for width in arch.hidden:
        per_layer.append(
            [
                frozenset(c)
                for size in range(width)
                for c in itertools.combinations(range(width), size)
            ]
        )
    patterns = [
        ZeroPattern.from_dead_neurons(arch, list(choice))
        for choice in itertools.product(*per_layer)
    ]
    origin = [frozenset(range(width)) for width in arch.hidden]
    patterns.append(ZeroPattern.from_dead_neurons(arch, origin))
    return sorted(patterns, key=ZeroPattern.sort_key)


def enumerate_admissible_h1(arch: Architecture) -> List[ZeroPattern]:
    """The ``2^d`` patterns of a one-hidden-layer network, one per set of zero rows of ``W_1``."""
    if arch.H != 1:
        raise ValueError("enumerate_admissible_h1 needs a single hidden layer")
    return enumerate_admissible(arch)


@dataclass
class PatternReport:
    """How often one zero pattern occurs and which laws it breaks."""

    pattern: ZeroPattern
    count: int
    violates: List[str] = field(default_factory=list)
    admissible: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        data = self.pattern.to_dict()
        data.update(count=self.count, violates=list(self.violates), admissible=self.admissible)
        return data


def _admissible_set(arch: Architecture) -> Optional[set]:
    size = 1
    for width in arch.hidden:
        size *= 2**width
    if size > ADMISSIBLE_LIMIT:
        return None
    return set(enumerate_admissible(arch))


def pattern_census(
    solutions: Sequence[Solution],
    arch: Architecture,
    system: Optional[PolySystem] = None,
    opts: Optional[SolverOptions] = None,
) -> List[PatternReport]:
    """Group solutions by zero pattern, ordered canonically.

    For ``m = 1`` a solution that breaks a law is refined once more to
    ``1e-14`` on ``system`` (when given) and reclassified before it is
    counted as a violation. Unrealized admissible patterns of a
    one-hidden-layer network are listed with count 0.
    """
    opts = opts or SolverOptions()
    counts: Counter = Counter()
    for sol in solutions:
        pattern = ZeroPattern.from_solution(sol, arch)
        if violated_laws(pattern) and arch.m == 1 and system is not None:
            retried = classify(
                refine(system, sol.point, opts.polish_iters, tol=TIGHT_REFINE_TOL),
                opts.zero_tol,
                opts.real_tol,
            )
            pattern = ZeroPattern.from_solution(retried, arch)
            logger.debug("Re-refined a law-breaking solution (residual %.2e)", retried.residual)
        counts[pattern] += 1

    admissible = _admissible_set(arch)
    if arch.H == 1 and admissible is not None:
        for pattern in admissible:
            counts.setdefault(pattern, 0)

    reports = []
    for pattern in sorted(counts, key=ZeroPattern.sort_key):
        violates = violated_laws(pattern)
        if violates and counts[pattern]:
            logger.warning("Pattern breaks %s (%d solutions)", ", ".join(violates), counts[pattern])
        reports.append(
            PatternReport(
                pattern=pattern,
                count=counts[pattern],
                violates=violates,
                admissible=None if admissible is None else pattern in admissible,
            )
        )
    return reports


def pattern_solutions(
    system: PolySystem,
    arch: Architecture,
    pattern: ZeroPattern,
    opts: Optional[SolverOptions] = None,
) -> List[Solution]:
    """Critical points of ``system`` whose zero pattern is exactly ``pattern``.

    The zero weights are substituted and only the gradient equations of the
    free weights are tracked, which needs far fewer paths than the full
    system. Toric solutions of that square system are lifted, refined on
    ``system`` and kept when the refined point still has ``pattern``.
    """
    opts = opts or SolverOptions()
    zero = np.concatenate([a.ravel() for a in pattern.arrays()])
    if zero.size != arch.N or system.nvars != arch.N:
        raise ValueError(f"Pattern and system must both have {arch.N} weights")
    free = np.flatnonzero(~zero)
    compiled = CompiledSystem(system)
    if not free.size:
        origin = refine(system, np.zeros(arch.N), opts.polish_iters, compiled)
        return [classify(origin, opts.zero_tol, opts.real_tol)]

    restricted = PolySystem(
        [system[k].restrict(free) for k in free], [system.var_names[k] for k in free]
    )
    found, _ = solve_total_degree(restricted, opts)
    lifted = []
    for sol in found:
        if not sol.is_toric:
            continue
        point = np.zeros(arch.N, dtype=complex)
        point[free] = sol.point
        polished = refine(system, point, opts.polish_iters, compiled)
        refined = classify(polished, opts.zero_tol, opts.real_tol)
        if not np.isfinite(refined.residual):
            continue
        if ZeroPattern.from_solution(refined, arch) == pattern:
            lifted.append(refined)
    logger.info("Pattern has %d of %d restricted solutions", len(lifted), len(found))
    return dedupe(lifted, opts.dedupe_tol)


def census_count(reports: Sequence[PatternReport], pattern: ZeroPattern) -> int:
    return sum(r.count for r in reports if r.pattern == pattern)


def zero_row_buckets(reports: Sequence[PatternReport], arch: Architecture) -> List[int]:
    """Number of solutions with exactly ``r`` zero rows of ``W_1``, for ``r = 0..d_1``."""
    buckets = [0] * (arch.hidden[0] + 1)
    for report in reports:
        r = len(report.pattern.zero_rows(1))
        if r < len(buckets):
            buckets[r] += report.count
    return buckets


def census_anomalies(reports: Sequence[PatternReport], arch: Architecture) -> List[str]:
    """Law violations, inadmissible patterns and (for ``H = m = 1``) bucket overflows."""
    anomalies = []
    for report in reports:
        if not report.count:
            continue
        if report.violates:
            anomalies.append(f"{report.count} solution(s) break {', '.join(report.violates)}")
        elif report.admissible is False:
            anomalies.append(f"{report.count} solution(s) with an inadmissible pattern")
    if arch.H == 1 and arch.m == 1:
        limits = admissible_bucket_bounds(arch.hidden[0], arch.d_y)
        for r, (seen, limit) in enumerate(zip(zero_row_buckets(reports, arch), limits)):
            if seen > limit:
                anomalies.append(f"{seen} solutions with {r} zero rows exceed the bound {limit}")
    return anomalies


def census_markdown(reports: Sequence[PatternReport], arch: Architecture) -> str:
    """Markdown table with one ``*``/``0`` grid per weight matrix, last layer first."""
    layers = list(range(arch.H + 1, 0, -1))
    header = ["#"] + [f"W_{k}" for k in layers] + ["count", "violations"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for index, report in enumerate(reports, start=1):
        cells = [str(index)] + [report.pattern.grid(k) for k in layers]
        cells += [str(report.count), ", ".join(report.violates) or "-"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def census_json(reports: Sequence[PatternReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


@dataclass
class Counterexample:
    seed: int
    law: str
    solution: Dict[str, Any]


@dataclass
class ConjectureReport:
    """Outcome of running the structural checks on sampled instances."""

    arch: Architecture
    trials: int
    solutions_checked: int = 0
    passed: Dict[str, int] = field(default_factory=lambda: {law: 0 for law in LAWS})
    failed: Dict[str, int] = field(default_factory=lambda: {law: 0 for law in LAWS})
    counterexamples: List[Counterexample] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arch": self.arch.to_string(),
            "trials": self.trials,
            "solutions_checked": self.solutions_checked,
            "passed": dict(self.passed),
            "failed": dict(self.failed),
            "counterexamples": [
                {"seed": c.seed, "law": c.law, "solution": c.solution}
                for c in self.counterexamples
            ],
        }


def check_solutions(
    solutions: Sequence[Solution], arch: Architecture, seed: int, report: ConjectureReport
) -> None:
    """Run every law on every solution and fold the outcome into ``report``."""
    for sol in solutions:
        pattern = ZeroPattern.from_solution(sol, arch)
        report.solutions_checked += 1
        for law in LAWS:
            if _CHECKS[law](pattern):
                report.passed[law] += 1
            else:
                report.failed[law] += 1
                report.counterexamples.append(Counterexample(seed, law, sol.to_json_dict()))


def probe_conjecture_m2(
    arch: Architecture,
    trials: int = 5,
    seed: int = 0,
    opts: Optional[SolverOptions] = None,
) -> ConjectureReport:
    """Check the single-data-point laws on ``trials`` sampled instances of ``arch``.

    Intended for ``m = 2``; any other ``m`` runs the same checks.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    opts = opts or SolverOptions()
    report = ConjectureReport(arch=arch, trials=trials)
    for trial_seed in range(seed, seed + trials):
        system = build_gradient_system(arch, sample_instance(arch, trial_seed))
        solutions, _ = solve_total_degree(system, opts)
        check_solutions(solutions, arch, trial_seed, report)
    if report.holds:
        logger.info(
            "All laws hold on %d solutions of %s", report.solutions_checked, arch.to_string()
        )
    else:
        logger.warning(
            "%d counterexamples for %s", len(report.counterexamples), arch.to_string()
        )
    return report
