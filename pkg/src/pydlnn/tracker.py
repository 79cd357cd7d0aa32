"""Total-degree homotopy continuation for square polynomial systems.

Paths start at the roots of ``x_i^{d_i} - 1`` and follow
``H(x, t) = gamma t G(x) + (1 - t) F(x)`` from ``t = 1`` to ``t = t_end``.
Each step is a fourth-order Runge-Kutta prediction along
``dx/dt = -H_x^{-1} H_t`` followed by a few Newton corrections. Paths are
advanced in numpy batches; batches run on a thread pool.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import prod
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pydlnn.compiled import CompiledSystem
from pydlnn.config import SolverOptions
from pydlnn.polynomial import PolySystem

logger = logging.getLogger(__name__)

REFINE_TOL = 1e-12
STAGNATION_TOL = 1e-14
# A corrector that does not shrink its update by this factor is rejected.
CONTRACTION = 0.5
# A rejected update is accepted as converged when the one before it was below this.
STALL_TOL = 1e-7
SUCCESSES_BEFORE_GROWTH = 5

_ACTIVE, _DONE, _DIVERGED, _FAILED = 0, 1, 2, 3


@dataclass
class Solution:
    """An accepted endpoint with its classification flags."""

    point: np.ndarray
    residual: float
    newton_iters: int = 0
    is_real: bool = False
    is_toric: bool = False
    zero_mask: Tuple[bool, ...] = ()
    condition_estimate: float = 0.0
    path_index: Optional[int] = None

    def __post_init__(self) -> None:
        self.point = np.asarray(self.point, dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.point))) if self.point.size else 0.0

    def to_json_dict(self) -> Dict[str, Any]:
        cond = self.condition_estimate
        return {
            "point": [[float(z.real), float(z.imag)] for z in self.point],
            "residual": float(self.residual),
            "is_real": bool(self.is_real),
            "is_toric": bool(self.is_toric),
            "zero_mask": [int(b) for b in self.zero_mask],
            "condition_estimate": float(cond) if np.isfinite(cond) else None,
            "newton_iters": int(self.newton_iters),
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "Solution":
        cond = data.get("condition_estimate")
        return cls(
            point=np.array([complex(re, im) for re, im in data["point"]]),
            residual=float(data["residual"]),
            newton_iters=int(data.get("newton_iters", 0)),
            is_real=bool(data["is_real"]),
            is_toric=bool(data["is_toric"]),
            zero_mask=tuple(bool(b) for b in data["zero_mask"]),
            condition_estimate=float("inf") if cond is None else float(cond),
        )


@dataclass
class TrackStats:
    """Path outcome counts for one solve."""

    paths_tracked: int = 0
    paths_converged: int = 0
    paths_diverged: int = 0
    paths_failed: int = 0
    wall_time: float = 0.0
    high_failure: bool = False
    singular_points: List[Solution] = field(default_factory=list)

    @property
    def failure_fraction(self) -> float:
        return self.paths_failed / self.paths_tracked if self.paths_tracked else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "paths_tracked": self.paths_tracked,
            "paths_converged": self.paths_converged,
            "paths_diverged": self.paths_diverged,
            "paths_failed": self.paths_failed,
            "paths_singular": len(self.singular_points),
            "wall_time": round(self.wall_time, 3),
            "high_failure": self.high_failure,
        }


def _batched_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A[k] x[k] = b[k]``; rows with a singular matrix come back as NaN."""
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(b.shape, np.nan, dtype=complex)
        for k in range(A.shape[0]):
            try:
                out[k] = np.linalg.solve(A[k], b[k])
            except np.linalg.LinAlgError:
                continue
        return out


def _max_abs(values: np.ndarray) -> np.ndarray:
    return np.max(np.abs(values), axis=1)


class _Homotopy:
    """Batched evaluation of the gamma-trick homotopy."""

    def __init__(self, compiled: CompiledSystem, degrees: Sequence[int], gamma: complex):
        self.compiled = compiled
        self.degrees = np.asarray(degrees, dtype=int)
        self.gamma = gamma
        self._diag = np.arange(compiled.nvars)

    def evaluate(
        self, X: np.ndarray, t: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(H, H_x, H_t)`` at points ``X`` (batch, n) and times ``t`` (batch,)."""
        F, JF = self.compiled.evaluate_with_jacobian(X)
        lower = X ** (self.degrees - 1)
        G = lower * X - 1.0
        tt = t[:, None]
        H = self.gamma * tt * G + (1.0 - tt) * F
        Hx = (1.0 - t)[:, None, None] * JF
        Hx[:, self._diag, self._diag] += self.gamma * tt * (self.degrees * lower)
        Ht = self.gamma * G - F
        return H, Hx, Ht

    def velocity(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        _, Hx, Ht = self.evaluate(X, t)
        return -_batched_solve(Hx, Ht)


def start_points(degrees: Sequence[int], indices: np.ndarray) -> np.ndarray:
    """Roots of ``x_i^{d_i} = 1`` for the given flat path indices (mixed radix)."""
    digits = np.unravel_index(indices, tuple(degrees))
    columns = [np.exp(2j * np.pi * k / d) for k, d in zip(digits, degrees)]
    return np.stack(columns, axis=1).astype(complex)


def _newton(
    compiled: CompiledSystem, X: np.ndarray, max_iters: int, tol: float = REFINE_TOL
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Newton's method on ``F`` for every row of ``X``.

    A row stops once its residual is below ``tol (1 + |x|)``, its update
    stagnates, or its Jacobian is singular.

    Returns:
        ``(points, iterations, residuals, jacobians)``.
    """
    X = np.array(X, dtype=complex)
    batch = X.shape[0]
    iters = np.zeros(batch, dtype=int)
    if batch == 0:
        empty = np.zeros((0, compiled.npolys, compiled.nvars), dtype=complex)
        return X, iters, np.zeros(0), empty
    live = np.ones(batch, dtype=bool)
    F, J = compiled.evaluate_with_jacobian(X)
    residual = _max_abs(F)
    for _ in range(max_iters):
        live &= residual >= tol * (1.0 + _max_abs(X))
        if not live.any():
            break
        rows = np.flatnonzero(live)
        delta = _batched_solve(J[rows], F[rows])
        finite = np.all(np.isfinite(delta), axis=1)
        live[rows[~finite]] = False
        rows, delta = rows[finite], delta[finite]
        if not rows.size:
            break
        X[rows] -= delta
        iters[rows] += 1
        F[rows], J[rows] = compiled.evaluate_with_jacobian(X[rows])
        residual[rows] = _max_abs(F[rows])
        step = _max_abs(delta)
        live[rows[step <= STAGNATION_TOL * (1.0 + _max_abs(X[rows]))]] = False
    return X, iters, residual, J


def _condition(J: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cond = np.linalg.cond(J)
    return np.where(np.isfinite(cond), cond, np.inf)


class _BatchTracker:
    """Tracks one batch of paths from ``t = 1`` to ``t_end``."""

    def __init__(self, homotopy: _Homotopy, opts: SolverOptions):
        self.homotopy = homotopy
        self.opts = opts

    def _predict(self, X: np.ndarray, t: np.ndarray, h: np.ndarray) -> np.ndarray:
        f = self.homotopy.velocity
        hh = h[:, None]
        k1 = f(X, t)
        k2 = f(X - 0.5 * hh * k1, t - 0.5 * h)
        k3 = f(X - 0.5 * hh * k2, t - 0.5 * h)
        k4 = f(X - hh * k3, t - h)
        return X - hh * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    def _correct(self, X: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Newton on ``H(., t)``; returns corrected points and a success mask."""
        X = X.copy()
        ok = np.all(np.isfinite(X), axis=1)
        converged = np.zeros(X.shape[0], dtype=bool)
        previous = np.full(X.shape[0], np.inf)
        for _ in range(self.opts.corrector_iters):
            rows = np.flatnonzero(ok & ~converged)
            if not rows.size:
                break
            H, Hx, _ = self.homotopy.evaluate(X[rows], t[rows])
            delta = _batched_solve(Hx, H)
            size = _max_abs(delta)
            bad = ~np.isfinite(size) | (size > CONTRACTION * previous[rows])
            stalled = bad & np.isfinite(size)
            stalled &= previous[rows] < STALL_TOL * (1.0 + _max_abs(X[rows]))
            converged[rows[stalled]] = True
            ok[rows[bad & ~stalled]] = False
            keep = ~bad
            good = rows[keep]
            X[good] -= delta[keep]
            previous[good] = size[keep]
            converged[good] = size[keep] < self.opts.corrector_tol * (
                1.0 + _max_abs(X[good])
            )
        return X, ok & converged

    def track(self, X0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Advance every path; returns endpoints and per-path status codes."""
        opts = self.opts
        X = np.array(X0, dtype=complex)
        batch = X.shape[0]
        t = np.ones(batch)
        h = np.full(batch, opts.initial_step)
        streak = np.zeros(batch, dtype=int)
        status = np.full(batch, _ACTIVE)

        for _ in range(opts.max_steps):
            active = np.flatnonzero(status == _ACTIVE)
            if not active.size:
                break
            last = h[active] >= t[active] - opts.t_end
            target = np.where(last, opts.t_end, t[active] - h[active])
            step = t[active] - target
            with np.errstate(all="ignore"):
                predicted = self._predict(X[active], t[active], step)
                corrected, success = self._correct(predicted, target)

            won, lost = active[success], active[~success]
            X[won] = corrected[success]
            t[won] = target[success]
            streak[won] += 1
            grow = won[streak[won] >= SUCCESSES_BEFORE_GROWTH]
            h[grow] = np.minimum(2.0 * h[grow], opts.max_step)
            streak[grow] = 0

            h[lost] *= 0.5
            streak[lost] = 0
            status[lost[h[lost] < opts.min_step]] = _FAILED

            norms = _max_abs(X[won])
            status[won[norms > opts.divergence_norm]] = _DIVERGED
            finished = won[(norms <= opts.divergence_norm) & (t[won] == opts.t_end)]
            status[finished] = _DONE

        status[status == _ACTIVE] = _FAILED
        return X, status


def _classify_flags(
    point: np.ndarray, zero_tol: float, real_tol: float
) -> Tuple[Tuple[bool, ...], bool]:
    scale = float(np.max(np.abs(point))) if point.size else 0.0
    zero_mask = tuple(bool(v) for v in np.abs(point) < zero_tol * (1.0 + scale))
    is_real = bool(np.max(np.abs(point.imag), initial=0.0) < real_tol * (1.0 + scale))
    return zero_mask, is_real


def classify(solution: Solution, zero_tol: float = 1e-8, real_tol: float = 1e-8) -> Solution:
    """Copy of ``solution`` with ``zero_mask``, ``is_toric`` and ``is_real`` filled in."""
    zero_mask, is_real = _classify_flags(solution.point, zero_tol, real_tol)
    return replace(solution, zero_mask=zero_mask, is_toric=not any(zero_mask), is_real=is_real)


def refine(
    system: PolySystem,
    point: Sequence[complex],
    max_iters: int = 20,
    compiled: Optional[CompiledSystem] = None,
    tol: float = REFINE_TOL,
) -> Solution:
    """Newton-polish ``point`` on ``system`` and record the final condition number.

    A numerically singular Jacobian yields ``condition_estimate == inf``.
    """
    compiled = compiled or CompiledSystem(system)
    X, iters, residual, J = _newton(compiled, np.atleast_2d(point), max_iters, tol)
    return Solution(
        point=X[0],
        residual=float(residual[0]),
        newton_iters=int(iters[0]),
        condition_estimate=float(_condition(J[:1])[0]),
    )


def dedupe(solutions: Sequence[Solution], tol: float = 1e-8) -> List[Solution]:
    """Merge solutions closer than ``tol (1 + |x|)`` in max norm.

    The lowest-residual member of each cluster is kept, so the survivors do
    not depend on the input order.
    """
    ordered = sorted(
        solutions,
        key=lambda s: (s.residual, tuple(np.round(np.r_[s.point.real, s.point.imag], 12))),
    )
    kept: List[Solution] = []
    reps = np.zeros((0, ordered[0].point.size), dtype=complex) if ordered else None
    for sol in ordered:
        if reps is not None and reps.shape[0]:
            distance = np.max(np.abs(reps - sol.point), axis=1)
            if np.any(distance < tol * (1.0 + sol.norm)):
                continue
        kept.append(sol)
        reps = np.vstack([reps, sol.point[None, :]]) if reps is not None else None
    return kept


def conjugation_closed(solutions: Sequence[Solution], tol: float = 1e-8) -> bool:
    """Whether the conjugate of every solution is (to tolerance) also a solution."""
    if not solutions:
        return True
    points = np.array([s.point for s in solutions])
    for sol in solutions:
        distance = np.max(np.abs(points - np.conj(sol.point)), axis=1)
        if not np.any(distance < tol * (1.0 + sol.norm)):
            return False
    return True


def real_parity_ok(solutions: Sequence[Solution]) -> bool:
    """Non-real solutions of a real system pair up, so ``N_C - N_R`` is even."""
    return (len(solutions) - sum(s.is_real for s in solutions)) % 2 == 0


def solution_counts(solutions: Sequence[Solution]) -> Tuple[int, int, int]:
    """``(N_C, N_C*, N_R)`` for a list of accepted solutions."""
    return (
        len(solutions),
        sum(1 for s in solutions if s.is_toric),
        sum(1 for s in solutions if s.is_real),
    )


def solve_total_degree(
    system: PolySystem, opts: Optional[SolverOptions] = None
) -> Tuple[List[Solution], TrackStats]:
    """All isolated nonsingular solutions of ``system`` found from ``prod(d_i)`` start paths.

    Solutions whose Jacobian condition exceeds ``opts.singular_cond`` are not
    returned; they are listed in ``stats.singular_points``.
    """
    opts = opts or SolverOptions()
    opts.validate()
    system.require_square()
    degrees = system.degrees()
    if min(degrees) < 1:
        raise ValueError("Every polynomial must have positive degree")

    started = time.perf_counter()
    compiled = CompiledSystem(system)
    rng = np.random.Generator(np.random.PCG64(opts.seed))
    gamma = complex(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
    homotopy = _Homotopy(compiled, degrees, gamma)

    total = prod(degrees)
    npaths = total if opts.max_paths is None else min(total, opts.max_paths)
    chunks = [
        np.arange(start, min(start + opts.batch_size, npaths))
        for start in range(0, npaths, opts.batch_size)
    ]
    logger.info("Tracking %d of %d paths in %d batches", npaths, total, len(chunks))

    def run(indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _BatchTracker(homotopy, opts).track(start_points(degrees, indices))

    if opts.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]

    endpoints = np.vstack([r[0] for r in results]) if results else np.zeros((0, system.nvars))
    status = np.concatenate([r[1] for r in results]) if results else np.zeros(0, dtype=int)

    stats = TrackStats(paths_tracked=npaths)
    done = np.flatnonzero(status == _DONE)
    stats.paths_diverged = int(np.sum(status == _DIVERGED))
    failed = np.flatnonzero(status == _FAILED)

    with np.errstate(all="ignore"):
        polished, iters, residual, J = _newton(compiled, endpoints[done], opts.polish_iters)
        scale = np.maximum(compiled.term_scale(polished), 1.0) if done.size else np.zeros(0)
    accepted = np.isfinite(residual) & (residual < opts.residual_tol * scale)
    rejected = done[~accepted]
    escaped = (
        _max_abs(endpoints[rejected]) > opts.escape_norm
        if rejected.size
        else np.zeros(0, dtype=bool)
    )
    stats.paths_diverged += int(np.sum(escaped))
    if failed.size:
        failed_escaped = _max_abs(endpoints[failed]) > opts.escape_norm
        stats.paths_diverged += int(np.sum(failed_escaped))
        failed = failed[~failed_escaped]
    stats.paths_failed = int(failed.size + np.sum(~escaped))
    stats.paths_converged = int(np.sum(accepted))

    cond = _condition(J[accepted]) if np.any(accepted) else np.zeros(0)
    regular: List[Solution] = []
    singular: List[Solution] = []
    for k, row in enumerate(np.flatnonzero(accepted)):
        sol = classify(
            Solution(
                point=polished[row],
                residual=float(residual[row]),
                newton_iters=int(iters[row]),
                condition_estimate=float(cond[k]),
                path_index=int(done[row]),
            ),
            opts.zero_tol,
            opts.real_tol,
        )
        (singular if sol.condition_estimate > opts.singular_cond else regular).append(sol)

    solutions = dedupe(regular, opts.dedupe_tol)
    stats.singular_points = dedupe(singular, opts.dedupe_tol)
    stats.wall_time = time.perf_counter() - started
    if stats.failure_fraction > opts.failure_warning:
        stats.high_failure = True
        logger.warning(
            "%.1f%% of paths failed (%d of %d)",
            100.0 * stats.failure_fraction,
            stats.paths_failed,
            stats.paths_tracked,
        )
    if stats.singular_points:
        logger.warning("%d singular endpoints excluded", len(stats.singular_points))
    logger.info(
        "%d solutions from %d converged paths (%d diverged, %d failed) in %.2fs",
        len(solutions),
        stats.paths_converged,
        stats.paths_diverged,
        stats.paths_failed,
        stats.wall_time,
    )
    return solutions, stats
