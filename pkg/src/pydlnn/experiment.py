"""Experiment runner: sampled trials per architecture, aggregated into table rows."""

import asyncio
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydlnn.bounds import BoundsReport, compute_bounds
from pydlnn.config import ExperimentConfig
from pydlnn.network import build_gradient_system, sample_instance
from pydlnn.patterns import census_anomalies, pattern_census, zero_row_buckets
from pydlnn.tables import TableRow, emit_table, table_title
from pydlnn.tracker import (
    Solution,
    TrackStats,
    conjugation_closed,
    real_parity_ok,
    solution_counts,
    solve_total_degree,
)

logger = logging.getLogger(__name__)

# Solver hook: takes a system and solver options, returns solutions and stats
SolveFunction = Callable[..., Tuple[List[Solution], TrackStats]]


@dataclass
class TrialSummary:
    """Counts and anomalies for one sampled instance."""

    seed: int
    n_c: int = 0
    n_cstar: int = 0
    n_r: int = 0
    stats: Optional[TrackStats] = None
    census: Dict[str, Any] = field(default_factory=dict)
    anomalies: List[str] = field(default_factory=list)
    failed: bool = False
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n_r > self.n_c or self.n_cstar > self.n_c:
            raise ValueError(
                f"Inconsistent counts N_C={self.n_c}, N_C*={self.n_cstar}, N_R={self.n_r}"
            )

    @property
    def counts(self) -> Tuple[int, int]:
        return self.n_c, self.n_cstar

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "N_C": self.n_c,
            "N_C*": self.n_cstar,
            "N_R": self.n_r,
            "stats": self.stats.to_dict() if self.stats else None,
            "census": self.census,
            "anomalies": list(self.anomalies),
            "failed": self.failed,
            "error": self.error,
        }


def _census_digest(reports, arch) -> Dict[str, Any]:
    realized = [r for r in reports if r.count]
    return {
        "patterns": len(realized),
        "zero_row_buckets": zero_row_buckets(reports, arch),
        "counts": [r.count for r in realized],
    }


def trial_anomalies(
    solutions: Sequence[Solution], stats: TrackStats, tol: float
) -> List[str]:
    """Per-trial checks that do not need the zero-pattern census."""
    anomalies = []
    if not real_parity_ok(solutions):
        anomalies.append("N_C - N_R is odd")
    if not conjugation_closed(solutions, tol):
        anomalies.append("solution set is not closed under conjugation")
    if stats.high_failure:
        anomalies.append(f"{100.0 * stats.failure_fraction:.1f}% of paths failed")
    return anomalies


def modal_counts(summaries: Sequence[TrialSummary]) -> Optional[Tuple[int, int]]:
    """Most frequent ``(N_C, N_C*)`` among successful trials; ties go to the earliest trial."""
    ok = [s for s in summaries if not s.failed]
    if not ok:
        return None
    tally = Counter(s.counts for s in ok)
    best = max(tally.values())
    return next(s.counts for s in ok if tally[s.counts] == best)


def flag_count_disagreement(summaries: Sequence[TrialSummary]) -> int:
    """Append an anomaly to each successful trial whose counts differ from the mode."""
    mode = modal_counts(summaries)
    if mode is None:
        return 0
    flagged = 0
    for summary in summaries:
        if not summary.failed and summary.counts != mode:
            summary.anomalies.append(
                f"counts (N_C, N_C*)={summary.counts} differ from the usual {mode}"
            )
            flagged += 1
    if flagged:
        logger.warning("%d trial(s) disagree with (N_C, N_C*)=%s", flagged, mode)
    return flagged


def build_table_row(
    cfg: ExperimentConfig, bounds: BoundsReport, summaries: Sequence[TrialSummary]
) -> Optional[TableRow]:
    """Fold trial summaries into one table row, or ``None`` when every trial failed."""
    mode = modal_counts(summaries)
    if mode is None:
        return None
    arch = cfg.arch
    return TableRow(
        d_i=arch.hidden[0],
        d_x=arch.d_x,
        d_y=arch.d_y,
        N=bounds.N,
        cbb=bounds.cbb,
        bkk=bounds.bkk_affine,
        n_c=mode[0],
        n_cstar=mode[1],
        max_n_r=max(s.n_r for s in summaries if not s.failed),
        b_c=bounds.b_c,
        b_cstar=bounds.b_cstar,
    )


class ExperimentRunner:
    """Solve sampled instances of one architecture and persist every artifact."""

    def __init__(self, config: ExperimentConfig, solve: Optional[SolveFunction] = None):
        """Initialize the runner.

        Args:
            config: Experiment settings; validated here
            solve: Optional replacement for :func:`solve_total_degree`
        """
        config.validate()
        self.config = config
        self.solve = solve or solve_total_degree
        self.run_dir = config.run_dir()
        self._semaphore: Optional[asyncio.Semaphore] = None

    def _write(self, name: str, text: str) -> None:
        (self.run_dir / name).write_text(text, encoding="utf-8")

    def _solve_trial(self, seed: int) -> TrialSummary:
        cfg = self.config
        opts = replace(cfg.solver, seed=seed)
        system = build_gradient_system(cfg.arch, sample_instance(cfg.arch, seed))
        self._write(f"system_{seed}.txt", system.to_text())

        solutions, stats = self.solve(system, opts)
        self._write(
            f"solutions_{seed}.jsonl",
            "".join(json.dumps(s.to_json_dict()) + "\n" for s in solutions),
        )
        n_c, n_cstar, n_r = solution_counts(solutions)
        reports = pattern_census(solutions, cfg.arch, system, opts)
        anomalies = trial_anomalies(solutions, stats, opts.dedupe_tol)
        anomalies += census_anomalies(reports, cfg.arch)
        for anomaly in anomalies:
            logger.warning("Trial %d: %s", seed, anomaly)
        return TrialSummary(
            seed=seed,
            n_c=n_c,
            n_cstar=n_cstar,
            n_r=n_r,
            stats=stats,
            census=_census_digest(reports, cfg.arch),
            anomalies=anomalies,
        )

    async def run_trial(self, seed: int) -> TrialSummary:
        """Solve one trial in a worker thread; errors produce a failed summary."""
        if self._semaphore is None:
            self._semaphore = asyncio.Semaphore(self.config.max_concurrent)
        async with self._semaphore:
            try:
                return await asyncio.to_thread(self._solve_trial, seed)
            except Exception as e:
                logger.error(f"Trial {seed} failed: {e}", exc_info=True)
                return TrialSummary(
                    seed=seed, failed=True, error=str(e), anomalies=[f"trial failed: {e}"]
                )

    async def run(self) -> List[TrialSummary]:
        """Run every trial and return the summaries in seed order."""
        summaries = list(
            await asyncio.gather(*(self.run_trial(s) for s in self.config.seeds()))
        )
        flag_count_disagreement(summaries)
        failed = sum(s.failed for s in summaries)
        if failed:
            logger.warning("%d of %d trials failed", failed, len(summaries))
        return summaries

    def finish(self, summaries: Sequence[TrialSummary]) -> Optional[TableRow]:
        """Compute bounds, then write ``summary.json`` and the one-row tables."""
        cfg = self.config
        bounds = compute_bounds(
            cfg.arch,
            seed=cfg.base_seed,
            force_bkk=cfg.force_bkk,
            bkk_max_vars=cfg.bkk_max_vars,
            threads=cfg.solver.threads,
        )
        row = build_table_row(cfg, bounds, summaries)
        summary = {
            "arch": cfg.arch.to_string(),
            "config_hash": cfg.config_hash(),
            "bounds": bounds.to_dict(),
            "row": None if row is None else asdict(row),
            "trials": [s.to_dict() for s in summaries],
        }
        self._write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if row is None:
            logger.error("Every trial of %s failed; no table written", cfg.arch.to_string())
            return None
        emit_table([row], "csv", self.run_dir / "table.csv")
        emit_table([row], "markdown", self.run_dir / "table.md", title=table_title(cfg.arch))
        return row

    async def __aenter__(self) -> "ExperimentRunner":
        """Create the run directory and record the configuration."""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._semaphore = asyncio.Semaphore(self.config.max_concurrent)
        self._write(
            "config.json", json.dumps(self.config.fingerprint(), indent=2, sort_keys=True) + "\n"
        )
        logger.info("Experiment %s in %s", self.config.arch.to_string(), self.run_dir)
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb) -> None:
        self._semaphore = None


async def run_experiment_async(
    cfg: ExperimentConfig, solve: Optional[SolveFunction] = None
) -> Tuple[List[TrialSummary], Optional[TableRow]]:
    async with ExperimentRunner(cfg, solve) as runner:
        summaries = await runner.run()
        row = runner.finish(summaries)
    return summaries, row


def run_experiment(
    cfg: ExperimentConfig, solve: Optional[SolveFunction] = None
) -> List[TrialSummary]:
    """Run all trials of ``cfg`` and write the artifacts under ``cfg.run_dir()``.

    Trials use seeds ``base_seed + index``; summaries come back in that order.
    """
    summaries, _ = asyncio.run(run_experiment_async(cfg, solve))
    return summaries


def run_sweep(
    configs: Sequence[ExperimentConfig], solve: Optional[SolveFunction] = None
) -> List[TableRow]:
    """One table row per configuration, in input order; fully failed runs are skipped."""
    rows = []
    for cfg in configs:
        _, row = asyncio.run(run_experiment_async(cfg, solve))
        if row is not None:
            rows.append(row)
    return rows

