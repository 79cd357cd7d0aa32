"""Configuration handling for pydlnn."""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from pydlnn.network import Architecture

logger = logging.getLogger(__name__)

THREADS_ENV = "DLNN_THREADS"
OUTPUT_ENV = "DLNN_OUTPUT"
DEFAULT_OUTPUT = "runs"


def _env_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        threads = int(raw)
    except ValueError as e:
        raise ValueError(f"{THREADS_ENV} must be an integer, got '{raw}'") from e
    if threads < 1:
        raise ValueError(f"{THREADS_ENV} must be at least 1, got {threads}")
    return threads


def load_env(dotenv_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Load a ``.env`` file and return the ``DLNN_*`` settings it provides.

    Returns:
        ``{"threads": int, "output": str}``.
    """
    load_dotenv(dotenv_path)
    return {
        "threads": _env_threads(),
        "output": os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT,
    }


@dataclass
class SolverOptions:
    """Path tracking and classification settings."""

    residual_tol: float = 1e-10
    dedupe_tol: float = 1e-8
    zero_tol: float = 1e-8
    real_tol: float = 1e-8
    singular_cond: float = 1e10
    seed: int = 0
    max_paths: Optional[int] = None  # None tracks every start path
    threads: int = field(default_factory=_env_threads)
    batch_size: int = 256
    t_end: float = 1e-6
    divergence_norm: float = 1e8
    escape_norm: float = 1e4
    max_steps: int = 20000
    min_step: float = 1e-12
    max_step: float = 0.1
    initial_step: float = 0.05
    corrector_iters: int = 3
    corrector_tol: float = 1e-9
    polish_iters: int = 20
    failure_warning: float = 0.1  # fraction of failed paths that triggers a warning

    def validate(self) -> None:
        """Validate solver settings."""
        for name in ("residual_tol", "dedupe_tol", "zero_tol", "real_tol", "corrector_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.singular_cond <= 1:
            raise ValueError("singular_cond must exceed 1")
        if self.max_paths is not None and self.max_paths < 1:
            raise ValueError("max_paths must be positive when given")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0 < self.t_end < 1:
            raise ValueError("t_end must lie strictly between 0 and 1")
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("Step sizes must satisfy 0 < min_step <= initial_step <= max_step")
        if self.escape_norm >= self.divergence_norm:
            raise ValueError("escape_norm must be smaller than divergence_norm")
        if self.max_steps < 1 or self.corrector_iters < 1 or self.polish_iters < 1:
            raise ValueError("Iteration limits must be positive")
        if not 0 <= self.failure_warning <= 1:
            raise ValueError("failure_warning must be a fraction")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentConfig:
    """Settings for a batch of sampled trials on one architecture."""

    arch: Architecture
    trials: int = 20
    base_seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: Path = field(default_factory=lambda: Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT))
    force_bkk: bool = False
    bkk_max_vars: int = 12
    max_concurrent: int = 1  # trials solved at the same time

    def validate(self) -> None:
        """Validate configuration settings."""
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        if self.bkk_max_vars < 1:
            raise ValueError("bkk_max_vars must be positive")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be at least 1")
        self.solver.validate()

    def fingerprint(self) -> Dict[str, Any]:
        """Everything that determines the results (worker counts excluded)."""
        solver = self.solver.to_dict()
        solver.pop("threads")
        return {
            "arch": self.arch.to_string(),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "solver": solver,
            "force_bkk": self.force_bkk,
            "bkk_max_vars": self.bkk_max_vars,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.fingerprint(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    def run_dir(self) -> Path:
        return Path(self.output) / self.config_hash()

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.trials)]


def read_sweep_file(path: Union[str, Path]) -> List[Architecture]:
    """Architectures listed one per line; ``#`` starts a comment."""
    architectures = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            architectures.append(Architecture.parse(line))
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: {e}") from e
    logger.debug("Read %d architectures from %s", len(architectures), path)
    return architectures
