"""Command line interface: ``dlnn``."""

import json
import logging
from pathlib import Path
from typing import Annotated, List, Optional

import typer

from pydlnn.bounds import compute_bounds
from pydlnn.config import ExperimentConfig, SolverOptions, load_env, read_sweep_file
from pydlnn.experiment import run_sweep
from pydlnn.network import Architecture, build_gradient_system, sample_instance
from pydlnn.patterns import (
    census_anomalies,
    census_json,
    census_markdown,
    pattern_census,
    probe_conjecture_m2,
)
from pydlnn.polynomial import PolySystem
from pydlnn.reduced import solve_reduced
from pydlnn.tables import (
    FORMATS,
    emit_table,
    load_reference,
    parse_csv,
    table_title,
    verify_against_reference,
)
from pydlnn.tracker import Solution, solution_counts, solve_total_degree

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="dlnn",
    help="Critical points of regularized deep linear networks.",
    no_args_is_help=True,
    add_completion=False,
)

ArchOption = Annotated[
    str, typer.Option("--arch", "-a", help="Architecture, e.g. H=1,m=1,dx=2,dy=2,d=2")
]
SeedOption = Annotated[int, typer.Option("--seed", "-s", help="Sampling seed")]


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False,
    env_file: Annotated[
        Optional[Path], typer.Option("--env-file", help="Read DLNN_* settings from this file")
    ] = None,
) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        load_env(env_file)
    except ValueError as e:
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(2) from e


def _parse_arch(text: str) -> Architecture:
    try:
        return Architecture.parse(text)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--arch") from e


def _solver_options(
    seed: int,
    residual_tol: Optional[float] = None,
    max_paths: Optional[int] = None,
    threads: Optional[int] = None,
) -> SolverOptions:
    opts = SolverOptions(seed=seed, max_paths=max_paths)
    if residual_tol is not None:
        opts.residual_tol = residual_tol
    if threads is not None:
        opts.threads = threads
    try:
        opts.validate()
    except ValueError as e:
        raise typer.BadParameter(str(e)) from e
    return opts


def _write_or_echo(text: str, output: Optional[Path]) -> None:
    if output is None:
        typer.echo(text, nl=False)
    else:
        output.write_text(text, encoding="utf-8")
        logger.info("Wrote %s", output)


def _solutions_jsonl(solutions: List[Solution]) -> str:
    return "".join(json.dumps(s.to_json_dict()) + "\n" for s in solutions)


def _architectures(arch: Optional[List[str]], config: Optional[Path]) -> List[Architecture]:
    archs = [_parse_arch(a) for a in arch or []]
    if config is not None:
        try:
            archs += read_sweep_file(config)
        except (OSError, ValueError) as e:
            raise typer.BadParameter(str(e), param_hint="--config") from e
    if not archs:
        raise typer.BadParameter("Give --arch or --config")
    return archs


@app.command()
def generate(
    arch: ArchOption,
    seed: SeedOption = 0,
    output: Annotated[Optional[Path], typer.Option("--output", "-o")] = None,
    instance: Annotated[
        Optional[Path], typer.Option("--instance", help="Also write the sampled data as JSON")
    ] = None,
) -> None:
    """Sample a training instance and write its gradient system."""
    architecture = _parse_arch(arch)
    inst = sample_instance(architecture, seed)
    system = build_gradient_system(architecture, inst)
    if instance is not None:
        instance.write_text(json.dumps(inst.to_dict(), indent=2) + "\n", encoding="utf-8")
    _write_or_echo(system.to_text(), output)


@app.command()
def bounds(
    arch: Annotated[Optional[List[str]], typer.Option("--arch", "-a")] = None,
    config: Annotated[Optional[Path], typer.Option("--config", "-c")] = None,
    seed: SeedOption = 0,
    force_bkk: Annotated[bool, typer.Option("--force-bkk")] = False,
    bkk_max_vars: Annotated[int, typer.Option("--bkk-max-vars")] = 12,
    threads: Annotated[Optional[int], typer.Option("--threads")] = None,
) -> None:
    """Print N, CBB, BKK (torus and affine), B_C* and B_C as CSV."""
    opts = _solver_options(seed, threads=threads)
    typer.echo("arch,N,CBB,BKK_torus,BKK_affine,B_C*,B_C")
    for architecture in _architectures(arch, config):
        report = compute_bounds(
            architecture,
            seed=seed,
            force_bkk=force_bkk,
            bkk_max_vars=bkk_max_vars,
            threads=opts.threads,
        )
        typer.echo(f'"{architecture.to_string()}",' + ",".join(report.csv_fields()))


@app.command()
def solve(
    system_file: Annotated[Path, typer.Argument(help="System in the text format of `generate`")],
    seed: SeedOption = 0,
    residual_tol: Annotated[Optional[float], typer.Option("--residual-tol")] = None,
    max_paths: Annotated[Optional[int], typer.Option("--max-paths")] = None,
    threads: Annotated[Optional[int], typer.Option("--threads")] = None,
    output: Annotated[Optional[Path], typer.Option("--output", "-o")] = None,
) -> None:
    """Solve a system by total-degree homotopy and write the solutions as JSON lines."""
    try:
        system = PolySystem.from_text(system_file.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(2) from e
    opts = _solver_options(seed, residual_tol, max_paths, threads)
    solutions, stats = solve_total_degree(system, opts)
    _write_or_echo(_solutions_jsonl(solutions), output)
    n_c, n_cstar, n_r = solution_counts(solutions)
    typer.echo(f"N_C={n_c} N_C*={n_cstar} N_R={n_r} {json.dumps(stats.to_dict())}", err=True)


@app.command()
def reduce(
    arch: ArchOption,
    seed: SeedOption = 0,
    threads: Annotated[Optional[int], typer.Option("--threads")] = None,
    output: Annotated[Optional[Path], typer.Option("--output", "-o")] = None,
) -> None:
    """Toric critical points of an H=1, m=1 network from the reduced system."""
    architecture = _parse_arch(arch)
    if architecture.H != 1 or architecture.m != 1:
        raise typer.BadParameter("The reduced system needs H=1 and m=1", param_hint="--arch")
    opts = _solver_options(seed, threads=threads)
    solutions = solve_reduced(architecture, sample_instance(architecture, seed), opts)
    _write_or_echo(_solutions_jsonl(solutions), output)
    typer.echo(f"N_C*={len(solutions)} N_R*={sum(s.is_real for s in solutions)}", err=True)


def _experiment_configs(
    arch: Optional[List[str]],
    config: Optional[Path],
    trials: int,
    seed: int,
    output: Optional[Path],
    force_bkk: bool,
    max_concurrent: int,
) -> List[ExperimentConfig]:
    configs = []
    for architecture in _architectures(arch, config):
        cfg = ExperimentConfig(
            arch=architecture,
            trials=trials,
            base_seed=seed,
            force_bkk=force_bkk,
            max_concurrent=max_concurrent,
        )
        if output is not None:
            cfg.output = output
        try:
            cfg.validate()
        except ValueError as e:
            raise typer.BadParameter(str(e)) from e
        configs.append(cfg)
    return configs


@app.command()
def experiment(
    arch: Annotated[Optional[List[str]], typer.Option("--arch", "-a")] = None,
    config: Annotated[Optional[Path], typer.Option("--config", "-c", help="Sweep file")] = None,
    trials: Annotated[int, typer.Option("--trials", "-n")] = 20,
    seed: SeedOption = 0,
    output: Annotated[Optional[Path], typer.Option("--output", "-o", help="Run root")] = None,
    fmt: Annotated[str, typer.Option("--format", "-f")] = "markdown",
    table: Annotated[Optional[Path], typer.Option("--table", help="Write the table here")] = None,
    force_bkk: Annotated[bool, typer.Option("--force-bkk")] = False,
    max_concurrent: Annotated[int, typer.Option("--max-concurrent")] = 1,
) -> None:
    """Run sampled trials for each architecture and print the result table."""
    if fmt not in FORMATS:
        raise typer.BadParameter(f"Expected one of {', '.join(FORMATS)}", param_hint="--format")
    configs = _experiment_configs(arch, config, trials, seed, output, force_bkk, max_concurrent)
    rows = run_sweep(configs)
    if not rows:
        typer.secho("Every trial failed", fg=typer.colors.RED, err=True)
        raise typer.Exit(1)
    text = emit_table(rows, fmt, table)
    if table is None:
        typer.echo(text, nl=False)


@app.command("verify-patterns")
def verify_patterns(
    arch: ArchOption,
    m: Annotated[
        Optional[int], typer.Option("--m", help="Override the number of data points")
    ] = None,
    trials: Annotated[int, typer.Option("--trials", "-n")] = 1,
    seed: SeedOption = 0,
    as_json: Annotated[bool, typer.Option("--json", help="Emit JSON instead of Markdown")] = False,
    threads: Annotated[Optional[int], typer.Option("--threads")] = None,
) -> None:
    """Census of zero patterns; exits 1 when a structural law is broken."""
    architecture = _parse_arch(arch)
    if m is not None:
        architecture = architecture.with_m(m)
    opts = _solver_options(seed, threads=threads)

    if architecture.m > 1:
        report = probe_conjecture_m2(architecture, trials=trials, seed=seed, opts=opts)
        typer.echo(json.dumps(report.to_dict(), indent=2))
        if not report.holds:
            raise typer.Exit(1)
        return

    broken = False
    for trial_seed in range(seed, seed + trials):
        system = build_gradient_system(architecture, sample_instance(architecture, trial_seed))
        solutions, _ = solve_total_degree(system, opts)
        reports = pattern_census(solutions, architecture, system, opts)
        if as_json:
            typer.echo(census_json(reports))
        else:
            typer.echo(f"## seed {trial_seed}\n")
            typer.echo(census_markdown(reports, architecture))
        for anomaly in census_anomalies(reports, architecture):
            typer.secho(f"seed {trial_seed}: {anomaly}", fg=typer.colors.RED, err=True)
            broken = True
    if broken:
        raise typer.Exit(1)


@app.command("verify-table")
def verify_table(
    rows_file: Annotated[
        Optional[Path], typer.Option("--rows", help="CSV written by `experiment`")
    ] = None,
    arch: Annotated[Optional[List[str]], typer.Option("--arch", "-a")] = None,
    config: Annotated[Optional[Path], typer.Option("--config", "-c")] = None,
    trials: Annotated[int, typer.Option("--trials", "-n")] = 20,
    seed: SeedOption = 0,
    output: Annotated[Optional[Path], typer.Option("--output", "-o")] = None,
    reference: Annotated[
        Optional[Path], typer.Option("--reference", help="Markdown reference tables")
    ] = None,
    title: Annotated[
        Optional[str], typer.Option("--table-title", help="Reference section, e.g. 'H=1, m=1'")
    ] = None,
) -> None:
    """Compare computed rows with the reference tables; exits 1 on any difference."""
    try:
        tables = load_reference(reference)
    except (OSError, ValueError) as e:
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(2) from e

    if rows_file is not None:
        if title is None:
            raise typer.BadParameter("--table-title is required with --rows")
        try:
            groups = {title: parse_csv(rows_file.read_text(encoding="utf-8"))}
        except (OSError, ValueError) as e:
            typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
            raise typer.Exit(2) from e
    else:
        configs = _experiment_configs(arch, config, trials, seed, output, False, 1)
        groups = {}
        for cfg in configs:
            key = title or table_title(cfg.arch)
            groups.setdefault(key, []).extend(run_sweep([cfg]))

    ok = True
    for key, computed in groups.items():
        try:
            report = verify_against_reference(computed, tables, key)
        except ValueError as e:
            typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
            raise typer.Exit(2) from e
        typer.echo(f"[{key}] {report.to_text()}")
        ok = ok and report.ok
    if not ok:
        raise typer.Exit(1)
