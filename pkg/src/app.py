import logging
from dataclasses import dataclass, field
from pathlib import Path

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .analytic import (
    closed_form_survival,
    geometric_moments,
    independent_variance,
    laplace_transforms,
    limit_survival,
    mean_random_sum,
    scaled_limit_diagnostics,
    transform_moments,
    variance_random_sum,
)
from .applications import (
    GeigerModel,
    RedundantModel,
    SsqsModel,
    geiger_characteristics,
    redundant_characteristics,
    ssqs_characteristics,
)
from .errors import RandomSumError
from .io_utils import build_law, build_model, read_scenario, write_curve, write_json
from .models.requests import Scenario
from .models.responses import ComparisonResult, Provenance, SimulationResult, Summary
from .selftest import run_selftest
from .settings import get_settings
from .simulate import (
    AnalyticTarget,
    ComparisonVerdict,
    SimReport,
    compare_reports,
    simulate_geiger,
    simulate_random_sum,
    simulate_redundant,
    simulate_ssqs,
)
from .steplaw import JointStepLaw, step_moments, validate_law
from .volterra import SurvivalCurve, equation_residual, solve_survival

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(levelname)s %(message)s",
    handlers=[logging.FileHandler(get_settings().log_file), logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

# Rich console for pretty output
console = Console()

# Typer app
app = typer.Typer(
    name="stopped-sums",
    help="Stopped random sums: moments, survival curves, simulation and model checks",
)

EXIT_ERROR = 1
EXIT_COMPARISON_FAILED = 2


@dataclass
class Evaluation:
    """Everything one scenario produced before it is written out."""

    symbols: dict[str, float | None] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    survival: SurvivalCurve | None = None
    report: SimReport | None = None
    target: AnalyticTarget | None = None
    verdict: ComparisonVerdict | None = None


def _law_symbols(law: JointStepLaw, scenario: Scenario, evaluation: Evaluation) -> None:
    """Transform values and the scaled-limit diagnostic of a step law."""
    outputs = scenario.outputs
    if "laplace" in outputs:
        transforms = laplace_transforms(law)
        for z in scenario.laplace_z:
            evaluation.symbols[f"psi({z:g})"] = float(transforms.psi(z))
            evaluation.symbols[f"psi0({z:g})"] = float(transforms.psi0(z))
            evaluation.symbols[f"phi({z:g})"] = float(transforms.phi(z))
        from_transform = transform_moments(transforms)
        evaluation.symbols["mean_S_transform"] = from_transform.mean
        evaluation.symbols["var_S_transform"] = from_transform.variance
    if "limit_check" in outputs:
        m = step_moments(law)
        evaluation.symbols["limit_rate"] = limit_survival(m).rate
        evaluation.symbols["limit_sup_error"] = scaled_limit_diagnostics(law, scenario.limit_z)


def _evaluate_random_sum(
    scenario: Scenario, base_dir: Path, t_max: float, h: float, n: int, seed: int
) -> Evaluation:
    law = build_law(scenario.law, base_dir)
    evaluation = Evaluation(warnings=validate_law(law))
    outputs = scenario.outputs
    m = step_moments(law)
    mean_nu, var_nu = geometric_moments(m.q)
    mean_s, var_s = mean_random_sum(m), variance_random_sum(m)
    if "moments" in outputs:
        evaluation.symbols.update(
            q=m.q,
            a=m.a,
            sigma2=m.sigma2,
            a0=m.a0,
            mean_nu=mean_nu,
            var_nu=var_nu,
            mean_S=mean_s,
            var_S=var_s,
            var_S_independent_formula=independent_variance(m),
        )

    exact = closed_form_survival(law)
    if exact is not None:
        evaluation.symbols["closed_form_rate"] = exact.rate
    if "survival" in outputs:
        evaluation.survival = solve_survival(law, t_max, h)
        evaluation.symbols["survival_residual"] = equation_residual(law, evaluation.survival)
        if exact is not None:
            evaluation.symbols["survival_closed_form_error"] = evaluation.survival.sup_distance(
                exact
            )
    _law_symbols(law, scenario, evaluation)

    if "simulate" in outputs:
        evaluation.report = simulate_random_sum(law, n, seed, t_max, h)
        evaluation.target = AnalyticTarget(
            mean=mean_s,
            variance=var_s,
            survival=exact if exact is not None else evaluation.survival,
            scalars={"mean_nu": mean_nu},
        )
    return evaluation


def _evaluate_geiger(
    model: GeigerModel, scenario: Scenario, t_max: float, h: float, n: int, seed: int
) -> Evaluation:
    outputs = scenario.outputs
    evaluation = Evaluation(warnings=validate_law(model.step_law))
    want_curve = "survival" in outputs or "compare" in outputs
    result = geiger_characteristics(model, t_max, h, with_survival=want_curve)
    evaluation.symbols.update(
        q=result.q,
        a=result.a,
        sigma2=result.sigma2,
        a0=result.a0,
        mean_T=result.mean_T,
        var_T=result.var_T,
    )
    if "survival" in outputs:
        evaluation.survival = result.survival
    _law_symbols(model.step_law, scenario, evaluation)
    if "simulate" in outputs:
        evaluation.report = simulate_geiger(model, n, seed, t_max, h)
        evaluation.target = AnalyticTarget(
            mean=result.mean_T, variance=result.var_T, survival=result.survival
        )
    return evaluation


def _evaluate_redundant(
    model: RedundantModel, scenario: Scenario, t_max: float, h: float, n: int, seed: int
) -> Evaluation:
    outputs = scenario.outputs
    evaluation = Evaluation(warnings=validate_law(model.step_law))
    result = redundant_characteristics(
        model, with_survival="survival" in outputs, t_max=t_max, h=h
    )
    evaluation.symbols.update(
        q=result.q,
        a=result.a,
        sigma2=result.sigma2,
        a0=result.a0,
        mean_W1=result.mean_W1,
        mean_Wk=result.mean_Wk,
        var_W1=result.var_W1,
        var_Wk=result.var_Wk,
        alpha0_rate=result.alpha0_survival.rate,
        alpha1_rate=result.alpha1_survival.rate,
    )
    evaluation.survival = result.w1_survival
    _law_symbols(model.step_law, scenario, evaluation)
    if "simulate" in outputs:
        evaluation.report = simulate_redundant(model, n, seed, t_max, h)
        evaluation.target = AnalyticTarget(
            mean=result.mean_W1,
            variance=result.var_W1,
            survival=result.w1_survival,
            scalars={
                "mean_Wk": result.mean_Wk,
                "var_Wk": result.var_Wk,
                "mean_alpha0": result.alpha0_survival.mean,
                "mean_alpha1": result.alpha1_survival.mean,
            },
        )
    return evaluation


def _evaluate_ssqs(
    model: SsqsModel, scenario: Scenario, t_max: float, h: float, n: int, seed: int
) -> Evaluation:
    outputs = scenario.outputs
    evaluation = Evaluation()
    for name in ("survival", "laplace", "limit_check"):
        if name in outputs:
            evaluation.warnings.append(f"output {name!r} is not available for target ssqs")
    result = ssqs_characteristics(model)
    evaluation.symbols.update(
        q=result.q,
        b=result.b,
        rho=result.rho,
        p0=result.p0,
        p1=result.p1,
        p1_mm1=result.p1_mm1,
        mean_alpha0=result.mean_alpha0,
        mean_alpha1=result.mean_alpha1,
        mean_alpha=result.mean_alpha,
        mean_T=result.mean_T,
        mean_beta=result.mean_beta,
    )
    if "simulate" in outputs:
        evaluation.report = simulate_ssqs(model, n, seed, t_max, h)
        evaluation.target = AnalyticTarget(
            mean=result.mean_T,
            scalars={
                "mean_alpha": result.mean_alpha,
                "mean_beta": result.mean_beta,
                "mean_alpha0": result.mean_alpha0,
                "mean_alpha1": result.mean_alpha1,
                "frac_state0": result.p0,
                "frac_state1": result.p1,
                "p_alpha0_zero": result.q,
            },
        )
    return evaluation


def evaluate_scenario(
    scenario: Scenario, base_dir: Path, t_max: float, h: float, n: int, seed: int
) -> Evaluation:
    """Compute every requested output of a scenario (nothing is written here)."""
    if scenario.target == "random_sum":
        evaluation = _evaluate_random_sum(scenario, base_dir, t_max, h, n, seed)
    else:
        model = build_model(scenario.model, base_dir)
        evaluate = {
            "geiger": _evaluate_geiger,
            "redundant": _evaluate_redundant,
            "ssqs": _evaluate_ssqs,
        }[scenario.target]
        evaluation = evaluate(model, scenario, t_max, h, n, seed)
    if "compare" in scenario.outputs:
        evaluation.verdict = compare_reports(evaluation.report, evaluation.target)
    return evaluation


def write_outputs(
    evaluation: Evaluation,
    scenario_name: str,
    scenario: Scenario,
    out_dir: Path,
    fmt: str,
    t_max: float,
    h: float,
    seed: int,
) -> list[Path]:
    """Write summary.json and whatever curves, reports and verdicts exist."""
    written = []
    simulated = evaluation.report is not None
    summary = Summary(
        scenario=scenario_name,
        target=scenario.target,
        symbols=evaluation.symbols,
        provenance=Provenance(
            seed=seed if simulated else None,
            grid={"t_max": t_max, "h": h},
            version=__version__,
        ),
        warnings=evaluation.warnings,
    )
    write_json(summary, out_dir / "summary.json")
    written.append(out_dir / "summary.json")

    if evaluation.survival is not None:
        path = out_dir / f"survival.{fmt}"
        write_curve(evaluation.survival, path, fmt)
        written.append(path)

    if simulated:
        report = evaluation.report
        path = out_dir / f"empirical.{fmt}"
        write_curve(report.empirical_survival, path, fmt)
        written.append(path)
        result = SimulationResult(
            n=report.n,
            seed=report.seed,
            mean=report.mean,
            variance=report.variance,
            std_err_mean=report.std_err_mean,
            std_err_variance=report.std_err_variance,
            extra_scalars=report.extra_scalars,
        )
        write_json(result, out_dir / "simulation.json")
        written.append(out_dir / "simulation.json")

    if evaluation.verdict is not None:
        verdict = evaluation.verdict
        comparison = ComparisonResult(
            verdict=verdict.verdict,
            z_scores=verdict.z_scores,
            ks_statistic=verdict.ks_statistic,
            ks_critical=verdict.ks_critical,
            ks_pvalue=verdict.ks_pvalue,
            failures=verdict.failures,
        )
        write_json(comparison, out_dir / "comparison.json")
        written.append(out_dir / "comparison.json")
    return written


def _print_validation_error(error: ValidationError, path: Path) -> None:
    console.print(f"[red]✗ Invalid scenario {path}:[/red]", style="red")
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        console.print(f"  [yellow]{location or '<root>'}[/yellow]: {item['msg']}")


def _symbols_table(evaluation: Evaluation, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Symbol", style="cyan")
    table.add_column("Value", style="magenta")
    for name, value in evaluation.symbols.items():
        table.add_row(name, "n/a" if value is None else f"{value:.10g}")
    return table


def main_process(
    scenario_path: Path,
    out_dir: Path | None,
    seed: int | None,
    n: int | None,
    t_max: float | None,
    h: float | None,
    fmt: str,
) -> int:
    """Read, evaluate and write one scenario; returns the exit code."""
    settings = get_settings()

    console.print("[bold blue]Stopped random sums[/bold blue]")
    console.print()

    try:
        scenario = read_scenario(scenario_path)
    except ValidationError as e:
        _print_validation_error(e, scenario_path)
        logger.error(f"Scenario validation failed: {scenario_path}")
        return EXIT_ERROR
    except FileNotFoundError as e:
        console.print(f"[red]✗ Error: {e}[/red]")
        logger.error(f"Application error: {e}")
        return EXIT_ERROR

    # flags > scenario fields > settings
    grid = scenario.grid
    t_max = t_max if t_max is not None else (grid.t_max if grid else settings.t_max)
    h = h if h is not None else (grid.h if grid else settings.h)
    sim = scenario.sim
    n = n if n is not None else (sim.n if sim else settings.sim_n)
    seed = seed if seed is not None else (sim.seed if sim else settings.seed)
    out_dir = out_dir if out_dir is not None else settings.output_dir
    name = scenario.name or scenario_path.stem

    try:
        with Progress(
            SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console
        ) as progress:
            task = progress.add_task(f"Evaluating {name} ({scenario.target})...", total=None)
            evaluation = evaluate_scenario(
                scenario, scenario_path.parent, t_max, h, n, seed
            )
            progress.update(task, description=f"✓ Evaluated {name}")

            task = progress.add_task("Writing outputs...", total=None)
            written = write_outputs(evaluation, name, scenario, out_dir, fmt, t_max, h, seed)
            progress.update(task, description=f"✓ Wrote {len(written)} files to {out_dir}")
    except (RandomSumError, ValueError, RuntimeError, OSError) as e:
        console.print(f"[red]✗ Error: {e}[/red]")
        logger.error(f"Application error: {e}", exc_info=True)
        return EXIT_ERROR

    console.print()
    console.print(_symbols_table(evaluation, f"Scenario {name}"))
    for warning in evaluation.warnings:
        console.print(f"[yellow]⚠ {warning}[/yellow]")

    verdict = evaluation.verdict
    if verdict is not None:
        colour = "green" if verdict.passed else "red"
        console.print(f"\nComparison: [{colour}]{verdict.verdict}[/{colour}]")
        for failure in verdict.failures:
            console.print(f"  [red]{failure}[/red]")
        if not verdict.passed:
            return EXIT_COMPARISON_FAILED

    console.print(f"\n[green]✓[/green] Results saved to: {out_dir}")
    return 0


@app.command("run")
def run(
    scenario: Path = typer.Argument(..., help="Scenario JSON file"),
    out_dir: Path | None = typer.Argument(None, help="Output directory"),
    seed: int | None = typer.Option(None, "--seed", help="Simulation seed"),
    n: int | None = typer.Option(None, "--n", help="Number of simulated replications"),
    t_max: float | None = typer.Option(None, "--t-max", help="End of the survival grid"),
    h: float | None = typer.Option(None, "--h", help="Survival grid step"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Output directory"),
    fmt: str = typer.Option("csv", "--format", help="Curve file format: csv or json"),
) -> None:
    """Evaluate a scenario file and write summary, curves and comparison."""
    if fmt not in ("csv", "json"):
        console.print(f"[red]✗ Error: unknown format {fmt!r} (use csv or json)[/red]")
        raise typer.Exit(EXIT_ERROR)
    code = main_process(scenario, out if out is not None else out_dir, seed, n, t_max, h, fmt)
    if code:
        raise typer.Exit(code)


@app.command()
def selftest(
    seed: int | None = typer.Option(None, "--seed", help="Simulation seed"),
    n: int = typer.Option(100_000, "--n", help="Replications per simulated check"),
    check: list[str] | None = typer.Option(None, "--check", help="Run only these checks"),
) -> None:
    """Run the acceptance checks and print a pass/fail table."""
    seed = get_settings().seed if seed is None else seed
    report = run_selftest(seed, n, only=check or None)

    table = Table(title=f"Selftest (seed={seed}, n={n})")
    table.add_column("Check", style="cyan")
    table.add_column("Formula")
    table.add_column("Result")
    table.add_column("Detail", style="magenta")
    for result in report.checks:
        mark = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.check, result.formula, mark, result.detail)
    console.print(table)

    if not report.checks:
        console.print("[red]✗ No checks matched[/red]")
        raise typer.Exit(EXIT_ERROR)
    if not report.passed:
        raise typer.Exit(EXIT_ERROR)


@app.command()
def info() -> None:
    """Show configuration and system information."""
    settings = get_settings()

    table = Table(title="Configuration")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="magenta")

    table.add_row("Version", __version__)
    table.add_row("Seed", str(settings.seed))
    table.add_row("Replications", str(settings.sim_n))
    table.add_row("Block size", str(settings.block_size))
    table.add_row("Workers", str(settings.workers))
    table.add_row("Max steps", str(settings.max_steps))
    table.add_row("Grid t_max", str(settings.t_max))
    table.add_row("Grid h", str(settings.h))
    table.add_row("Stehfest order", str(settings.stehfest_order))
    table.add_row("KS alpha", str(settings.ks_alpha))
    table.add_row("z threshold", str(settings.z_threshold))
    table.add_row("Data directory", str(settings.data_dir))
    table.add_row("Output directory", str(settings.output_dir))
    table.add_row("Log file", settings.log_file)

    console.print(table)


if __name__ == "__main__":
    app()
