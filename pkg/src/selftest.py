"""Acceptance suite at reduced simulation size.

Every check returns a pass flag and a one-line detail built only from the
computed numbers, so two runs with the same seed print the same table.
"""

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import stats

from .analytic import (
    closed_form_survival,
    independent_variance,
    laplace_transforms,
    mean_random_sum,
    scaled_limit_diagnostics,
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
from .distributions import Deterministic, Exponential, Uniform
from .models.responses import CheckResult, SelftestReport
from .simulate import (
    AnalyticTarget,
    compare_reports,
    simulate_geiger,
    simulate_random_sum,
    simulate_redundant,
    simulate_ssqs,
)
from .steplaw import Independent, MinThreshold, RaceStep, ShiftedMin, StepMoments, step_moments
from .volterra import equation_residual, invert_laplace, solve_survival

logger = logging.getLogger(__name__)

T_MAX, H = 10.0, 0.01
SMOOTH_TOL, ATOM_TOL = 5e-4, 2e-2
ROUTE_TOL = 2e-3
Z_LIMIT = 4.0

Check = Callable[[int, int], tuple[bool, str]]


def _z(observed: float, expected: float, std_err: float) -> float:
    return (observed - expected) / std_err


def check_min_threshold_exact(seed: int, n: int) -> tuple[bool, str]:
    errors = {}
    for name, eta in [
        ("exp2", Exponential(2.0)),
        ("uniform", Uniform(0.0, 2.0)),
        ("det1", Deterministic(1.0)),
    ]:
        curve = solve_survival(MinThreshold(Exponential(1.0), eta), T_MAX, H)
        errors[name] = curve.sup_distance(lambda t: np.exp(-t))
    passed = errors["exp2"] <= SMOOTH_TOL and errors["uniform"] <= SMOOTH_TOL
    passed = passed and errors["det1"] <= ATOM_TOL
    return passed, " ".join(f"{k}={v:.2e}" for k, v in errors.items())


def check_independent_routes(seed: int, n: int) -> tuple[bool, str]:
    law = Independent(Exponential(2.0), 0.5)
    exact = closed_form_survival(law)
    curve = solve_survival(law, T_MAX, H)
    inverted = invert_laplace(laplace_transforms(law), curve.times[1:])
    solver_gap = curve.sup_distance(exact)
    inversion_gap = float(np.max(np.abs(inverted.values - curve.values[1:])))
    sim = simulate_random_sum(law, n, seed, T_MAX, H)
    verdict = compare_reports(sim, AnalyticTarget(exact.mean, exact.mean**2, exact))
    passed = solver_gap <= ROUTE_TOL and inversion_gap <= ROUTE_TOL and verdict.passed
    detail = (
        f"solver={solver_gap:.2e} inversion={inversion_gap:.2e} "
        f"ks_p={verdict.ks_pvalue:.3f}"
    )
    return passed, detail


def _moment_laws() -> dict[str, list[object]]:
    return {
        "independent": [
            Independent(Uniform(0.0, 2.0), 0.3),
            Independent(Exponential(1.5), 0.6),
            Independent(Deterministic(0.5), 0.2),
        ],
        "min_threshold": [
            MinThreshold(Exponential(1.0), Uniform(0.0, 2.0)),
            MinThreshold(Exponential(0.5), Exponential(1.0)),
            MinThreshold(Exponential(2.0), Deterministic(1.0)),
        ],
        "race_step": [
            RaceStep(Exponential(1.0), Exponential(1.0)),
            RaceStep(Exponential(2.0), Uniform(0.0, 1.0)),
            RaceStep(Exponential(1.0), Deterministic(0.5)),
        ],
        "shifted_min": [
            ShiftedMin(Exponential(1.0), Exponential(2.0), Exponential(1.5)),
            ShiftedMin(Exponential(0.5), Uniform(0.0, 2.0), Exponential(1.0)),
            ShiftedMin(Exponential(2.0), Deterministic(1.0), Exponential(3.0)),
        ],
    }


def check_moment_formulas(seed: int, n: int) -> tuple[bool, str]:
    worst = {}
    for name, laws in _moment_laws().items():
        worst[name] = 0.0
        for offset, law in enumerate(laws):
            m = step_moments(law)
            sim = simulate_random_sum(law, n, seed + offset, T_MAX, H)
            verdict = compare_reports(
                sim, AnalyticTarget(mean_random_sum(m), variance_random_sum(m))
            )
            worst[name] = max(worst[name], *(abs(z) for z in verdict.z_scores.values()))
    passed = all(z <= Z_LIMIT for z in worst.values())
    return passed, " ".join(f"{k}={v:.2f}" for k, v in worst.items())


def check_independent_formula_fails(seed: int, n: int) -> tuple[bool, str]:
    law = RaceStep(Exponential(1.0), Exponential(1.0))
    m = step_moments(law)
    sim = simulate_random_sum(law, n, seed, T_MAX, H)
    z_general = _z(sim.variance, variance_random_sum(m), sim.std_err_variance)
    z_independent = _z(sim.variance, independent_variance(m), sim.std_err_variance)
    passed = abs(z_general) <= Z_LIMIT and abs(z_independent) > 10.0
    return passed, f"z_general={z_general:.2f} z_independent={z_independent:.1f}"


def check_independence_reduction(seed: int, n: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(0.01, 10.0)
        sigma2 = rng.uniform(0.0, 10.0)
        q = rng.uniform(0.01, 0.99)
        m = StepMoments(a=a, sigma2=sigma2, a0=(1.0 - q) * a, q=q)
        general, reduced = variance_random_sum(m), independent_variance(m)
        worst = max(worst, abs(general - reduced) / reduced)
    return worst <= 1e-12, f"max_rel_err={worst:.1e}"


def check_scaled_limit(seed: int, n: int) -> tuple[bool, str]:
    z_grid = np.linspace(0.1, 10.0, 100)
    errors = [
        scaled_limit_diagnostics(Independent(Uniform(0.0, 2.0), q), z_grid)
        for q in (0.5, 0.05, 0.005, 0.0005)
    ]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    exact = scaled_limit_diagnostics(Independent(Exponential(1.0), 0.005), z_grid)
    sim = simulate_random_sum(Independent(Exponential(1.0), 0.005), n, seed, T_MAX, H)
    ks = stats.kstest(0.005 * sim.values, "expon")
    passed = decreasing and errors[-1] < 1e-2 and exact < 1e-10 and ks.pvalue >= 0.01
    detail = " ".join(f"{e:.1e}" for e in errors) + f" ks_p={ks.pvalue:.3f}"
    return passed, detail


def check_counter(seed: int, n: int) -> tuple[bool, str]:
    model = GeigerModel(1.0, Deterministic(math.log(2.0)))
    result = geiger_characteristics(model, T_MAX, H)
    sim = simulate_geiger(model, n, seed, T_MAX, H)
    verdict = compare_reports(
        sim, AnalyticTarget(result.mean_T, result.var_T, result.survival)
    )
    exact = abs(result.mean_T - 2.0) < 1e-9 and abs(result.var_T - 4 * (1 + math.log(2))) < 1e-6
    z = verdict.z_scores
    detail = f"z_mean={z['mean']:.2f} z_var={z['variance']:.2f} ks={verdict.ks_statistic:.4f}"
    return exact and verdict.passed, detail


def check_duplicated_system(seed: int, n: int) -> tuple[bool, str]:
    model = RedundantModel(1.0, 0.5, Exponential(2.0))
    result = redundant_characteristics(model)
    sim = simulate_redundant(model, n, seed, T_MAX, H)
    verdict = compare_reports(
        sim,
        AnalyticTarget(mean=result.mean_W1, scalars={"mean_Wk": result.mean_Wk}),
    )
    extra = sim.extra_scalars
    gap = extra["var_Wk"] - (sim.variance - 1.0 / model.total_rate**2)
    z_gap = gap / math.hypot(sim.std_err_variance, extra["std_err_var_Wk"])
    ks1 = stats.kstest(sim.samples["alpha1"], "expon", args=(0, 1.0 / model.lam))
    ks0 = stats.kstest(
        sim.samples["alpha0"], "expon", args=(0, 1.0 / (model.total_rate * result.q))
    )
    passed = verdict.passed and abs(z_gap) <= Z_LIMIT and min(ks0.pvalue, ks1.pvalue) >= 0.01
    z = verdict.z_scores
    detail = (
        f"z_W1={z['mean']:.2f} z_Wk={z['mean_Wk']:.2f} z_varrel={z_gap:.2f} "
        f"ks_p0={ks0.pvalue:.3f} ks_p1={ks1.pvalue:.3f}"
    )
    return passed, detail


def check_queue(seed: int, n: int) -> tuple[bool, str]:
    model = SsqsModel(1.0, Exponential(2.0))
    result = ssqs_characteristics(model)
    sim = simulate_ssqs(model, n, seed, T_MAX, H)
    verdict = compare_reports(
        sim,
        AnalyticTarget(
            mean=result.mean_T,
            scalars={
                "mean_alpha": result.mean_alpha,
                "mean_beta": result.mean_beta,
                "p_alpha0_zero": result.q,
            },
        ),
    )
    extra = sim.extra_scalars
    fractions = abs(extra["frac_state0"] - result.p0) <= 0.01
    fractions = fractions and abs(extra["frac_state1"] - result.p1) <= 0.01
    cross = result.p1_mm1 is not None and abs(result.p1 - result.p1_mm1) < 1e-12
    detail = (
        f"p0_sim={extra['frac_state0']:.4f} p1_sim={extra['frac_state1']:.4f} "
        f"worst_z={max(abs(z) for z in verdict.z_scores.values()):.2f}"
    )
    return verdict.passed and fractions and cross, detail


def check_renewal_residual(seed: int, n: int) -> tuple[bool, str]:
    laws = {
        "min_exp2": (MinThreshold(Exponential(1.0), Exponential(2.0)), SMOOTH_TOL),
        "min_unif": (MinThreshold(Exponential(1.0), Uniform(0.0, 2.0)), SMOOTH_TOL),
        "min_det1": (MinThreshold(Exponential(1.0), Deterministic(1.0)), ATOM_TOL),
        "indep_exp2": (Independent(Exponential(2.0), 0.5), SMOOTH_TOL),
        "counter": (RaceStep(Exponential(1.0), Deterministic(math.log(2.0))), SMOOTH_TOL),
    }
    residuals = {}
    passed = True
    for name, (law, tol) in laws.items():
        residuals[name] = equation_residual(law, solve_survival(law, T_MAX, H))
        passed = passed and residuals[name] <= 2 * tol
    return passed, " ".join(f"{k}={v:.1e}" for k, v in residuals.items())


CHECKS: dict[str, Check] = {
    "exponential-min-threshold-exact": check_min_threshold_exact,
    "independent-exponential-routes": check_independent_routes,
    "moment-formulas": check_moment_formulas,
    "independent-formula-fails-when-dependent": check_independent_formula_fails,
    "independence-reduction": check_independence_reduction,
    "scaled-limit": check_scaled_limit,
    "counter-first-loss": check_counter,
    "duplicated-system": check_duplicated_system,
    "queue-cycle": check_queue,
    "renewal-residual": check_renewal_residual,
}

FORMULAS: dict[str, str] = {
    "exponential-min-threshold-exact": "P(S >= t) = exp(-lambda t) for tau ~ Exp(lambda)",
    "independent-exponential-routes": "phi = q psi / (1 - (1 - q) psi)",
    "moment-formulas": "E S = a/q, D S = sigma2/q + (a^2 (q - 1) + 2 a a0) / q^2",
    "independent-formula-fails-when-dependent": "D S = D zeta E nu + (E zeta)^2 D nu",
    "independence-reduction": "a0 = (1 - q) a",
    "scaled-limit": "phi(q z) -> 1 / (1 + a z)",
    "counter-first-loss": "E T = 1/(lambda q), D T = (2 (q + lambda a0) - 1) / (lambda q)^2",
    "duplicated-system": "D Wk = D W1 - 1 / (lambda + lambda')^2",
    "queue-cycle": "p1 = q (1 - rho) / (1 - q)",
    "renewal-residual": "P(t) = 1 - F(t) + int P(t - x) dF0(x)",
}


def run_selftest(seed: int, n: int, only: list[str] | None = None) -> SelftestReport:
    """Run the checks in a fixed order; an exception counts as a failure."""
    results = []
    for name, check in CHECKS.items():
        if only and name not in only:
            continue
        logger.info(f"Selftest check: {name}")
        try:
            passed, detail = check(seed, n)
        except Exception as e:
            logger.error(f"Check {name} raised: {e}", exc_info=True)
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(
            CheckResult(
                check=name, formula=FORMULAS.get(name, ""), passed=bool(passed), detail=detail
            )
        )
    return SelftestReport(seed=seed, n=n, checks=results)
