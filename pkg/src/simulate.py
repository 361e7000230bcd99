"""Seeded Monte Carlo and discrete-event simulation of stopped random sums.

Replications are grouped in blocks of ``settings.block_size``; block ``b``
draws from its own Philox stream keyed by ``SeedSequence(seed, spawn_key=(b,))``.
Blocks may run in a process pool and are always reduced in block order, so a
report depends only on (model, n, seed, block_size).
"""

import heapq
import itertools
import logging
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from .analytic import geometric_pmf
from .applications import GeigerModel, RedundantModel, SsqsModel
from .errors import RunawayStopError
from .settings import get_settings
from .steplaw import JointStepLaw, check_q
from .volterra import SurvivalCurve, make_grid

logger = logging.getLogger(__name__)


# Random streams


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Private generator of one block of replications."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def block_sizes(n: int, block_size: int) -> list[int]:
    full, rest = divmod(n, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _run_blocks(task: Callable, n: int, seed: int) -> dict[str, np.ndarray]:
    """Run ``task(count, seed, block)`` per block and concatenate in block order."""
    settings = get_settings()
    sizes = block_sizes(n, settings.block_size)
    blocks = range(len(sizes))
    if settings.workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            results = list(pool.map(task, sizes, [seed] * len(sizes), blocks))
    else:
        results = [task(count, seed, block) for count, block in zip(sizes, blocks)]
    return {key: np.concatenate([r[key] for r in results]) for key in results[0]}


def _resolve(n: int | None, seed: int | None) -> tuple[int, int]:
    settings = get_settings()
    n = settings.sim_n if n is None else int(n)
    seed = settings.seed if seed is None else int(seed)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return n, seed


# Reports


@dataclass
class SimReport:
    """Summary of n replications of one random time."""

    n: int
    mean: float
    variance: float
    std_err_mean: float
    std_err_variance: float
    empirical_survival: SurvivalCurve
    seed: int
    extra_scalars: dict[str, float] = field(default_factory=dict)
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.samples["value"]


def sample_stats(x: np.ndarray) -> tuple[float, float, float, float]:
    """(mean, variance, std error of the mean, std error of the variance)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    mean = float(np.mean(x))
    centred = x - mean
    variance = float(np.mean(centred**2) * n / max(n - 1, 1))
    fourth = float(np.mean(centred**4))
    se_mean = float(np.sqrt(variance / n))
    se_variance = float(np.sqrt(max(fourth - variance**2, 0.0) / n))
    return mean, variance, se_mean, se_variance


def empirical_survival(x: np.ndarray, t_max: float, h: float) -> SurvivalCurve:
    """Fraction of samples >= t at each grid node."""
    grid = make_grid(t_max, h)
    ordered = np.sort(np.asarray(x, dtype=float))
    below = np.searchsorted(ordered, grid, side="left")
    return SurvivalCurve(grid, (len(ordered) - below) / len(ordered))


def _ratio_std_err(numerator: np.ndarray, denominator: np.ndarray) -> float:
    """Delta-method std error of sum(numerator) / sum(denominator)."""
    ratio = numerator.sum() / denominator.sum()
    residual = numerator - ratio * denominator
    return float(np.sqrt(np.var(residual, ddof=1) / len(residual)) / np.mean(denominator))


def build_report(
    samples: dict[str, np.ndarray],
    seed: int,
    t_max: float | None = None,
    h: float | None = None,
    extra: dict[str, float] | None = None,
) -> SimReport:
    settings = get_settings()
    t_max = settings.t_max if t_max is None else t_max
    h = settings.h if h is None else h
    value = samples["value"]
    mean, variance, se_mean, se_variance = sample_stats(value)
    return SimReport(
        n=len(value),
        mean=mean,
        variance=variance,
        std_err_mean=se_mean,
        std_err_variance=se_variance,
        empirical_survival=empirical_survival(value, t_max, h),
        seed=seed,
        extra_scalars=extra or {},
        samples=samples,
    )


# Generic random sums


def _random_sum_block(law: JointStepLaw, count: int, seed: int, block: int) -> dict:
    rng = block_generator(seed, block)
    max_steps = get_settings().max_steps
    totals = np.zeros(count)
    nu = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    rounds = 0
    while active.size:
        rounds += 1
        if rounds > max_steps:
            raise RunawayStopError(
                f"{active.size} replications still running after {max_steps} steps"
            )
        zeta, eps = law.sample(rng, active.size)
        totals[active] += zeta
        nu[active] += 1
        active = active[eps == 0]
    return {"value": totals, "nu": nu}


def simulate_random_sum(
    law: JointStepLaw,
    n: int | None = None,
    seed: int | None = None,
    t_max: float | None = None,
    h: float | None = None,
) -> SimReport:
    """n replications of S: draw steps until eps = 1 and add up the zetas.

    Raises:
        RunawayStopError: eps = 1 is impossible, or a replication runs past max_steps
    """
    n, seed = _resolve(n, seed)
    if law.success_impossible():
        raise RunawayStopError(f"{law.coupling} law can never stop (eps = 1 is impossible)")
    logger.info(f"Simulating {n} random sums of a {law.coupling} law (seed={seed})")
    samples = _run_blocks(partial(_random_sum_block, law), n, seed)
    mean_nu, var_nu, se_nu, _ = sample_stats(samples["nu"])
    extra = {"mean_nu": mean_nu, "var_nu": var_nu, "std_err_mean_nu": se_nu}
    return build_report(samples, seed, t_max, h, extra)


def geometric_chi_square(nu: np.ndarray, q: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of stopping indices to P(nu = k) = q (1 - q)^(k - 1).

    Cells k = 1..K keep an expected count of at least ``min_expected``; the
    tail k > K is pooled into one cell.
    """
    nu = np.asarray(nu)
    n = len(nu)
    check_q(q)
    k_max = 1
    while n * geometric_pmf(q, k_max + 1) >= min_expected and k_max < 10_000:
        k_max += 1
    ks = np.arange(1, k_max + 1)
    expected = n * geometric_pmf(q, ks)
    expected = np.append(expected, n * (1.0 - q) ** k_max)
    observed = np.append(np.bincount(nu, minlength=k_max + 1)[1 : k_max + 1], np.sum(nu > k_max))
    return stats.chisquare(observed, expected)


# Counter


def _geiger_block(model: GeigerModel, count: int, seed: int, block: int) -> dict:
    rng = block_generator(seed, block)
    max_steps = get_settings().max_steps
    arrivals, lock = model.arrival_law, model.lock
    # Each replication starts with a registration at time 0.
    now = np.zeros(count)
    registrations = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    while active.size:
        if registrations[active[0]] >= max_steps:
            raise RunawayStopError(f"Counter never lost a particle within {max_steps} arrivals")
        lock_end = now[active] + np.asarray(lock.sample(rng, active.size), dtype=float)
        arrival = now[active] + np.asarray(arrivals.sample(rng, active.size), dtype=float)
        now[active] = arrival
        registrations[active] += 1
        active = active[arrival >= lock_end]
    return {"value": now, "nu": registrations}


def simulate_geiger(
    model: GeigerModel,
    n: int | None = None,
    seed: int | None = None,
    t_max: float | None = None,
    h: float | None = None,
) -> SimReport:
    """Time T until the counter first loses a particle, n independent runs."""
    n, seed = _resolve(n, seed)
    if model.step_law.success_impossible():
        raise RunawayStopError("Lock time is never longer than an arrival gap: no particle is lost")
    logger.info(f"Simulating {n} counter runs (seed={seed})")
    samples = _run_blocks(partial(_geiger_block, model), n, seed)
    return build_report(samples, seed, t_max, h, {"mean_nu": float(np.mean(samples["nu"]))})


# Event queue


class EventQueue:
    """Future event list ordered by (time, priority); cancelled events are skipped."""

    def __init__(self):
        self._heap: list[tuple[float, int, int, str]] = []
        self._live: dict[str, int] = {}
        self._counter = itertools.count()

    def schedule(self, time: float, kind: str, priority: int = 0) -> None:
        token = next(self._counter)
        self._live[kind] = token
        heapq.heappush(self._heap, (time, priority, token, kind))

    def cancel(self, kind: str) -> None:
        self._live.pop(kind, None)

    def pop(self) -> tuple[float, str]:
        while self._heap:
            time, _, token, kind = heapq.heappop(self._heap)
            if self._live.get(kind) == token:
                del self._live[kind]
                return time, kind
        raise IndexError("pop from an empty event queue")

    def __len__(self) -> int:
        return len(self._live)


# Duplicated system

REPAIR, FAILURE = "repair", "failure"
DEPARTURE, ARRIVAL = "departure", "arrival"


def _busy_period(
    model: RedundantModel, rng: np.random.Generator, start_state: int, max_steps: int
) -> tuple[float, float, float, float]:
    """Run from state 2, or from state 1 with a fresh repair, until both units are down.

    Returns the length, the time spent in states 2 and 1, and the repair time
    still outstanding when the system goes down. Repair wins a tie with a failure.
    """
    queue = EventQueue()
    now, entered = 0.0, 0.0
    in_state = {1: 0.0, 2: 0.0}
    state = start_state
    repair_end = 0.0
    if state == 2:
        queue.schedule(rng.exponential(1.0 / model.total_rate), FAILURE, priority=1)
    else:
        repair_end = float(model.repair.sample(rng))
        queue.schedule(repair_end, REPAIR, priority=0)
        queue.schedule(rng.exponential(1.0 / model.lam), FAILURE, priority=1)

    for _ in range(2 * max_steps):
        now, kind = queue.pop()
        in_state[state] += now - entered
        entered = now
        if state == 2:
            # one of the two units failed; its repair starts now
            state = 1
            repair_end = now + float(model.repair.sample(rng))
            queue.schedule(repair_end, REPAIR, priority=0)
            queue.schedule(now + rng.exponential(1.0 / model.lam), FAILURE, priority=1)
        elif kind == REPAIR:
            state = 2
            queue.cancel(FAILURE)
            queue.schedule(now + rng.exponential(1.0 / model.total_rate), FAILURE, priority=1)
        else:
            return now, in_state[2], in_state[1], repair_end - now
    raise RunawayStopError(f"Busy period did not end within {max_steps} repair cycles")


def _redundant_block(model: RedundantModel, count: int, seed: int, block: int) -> dict:
    rng = block_generator(seed, block)
    max_steps = get_settings().max_steps
    out = {key: np.empty(count) for key in ("value", "alpha0", "alpha1", "idle", "wk")}
    for i in range(count):
        w1, alpha0, alpha1, idle = _busy_period(model, rng, 2, max_steps)
        # the repair in progress finishes, the other unit enters repair
        wk, _, _, _ = _busy_period(model, rng, 1, max_steps)
        out["value"][i], out["alpha0"][i], out["alpha1"][i] = w1, alpha0, alpha1
        out["idle"][i], out["wk"][i] = idle, wk
    return out


def simulate_redundant(
    model: RedundantModel,
    n: int | None = None,
    seed: int | None = None,
    t_max: float | None = None,
    h: float | None = None,
) -> SimReport:
    """First busy period W1 (with its alpha0, alpha1 split) and the next one W2 ~ W_k.

    The report's main sample is W1; W_k statistics are in ``extra_scalars``.
    """
    n, seed = _resolve(n, seed)
    if model.step_law.success_impossible():
        raise RunawayStopError("Repair always finishes first: the system never goes down")
    logger.info(f"Simulating {n} busy-period pairs of the duplicated system (seed={seed})")
    samples = _run_blocks(partial(_redundant_block, model), n, seed)
    mean_wk, var_wk, se_wk, se_var_wk = sample_stats(samples["wk"])
    extra = {
        "mean_Wk": mean_wk,
        "var_Wk": var_wk,
        "std_err_mean_Wk": se_wk,
        "std_err_var_Wk": se_var_wk,
        "mean_alpha0": float(np.mean(samples["alpha0"])),
        "std_err_mean_alpha0": float(np.std(samples["alpha0"], ddof=1) / np.sqrt(n)),
        "mean_alpha1": float(np.mean(samples["alpha1"])),
        "std_err_mean_alpha1": float(np.std(samples["alpha1"], ddof=1) / np.sqrt(n)),
        "mean_idle": float(np.mean(samples["idle"])),
    }
    return build_report(samples, seed, t_max, h, extra)


# Single-server queue


def _ssqs_block(model: SsqsModel, count: int, seed: int, block: int) -> dict:
    """One run from an empty system, cut into ``count`` regeneration cycles."""
    rng = block_generator(seed, block)
    scale = 1.0 / model.lam
    keys = ("value", "alpha", "beta", "alpha0", "alpha1")
    out = {key: np.empty(count) for key in keys}
    queue = EventQueue()
    queue.schedule(rng.exponential(scale), ARRIVAL, priority=1)
    in_system = 0
    cycle_start = None
    alpha_end = 0.0
    in_beta = False
    sojourn = {0: 0.0, 1: 0.0}
    last = 0.0
    done = 0
    while done < count:
        now, kind = queue.pop()
        if cycle_start is not None and not in_beta:
            sojourn[in_system] += now - last
        last = now
        if kind == ARRIVAL:
            in_system += 1
            queue.schedule(now + rng.exponential(scale), ARRIVAL, priority=1)
            if in_system == 1:
                queue.schedule(now + float(model.service.sample(rng)), DEPARTURE, priority=0)
                if cycle_start is None:
                    cycle_start = now
            elif in_system == 2 and not in_beta:
                in_beta, alpha_end = True, now
            continue
        in_system -= 1
        if in_system >= 1:
            queue.schedule(now + float(model.service.sample(rng)), DEPARTURE, priority=0)
        if in_system == 1:
            out["value"][done] = now - cycle_start
            out["alpha"][done] = alpha_end - cycle_start
            out["beta"][done] = now - alpha_end
            out["alpha0"][done], out["alpha1"][done] = sojourn[0], sojourn[1]
            done += 1
            cycle_start, in_beta = now, False
            sojourn = {0: 0.0, 1: 0.0}
    return out


def simulate_ssqs(
    model: SsqsModel,
    n: int | None = None,
    seed: int | None = None,
    t_max: float | None = None,
    h: float | None = None,
) -> SimReport:
    """n regeneration cycles of the queue; the main sample is the cycle length T.

    Raises:
        StabilityViolationError: rho >= 1
    """
    n, seed = _resolve(n, seed)
    model.check_stable()
    logger.info(f"Simulating {n} regeneration cycles of the queue (seed={seed})")
    samples = _run_blocks(partial(_ssqs_block, model), n, seed)
    cycle = samples["value"]
    alpha0 = samples["alpha0"]
    zero = (alpha0 == 0.0).astype(float)
    extra = {}
    for key in ("alpha", "beta", "alpha0", "alpha1"):
        mean, _, se, _ = sample_stats(samples[key])
        extra[f"mean_{key}"] = mean
        extra[f"std_err_mean_{key}"] = se
    extra.update(
        {
            "frac_state0": float(alpha0.sum() / cycle.sum()),
            "std_err_frac_state0": _ratio_std_err(alpha0, cycle),
            "frac_state1": float(samples["alpha1"].sum() / cycle.sum()),
            "std_err_frac_state1": _ratio_std_err(samples["alpha1"], cycle),
            "p_alpha0_zero": float(zero.mean()),
            "std_err_p_alpha0_zero": float(np.sqrt(zero.mean() * (1.0 - zero.mean()) / n)),
        }
    )
    return build_report(samples, seed, t_max, h, extra)


# Comparison


@dataclass(frozen=True)
class AnalyticTarget:
    """Analytic values a simulation is checked against; any part may be missing."""

    mean: float | None = None
    variance: float | None = None
    survival: SurvivalCurve | Callable | None = None
    scalars: dict[str, float] = field(default_factory=dict)


@dataclass
class ComparisonVerdict:
    z_scores: dict[str, float]
    ks_statistic: float | None
    ks_critical: float | None
    ks_pvalue: float | None
    ks_passed: bool
    passed: bool
    failures: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _z(observed: float, expected: float, std_err: float) -> float:
    if std_err > 0:
        return (observed - expected) / std_err
    return 0.0 if observed == expected else float("inf")


def compare_reports(
    sim: SimReport,
    analytic: AnalyticTarget,
    ks_alpha: float | None = None,
    z_threshold: float | None = None,
) -> ComparisonVerdict:
    """z-scores of the mean, the variance and named extra scalars, plus a KS check.

    An extra scalar ``name`` is read from ``sim.extra_scalars`` together with
    its ``std_err_<name>`` entry. An exact survival function is tested against
    the raw samples with ``scipy.stats.kstest``; a tabulated curve is compared
    with the empirical survival at the shared grid nodes against the
    asymptotic Kolmogorov critical value.

    Raises:
        ShapeMismatchError: a tabulated curve on a different grid
    """
    settings = get_settings()
    ks_alpha = settings.ks_alpha if ks_alpha is None else ks_alpha
    z_threshold = settings.z_threshold if z_threshold is None else z_threshold

    z_scores = {}
    if analytic.mean is not None:
        z_scores["mean"] = _z(sim.mean, analytic.mean, sim.std_err_mean)
    if analytic.variance is not None:
        z_scores["variance"] = _z(sim.variance, analytic.variance, sim.std_err_variance)
    for name, expected in analytic.scalars.items():
        if name not in sim.extra_scalars:
            raise KeyError(f"Simulation report has no scalar named {name!r}")
        std_err = sim.extra_scalars.get(f"std_err_{name}", 0.0)
        z_scores[name] = _z(sim.extra_scalars[name], expected, std_err)
    failures = [f"{name}: z={z:.2f}" for name, z in z_scores.items() if abs(z) > z_threshold]

    ks_statistic = ks_critical = ks_pvalue = None
    ks_passed = True
    survival = analytic.survival
    if isinstance(survival, SurvivalCurve) or (survival is not None and "value" not in sim.samples):
        ks_statistic = sim.empirical_survival.sup_distance(survival)
        ks_critical = float(stats.kstwobign.isf(ks_alpha) / np.sqrt(sim.n))
        ks_passed = ks_statistic <= ks_critical
    elif survival is not None:
        result = stats.kstest(sim.values, lambda x: 1.0 - np.asarray(survival(x)))
        ks_statistic, ks_pvalue = float(result.statistic), float(result.pvalue)
        ks_passed = ks_pvalue >= ks_alpha
    if not ks_passed:
        failures.append(f"survival: KS statistic {ks_statistic:.4g}")

    verdict = ComparisonVerdict(
        z_scores=z_scores,
        ks_statistic=ks_statistic,
        ks_critical=ks_critical,
        ks_pvalue=ks_pvalue,
        ks_passed=ks_passed,
        passed=not failures,
        failures=failures,
    )
    summary = " ".join(f"{name}={z:.2f}" for name, z in z_scores.items())
    logger.info(f"Comparison {verdict.verdict}: {summary}")
    return verdict
