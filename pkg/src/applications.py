"""Three systems whose key times are stopped random sums.

- Type-1 counter: a registered particle locks the counter for a random time;
  particles arriving meanwhile are lost. T is the time until the counter
  first loses a particle.
- Duplicated system with one repair unit and a light standby: W_k is the k-th
  busy period (at least one working unit).
- Single-server queue: regeneration cycles between departures that leave
  exactly one customer behind, split into the phase alpha in states {0, 1}
  and the phase beta in states >= 2.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import (
    ExponentialSurvival,
    mean_random_sum,
    variance_random_sum,
)
from .distributions import Exponential, ScalarDistribution
from .errors import NonfiniteMomentError, StabilityViolationError
from .steplaw import RaceStep, ShiftedMin, StepMoments, check_q, step_moments
from .volterra import SurvivalCurve, solve_survival

logger = logging.getLogger(__name__)


def _require_rate(name: str, value: float, allow_zero: bool = False) -> None:
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")


def _no_event_probability(dist: ScalarDistribution, rate: float) -> float:
    """P(X < Exp(rate)) = E exp(-rate X)."""
    if not dist.is_proper:
        raise NonfiniteMomentError(f"{dist.kind} law has an open tail")
    return float(dist.laplace(rate))


@dataclass(frozen=True)
class AtomExponential:
    """Mixed law with mass ``atom_mass`` at 0 and an Exp(tail_rate) remainder."""

    atom_mass: float
    tail_rate: float

    def __post_init__(self):
        if not 0 <= self.atom_mass < 1:
            raise ValueError(f"atom_mass must lie in [0, 1), got {self.atom_mass}")
        _require_rate("tail_rate", self.tail_rate)

    def sf(self, t):
        """P(X > t) for t >= 0."""
        t = np.asarray(t, dtype=float)
        values = np.where(t < 0, 1.0, (1.0 - self.atom_mass) * np.exp(-self.tail_rate * t))
        return float(values) if values.ndim == 0 else values

    def cdf(self, t):
        return 1.0 - self.sf(t)

    def mean(self) -> float:
        return (1.0 - self.atom_mass) / self.tail_rate

    def sample(self, rng: np.random.Generator, size: int | None = None):
        draws = rng.exponential(1.0 / self.tail_rate, size)
        keep = rng.random(size) >= self.atom_mass
        return np.where(keep, draws, 0.0) if size is not None else float(draws * keep)


# Counter


@dataclass(frozen=True)
class GeigerModel:
    """Counter with Poisson arrivals (or a general renewal flow) and lock law G."""

    lam: float | None
    lock: ScalarDistribution
    arrivals: ScalarDistribution | None = None

    def __post_init__(self):
        if self.arrivals is None:
            if self.lam is None:
                raise ValueError("lambda is required without an arrivals law")
            _require_rate("lambda", self.lam)

    @property
    def arrival_law(self) -> ScalarDistribution:
        return self.arrivals if self.arrivals is not None else Exponential(self.lam)

    @property
    def poisson(self) -> bool:
        return isinstance(self.arrival_law, Exponential)

    @property
    def step_law(self) -> RaceStep:
        return RaceStep(tau=self.arrival_law, eta=self.lock)


@dataclass
class GeigerCharacteristics:
    q: float
    a: float
    sigma2: float
    a0: float
    mean_T: float
    var_T: float
    survival: SurvivalCurve | None = None


def geiger_characteristics(
    model: GeigerModel,
    t_max: float | None = None,
    h: float | None = None,
    with_survival: bool = True,
) -> GeigerCharacteristics:
    """q, E T and D T of the counter, plus P(T >= t) from the renewal equation.

    Under Poisson arrivals D T = (2(q + lam a0) - 1) / (lam q)^2; any other
    arrival flow goes through the general variance formula.
    """
    law = model.step_law
    moments = step_moments(law)
    q = moments.q
    if model.poisson:
        lam = model.arrival_law.rate
        mean_t = 1.0 / (lam * q)
        var_t = (2.0 * (q + lam * moments.a0) - 1.0) / (lam * lam * q * q)
    else:
        mean_t = mean_random_sum(moments)
        var_t = variance_random_sum(moments)
    logger.info(f"Counter: q={q:.8g} E T={mean_t:.8g} D T={var_t:.8g}")
    survival = solve_survival(law, t_max, h) if with_survival else None
    return GeigerCharacteristics(
        q=q,
        a=moments.a,
        sigma2=moments.sigma2,
        a0=moments.a0,
        mean_T=mean_t,
        var_T=var_t,
        survival=survival,
    )


# Duplicated system


@dataclass(frozen=True)
class RedundantModel:
    """Operating unit failing at rate lam, standby failing at rate lam_prime, repair law G."""

    lam: float
    lam_prime: float
    repair: ScalarDistribution

    def __post_init__(self):
        _require_rate("lambda", self.lam)
        _require_rate("lambda_prime", self.lam_prime, allow_zero=True)

    @property
    def total_rate(self) -> float:
        return self.lam + self.lam_prime

    @property
    def step_law(self) -> ShiftedMin:
        """min(tau, eta) + residual time in the fully working state."""
        return ShiftedMin(
            tau=Exponential(self.lam), eta=self.repair, shift=Exponential(self.total_rate)
        )


@dataclass
class RedundantCharacteristics:
    q: float
    a: float
    sigma2: float
    a0: float
    mean_W1: float
    mean_Wk: float
    var_W1: float
    var_Wk: float
    alpha0_survival: ExponentialSurvival
    alpha1_survival: ExponentialSurvival
    w1_survival: SurvivalCurve | None = field(default=None)


def redundant_characteristics(
    model: RedundantModel,
    with_survival: bool = False,
    t_max: float | None = None,
    h: float | None = None,
) -> RedundantCharacteristics:
    """Busy-period moments and the laws of the time spent in states 2 and 1."""
    lam, total = model.lam, model.total_rate
    repair = model.repair
    q = check_q(1.0 - _no_event_probability(repair, lam))

    # int t e^{-lam t} G(t) dt, rewritten against dG
    weighted_cdf = repair.integrate(lambda y: math.exp(-lam * y) * (y / lam + 1.0 / lam**2))
    a = q / lam + 1.0 / total
    sigma2 = (2.0 - q * q) / lam**2 + 1.0 / total**2 - 2.0 * weighted_cdf
    a0 = repair.integrate(lambda t: t * math.exp(-lam * t)) + (1.0 - q) / total
    moments = StepMoments(a=a, sigma2=sigma2, a0=a0, q=q)

    var_w1 = variance_random_sum(moments)
    result = RedundantCharacteristics(
        q=q,
        a=a,
        sigma2=sigma2,
        a0=a0,
        mean_W1=1.0 / lam + 1.0 / (total * q),
        mean_Wk=(lam + q * model.lam_prime) / (lam * total * q),
        var_W1=var_w1,
        var_Wk=var_w1 - 1.0 / total**2,
        alpha0_survival=ExponentialSurvival(total * q),
        alpha1_survival=ExponentialSurvival(lam),
    )
    if with_survival:
        result.w1_survival = solve_survival(model.step_law, t_max, h)
    logger.info(
        f"Redundant system: q={q:.8g} E W1={result.mean_W1:.8g} E Wk={result.mean_Wk:.8g} "
        f"D W1={result.var_W1:.8g}"
    )
    return result


# Single-server queue


@dataclass(frozen=True)
class SsqsModel:
    """Poisson(lam) arrivals to one FIFO server with service law G."""

    lam: float
    service: ScalarDistribution

    def __post_init__(self):
        _require_rate("lambda", self.lam)

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean()

    def check_stable(self) -> float:
        rho = self.rho
        if rho >= 1.0:
            raise StabilityViolationError(
                f"Traffic intensity rho={rho:.6g} >= 1: no stationary regime"
            )
        return rho


@dataclass
class SsqsCharacteristics:
    q: float
    b: float
    rho: float
    p0: float
    p1: float
    mean_alpha0: float
    mean_alpha1: float
    mean_alpha: float
    mean_T: float
    mean_beta: float
    alpha0_law: AtomExponential
    alpha1_law: Exponential
    p1_mm1: float | None = None


def ssqs_characteristics(model: SsqsModel) -> SsqsCharacteristics:
    """Cycle means and the stationary probabilities of states 0 and 1.

    Raises:
        StabilityViolationError: rho >= 1
    """
    rho = model.check_stable()
    lam = model.lam
    q = check_q(1.0 - _no_event_probability(model.service, lam))
    mean_t = (1.0 - q) / (lam * q * (1.0 - rho))
    result = SsqsCharacteristics(
        q=q,
        b=model.service.mean(),
        rho=rho,
        p0=1.0 - rho,
        p1=q * (1.0 - rho) / (1.0 - q),
        mean_alpha0=(1.0 - q) / (lam * q),
        mean_alpha1=1.0 / lam,
        mean_alpha=1.0 / (lam * q),
        mean_T=mean_t,
        mean_beta=(rho - q) / (lam * q * (1.0 - rho)),
        alpha0_law=AtomExponential(atom_mass=q, tail_rate=lam * q),
        alpha1_law=Exponential(lam),
    )
    if isinstance(model.service, Exponential):
        result.p1_mm1 = (1.0 - rho) * rho
    logger.info(
        f"Queue: rho={rho:.6g} q={q:.8g} p0={result.p0:.6g} p1={result.p1:.6g} "
        f"E T={mean_t:.6g}"
    )
    return result
