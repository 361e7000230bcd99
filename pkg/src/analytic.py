"""Closed-form characteristics of a stopped random sum S = zeta_1 + ... + zeta_nu.

nu is the first step with eps = 1, so it is geometric with parameter q whatever
the dependence between zeta and eps inside one step. The mean a/q (Wald) holds
in general; the variance needs the extra moment a0 = E zeta I(eps = 0).
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .distributions import Exponential
from .errors import NegativeVarianceError
from .steplaw import Independent, JointStepLaw, MinThreshold, StepMoments, law_scale, q_of

logger = logging.getLogger(__name__)

# Relative tolerance below which a slightly negative variance is rounding noise.
VARIANCE_ROUNDING = 1e-12


@dataclass(frozen=True)
class RandomSumMoments:
    mean: float
    variance: float


def mean_random_sum(m: StepMoments) -> float:
    """E S = a / q."""
    return m.a / m.q


def variance_random_sum(m: StepMoments) -> float:
    """D S = sigma2/q + (a^2 (q - 1) + 2 a a0) / q^2.

    Raises:
        NegativeVarianceError: the moments cannot come from one step law
    """
    value = m.sigma2 / m.q + (m.a * m.a * (m.q - 1.0) + 2.0 * m.a * m.a0) / (m.q * m.q)
    scale = m.sigma2 / m.q + m.a * m.a / (m.q * m.q)
    if value < 0:
        if value >= -VARIANCE_ROUNDING * max(scale, 1.0):
            return 0.0
        raise NegativeVarianceError(
            f"Variance {value:.6g} < 0 for a={m.a}, sigma2={m.sigma2}, a0={m.a0}, q={m.q}"
        )
    return value


def independent_variance(m: StepMoments) -> float:
    """D zeta E nu + (E zeta)^2 D nu.

    Correct only when eps is independent of zeta, where it coincides with
    ``variance_random_sum``.
    """
    mean_nu, var_nu = geometric_moments(m.q)
    return m.sigma2 * mean_nu + m.a * m.a * var_nu


def random_sum_moments(m: StepMoments) -> RandomSumMoments:
    return RandomSumMoments(mean=mean_random_sum(m), variance=variance_random_sum(m))


def geometric_moments(q: float) -> tuple[float, float]:
    """(E nu, D nu) for P(nu = n) = q (1 - q)^(n - 1)."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    return 1.0 / q, (1.0 - q) / (q * q)


def geometric_pmf(q: float, k):
    """P(nu = k) for k >= 1."""
    k = np.asarray(k)
    pmf = np.where(k >= 1, q * np.power(1.0 - q, np.maximum(k, 1) - 1.0), 0.0)
    if pmf.ndim == 0:
        return float(pmf)
    return pmf


@dataclass(frozen=True)
class LaplaceTransforms:
    """Transforms of one step and of the stopped sum at real z >= 0.

    psi = E exp(-z zeta), psi0 = E exp(-z zeta) I(eps = 0), psi1 = psi - psi0,
    and phi = E exp(-z S) = (psi - psi0) / (1 - psi0).
    """

    law: JointStepLaw
    q: float

    def _both(self, z):
        _check_domain(z)
        psi, psi0 = self.law.transforms(z)
        return np.asarray(psi, dtype=float), np.asarray(psi0, dtype=float)

    def psi(self, z):
        return _as_output(self._both(z)[0], z)

    def psi0(self, z):
        return _as_output(self._both(z)[1], z)

    def psi1(self, z):
        psi, psi0 = self._both(z)
        return _as_output(psi - psi0, z)

    def phi(self, z):
        psi, psi0 = self._both(z)
        return _as_output((psi - psi0) / (1.0 - psi0), z)

    def __call__(self, z):
        return self.phi(z)


def _check_domain(z) -> None:
    if np.any(np.asarray(z, dtype=float) < 0):
        raise ValueError("Transforms are evaluated on real z >= 0 only")


def _as_output(values: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(np.asarray(values).reshape(-1)[0])
    return values


def laplace_transforms(law: JointStepLaw) -> LaplaceTransforms:
    return LaplaceTransforms(law=law, q=q_of(law))


@dataclass(frozen=True)
class ExponentialSurvival:
    """P(S >= t) = exp(-rate t)."""

    rate: float

    def __call__(self, t):
        values = np.exp(-self.rate * np.maximum(np.asarray(t, dtype=float), 0.0))
        return _as_output(values, t)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


def closed_form_survival(law: JointStepLaw) -> ExponentialSurvival | None:
    """Exact survival function of S for the recognised special cases.

    A minimum threshold with exponential tau gives S ~ Exp(rate) whatever the
    law of eta; an independent flag with exponential zeta gives S ~ Exp(rate q).
    """
    if isinstance(law, MinThreshold) and isinstance(law.tau, Exponential):
        q_of(law)
        return ExponentialSurvival(law.tau.rate)
    if isinstance(law, Independent) and isinstance(law.zeta, Exponential):
        return ExponentialSurvival(law.zeta.rate * q_of(law))
    return None


def limit_survival(m: StepMoments) -> ExponentialSurvival:
    """Limit law of q S as q -> 0: P(q S >= t) = exp(-t / a)."""
    return ExponentialSurvival(1.0 / m.a)


def scaled_limit_diagnostics(law: JointStepLaw, z_grid) -> float:
    """sup over z_grid of |phi(q z) - 1 / (1 + a z)|."""
    z = np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("z_grid must be a non-empty 1-D array")
    if np.any(z < 0):
        raise ValueError("z_grid must be nonnegative")
    m = law.moments()
    transforms = LaplaceTransforms(law=law, q=m.q)
    error = np.abs(np.asarray(transforms.phi(m.q * z)) - 1.0 / (1.0 + m.a * z))
    worst = float(np.max(error))
    logger.info(f"Scaled limit check at q={m.q:.4g}: sup error {worst:.3e}")
    return worst


def transform_moments(
    phi: LaplaceTransforms | Callable, scale: float | None = None
) -> RandomSumMoments:
    """Mean and variance of S from one-sided differences of phi at 0.

    Forward differences at steps h and h/2 are combined by Richardson
    extrapolation. ``scale`` is a rough time scale of S used to size h; with a
    LaplaceTransforms it defaults to the largest component mean over q.
    """
    if scale is None:
        if not isinstance(phi, LaplaceTransforms):
            raise ValueError("scale is required when phi is a plain callable")
        scale = law_scale(phi.law) / phi.q

    def forward(h: float) -> float:
        return (float(phi(h)) - 1.0) / h

    def second(h: float) -> float:
        return (1.0 - 2.0 * float(phi(h)) + float(phi(2.0 * h))) / (h * h)

    h1 = 1e-4 / scale
    first_moment = -(2.0 * forward(h1 / 2.0) - forward(h1))
    h2 = 1e-3 / scale
    second_moment = 2.0 * second(h2 / 2.0) - second(h2)
    return RandomSumMoments(mean=first_moment, variance=second_moment - first_moment**2)
