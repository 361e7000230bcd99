"""Joint law of one step (zeta, eps) of a stopped random sum.

A step contributes ``zeta >= 0`` to the sum and stops it when ``eps = 1``.
The couplings below cover the independent case and three dependent
constructions built from two independent times tau and eta, where
``eps = I(tau < eta)`` (a tie gives eps = 0).

Sub-distribution functions follow the left-limit convention by default:
``F0(t) = P(zeta < t, eps = 0)`` and ``F1(t) = P(zeta < t, eps = 1)``.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import Exponential, ScalarDistribution, Tabulated
from .errors import DegenerateLawError, NonfiniteMomentError

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-12


class SubCdfs(NamedTuple):
    f0: float
    f1: float
    f: float


@dataclass(frozen=True)
class StepMoments:
    """First two moments of zeta and the mean of zeta on the non-stopping event."""

    a: float
    sigma2: float
    a0: float
    q: float

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if not self.sigma2 >= -1e-12:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if not (-1e-12 <= self.a0 <= self.a * (1 + 1e-9) + 1e-12):
            raise ValueError(f"a0 must lie in [0, a], got a0={self.a0}, a={self.a}")
        if not (0 < self.q < 1):
            raise ValueError(f"q must lie in (0, 1), got {self.q}")


def check_q(q: float) -> float:
    if q < DEGENERACY_TOL or q > 1.0 - DEGENERACY_TOL:
        raise DegenerateLawError(f"Stopping probability q={q:.3g} is degenerate (must be in (0,1))")
    return q


def _require_proper(*parts: ScalarDistribution) -> None:
    for part in parts:
        if not part.is_proper:
            raise NonfiniteMomentError(f"Moments need a proper law, got an open-tailed {part.kind}")


def _jumps(dist: ScalarDistribution) -> list[float]:
    return [x for x, _ in dist.atoms] + list(dist.breakpoints)


class JointStepLaw(ABC):
    """Law of one step (zeta, eps)."""

    coupling: str = ""

    @property
    @abstractmethod
    def components(self) -> dict[str, ScalarDistribution]:
        """Named component distributions."""

    @abstractmethod
    def success_probability(self) -> float:
        """P(eps = 1) without the degeneracy check."""

    @abstractmethod
    def sub_cdfs(self, t: float, left: bool = True) -> SubCdfs:
        """(F0, F1, F) at t."""

    @abstractmethod
    def f0_atoms(self) -> list[tuple[float, float]]:
        """Point masses of the non-stopping sub-distribution."""

    @abstractmethod
    def moments(self) -> StepMoments: ...

    @abstractmethod
    def transforms(self, z) -> tuple[np.ndarray, np.ndarray]:
        """(psi, psi0) at real z >= 0."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``size`` steps as (zeta, eps) arrays."""

    def success_impossible(self) -> bool:
        """True when the supports make eps = 1 impossible."""
        return False

    def f0_continuous(self, grid: np.ndarray) -> np.ndarray:
        """Mass of the non-stopping kernel's continuous part on [0, t] at each node."""
        atoms = self.f0_atoms()
        values = np.empty(len(grid))
        for i, t in enumerate(grid):
            atom_mass = sum(m for x, m in atoms if x <= t)
            values[i] = self.sub_cdfs(float(t), left=False).f0 - atom_mass
        return np.maximum.accumulate(np.maximum(values, 0.0))


@dataclass(frozen=True)
class Independent(JointStepLaw):
    """zeta with law ``zeta`` and an independent Bernoulli(q) stopping flag."""

    zeta: ScalarDistribution
    q: float
    coupling = "independent"

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0):
            raise ValueError(f"q must lie in [0, 1], got {self.q}")

    @property
    def components(self) -> dict[str, ScalarDistribution]:
        return {"zeta": self.zeta}

    def success_probability(self) -> float:
        return self.q

    def success_impossible(self) -> bool:
        return self.q == 0.0

    def sub_cdfs(self, t: float, left: bool = True) -> SubCdfs:
        f = float(self.zeta.cdf_left(t) if left else self.zeta.cdf(t))
        f1 = self.q * f
        return SubCdfs(f - f1, f1, f)

    def f0_atoms(self) -> list[tuple[float, float]]:
        return [(x, (1.0 - self.q) * m) for x, m in self.zeta.atoms]

    def f0_continuous(self, grid: np.ndarray) -> np.ndarray:
        atoms = self.zeta.atoms
        cdf = np.asarray(self.zeta.cdf(np.asarray(grid, dtype=float)), dtype=float)
        for x, m in atoms:
            cdf = cdf - m * (grid >= x)
        return (1.0 - self.q) * np.maximum(cdf, 0.0)

    def moments(self) -> StepMoments:
        _require_proper(self.zeta)
        a = self.zeta.mean()
        q = check_q(self.q)
        return StepMoments(a=a, sigma2=self.zeta.variance(), a0=(1.0 - q) * a, q=q)

    def transforms(self, z):
        psi = np.asarray(self.zeta.laplace(z), dtype=float)
        return psi, (1.0 - self.q) * psi

    def sample(self, rng: np.random.Generator, size: int):
        zeta = np.asarray(self.zeta.sample(rng, size), dtype=float)
        eps = (rng.random(size) < self.q).astype(np.int8)
        return zeta, eps


@dataclass(frozen=True)
class _ThresholdPair(JointStepLaw):
    """Shared machinery for couplings with eps = I(tau < eta)."""

    tau: ScalarDistribution
    eta: ScalarDistribution

    @property
    def components(self) -> dict[str, ScalarDistribution]:
        return {"tau": self.tau, "eta": self.eta}

    @property
    def _exponential_tau(self) -> bool:
        return isinstance(self.tau, Exponential) and self.eta.is_proper

    def success_impossible(self) -> bool:
        return self.eta.bounded and self.eta.upper <= self.tau.lower

    def success_probability(self) -> float:
        if self._exponential_tau:
            return float(1.0 - self.eta.laplace(self.tau.rate))
        return self._success_mass(lambda x: 1.0)

    # Integrals over the stopping event {tau < eta}, measured by tau.
    def _success_mass(self, func, lo=None, hi=None, include_hi=True, with_atoms=True) -> float:
        return self.tau.integrate(
            lambda x: func(x) * float(self.eta.sf(x)),
            lo,
            hi,
            include_hi=include_hi,
            points=_jumps(self.eta),
            with_atoms=with_atoms,
        )

    # Integral over {eta <= tau} measured by tau (tau's value is the step).
    def _race_failure_mass(self, func, lo=None, hi=None, include_hi=True, with_atoms=True):
        return self.tau.integrate(
            lambda x: func(x) * float(self.eta.cdf(x)),
            lo,
            hi,
            include_hi=include_hi,
            points=_jumps(self.eta),
            with_atoms=with_atoms,
        )

    # Integral over {eta <= tau} measured by eta (eta's value is the step).
    def _min_failure_mass(self, func, lo=None, hi=None, include_hi=True, with_atoms=True):
        return self.eta.integrate(
            lambda y: func(y) * (1.0 - float(self.tau.cdf_left(y))),
            lo,
            hi,
            include_hi=include_hi,
            points=_jumps(self.tau),
            with_atoms=with_atoms,
        )

    def _cumulative(self, mass, grid: np.ndarray) -> np.ndarray:
        """Continuous-part mass on [0, t] at each node, accumulated interval by interval."""
        grid = np.asarray(grid, dtype=float)
        increments = np.empty(len(grid))
        previous = None
        for i, t in enumerate(grid):
            increments[i] = mass(lambda x: 1.0, lo=previous, hi=float(t), with_atoms=False)
            previous = float(t)
        return np.cumsum(increments)


@dataclass(frozen=True)
class MinThreshold(_ThresholdPair):
    """zeta = min(tau, eta), eps = I(tau < eta)."""

    coupling = "min_threshold"

    def sub_cdfs(self, t: float, left: bool = True) -> SubCdfs:
        if left:
            f = 1.0 - (1.0 - float(self.tau.cdf_left(t))) * (1.0 - float(self.eta.cdf_left(t)))
        else:
            f = 1.0 - float(self.tau.sf(t)) * float(self.eta.sf(t))
        f1 = self._success_mass(lambda x: 1.0, hi=t, include_hi=not left)
        f1 = min(f1, f)
        return SubCdfs(f - f1, f1, f)

    def f0_atoms(self) -> list[tuple[float, float]]:
        return [(y, m * (1.0 - float(self.tau.cdf_left(y)))) for y, m in self.eta.atoms]

    def f0_continuous(self, grid: np.ndarray) -> np.ndarray:
        return self._cumulative(self._min_failure_mass, grid)

    def moments(self) -> StepMoments:
        _require_proper(self.tau, self.eta)
        q = check_q(self.success_probability())
        e1 = self._success_mass(lambda x: x)
        e0 = self._min_failure_mass(lambda y: y)
        m2 = self._success_mass(lambda x: x * x) + self._min_failure_mass(lambda y: y * y)
        a = e1 + e0
        return StepMoments(a=a, sigma2=max(m2 - a * a, 0.0), a0=e0, q=q)

    def transforms(self, z):
        s = np.atleast_1d(np.asarray(z, dtype=float))
        if self._exponential_tau:
            lam = self.tau.rate
            eta_hat = np.asarray(self.eta.laplace(s + lam), dtype=float)
            psi0 = eta_hat
            psi1 = lam * (1.0 - eta_hat) / (s + lam)
        else:
            psi0 = np.array([self._min_failure_mass(lambda y, v=v: np.exp(-v * y)) for v in s])
            psi1 = np.array([self._success_mass(lambda x, v=v: np.exp(-v * x)) for v in s])
        psi = psi0 + psi1
        if np.ndim(z) == 0:
            return psi[0], psi0[0]
        return psi, psi0

    def sample(self, rng: np.random.Generator, size: int):
        tau = np.asarray(self.tau.sample(rng, size), dtype=float)
        eta = np.asarray(self.eta.sample(rng, size), dtype=float)
        return np.minimum(tau, eta), (tau < eta).astype(np.int8)


@dataclass(frozen=True)
class RaceStep(_ThresholdPair):
    """zeta = tau, eps = I(tau < eta), tau independent of eta."""

    coupling = "race_step"

    def sub_cdfs(self, t: float, left: bool = True) -> SubCdfs:
        f = float(self.tau.cdf_left(t) if left else self.tau.cdf(t))
        f1 = self._success_mass(lambda x: 1.0, hi=t, include_hi=not left)
        f1 = min(f1, f)
        return SubCdfs(f - f1, f1, f)

    def f0_atoms(self) -> list[tuple[float, float]]:
        return [(x, m * float(self.eta.cdf(x))) for x, m in self.tau.atoms]

    def f0_continuous(self, grid: np.ndarray) -> np.ndarray:
        return self._cumulative(self._race_failure_mass, grid)

    def moments(self) -> StepMoments:
        _require_proper(self.tau, self.eta)
        q = check_q(self.success_probability())
        a0 = self._race_failure_mass(lambda x: x)
        return StepMoments(a=self.tau.mean(), sigma2=self.tau.variance(), a0=a0, q=q)

    def transforms(self, z):
        s = np.atleast_1d(np.asarray(z, dtype=float))
        psi = np.asarray(self.tau.laplace(s), dtype=float)
        if self._exponential_tau:
            lam = self.tau.rate
            psi0 = lam * np.asarray(self.eta.laplace(s + lam), dtype=float) / (s + lam)
        else:
            psi0 = np.array([self._race_failure_mass(lambda x, v=v: np.exp(-v * x)) for v in s])
        if np.ndim(z) == 0:
            return psi[0], psi0[0]
        return psi, psi0

    def sample(self, rng: np.random.Generator, size: int):
        tau = np.asarray(self.tau.sample(rng, size), dtype=float)
        eta = np.asarray(self.eta.sample(rng, size), dtype=float)
        return tau, (tau < eta).astype(np.int8)


@dataclass(frozen=True)
class ShiftedMin(_ThresholdPair):
    """zeta = min(tau, eta) + shift, eps = I(tau < eta), shift independent of both."""

    shift: ScalarDistribution
    coupling = "shifted_min"

    @property
    def components(self) -> dict[str, ScalarDistribution]:
        return {"tau": self.tau, "eta": self.eta, "shift": self.shift}

    @property
    def _min_law(self) -> MinThreshold:
        return MinThreshold(self.tau, self.eta)

    def _shift_points(self, t: float) -> list[float]:
        return [t - p for p in _jumps(self.shift)]

    def sub_cdfs(self, t: float, left: bool = True) -> SubCdfs:
        shift_cdf = self.shift.cdf_left if left else self.shift.cdf
        points = self._shift_points(t)
        f1 = self.tau.integrate(
            lambda x: float(shift_cdf(t - x)) * float(self.eta.sf(x)),
            hi=t,
            points=points + _jumps(self.eta),
        )
        f0 = self.eta.integrate(
            lambda y: float(shift_cdf(t - y)) * (1.0 - float(self.tau.cdf_left(y))),
            hi=t,
            points=points + _jumps(self.tau),
        )
        return SubCdfs(f0, f1, f0 + f1)

    def f0_atoms(self) -> list[tuple[float, float]]:
        return [
            (y + s, m * ms) for y, m in self._min_law.f0_atoms() for s, ms in self.shift.atoms
        ]

    def moments(self) -> StepMoments:
        _require_proper(self.tau, self.eta, self.shift)
        inner = self._min_law.moments()
        b = self.shift.mean()
        return StepMoments(
            a=inner.a + b,
            sigma2=inner.sigma2 + self.shift.variance(),
            a0=inner.a0 + (1.0 - inner.q) * b,
            q=inner.q,
        )

    def transforms(self, z):
        psi_min, psi0_min = self._min_law.transforms(z)
        shift_hat = np.asarray(self.shift.laplace(z), dtype=float)
        return psi_min * shift_hat, psi0_min * shift_hat

    def sample(self, rng: np.random.Generator, size: int):
        zeta, eps = self._min_law.sample(rng, size)
        return zeta + np.asarray(self.shift.sample(rng, size), dtype=float), eps


# Operation-level API


def q_of(law: JointStepLaw) -> float:
    """P(eps = 1), checked to lie strictly inside (0, 1)."""
    q = check_q(float(law.success_probability()))
    logger.info(f"q for {law.coupling} law: {q:.10g}")
    return q


def sub_cdfs(law: JointStepLaw, t: float, left: bool = True) -> SubCdfs:
    """(F0, F1, F) at t >= 0."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return law.sub_cdfs(float(t), left=left)


def step_moments(law: JointStepLaw) -> StepMoments:
    """a = E zeta, sigma2 = D zeta, a0 = E zeta I(eps = 0) and q."""
    moments = law.moments()
    logger.info(
        f"Step moments ({law.coupling}): a={moments.a:.8g} sigma2={moments.sigma2:.8g} "
        f"a0={moments.a0:.8g} q={moments.q:.8g}"
    )
    return moments


def sample_step(law: JointStepLaw, rng: np.random.Generator) -> tuple[float, int]:
    """One draw of (zeta, eps)."""
    zeta, eps = law.sample(rng, 1)
    return float(zeta[0]), int(eps[0])


def law_scale(law: JointStepLaw) -> float:
    """Largest mean (or support end, for open tabulated parts) among the components."""
    scales = []
    for part in law.components.values():
        scales.append(part.mean() if part.is_proper else part.upper)
    return max(max(scales), 1e-12)


def validate_law(law: JointStepLaw) -> list[str]:
    """Non-fatal diagnostics about a law."""
    warnings = []
    eta = law.components.get("eta")
    if eta is not None:
        zero_mass = float(eta.cdf(0.0))
        if zero_mass > 0:
            warnings.append(
                f"eta has an atom at 0 with mass {zero_mass:.6g} (instantaneous unlock/repair)"
            )
    for name, part in law.components.items():
        if isinstance(part, Tabulated) and not part.is_proper:
            end = part.values[-1]
            warnings.append(f"{name} is an open-tailed tabulated law (cdf ends at {end})")
    for message in warnings:
        logger.warning(message)
    return warnings
