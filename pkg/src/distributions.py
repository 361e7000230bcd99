"""Laws of the nonnegative random times that build a step.

Every distribution stores a right-continuous CDF ``P(X <= t)`` and also
exposes the left limit ``P(X < t)``. Integration against ``dF`` splits the
measure into atoms and an absolutely continuous part; the latter is handled
by adaptive Gauss-Kronrod quadrature on a support truncated where the
remaining tail mass falls below ``settings.tail_cutoff``.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.integrate import quad
from scipy.special import gammainc, gammainccinv

from .errors import NonfiniteMomentError
from .settings import get_settings

logger = logging.getLogger(__name__)


def _scalar_or_array(values: np.ndarray, like) -> float | np.ndarray:
    """Return a float when the caller passed a scalar."""
    if np.ndim(like) == 0:
        return float(values)
    return values


def _expm1_ratio(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x)) / x, continuous at x = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 1e-12, x, 1.0)
    return np.where(x > 1e-12, -np.expm1(-safe) / safe, 1.0 - x / 2.0)


class ScalarDistribution(ABC):
    """Law of a nonnegative random time X."""

    kind: ClassVar[str] = ""

    @abstractmethod
    def cdf(self, t):
        """P(X <= t)."""

    def cdf_left(self, t):
        """P(X < t): the CDF with atoms located exactly at t removed."""
        values = np.asarray(self.cdf(t), dtype=float)
        points = np.asarray(t, dtype=float)
        for x, mass in self.atoms:
            values = values - mass * (points == x)
        return _scalar_or_array(values, t)

    def sf(self, t):
        """P(X > t)."""
        return _scalar_or_array(1.0 - np.asarray(self.cdf(t), dtype=float), t)

    def pdf(self, x):
        """Density of the absolutely continuous part (zero when there is none)."""
        return _scalar_or_array(np.zeros_like(np.asarray(x, dtype=float)), x)

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses as (location, mass) pairs."""
        return ()

    @property
    def has_density(self) -> bool:
        return True

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density is not smooth."""
        return ()

    @property
    def is_proper(self) -> bool:
        """False when part of the mass has no location (open tabulated tail)."""
        return True

    @property
    def lower(self) -> float:
        """Left end of the support."""
        return 0.0

    @property
    def bounded(self) -> bool:
        """True when ``upper`` is the exact end of the support, not a truncation."""
        return True

    @property
    @abstractmethod
    def upper(self) -> float:
        """Truncation point: mass beyond it is below the tail cutoff."""

    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def second_moment(self) -> float: ...

    def variance(self) -> float:
        return max(self.second_moment() - self.mean() ** 2, 0.0)

    @abstractmethod
    def laplace(self, z):
        """E exp(-zX) for real z >= 0."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw ``size`` values (a float when size is None)."""

    def integrate(
        self,
        func: Callable[[float], float],
        lo: float | None = None,
        hi: float | None = None,
        *,
        include_hi: bool = True,
        points: Iterable[float] = (),
        with_atoms: bool = True,
    ) -> float:
        """Integrate ``func`` against dF over (lo, hi].

        ``lo=None`` starts below zero so an atom at 0 is included; ``hi=None``
        runs to the truncation point. ``include_hi=False`` integrates over the
        open interval (lo, hi) instead. ``points`` lists extra discontinuities
        of ``func``.
        """
        settings = get_settings()
        total = 0.0

        if with_atoms:
            for x, mass in self.atoms:
                above = lo is None or x > lo
                below = hi is None or (x <= hi if include_hi else x < hi)
                if above and below:
                    total += mass * func(x)

        if not self.has_density:
            return total

        a = 0.0 if lo is None else max(lo, 0.0)
        b = self.upper if hi is None else min(hi, self.upper)
        if b <= a:
            return total

        cuts = sorted({a, b, *(p for p in (*self.breakpoints, *points) if a < p < b)})
        for left, right in zip(cuts[:-1], cuts[1:]):
            if right - left <= 0.0:
                continue
            value, _ = quad(
                lambda x: func(x) * self.pdf(x),
                left,
                right,
                epsabs=settings.quad_abs_tol,
                epsrel=1e-10,
                limit=200,
            )
            total += value
        return total


@dataclass(frozen=True)
class Exponential(ScalarDistribution):
    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Exponential rate must be positive, got {self.rate}")

    def cdf(self, t):
        s = np.asarray(t, dtype=float)
        values = np.where(s < 0, 0.0, -np.expm1(-self.rate * np.maximum(s, 0.0)))
        return _scalar_or_array(values, t)

    def pdf(self, x):
        s = np.asarray(x, dtype=float)
        values = np.where(s < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(s, 0.0)))
        return _scalar_or_array(values, x)

    @property
    def bounded(self) -> bool:
        return False

    @property
    def upper(self) -> float:
        return -math.log(get_settings().tail_cutoff) / self.rate

    def mean(self) -> float:
        return 1.0 / self.rate

    def second_moment(self) -> float:
        return 2.0 / self.rate**2

    def laplace(self, z):
        s = np.asarray(z, dtype=float)
        return _scalar_or_array(self.rate / (self.rate + s), z)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Deterministic(ScalarDistribution):
    value: float
    kind: ClassVar[str] = "deterministic"

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"Deterministic value must be >= 0, got {self.value}")

    def cdf(self, t):
        s = np.asarray(t, dtype=float)
        return _scalar_or_array((s >= self.value).astype(float), t)

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        return ((self.value, 1.0),)

    @property
    def has_density(self) -> bool:
        return False

    @property
    def lower(self) -> float:
        return self.value

    @property
    def upper(self) -> float:
        return self.value

    def mean(self) -> float:
        return self.value

    def second_moment(self) -> float:
        return self.value**2

    def laplace(self, z):
        s = np.asarray(z, dtype=float)
        return _scalar_or_array(np.exp(-s * self.value), z)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return self.value
        return np.full(size, self.value)


@dataclass(frozen=True)
class Uniform(ScalarDistribution):
    lo: float
    hi: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise ValueError(f"Uniform needs 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def cdf(self, t):
        s = np.asarray(t, dtype=float)
        return _scalar_or_array(np.clip((s - self.lo) / self.width, 0.0, 1.0), t)

    def pdf(self, x):
        s = np.asarray(x, dtype=float)
        values = np.where((s >= self.lo) & (s <= self.hi), 1.0 / self.width, 0.0)
        return _scalar_or_array(values, x)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.lo, self.hi)

    @property
    def lower(self) -> float:
        return self.lo

    @property
    def upper(self) -> float:
        return self.hi

    def mean(self) -> float:
        return (self.lo + self.hi) / 2.0

    def second_moment(self) -> float:
        return (self.lo**2 + self.lo * self.hi + self.hi**2) / 3.0

    def laplace(self, z):
        s = np.asarray(z, dtype=float)
        values = np.exp(-s * self.lo) * _expm1_ratio(s * self.width)
        return _scalar_or_array(values, z)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class Erlang(ScalarDistribution):
    shape: int
    rate: float
    kind: ClassVar[str] = "erlang"

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError(f"Erlang shape must be a positive integer, got {self.shape}")
        if not self.rate > 0:
            raise ValueError(f"Erlang rate must be positive, got {self.rate}")

    def cdf(self, t):
        s = np.asarray(t, dtype=float)
        values = np.where(s <= 0, 0.0, gammainc(self.shape, self.rate * np.maximum(s, 0.0)))
        return _scalar_or_array(values, t)

    def pdf(self, x):
        s = np.maximum(np.asarray(x, dtype=float), 0.0)
        k = self.shape
        log_density = (
            k * math.log(self.rate) + (k - 1) * np.log(np.where(s > 0, s, 1.0))
            - self.rate * s - math.lgamma(k)
        )
        values = np.where(s > 0, np.exp(log_density), self.rate if k == 1 else 0.0)
        return _scalar_or_array(values, x)

    @property
    def bounded(self) -> bool:
        return False

    @property
    def upper(self) -> float:
        return float(gammainccinv(self.shape, get_settings().tail_cutoff)) / self.rate

    def mean(self) -> float:
        return self.shape / self.rate

    def second_moment(self) -> float:
        return self.shape * (self.shape + 1) / self.rate**2

    def laplace(self, z):
        s = np.asarray(z, dtype=float)
        return _scalar_or_array((self.rate / (self.rate + s)) ** self.shape, z)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class Tabulated(ScalarDistribution):
    """Piecewise-linear CDF through (grid[i], values[i]).

    The CDF is 0 left of ``grid[0]``, so ``values[0]`` is an atom there. When
    ``values[-1] < 1`` the remaining mass lies somewhere past the grid: the
    CDF holds ``values[-1]`` and moments, transforms and sampling are refused.
    """

    grid: tuple[float, ...]
    values: tuple[float, ...]
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid.size != values.size:
            raise ValueError("Tabulated needs grid and cdf arrays of equal length >= 2")
        if grid[0] < 0:
            raise ValueError(f"Tabulated grid must start at t >= 0, got {grid[0]}")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("Tabulated grid must be strictly increasing")
        if np.any(values < 0) or np.any(values > 1) or np.any(np.diff(values) < 0):
            raise ValueError("Tabulated cdf values must be nondecreasing and within [0, 1]")
        object.__setattr__(self, "grid", tuple(float(g) for g in grid))
        object.__setattr__(self, "values", tuple(float(v) for v in values))

    @property
    def is_proper(self) -> bool:
        return self.values[-1] >= 1.0 - 1e-12

    @property
    def bounded(self) -> bool:
        return self.is_proper

    def _require_proper(self, what: str) -> None:
        if not self.is_proper:
            raise NonfiniteMomentError(
                f"Tabulated law ends at cdf={self.values[-1]:.6g} < 1; "
                f"{what} is undefined for the open tail"
            )

    def cdf(self, t):
        s = np.asarray(t, dtype=float)
        right = 1.0 if self.is_proper else self.values[-1]
        return _scalar_or_array(np.interp(s, self.grid, self.values, left=0.0, right=right), t)

    def _slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)

    def pdf(self, x):
        s = np.asarray(x, dtype=float)
        grid = np.asarray(self.grid)
        idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, grid.size - 2)
        inside = (s > grid[0]) & (s < grid[-1])
        return _scalar_or_array(np.where(inside, self._slopes()[idx], 0.0), x)

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        if self.values[0] > 0:
            return ((self.grid[0], self.values[0]),)
        return ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.grid

    @property
    def lower(self) -> float:
        return self.grid[0] if self.values[0] > 0 else self.grid[int(np.argmax(self._slopes() > 0))]

    @property
    def upper(self) -> float:
        return self.grid[-1]

    def mean(self) -> float:
        self._require_proper("the mean")
        g = np.asarray(self.grid)
        dv = np.diff(self.values)
        return float(self.values[0] * g[0] + np.sum(dv * (g[:-1] + g[1:]) / 2.0))

    def second_moment(self) -> float:
        self._require_proper("the second moment")
        g = np.asarray(self.grid)
        dv = np.diff(self.values)
        segment = (g[:-1] ** 2 + g[:-1] * g[1:] + g[1:] ** 2) / 3.0
        return float(self.values[0] * g[0] ** 2 + np.sum(dv * segment))

    def laplace(self, z):
        self._require_proper("the Laplace transform")
        s = np.asarray(z, dtype=float)[..., None]
        g = np.asarray(self.grid)
        dv = np.diff(self.values)
        segments = dv * np.exp(-s * g[:-1]) * _expm1_ratio(s * np.diff(g))
        values = self.values[0] * np.exp(-s[..., 0] * g[0]) + segments.sum(axis=-1)
        return _scalar_or_array(values, z)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        self._require_proper("sampling")
        u = rng.random(size)
        return np.interp(u, self.values, self.grid)
