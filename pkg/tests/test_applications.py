import math

import numpy as np
import pytest

from src.analytic import mean_random_sum, variance_random_sum
from src.applications import (
    AtomExponential,
    GeigerModel,
    RedundantModel,
    SsqsModel,
    geiger_characteristics,
    redundant_characteristics,
    ssqs_characteristics,
)
from src.distributions import Deterministic, Erlang, Exponential, Tabulated, Uniform
from src.errors import NonfiniteMomentError, StabilityViolationError
from src.steplaw import step_moments


class TestGeiger:
    """Test the counter characteristics."""

    def test_deterministic_lock(self):
        """Test E T = 2 and D T = 4 (1 + ln 2) for lambda = 1 and lock ln 2."""
        model = GeigerModel(1.0, Deterministic(math.log(2.0)))
        result = geiger_characteristics(model, with_survival=False)
        assert result.q == pytest.approx(0.5)
        assert result.a0 == pytest.approx((1.0 + math.log(2.0)) / 2.0, abs=1e-9)
        assert result.mean_T == pytest.approx(2.0)
        assert result.var_T == pytest.approx(4.0 * (1.0 + math.log(2.0)), abs=1e-7)
        assert result.survival is None

    def test_poisson_formula_matches_general_variance(self):
        """Test that the Poisson shortcut agrees with the general variance formula."""
        model = GeigerModel(2.0, Uniform(0.0, 1.0))
        result = geiger_characteristics(model, with_survival=False)
        m = step_moments(model.step_law)
        assert result.mean_T == pytest.approx(mean_random_sum(m))
        assert result.var_T == pytest.approx(variance_random_sum(m), rel=1e-8)

    def test_renewal_arrivals(self):
        """Test that a non-Poisson flow goes through the general route."""
        model = GeigerModel(None, Deterministic(0.5), arrivals=Erlang(2, 2.0))
        assert not model.poisson
        result = geiger_characteristics(model, with_survival=False)
        m = step_moments(model.step_law)
        assert result.mean_T == pytest.approx(m.a / m.q)

    def test_survival_curve(self):
        """Test that the survival curve starts at 1 and integrates to E T."""
        model = GeigerModel(1.0, Deterministic(math.log(2.0)))
        result = geiger_characteristics(model, t_max=40.0, h=0.02)
        assert result.survival.values[0] == 1.0
        assert result.survival.mean() == pytest.approx(2.0, abs=1e-2)

    def test_invalid_rate(self):
        """Test that lambda must be positive."""
        with pytest.raises(ValueError, match="lambda"):
            GeigerModel(0.0, Deterministic(1.0))
        with pytest.raises(ValueError, match="lambda is required"):
            GeigerModel(None, Deterministic(1.0))


class TestRedundant:
    """Test the duplicated system characteristics."""

    def test_exponential_repair(self):
        """Test the busy-period means for lambda = 1, lambda' = 0.5, G = Exp(2)."""
        model = RedundantModel(1.0, 0.5, Exponential(2.0))
        result = redundant_characteristics(model)
        assert result.q == pytest.approx(1.0 / 3.0)
        assert result.mean_W1 == pytest.approx(3.0)
        assert result.mean_Wk == pytest.approx(7.0 / 3.0)
        assert result.var_W1 == pytest.approx(23.0 / 3.0, abs=1e-8)
        assert result.var_Wk == pytest.approx(23.0 / 3.0 - 1.0 / 2.25, abs=1e-8)

    def test_integral_moments_match_step_law(self):
        """Test that the model's moment integrals agree with the shifted-minimum step."""
        model = RedundantModel(1.0, 0.5, Uniform(0.0, 2.0))
        result = redundant_characteristics(model)
        m = step_moments(model.step_law)
        assert result.a == pytest.approx(m.a, abs=1e-9)
        assert result.sigma2 == pytest.approx(m.sigma2, abs=1e-8)
        assert result.a0 == pytest.approx(m.a0, abs=1e-9)

    def test_sojourn_laws(self):
        """Test the exponential laws of the time in states 2 and 1."""
        model = RedundantModel(1.0, 0.5, Exponential(2.0))
        result = redundant_characteristics(model)
        assert result.alpha0_survival.rate == pytest.approx(0.5)
        assert result.alpha1_survival.rate == pytest.approx(1.0)

    def test_busy_period_survival(self):
        """Test that the solved W1 curve integrates to E W1."""
        model = RedundantModel(1.0, 0.5, Exponential(2.0))
        result = redundant_characteristics(model, with_survival=True, t_max=60.0, h=0.02)
        assert result.w1_survival.mean() == pytest.approx(3.0, abs=2e-2)

    def test_open_tailed_repair(self):
        """Test that an open-tailed repair law has no characteristics."""
        model = RedundantModel(1.0, 0.0, Tabulated((0.0, 1.0), (0.0, 0.5)))
        with pytest.raises(NonfiniteMomentError):
            redundant_characteristics(model)

    def test_negative_standby_rate(self):
        """Test that lambda' must be nonnegative."""
        with pytest.raises(ValueError, match="lambda_prime"):
            RedundantModel(1.0, -0.1, Exponential(1.0))


class TestSsqs:
    """Test the queue cycle characteristics."""

    def test_mm1(self):
        """Test the M/M/1 values for lambda = 1, mu = 2."""
        result = ssqs_characteristics(SsqsModel(1.0, Exponential(2.0)))
        assert result.rho == pytest.approx(0.5)
        assert result.q == pytest.approx(1.0 / 3.0)
        assert result.p0 == pytest.approx(0.5)
        assert result.p1 == pytest.approx(0.25)
        assert result.p1_mm1 == pytest.approx(result.p1, abs=1e-12)
        assert result.mean_alpha == pytest.approx(3.0)
        assert result.mean_T == pytest.approx(4.0)
        assert result.mean_beta == pytest.approx(1.0)

    def test_alpha_split(self):
        """Test E alpha0 + E alpha1 = E alpha for a deterministic service."""
        result = ssqs_characteristics(SsqsModel(1.0, Deterministic(0.5)))
        assert result.mean_alpha0 + result.mean_alpha1 == pytest.approx(result.mean_alpha)
        assert result.p0 + result.p1 <= 1.0
        assert result.p1_mm1 is None

    def test_alpha0_law(self):
        """Test the atom of alpha0 at zero."""
        result = ssqs_characteristics(SsqsModel(1.0, Exponential(2.0)))
        law = result.alpha0_law
        assert law.atom_mass == pytest.approx(1.0 / 3.0)
        assert law.mean() == pytest.approx(result.mean_alpha0)

    def test_unstable(self):
        """Test that rho >= 1 is refused."""
        with pytest.raises(StabilityViolationError):
            ssqs_characteristics(SsqsModel(1.0, Exponential(0.5)))


class TestAtomExponential:
    """Test the mixed atom-plus-exponential law."""

    def test_sf(self):
        """Test P(X > t) with the atom at zero."""
        law = AtomExponential(0.25, 2.0)
        assert law.sf(0.0) == pytest.approx(0.75)
        assert law.sf(-1.0) == 1.0
        assert law.cdf(1.0) == pytest.approx(1.0 - 0.75 * math.exp(-2.0))

    def test_sampling(self):
        """Test that the zero frequency matches the atom."""
        draws = AtomExponential(0.25, 2.0).sample(np.random.default_rng(5), 50_000)
        assert abs(np.mean(draws == 0.0) - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 50_000)

    def test_invalid_atom(self):
        """Test that the atom mass must be below one."""
        with pytest.raises(ValueError):
            AtomExponential(1.0, 1.0)
