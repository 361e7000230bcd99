import math

import numpy as np
import pytest

from src.distributions import Deterministic, Erlang, Exponential, Tabulated, Uniform
from src.errors import NonfiniteMomentError


class TestExponential:
    """Test the exponential law."""

    def test_cdf_and_moments(self):
        """Test CDF values, mean and variance."""
        dist = Exponential(2.0)
        assert dist.cdf(0.0) == 0.0
        assert dist.cdf(-1.0) == 0.0
        assert dist.cdf(1.0) == pytest.approx(1.0 - math.exp(-2.0))
        assert dist.mean() == pytest.approx(0.5)
        assert dist.variance() == pytest.approx(0.25)

    def test_scalar_in_scalar_out(self):
        """Test that scalar input gives a float and arrays stay arrays."""
        dist = Exponential(1.0)
        assert isinstance(dist.cdf(1.0), float)
        assert dist.cdf(np.array([0.0, 1.0])).shape == (2,)

    def test_laplace(self):
        """Test the transform rate / (rate + z)."""
        assert Exponential(2.0).laplace(1.0) == pytest.approx(2.0 / 3.0)

    def test_invalid_rate(self):
        """Test that a nonpositive rate is rejected."""
        with pytest.raises(ValueError, match="rate"):
            Exponential(0.0)

    def test_unbounded_support(self):
        """Test that the truncation point is not the end of the support."""
        dist = Exponential(1.0)
        assert not dist.bounded
        assert dist.upper > 30


class TestDeterministic:
    """Test the point-mass law."""

    def test_left_and_right_cdf(self):
        """Test that the atom is excluded from the left limit."""
        dist = Deterministic(1.0)
        assert dist.cdf(1.0) == 1.0
        assert dist.cdf_left(1.0) == 0.0
        assert dist.cdf_left(1.5) == 1.0

    def test_integrate_uses_atom(self):
        """Test that integration against dF picks up the atom."""
        dist = Deterministic(2.0)
        assert dist.integrate(lambda x: x**2) == pytest.approx(4.0)
        assert dist.integrate(lambda x: 1.0, hi=2.0, include_hi=False) == 0.0

    def test_sample_size_none(self):
        """Test that a single draw is a float."""
        rng = np.random.default_rng(1)
        assert Deterministic(0.5).sample(rng) == 0.5
        assert np.all(Deterministic(0.5).sample(rng, 3) == 0.5)

    def test_negative_value(self):
        """Test that a negative location is rejected."""
        with pytest.raises(ValueError):
            Deterministic(-1.0)


class TestUniform:
    """Test the uniform law."""

    def test_moments(self):
        """Test mean, variance and transform at zero."""
        dist = Uniform(0.0, 2.0)
        assert dist.mean() == pytest.approx(1.0)
        assert dist.variance() == pytest.approx(1.0 / 3.0)
        assert dist.laplace(0.0) == pytest.approx(1.0)

    def test_laplace(self):
        """Test the transform (1 - e^{-2z}) / (2z)."""
        assert Uniform(0.0, 2.0).laplace(1.0) == pytest.approx((1.0 - math.exp(-2.0)) / 2.0)

    def test_integrate_density(self):
        """Test quadrature of the density part."""
        assert Uniform(1.0, 3.0).integrate(lambda x: x) == pytest.approx(2.0, abs=1e-9)

    def test_invalid_bounds(self):
        """Test that hi <= lo is rejected."""
        with pytest.raises(ValueError, match="lo < hi"):
            Uniform(2.0, 1.0)


class TestErlang:
    """Test the Erlang law."""

    def test_moments_and_laplace(self):
        """Test mean, variance and transform."""
        dist = Erlang(3, 2.0)
        assert dist.mean() == pytest.approx(1.5)
        assert dist.variance() == pytest.approx(0.75)
        assert dist.laplace(2.0) == pytest.approx(0.125)

    def test_pdf_integrates_to_one(self):
        """Test that the density integrates to one over the truncated support."""
        dist = Erlang(2, 1.0)
        assert dist.integrate(lambda x: 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_shape_one_is_exponential(self):
        """Test that shape 1 matches the exponential CDF."""
        t = np.linspace(0.0, 5.0, 11)
        np.testing.assert_allclose(Erlang(1, 1.5).cdf(t), Exponential(1.5).cdf(t), atol=1e-12)

    def test_invalid_shape(self):
        """Test that a non-integer shape is rejected."""
        with pytest.raises(ValueError, match="shape"):
            Erlang(1.5, 1.0)


class TestTabulated:
    """Test the piecewise-linear tabulated law."""

    def test_uniform_table(self):
        """Test that a two-node table reproduces Uniform(0, 1)."""
        dist = Tabulated((0.0, 1.0), (0.0, 1.0))
        assert dist.cdf(0.25) == pytest.approx(0.25)
        assert dist.mean() == pytest.approx(0.5)
        assert dist.second_moment() == pytest.approx(1.0 / 3.0)
        assert dist.laplace(1.0) == pytest.approx(1.0 - math.exp(-1.0))

    def test_atom_at_first_node(self):
        """Test that cdf[0] is an atom at grid[0]."""
        dist = Tabulated((1.0, 2.0), (0.5, 1.0))
        assert dist.atoms == ((1.0, 0.5),)
        assert dist.cdf_left(1.0) == 0.0
        assert dist.cdf(1.0) == 0.5
        assert dist.mean() == pytest.approx(0.5 * 1.0 + 0.5 * 1.5)

    def test_open_tail(self):
        """Test that an open tail holds the last value and refuses moments."""
        dist = Tabulated((0.0, 1.0), (0.0, 0.8))
        assert not dist.is_proper
        assert dist.cdf(5.0) == pytest.approx(0.8)
        with pytest.raises(NonfiniteMomentError):
            dist.mean()
        with pytest.raises(NonfiniteMomentError):
            dist.sample(np.random.default_rng(0), 10)

    def test_invalid_tables(self):
        """Test validation of grids and values."""
        with pytest.raises(ValueError, match="strictly increasing"):
            Tabulated((0.0, 0.0), (0.0, 1.0))
        with pytest.raises(ValueError, match="nondecreasing"):
            Tabulated((0.0, 1.0), (0.6, 0.4))
        with pytest.raises(ValueError, match="equal length"):
            Tabulated((0.0, 1.0, 2.0), (0.0, 1.0))

    def test_sample_within_support(self):
        """Test that samples stay on the tabulated support."""
        draws = Tabulated((0.5, 1.5), (0.0, 1.0)).sample(np.random.default_rng(3), 1000)
        assert draws.min() >= 0.5
        assert draws.max() <= 1.5
        assert abs(draws.mean() - 1.0) < 0.05
