import math

import numpy as np
import pandas as pd
import pytest

from src.analytic import laplace_transforms
from src.applications import GeigerModel
from src.distributions import Deterministic, Exponential, Uniform
from src.errors import AtomAtZeroError, InversionUnstableError, ShapeMismatchError
from src.steplaw import Independent, MinThreshold, RaceStep
from src.volterra import (
    SurvivalCurve,
    equation_residual,
    invert_laplace,
    make_grid,
    solve_survival,
    stehfest_coefficients,
)


def exp_survival(t):
    return np.exp(-np.asarray(t, dtype=float))


class TestSurvivalCurve:
    """Test the tabulated survival curve."""

    def test_interpolation(self):
        """Test linear interpolation between nodes."""
        curve = SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0, 0.5]))
        assert curve(0.5) == pytest.approx(0.75)
        assert isinstance(curve(0.5), float)
        np.testing.assert_allclose(curve(np.array([0.0, 1.0])), [1.0, 0.5])

    def test_mean_of_exponential(self):
        """Test the trapezoidal mean of exp(-t)."""
        curve = SurvivalCurve.from_function(exp_survival, 30.0, 0.01)
        assert curve.mean() == pytest.approx(1.0, abs=1e-4)

    def test_mean_prepends_origin(self):
        """Test that a curve starting after 0 is extended with P(S >= 0) = 1."""
        curve = SurvivalCurve(np.array([1.0, 2.0]), np.array([1.0, 0.0]))
        assert curve.mean() == pytest.approx(1.5)

    def test_shape_mismatch(self):
        """Test that unequal arrays are rejected."""
        with pytest.raises(ShapeMismatchError):
            SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0]))

    def test_times_increasing(self):
        """Test that repeated times are rejected."""
        with pytest.raises(ValueError, match="increasing"):
            SurvivalCurve(np.array([0.0, 0.0]), np.array([1.0, 1.0]))

    def test_sup_distance(self):
        """Test sup distance to a curve and to a callable."""
        a = SurvivalCurve.on_grid([1.0, 0.8, 0.6], 0.5)
        b = SurvivalCurve.on_grid([1.0, 0.7, 0.6], 0.5)
        assert a.sup_distance(b) == pytest.approx(0.1)
        assert a.sup_distance(lambda t: np.ones_like(t)) == pytest.approx(0.4)

    def test_sup_distance_grid_mismatch(self):
        """Test that curves on different grids cannot be compared node by node."""
        a = SurvivalCurve.on_grid([1.0, 0.8, 0.6], 0.5)
        b = SurvivalCurve.on_grid([1.0, 0.8], 0.5)
        with pytest.raises(ShapeMismatchError):
            a.sup_distance(b)

    def test_to_frame(self):
        """Test the t,survival frame."""
        frame = SurvivalCurve.on_grid([1.0, 0.5], 0.1).to_frame()
        assert isinstance(frame, pd.DataFrame)
        assert list(frame.columns) == ["t", "survival"]


class TestMakeGrid:
    """Test grid construction."""

    def test_grid(self):
        """Test node count and spacing."""
        grid = make_grid(1.0, 0.1)
        assert len(grid) == 11
        assert grid[-1] == pytest.approx(1.0)

    def test_invalid(self):
        """Test that bad steps and short spans are rejected."""
        with pytest.raises(ValueError, match="h must be"):
            make_grid(1.0, 0.0)
        with pytest.raises(ValueError, match="10 h"):
            make_grid(0.5, 0.1)


class TestSolveSurvival:
    """Test the renewal-equation solver."""

    def test_min_threshold_exponential_eta(self):
        """Test that min(Exp(1), Exp(2)) steps give exp(-t)."""
        curve = solve_survival(MinThreshold(Exponential(1.0), Exponential(2.0)), 5.0, 0.01)
        assert curve.values[0] == 1.0
        assert curve.sup_distance(exp_survival) <= 5e-4

    def test_min_threshold_uniform_eta(self):
        """Test that a uniform eta also gives exp(-t)."""
        curve = solve_survival(MinThreshold(Exponential(1.0), Uniform(0.0, 2.0)), 5.0, 0.01)
        assert curve.sup_distance(exp_survival) <= 5e-4

    def test_min_threshold_deterministic_eta(self):
        """Test the atom-snapping path for a deterministic eta."""
        curve = solve_survival(MinThreshold(Exponential(1.0), Deterministic(1.0)), 5.0, 0.01)
        assert curve.sup_distance(exp_survival) <= 2e-2

    def test_independent_exponential(self):
        """Test Exp(2) steps with q = 1/2 against exp(-t)."""
        curve = solve_survival(Independent(Exponential(2.0), 0.5), 5.0, 0.01)
        assert curve.sup_distance(exp_survival) <= 5e-4

    def test_refinement_ratio(self):
        """Test that halving h shrinks the change in the curve about fourfold."""
        for eta in (Exponential(1.0), Uniform(0.0, 2.0)):
            law = RaceStep(Exponential(1.0), eta)
            coarse, mid, fine = (solve_survival(law, 4.0, h) for h in (0.04, 0.02, 0.01))
            t = coarse.times
            first = np.max(np.abs(coarse.values - mid(t)))
            second = np.max(np.abs(mid(t) - fine(t)))
            assert 3.5 <= first / second <= 4.5

    def test_monotone_and_bounded(self):
        """Test that the solution is nonincreasing within [0, 1]."""
        curve = solve_survival(RaceStep(Exponential(1.0), Deterministic(math.log(2.0))), 5.0, 0.01)
        assert curve.is_nonincreasing()
        assert curve.values.min() >= 0.0
        assert curve.values.max() <= 1.0

    def test_atom_at_zero(self):
        """Test that a kernel with all its mass at zero is refused."""
        with pytest.raises(AtomAtZeroError):
            solve_survival(Independent(Deterministic(0.0), 0.0), 1.0, 0.1)

    def test_residual_is_small(self):
        """Test that the solved curve satisfies the equation on a finer grid."""
        law = MinThreshold(Exponential(1.0), Exponential(2.0))
        curve = solve_survival(law, 3.0, 0.01)
        assert equation_residual(law, curve) <= 1e-3

    def test_residual_flags_wrong_curve(self):
        """Test that a curve that is not a solution has a large residual."""
        law = Independent(Exponential(2.0), 0.5)
        wrong = SurvivalCurve.from_function(lambda t: np.exp(-2.0 * t), 3.0, 0.01)
        assert equation_residual(law, wrong) > 0.05

    def test_residual_invalid_refine(self):
        """Test that refine must be positive."""
        law = Independent(Exponential(2.0), 0.5)
        curve = SurvivalCurve.from_function(exp_survival, 1.0, 0.1)
        with pytest.raises(ValueError):
            equation_residual(law, curve, refine=0)


class TestStehfest:
    """Test Laplace inversion."""

    def test_coefficients_small_orders(self):
        """Test the known weights for orders 2 and 4."""
        assert stehfest_coefficients(2) == pytest.approx((2.0, -2.0))
        assert stehfest_coefficients(4) == pytest.approx((-2.0, 26.0, -48.0, 24.0))

    def test_coefficients_sum_to_zero(self):
        """Test that the weights of order 12 sum to zero."""
        weights = stehfest_coefficients(12)
        assert abs(sum(weights)) < 1e-6 * max(abs(w) for w in weights)

    def test_odd_order(self):
        """Test that an odd order is rejected."""
        with pytest.raises(ValueError):
            stehfest_coefficients(7)

    def test_exponential_inversion(self):
        """Test inversion of 1 / (1 + z) with the default order and stability check."""
        t = np.linspace(0.1, 10.0, 100)
        curve = invert_laplace(lambda s: 1.0 / (1.0 + s), t)
        np.testing.assert_allclose(curve.values, np.exp(-t), atol=5e-5)

    def test_low_order_is_less_accurate(self):
        """Test that accuracy improves from order 8 to order 16."""
        t = np.linspace(0.1, 10.0, 100)
        errors = []
        for order in (8, 16):
            curve = invert_laplace(lambda s: 1.0 / (1.0 + s), t, order=order, check=False)
            errors.append(np.max(np.abs(curve.values - np.exp(-t))))
        assert errors[1] < errors[0]

    def test_inversion_matches_solver(self):
        """Test that both numerical routes agree."""
        law = Independent(Exponential(2.0), 0.5)
        curve = solve_survival(law, 5.0, 0.01)
        inverted = invert_laplace(laplace_transforms(law), curve.times[1:])
        np.testing.assert_allclose(inverted.values, curve.values[1:], atol=2e-3)

    def test_counter_inversion_matches_solver(self):
        """Test the counter with unit Poisson flow and Exp(2) lock on [0.1, 10]."""
        law = GeigerModel(1.0, Exponential(2.0)).step_law
        curve = solve_survival(law, 10.0, 0.01)
        inverted = invert_laplace(laplace_transforms(law), curve.times[10:])
        assert np.max(np.abs(inverted.values - curve.values[10:])) <= 1e-3

    def test_nonpositive_times(self):
        """Test that t = 0 is rejected."""
        with pytest.raises(ValueError, match="positive"):
            invert_laplace(lambda s: 1.0 / (1.0 + s), np.array([0.0, 1.0]))

    def test_unstable_inversion(self):
        """Test that a jump in the survival function is reported as unstable."""
        t = np.linspace(0.5, 1.5, 11)
        with pytest.raises(InversionUnstableError):
            invert_laplace(lambda s: np.exp(-s), t)
