from unittest.mock import patch

from src.selftest import CHECKS, FORMULAS, run_selftest


class TestRunSelftest:
    """Test the acceptance suite runner."""

    def test_subset(self):
        """Test running a single named check."""
        report = run_selftest(seed=1, n=1000, only=["independence-reduction"])
        assert [check.check for check in report.checks] == ["independence-reduction"]
        assert report.passed

    def test_deterministic_detail(self):
        """Test that the same seed gives the same report."""
        first = run_selftest(seed=3, n=1000, only=["independence-reduction"])
        second = run_selftest(seed=3, n=1000, only=["independence-reduction"])
        assert first.model_dump() == second.model_dump()

    def test_exception_is_failure(self):
        """Test that a check raising an error is reported as failed."""

        def broken(seed, n):
            raise RuntimeError("boom")

        with patch.dict(CHECKS, {"broken": broken}):
            report = run_selftest(seed=1, n=10, only=["broken"])
        assert not report.passed
        assert report.checks[0].detail == "RuntimeError: boom"

    def test_check_order_is_fixed(self):
        """Test that every check has a descriptive identifier."""
        assert list(CHECKS)[0] == "exponential-min-threshold-exact"
        assert all("-" in name for name in CHECKS)

    def test_every_check_names_its_formula(self):
        """Test that each check reports the formula it verifies."""
        assert set(FORMULAS) == set(CHECKS)
        report = run_selftest(seed=1, n=1000, only=["independence-reduction"])
        assert report.checks[0].formula == "a0 = (1 - q) a"

    def test_counter_check(self):
        """Test the counter check at a small sample size."""
        report = run_selftest(seed=5, n=20_000, only=["counter-first-loss"])
        assert report.checks[0].check == "counter-first-loss"
        assert report.checks[0].passed

    def test_inversion_route(self):
        """Test that the solver, the inversion and the simulation agree with default settings."""
        report = run_selftest(seed=2, n=5000, only=["independent-exponential-routes"])
        assert report.passed, report.checks[0].detail

    def test_moment_formulas_cover_all_couplings(self):
        """Test that the worst z-score is reported for each coupling."""
        report = run_selftest(seed=4, n=4000, only=["moment-formulas"])
        detail = report.checks[0].detail
        for coupling in ("independent", "min_threshold", "race_step", "shifted_min"):
            assert f"{coupling}=" in detail

    def test_renewal_residual_includes_uniform_threshold(self):
        """Test the residual check over every solver law."""
        report = run_selftest(seed=1, n=10, only=["renewal-residual"])
        assert "min_unif=" in report.checks[0].detail
        assert report.passed, report.checks[0].detail
