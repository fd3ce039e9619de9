"""
Unit tests for the effective 1D service.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from src.core.exceptions import ConfigError
from src.domain.expr import parse
from src.domain.models import EffectiveModel, ProfileSpec
from src.services.effective_service import EffectiveService, symmetric_grid

PI2 = math.pi**2
SQUARE = {"A": PI2, "B": 0.0, "C": PI2}


@pytest.fixture
def service() -> EffectiveService:
    return EffectiveService()


@pytest.fixture
def well_model(service, gaussian_well) -> EffectiveModel:
    return service.build_effective(gaussian_well, SQUARE, X=20.0, hx=0.01)


def harmonic_model(X: float = 10.0, hx: float = 0.01) -> EffectiveModel:
    """V = x^2 - 10 sampled directly: eigenvalues 2n + 1 - 10."""
    x = symmetric_grid(X, hx)
    profile = ProfileSpec.from_text("0")
    return EffectiveModel(profile=profile, A=1.0, B=0.0, C=0.0, x=x, V=x**2 - 10.0, integral=0.0)


class TestSymmetricGrid:
    def test_even_intervals(self):
        x = symmetric_grid(1.0, 0.3)
        assert (x.size - 1) % 2 == 0
        assert x[0] == -1.0 and x[-1] == 1.0
        assert np.diff(x).max() <= 0.3
        assert 0.0 in x

    def test_invalid(self):
        with pytest.raises(ConfigError):
            symmetric_grid(0.0, 0.1)


class TestBuildEffective:
    """Tests for the effective potential."""

    def test_gaussian_well_integral(self, well_model):
        exact = PI2 * (0.64 * math.sqrt(math.pi / 2) - 1.6 * math.sqrt(math.pi))
        assert well_model.integral == pytest.approx(exact, rel=1e-8)
        assert well_model.integral == pytest.approx(-20.07, abs=0.01)

    def test_minimum(self, well_model):
        assert well_model.v_min == pytest.approx(-0.96 * PI2, rel=1e-12)
        assert well_model.argmin == pytest.approx(0.0, abs=1e-12)

    def test_potential_matches_samples(self, well_model):
        np.testing.assert_allclose(well_model.potential(well_model.x), well_model.V)

    def test_cross_term_is_shifted(self, service):
        """Test V uses 2B(f'g' - beta1 beta2) so it vanishes at infinity."""
        profile = ProfileSpec.from_text("1 + exp(-x^2)", "2", 1.0, 2.0)
        em = service.build_effective(profile, {"A": 0.0, "B": 1.0, "C": 0.0}, X=10.0, hx=0.1)
        assert em.V[0] == pytest.approx(0.0, abs=1e-12)
        assert float(em.potential(0.0)) == pytest.approx(4.0)

    def test_accepts_ground_data(self, service, gaussian_well, fiber_16):
        ground = fiber_16.threshold(1.0, 0.0)
        em = service.build_effective(gaussian_well, ground, X=10.0, hx=0.05)
        assert em.A == ground.A
        assert em.integral < 0

    def test_grid_too_short(self, service, gaussian_well):
        with pytest.raises(ConfigError, match="too short"):
            service.build_effective(gaussian_well, SQUARE, X=1.0, hx=0.01)


class TestBoundStates:
    """Tests for -d^2/dx^2 + V/eps^2."""

    def test_harmonic_oscillator(self, service):
        sol = service.solve_bound_states(harmonic_model())
        assert sol.count == 5
        np.testing.assert_allclose(sol.eigenvalues, [-9.0, -7.0, -5.0, -3.0, -1.0], atol=1e-3)
        assert sol.marginal == ()

    def test_eigenvectors_normalised(self, service):
        sol = service.solve_bound_states(harmonic_model())
        norms = np.sum(sol.eigenvectors**2, axis=0) * sol.hx
        np.testing.assert_allclose(norms, 1.0, rtol=1e-12)
        peaks = sol.eigenvectors[np.argmax(np.abs(sol.eigenvectors), axis=0), range(sol.count)]
        assert np.all(peaks > 0)

    def test_zero_potential_has_no_bound_states(self, service, straight_profile):
        em = service.build_effective(straight_profile, SQUARE, X=10.0, hx=0.1)
        sol = service.solve_bound_states(em)
        assert sol.count == 0
        assert sol.count_interval == (0, 0)

    def test_negative_integral_binds(self, service, well_model):
        sol = service.solve_bound_states(well_model)
        assert sol.count >= 1
        assert sol.eigenvalues[0] > well_model.v_min

    def test_square_well_matches_matching_condition(self, service):
        """Test V = -1 on (-1, 1) against k tan k = sqrt(1 - k^2)."""
        x = symmetric_grid(10.0, 0.001)
        V = np.where(np.abs(x) < 1.0, -1.0, 0.0)
        V[np.isclose(np.abs(x), 1.0, atol=1e-9)] = -0.5
        em = EffectiveModel(profile=ProfileSpec.from_text("0"), A=1.0, B=0.0, C=0.0, x=x, V=V, integral=-2.0)
        k = brentq(lambda t: t * math.tan(t) - math.sqrt(1.0 - t * t), 0.1, 1.0)
        sol = service.solve_bound_states(em)
        assert sol.count == 1
        assert sol.eigenvalues[0] == pytest.approx(k * k - 1.0, abs=1e-4)

    def test_longer_domain_lowers_eigenvalues(self, service, well_model):
        """Test X in {10, 20, 40} on a common spacing."""
        sols = [service.solve_bound_states(well_model, X=X, hx=0.01) for X in (10.0, 20.0, 40.0)]
        counts = [s.count for s in sols]
        assert counts == sorted(counts)
        for short, long in zip(sols, sols[1:], strict=False):
            m = short.count
            assert np.all(long.eigenvalues[:m] <= short.eigenvalues[:m] + 1e-9)

    def test_regridding(self, service, well_model):
        """Test explicit X/hx resample V from the expressions."""
        a = service.solve_bound_states(well_model)
        b = service.solve_bound_states(well_model, X=15.0, hx=0.005)
        assert b.hx == pytest.approx(0.005)
        assert b.eigenvalues[0] == pytest.approx(a.eigenvalues[0], rel=1e-3)

    def test_bad_eps(self, service, well_model):
        with pytest.raises(ConfigError):
            service.solve_bound_states(well_model, eps=0.0)


class TestThinLimit:
    """Tests for counts against eps."""

    def test_counts_monotone(self, service, well_model):
        sweep = service.count_vs_epsilon(well_model, [1.0, 0.5, 0.25, 0.125])
        assert sweep.monotone
        assert sweep.counts[0] >= 1
        assert sweep.counts[-1] > sweep.counts[0]

    def test_scaled_lowest_eigenvalue_approaches_min(self, service, well_model):
        sweep = service.count_vs_epsilon(well_model, [0.5, 0.25, 0.125])
        gaps = [r.eps2_lambda1 - sweep.v_min for r in sweep.rows]
        assert all(g > 0 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.5

    def test_eps_list_order(self, service, well_model):
        with pytest.raises(ConfigError):
            service.count_vs_epsilon(well_model, [0.5, 1.0])


class TestAsymptotics:
    """Tests for -d^2/dx^2 + mu W."""

    def test_w_min(self, service):
        w, x = service.w_min(parse("-exp(-(x - 0.3)^2)"), 5.0)
        assert w == pytest.approx(-1.0, abs=1e-12)
        assert x == pytest.approx(0.3, abs=1e-5)

    def test_ratio_converges_to_min(self, service):
        sweep = service.asymptotic_slope(parse("-exp(-x^2)"), [1e2, 1e3], j=1, X=10.0)
        assert sweep.w_min == pytest.approx(-1.0)
        assert sweep.gaps[1] < sweep.gaps[0]
        assert all(r.lower_bound_ok for r in sweep.rows)
        assert all(r.ratio > sweep.w_min for r in sweep.rows)
        # harmonic approximation: lambda_1 ~ -mu + sqrt(mu)
        assert sweep.rows[1].gap == pytest.approx(1e3**-0.5, rel=0.1)

    def test_constant_w(self, service):
        """Test W = c gives c + pi^2 / (mu (2X)^2)."""
        sweep = service.asymptotic_slope(parse("0.5"), [100.0], j=1, X=20.0)
        row = sweep.rows[0]
        assert sweep.w_min == pytest.approx(0.5)
        assert abs(row.ratio - 0.5) < 1e-3
        assert row.ratio == pytest.approx(0.5 + PI2 / (100.0 * 40.0**2), abs=1e-6)

    def test_higher_index(self, service):
        sweep = service.asymptotic_slope(parse("-exp(-x^2)"), [1e2], j=2, X=10.0)
        row = sweep.rows[0]
        assert len(row.eigenvalues) == 2
        assert row.eigenvalues[0] < row.eigenvalues[1]

    @pytest.mark.parametrize("mu,j", [([0.0], 1), ([], 1), ([10.0], 0)])
    def test_invalid(self, service, mu, j):
        with pytest.raises(ConfigError):
            service.asymptotic_slope(parse("-exp(-x^2)"), mu, j=j)
