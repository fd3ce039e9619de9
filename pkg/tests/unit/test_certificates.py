"""
Unit tests for the certificate service.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.core.exceptions import ConfigError, ConsistencyError, HypothesisError
from src.domain.expr import add, evaluate, parse
from src.domain.models import ProfileSpec
from src.services import certificate_service as certificate_module
from src.services.certificate_service import (
    CertificateService,
    gaussian_xi,
    plateau,
    tau_family,
)
from src.services.effective_service import EffectiveService

PI2 = math.pi**2
SQUARE = {"A": PI2, "B": 0.0, "C": PI2}


@pytest.fixture
def service() -> CertificateService:
    return CertificateService()


@pytest.fixture
def well_model(gaussian_well):
    return EffectiveService().build_effective(gaussian_well, SQUARE, X=20.0, hx=0.01)


class TestHelpers:
    def test_plateau(self):
        phi, dphi = plateau(2)
        assert [phi(x) for x in (0.0, 2.0, 3.0, -3.0, 4.0, 5.0)] == [1.0, 1.0, 0.5, 0.5, 0.0, 0.0]
        assert dphi(3.0) == -0.5
        assert dphi(-3.0) == 0.5
        assert dphi(1.0) == 0.0

    def test_gaussian_xi(self):
        xi = gaussian_xi(1.0, 2.0)
        assert evaluate(xi, 1.0) == pytest.approx(1.0)
        assert evaluate(xi, 3.0) == pytest.approx(math.exp(-1.0))

    def test_tau_family_constant_member(self):
        """Test c = 0 folds to the constant -2 beta1."""
        assert evaluate(tau_family(0.0, 1.5, 2.0), 0.3) == pytest.approx(-3.0)


class TestOdeFamily:
    """Tests for the explicit ODE family."""

    def test_negative_member(self, service):
        cert = service.ode_family_residual(-1.0, 1.0, 0.5 * PI2, np.linspace(-2, 2, 401))
        assert cert.certified
        assert cert.value < 1e-10
        assert cert.details["classification"] == "negative"
        assert cert.details["excess_range"]["max"] <= 0.0

    @pytest.mark.parametrize("c", [-1.0, -0.5])
    @pytest.mark.parametrize("beta1", [0.5, 1.0])
    @pytest.mark.parametrize("A_tilde", [1.0, 0.5 * PI2])
    def test_absolute_residual_bound(self, service, c, beta1, A_tilde):
        cert = service.ode_family_residual(c, beta1, A_tilde, np.linspace(-2, 2, 401))
        assert cert.value <= 1e-10
        assert cert.certified

    def test_tolerance_is_absolute(self, service, monkeypatch):
        cert = service.ode_family_residual(-1.0, 1.0, 0.5 * PI2, np.linspace(-2, 2, 401))
        monkeypatch.setattr(certificate_module, "ODE_TOL", cert.value / 2 if cert.value > 0 else -1.0)
        again = service.ode_family_residual(-1.0, 1.0, 0.5 * PI2, np.linspace(-2, 2, 401))
        assert again.verdict == "inconclusive"

    def test_constant_member(self, service):
        cert = service.ode_family_residual(0.0, 1.0, 2.0, np.linspace(-2, 2, 11))
        assert cert.value == 0.0
        assert cert.details["classification"] == "constant"

    def test_positive_member_away_from_singularity(self, service):
        cert = service.ode_family_residual(1.0, 1.0, 2.0, np.linspace(1.0, 2.0, 51))
        assert cert.certified
        assert cert.details["classification"] == "positive"
        assert cert.details["singularity"] == pytest.approx(0.0)
        assert cert.details["excess_range"]["min"] > 0.0

    def test_grid_through_singularity(self, service):
        with pytest.raises(ConfigError, match="singularity"):
            service.ode_family_residual(1.0, 1.0, 2.0, np.linspace(-1.0, 1.0, 11))

    @pytest.mark.parametrize("beta1,A_tilde", [(0.0, 1.0), (1.0, 0.0)])
    def test_degenerate_parameters(self, service, beta1, A_tilde):
        with pytest.raises(ConfigError):
            service.ode_family_residual(-1.0, beta1, A_tilde, np.linspace(-1, 1, 5))


class TestPlateauCertificate:
    """Tests for the plateau-cutoff certificate."""

    def test_gaussian_well_certified_at_first_size(self, service, well_model):
        cert = service.thm12_certificate(well_model, 8)
        assert cert.certified
        assert cert.parameters["n"] == 1
        assert cert.value < -10 * cert.error_estimate

    def test_plateau_energy_tends_to_integral(self, service, well_model):
        q, _ = service.plateau_energy(well_model, 8)
        assert q == pytest.approx(2.0 / 8 + well_model.integral, abs=1e-6)

    def test_zero_potential_inconclusive(self, service, straight_profile):
        em = EffectiveService().build_effective(straight_profile, SQUARE, X=20.0, hx=0.1)
        cert = service.thm12_certificate(em, 8)
        assert cert.verdict == "inconclusive"
        assert cert.parameters["n"] is None
        assert len(cert.details["q_sequence"]) == 8

    def test_small_integral_needs_long_plateau(self, service, gaussian_well):
        """Test int V = -0.1 certifies once 2/n drops below 0.1."""
        A = 0.1 / (1.6 * math.sqrt(math.pi) - 0.64 * math.sqrt(math.pi / 2))
        em = EffectiveService().build_effective(gaussian_well, {"A": A, "B": 0.0, "C": 0.0}, X=64.0, hx=0.01)
        assert em.integral == pytest.approx(-0.1, rel=1e-6)
        cert = service.thm12_certificate(em, 32)
        assert cert.certified
        assert cert.parameters["n"] in (20, 21)
        assert cert.value < 0
        q = [row["q"] for row in cert.details["q_sequence"]]
        assert all(v > 0 for v in q[:19])

    def test_grid_shorter_than_cutoffs(self, service, well_model):
        with pytest.raises(ConfigError):
            service.thm12_certificate(well_model, 64)


class TestDisjointBumps:
    """Tests for the bump-count certificate."""

    def test_negative_interval(self, service, well_model):
        """Test the {V < 0} component reaches out to where f' rounds to its limit."""
        left, right = service.negative_interval(well_model)
        assert left < -5.5
        assert right > 5.5
        assert left == pytest.approx(-right, abs=1e-9)

    def test_negative_interval_level(self, service, well_model):
        left, right = service.negative_interval(well_model, 0.5)
        assert left == pytest.approx(-1.0266, abs=1e-3)
        assert right == pytest.approx(1.0266, abs=1e-3)
        assert float(well_model.potential(right)) == pytest.approx(0.5 * well_model.v_min, rel=1e-10)

    def test_negative_interval_stops_at_sign_change(self, service):
        profile = ProfileSpec.from_text("1 - 0.8*exp(-x^2) + 0.5*x^2*exp(-x^2)", "0", 1.0, 0.0)
        em = EffectiveService().build_effective(profile, SQUARE, X=20.0, hx=0.01)
        left, right = service.negative_interval(em)
        assert -20.0 < left < 0.0 < right < 20.0
        assert float(em.potential(right)) == pytest.approx(0.0, abs=1e-9)
        assert float(em.potential(0.5 * (left + right))) < 0.0

    def test_level_fraction_range(self, service, well_model):
        with pytest.raises(ConfigError):
            service.negative_interval(well_model, 1.0)

    def test_no_negative_interval(self, service, straight_profile):
        em = EffectiveService().build_effective(straight_profile, SQUARE, X=10.0, hx=0.1)
        with pytest.raises(HypothesisError) as exc:
            service.negative_interval(em)
        assert exc.value.hypothesis == "negative_interval"

    def test_thin_section_fits_four_bumps(self, service, well_model):
        cert = service.thm14_trial_count(well_model, 0.125, 4)
        assert cert.certified
        assert len(cert.details["rayleigh"]) == 4
        assert cert.value < 0

    def test_thick_section_inconclusive(self, service, well_model):
        cert = service.thm14_trial_count(well_model, 1.0, 4)
        assert cert.verdict == "inconclusive"
        assert [row["level_fraction"] for row in cert.details["levels"]] == [0.0, 0.1, 0.25, 0.5, 0.75]

    @pytest.mark.parametrize("eps", [1.0, 0.5])
    def test_verdicts_monotone_in_n(self, service, well_model, eps):
        verdicts = [service.thm14_trial_count(well_model, eps, n).certified for n in range(1, 9)]
        assert verdicts[0]
        assert verdicts == sorted(verdicts, reverse=True)

    def test_first_failing_count_near_bound_state_count(self, service, well_model):
        first = service.first_failing_count(well_model, 1.0, 6)
        count = EffectiveService().solve_bound_states(well_model).count
        assert first is not None
        assert first - 1 <= count
        assert abs(first - count) <= 1

    def test_invalid(self, service, well_model):
        with pytest.raises(ConfigError):
            service.thm14_trial_count(well_model, 0.0, 4)
        with pytest.raises(ConfigError):
            service.thm14_trial_count(well_model, 1.0, 0)


class TestPerturbationFunctional:
    """Tests for J(xi) and the hypothesis gates."""

    def test_linear_in_xi(self, balanced_profile):
        a = gaussian_xi(-1.0, 1.0)
        b = gaussian_xi(2.0, 0.5)
        Ja, _ = CertificateService.thm13_functional(balanced_profile, 4.0, a)
        Jb, _ = CertificateService.thm13_functional(balanced_profile, 4.0, b)
        Jab, _ = CertificateService.thm13_functional(balanced_profile, 4.0, add(a, b))
        assert Jab == pytest.approx(Ja + Jb, abs=1e-7)

    def test_constant_shear_gives_zero(self, straight_profile, gaussian_well):
        assert straight_profile.is_straight
        assert not gaussian_well.is_straight
        J, _ = CertificateService.thm13_functional(straight_profile, 4.0, gaussian_xi(0.0, 1.0))
        assert J == pytest.approx(0.0, abs=1e-14)

    def test_balanced_profile_passes_gates(self, service, balanced_profile):
        gates = service.check_thm13_hypotheses(balanced_profile, 1)
        assert gates["balance_relative"] <= 1e-8
        assert gates["variance"] > 0

    @pytest.mark.parametrize(
        "fprime,gprime,beta1,hypothesis",
        [
            ("0.5", "0", 0.5, "shear_not_constant"),
            ("1 - 0.8*exp(-x^2)", "0", 1.0, "balanced_integral"),
            ("1", "exp(-x^2)", 1.0, "gprime_vanishes"),
            ("1/(1 + x^2)", "0", 0.0, "tail_limit_fprime"),
        ],
    )
    def test_gates(self, service, fprime, gprime, beta1, hypothesis):
        profile = ProfileSpec.from_text(fprime, gprime, beta1, 0.0)
        with pytest.raises(HypothesisError) as exc:
            service.check_thm13_hypotheses(profile, 1)
        assert exc.value.hypothesis == hypothesis

    def test_zero_times_x_counts_as_vanishing(self, service, balanced_profile):
        profile = ProfileSpec.from_exprs(balanced_profile.fprime, parse("0*x"), 1.0, 0.0)
        assert profile.gprime_vanishes
        assert not ProfileSpec.from_text("0*x + x", "0").fprime_vanishes
        assert ProfileSpec.from_text("sin(0)*x + 0.5", "0*x", 0.5).is_straight
        gates = service.check_thm13_hypotheses(profile, 1)
        assert gates["balance_relative"] <= 1e-8

    def test_second_axis_needs_vanishing_fprime(self, service, balanced_profile):
        with pytest.raises(HypothesisError) as exc:
            service.check_thm13_hypotheses(balanced_profile, 2)
        assert exc.value.hypothesis == "fprime_vanishes"

    def test_xi_table_order(self, service, balanced_profile):
        table = service.xi_table(balanced_profile, 4.0, [0.0, 1.0], [0.5, 1.0])
        assert [(e.shift, e.width) for e in table] == [(0.0, 0.5), (1.0, 0.5), (0.0, 1.0), (1.0, 1.0)]


class TestFormIdentity:
    """Tests for b(w v1) - E1 ||w v1||^2 = int w'^2 + V w^2."""

    def test_identity_with_discrete_ground_mode(self, tube_coarse, gaussian_well):
        service = CertificateService(tube_coarse)
        ground = tube_coarse.ground(1.0, 0.0)
        lhs, rhs = service.s_eps_identity(
            gaussian_well,
            ground,
            lambda x: math.exp(-x * x / 4),
            lambda x: -0.5 * x * math.exp(-x * x / 4),
            support=(-15.0, 15.0),
        )
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)
        assert rhs < 0

    def test_needs_tube(self, service, gaussian_well):
        with pytest.raises(ConfigError):
            service.s_eps_identity(gaussian_well, None, math.exp, math.exp)


class TestGroundModeGuard:
    """Tests for refusing a ground mode that is not positive."""

    def test_form_identity_refuses(self, tube_coarse, gaussian_well):
        ground = replace(tube_coarse.ground(1.0, 0.0), v1_positive=False)
        with pytest.raises(ConsistencyError, match="not positive"):
            CertificateService(tube_coarse).s_eps_identity(
                gaussian_well, ground, math.exp, math.exp
            )

    def test_perturbation_certificate_refuses(self, tube_coarse, balanced_profile):
        ground = replace(tube_coarse.ground(1.0, 0.0), v1_positive=False)
        with pytest.raises(ConsistencyError):
            CertificateService(tube_coarse).thm13_certificate(
                balanced_profile, ground, [0.0], [1.0], n_max=2
            )


class TestPerturbationCertificate:
    """Tests for the xi y1 v1 trial on the balanced profile."""

    @pytest.fixture(scope="class")
    def balanced_cert(self, tube_8, balanced_profile):
        ground = tube_8.ground(1.0, 0.0)
        return CertificateService(tube_8).thm13_certificate(
            balanced_profile, ground, [-2.0, -1.0, 0.0, 1.0, 2.0], [0.5, 1.0, 2.0]
        )

    def test_certified(self, balanced_cert):
        assert balanced_cert.certified
        assert balanced_cert.parameters["n"] <= 64
        assert balanced_cert.value < -10 * balanced_cert.error_estimate

    def test_delta_opposes_cross_term(self, balanced_cert):
        d = balanced_cert.details
        assert d["Q"] > 0
        assert balanced_cert.parameters["delta"] == pytest.approx(-d["J_h"] / d["Q"])
        assert balanced_cert.parameters["delta"] * d["J_h"] < 0

    def test_flipped_delta_raises_value(self, balanced_cert):
        assert balanced_cert.details["value_flipped_delta"] > balanced_cert.value
        assert balanced_cert.details["value_flipped_delta"] > 0

    def test_some_xi_resolved(self, balanced_cert):
        table = balanced_cert.details["J_table"]
        assert len(table) == 15
        assert any(abs(row["J"]) > 10 * row["error"] for row in table)
