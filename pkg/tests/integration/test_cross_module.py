"""
Integration tests chaining section, effective, certificate and tube services.
"""

import math

import numpy as np
import pytest

from src.core.exceptions import SolverError
from src.domain.models import ProfileSpec
from src.domain.schemas.config import ScenarioConfig, TubeConfig
from src.services.certificate_service import CertificateService
from src.services.effective_service import EffectiveService
from src.services.verification_service import VerificationService, get_verification_service

pytestmark = pytest.mark.integration


class TestSectionToEffective:
    """Section constants flowing into the 1D model and certificates."""

    def test_constants_drive_potential(self, fiber_16, gaussian_well):
        ground = fiber_16.threshold(1.0, 0.0)
        em = EffectiveService().build_effective(gaussian_well, ground, X=20.0, hx=0.01)
        exact = ground.A * (0.64 * math.sqrt(math.pi / 2) - 1.6 * math.sqrt(math.pi))
        assert em.integral == pytest.approx(exact, rel=1e-6)
        assert em.v_min == pytest.approx(-0.96 * ground.A, rel=1e-10)

    def test_plateau_and_bump_certificates(self, fiber_16, gaussian_well):
        ground = fiber_16.threshold(1.0, 0.0)
        em = EffectiveService().build_effective(gaussian_well, ground, X=20.0, hx=0.01)
        certs = CertificateService()
        assert certs.thm12_certificate(em, 8).certified
        assert certs.thm14_trial_count(em, 0.125, 4).certified

    def test_bump_count_below_bound_state_count(self, fiber_16, gaussian_well):
        """A certified n-bump trial implies at least n 1D bound states."""
        ground = fiber_16.threshold(1.0, 0.0)
        effective = EffectiveService()
        em = effective.build_effective(gaussian_well, ground, X=20.0, hx=0.01, eps=0.125)
        assert CertificateService().thm14_trial_count(em, 0.125, 4).certified
        assert effective.solve_bound_states(em, eps=0.125).count >= 4


class TestTubeAgainstEffective:
    """Tube spectra against the threshold and the 1D model on one section."""

    def test_lowest_tube_eigenvalue_below_threshold(self, tube_coarse, gaussian_well):
        det = tube_coarse.detect_discrete(gaussian_well, 1.0, [4.0, 6.0, 8.0], k=3, hx=0.25)
        ground = tube_coarse.ground(1.0, 0.0)
        assert det.threshold == pytest.approx(ground.E1)
        em = EffectiveService().build_effective(gaussian_well, ground, X=20.0, hx=0.01)
        sol = EffectiveService().solve_bound_states(em)
        assert sol.count >= 1
        assert det.classified.eigenvalues[0] < ground.E1

    def test_thin_tube_threshold_scales(self, tube_coarse):
        ground = tube_coarse.ground(0.0, 0.0)
        td = tube_coarse.assemble_tube(ProfileSpec.from_text("0"), 2.0, nx=8, eps=0.5)
        report = tube_coarse.lowest_modes(td, k=1)
        assert report.threshold == pytest.approx(4.0 * ground.E1)
        assert np.all(report.eigenvalues >= report.threshold)


@pytest.mark.slow
class TestAcceptanceScenarios:
    """Bundled verify-all scenarios."""

    @pytest.mark.parametrize(
        "name",
        [
            "threshold_oracle",
            "anisotropic_oracle",
            "gauge_identity",
            "coefficients",
            "balanced_certificate",
            "thin_limit",
            "large_coupling",
            "ode_family",
            "structural",
        ],
    )
    def test_scenario_passes(self, name):
        (result,) = VerificationService().run_all([name])
        assert result.error is None
        failed = [k for k, ok in result.criteria.items() if not ok]
        assert result.passed, f"{name} failed criteria: {failed} values={result.values}"

    def test_bending_end_to_end_on_coarse_tube(self):
        """Test the end-to-end chain with the tube on h = 1/16, hx = 1/8."""
        service = VerificationService(tube=TubeConfig(hx=0.125), section_h=1 / 16)
        (result,) = service.run_all(["bending_end_to_end"])
        assert result.error is None
        failed = [k for k, ok in result.criteria.items() if not ok]
        assert result.passed, f"failed criteria: {failed} values={result.values}"
        assert result.values["tube_resolution"]["source"] == "override"


class TestTubeResolution:
    """Tests for the end-to-end tube resolution."""

    def test_defaults(self):
        resolution = VerificationService().tube_resolution()
        assert resolution == {
            "section_h": 1 / 32,
            "hx": None,
            "L_list": [10.0, 15.0, 20.0],
            "source": "defaults",
        }

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"section_h": 1 / 16},
            {"tube": TubeConfig(hx=0.125)},
            {"tube": TubeConfig(L_list=[8.0, 12.0, 16.0])},
        ],
    )
    def test_override_reported(self, kwargs):
        assert VerificationService(**kwargs).tube_resolution()["source"] == "override"

    def test_cli_config_reaches_service(self):
        cfg = ScenarioConfig(cross_section={"h": 0.0625}, tube={"hx": 0.125})
        service = get_verification_service(cfg.solver, cfg.tube, cfg.cross_section.h)
        assert service.tube_resolution()["section_h"] == 0.0625
        assert service.tube_resolution()["hx"] == 0.125


class TestRunAll:
    def test_failures_are_reported_not_raised(self, monkeypatch):
        service = VerificationService()

        def broken():
            raise SolverError("no convergence")

        monkeypatch.setattr(service, "large_coupling", broken)
        (result,) = service.run_all(["large_coupling"])
        assert not result.passed
        assert "no convergence" in result.error
