"""
Unit tests for the tube service.

Section meshes are coarse (h = 1/4, 9 DOFs) so every solve takes the dense
path.
"""

import math
import time

import numpy as np
import pytest

from src.core.concurrency import map_ordered
from src.core.exceptions import ConfigError
from src.domain.models import ProfileSpec
from src.services.tube_service import SeparableTerm, TubeService

ZERO_PROFILE = ProfileSpec.from_text("0")


class TestMetric:
    def test_unit_determinant(self, gaussian_well):
        check = TubeService.metric_check(gaussian_well, np.linspace(-5, 5, 101))
        assert check.max_det_error < 1e-12
        fp = gaussian_well.fp(check.x)
        np.testing.assert_allclose(check.G[:, 0, 0], 1.0 + fp**2)


class TestAssembly:
    """Tests for the tensor discretisation."""

    def test_resolve_nx(self, tube_coarse):
        assert tube_coarse.resolve_nx(2.0, nx=5) == 5
        assert tube_coarse.resolve_nx(2.0, hx=0.25) == 16
        assert tube_coarse.resolve_nx(2.0) == 16

    def test_dimensions_and_indexing(self, tube_coarse, gaussian_well):
        td = tube_coarse.assemble_tube(gaussian_well, 4.0, nx=16)
        assert td.n_section == 9
        assert td.n_dofs == 15 * 9
        assert td.K.shape == (td.n_dofs, td.n_dofs)
        assert td.dof(2, 3) == 2 * 9 + 3
        assert td.hx == pytest.approx(0.5)

    def test_symmetric(self, tube_coarse, gaussian_well):
        td = tube_coarse.assemble_tube(gaussian_well, 4.0, nx=16, eps=0.5)
        assert abs(td.K - td.K.T).max() < 1e-12
        assert abs(td.M - td.M.T).max() < 1e-14

    def test_short_truncation_rejected(self, tube_coarse, gaussian_well):
        with pytest.raises(ConfigError, match="too small"):
            tube_coarse.assemble_tube(gaussian_well, 1.0, nx=8)

    @pytest.mark.parametrize("L,eps", [(0.0, 1.0), (2.0, 0.0)])
    def test_invalid_parameters(self, tube_coarse, L, eps):
        with pytest.raises(ConfigError):
            tube_coarse.assemble_tube(ZERO_PROFILE, L, nx=4, eps=eps)

    def test_thin_form_identity(self, tube_coarse, gaussian_well):
        """Test K_eps = K_{f'/eps, eps=1} + (eps^-2 - 1) Mx (x) S."""
        assert tube_coarse.thin_form_identity(gaussian_well, 4.0, 16, 0.5) < 1e-10


class TestSpectra:
    """Tests for lowest_modes and detect_discrete."""

    def test_tensor_oracle(self, tube_coarse):
        """Test the unsheared tube spectrum equals the tensor-sum oracle."""
        td = tube_coarse.assemble_tube(ZERO_PROFILE, 2.0, nx=8)
        report = tube_coarse.lowest_modes(td, k=4)
        oracle = tube_coarse.tensor_oracle(2.0, 8, 4)
        np.testing.assert_allclose(report.eigenvalues, oracle, rtol=1e-10)

    def test_threshold_attached(self, tube_coarse):
        td = tube_coarse.assemble_tube(ZERO_PROFILE, 2.0, nx=8, eps=0.5)
        report = tube_coarse.lowest_modes(td, k=2)
        E1 = tube_coarse.ground(0.0, 0.0).E1
        assert report.threshold == pytest.approx(E1 / 0.25)
        assert report.below_threshold.size == 0
        assert report.metadata["method"] == "dense"

    def test_shift_policies(self, tube_coarse, gaussian_well):
        floor = tube_coarse.section_stiffness_floor()
        E1 = tube_coarse.ground(1.0, 0.0).E1
        assert tube_coarse.shift_for(gaussian_well, 0.5, "safe") == pytest.approx(0.99 * floor / 0.25)
        assert tube_coarse.shift_for(gaussian_well, 1.0, "threshold") == pytest.approx(0.99 * E1)
        assert tube_coarse.shift_for(gaussian_well, 1.0, "zero") == 0.0

    def test_straight_tube_has_no_candidates(self, tube_coarse):
        det = tube_coarse.detect_discrete(ZERO_PROFILE, 1.0, [2.0, 3.0, 4.0], k=3, hx=0.25)
        assert det.n_candidates == 0
        assert all(c == "above_threshold" for c in det.classified.classifications)
        assert det.lambda1_by_L[0] > det.lambda1_by_L[1] > det.lambda1_by_L[2]

    def test_gaussian_well_has_candidate(self, tube_coarse, gaussian_well):
        """Test the bent tube traps a mode below the threshold."""
        det = tube_coarse.detect_discrete(gaussian_well, 1.0, [4.0, 6.0, 8.0], k=3, hx=0.25)
        assert det.classified.classifications[0] == "candidate"
        assert det.n_candidates >= 1
        assert det.classified.eigenvalues[0] < det.threshold
        assert all(b <= a + 1e-10 * abs(a) for a, b in zip(det.lambda1_by_L, det.lambda1_by_L[1:]))

    def test_detect_needs_three_lengths(self, tube_coarse):
        with pytest.raises(ConfigError):
            tube_coarse.detect_discrete(ZERO_PROFILE, 1.0, [2.0, 3.0])
        with pytest.raises(ConfigError):
            tube_coarse.detect_discrete(ZERO_PROFILE, 1.0, [2.0, 4.0, 3.0])


class TestSeparableForm:
    """Tests for forms of separable trial functions."""

    def test_gaussian_times_ground_mode(self, tube_coarse):
        """Test b(a v1) = (int a'^2 + E1 int a^2) for the unsheared tube."""
        ground = tube_coarse.ground(0.0, 0.0)
        term = SeparableTerm(
            lambda x: math.exp(-x * x), lambda x: -2.0 * x * math.exp(-x * x), ground.v1
        )
        fv = tube_coarse.separable_form([term], ZERO_PROFILE, support=(-10.0, 10.0))
        root = math.sqrt(math.pi / 2)
        assert fv.norm == pytest.approx(root, rel=1e-9)
        assert fv.form == pytest.approx(root * (1.0 + ground.E1), rel=1e-9)
        assert fv.shifted(ground.E1) == pytest.approx(root, rel=1e-8)

    def test_eps_scales_transverse_term(self, tube_coarse):
        ground = tube_coarse.ground(0.0, 0.0)
        term = SeparableTerm(
            lambda x: math.exp(-x * x), lambda x: -2.0 * x * math.exp(-x * x), ground.v1
        )
        fv = tube_coarse.separable_form([term], ZERO_PROFILE, eps=0.5, support=(-10.0, 10.0))
        root = math.sqrt(math.pi / 2)
        assert fv.form == pytest.approx(root * (1.0 + 4.0 * ground.E1), rel=1e-9)


class TestCaches:
    """Tests for the per-service ground-mode and section caches."""

    def test_ground_computed_once_across_threads(self, square_coarse, solver, monkeypatch):
        tube = TubeService(square_coarse, solver)
        original = tube.fiber.threshold
        calls = []

        def slow_threshold(beta1, beta2):
            calls.append((beta1, beta2))
            time.sleep(0.05)
            return original(beta1, beta2)

        monkeypatch.setattr(tube.fiber, "threshold", slow_threshold)
        grounds = map_ordered(lambda _: tube.ground(1.0, 0.0), range(8), max_workers=8)
        assert calls == [(1.0, 0.0)]
        assert all(g is grounds[0] for g in grounds)

    def test_section_floor_computed_once(self, square_coarse, solver):
        tube = TubeService(square_coarse, solver)
        floors = map_ordered(lambda _: tube.section_stiffness_floor(), range(4), max_workers=4)
        assert len(set(floors)) == 1
        assert floors[0] == pytest.approx(tube.ground(0.0, 0.0).E1, rel=1e-10)
