"""
Pytest configuration and fixtures.
"""

import math

import pytest

from src.domain.models import ProfileSpec
from src.domain.schemas.config import SolverConfig
from src.services.fiber_service import FiberService
from src.services.mesh_service import MeshService
from src.services.tube_service import TubeService

PI2 = math.pi**2
GAUSSIAN_WELL = "1 - 0.8*exp(-x^2)"
BALANCED_C0 = (2.0 - math.sqrt(3.5)) / math.sqrt(2.0)
BALANCED = f"1 + x*exp(-x^2) - {BALANCED_C0!r}*exp(-x^2)"


@pytest.fixture(scope="session")
def mesh_service() -> MeshService:
    return MeshService()


@pytest.fixture(scope="session")
def square_coarse(mesh_service):
    """Unit square, h = 1/4 (9 interior DOFs)."""
    return mesh_service.make_rectangle(1.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def square_8(mesh_service):
    """Unit square, h = 1/8."""
    return mesh_service.make_rectangle(1.0, 1.0, 0.125)


@pytest.fixture(scope="session")
def square_16(mesh_service):
    """Unit square, h = 1/16."""
    return mesh_service.make_rectangle(1.0, 1.0, 0.0625)


@pytest.fixture(scope="session")
def square_32(mesh_service):
    """Unit square, h = 1/32."""
    return mesh_service.make_rectangle(1.0, 1.0, 1.0 / 32.0)


@pytest.fixture(scope="session")
def solver() -> SolverConfig:
    return SolverConfig()


@pytest.fixture(scope="session")
def fiber_16(square_16, solver) -> FiberService:
    return FiberService(square_16, solver)


@pytest.fixture(scope="session")
def fiber_32(square_32, solver) -> FiberService:
    return FiberService(square_32, solver)


@pytest.fixture(scope="session")
def tube_coarse(square_coarse, solver) -> TubeService:
    return TubeService(square_coarse, solver)


@pytest.fixture(scope="session")
def tube_8(square_8, solver) -> TubeService:
    return TubeService(square_8, solver)


@pytest.fixture(scope="session")
def tube_32(fiber_32, solver) -> TubeService:
    return TubeService(fiber_32.mesh, solver, fiber=fiber_32)


@pytest.fixture(scope="session")
def gaussian_well() -> ProfileSpec:
    """f' = 1 - 0.8 exp(-x^2), g' = 0, beta = (1, 0)."""
    return ProfileSpec.from_text(GAUSSIAN_WELL, "0", 1.0, 0.0)


@pytest.fixture(scope="session")
def balanced_profile() -> ProfileSpec:
    """Non-constant f' with int (f'^2 - 1) dx = 0."""
    return ProfileSpec.from_text(BALANCED, "0", 1.0, 0.0)


@pytest.fixture(scope="session")
def straight_profile() -> ProfileSpec:
    return ProfileSpec.from_text("0.5", "0", 0.5, 0.0)


@pytest.fixture(scope="session")
def exact_square_coefficients() -> dict[str, float]:
    """A, B, C of the unit square ground mode 2 sin(pi y1) sin(pi y2)."""
    return {"A": PI2, "B": 0.0, "C": PI2}
