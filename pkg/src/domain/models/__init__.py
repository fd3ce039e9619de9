"""
Domain models - immutable containers for meshes, profiles and spectra.
"""

from .mesh import FemMatrices, Mesh
from .profile import ProfileSpec
from .spectral import (
    BandTable,
    Classification,
    DetectionReport,
    EffectiveModel,
    FiberProblem,
    GroundData,
    Schrodinger1D,
    SpectralReport,
    TubeDiscretization,
)

__all__ = [
    # Geometry
    "Mesh",
    "FemMatrices",
    # Profile
    "ProfileSpec",
    # Spectra
    "FiberProblem",
    "GroundData",
    "BandTable",
    "EffectiveModel",
    "Schrodinger1D",
    "TubeDiscretization",
    "SpectralReport",
    "DetectionReport",
    "Classification",
]
