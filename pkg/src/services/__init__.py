"""
Spectral services.
"""

from .certificate_service import CertificateService
from .effective_service import EffectiveService
from .fiber_service import FiberService
from .mesh_service import MeshService, get_mesh_service
from .report_service import ReportService, get_report_service
from .tube_service import TubeService
from .verification_service import VerificationService, get_verification_service

__all__ = [
    "MeshService",
    "get_mesh_service",
    "FiberService",
    "EffectiveService",
    "TubeService",
    "CertificateService",
    "ReportService",
    "get_report_service",
    "VerificationService",
    "get_verification_service",
]
