"""
Pydantic schemas for scenario configuration and reports.
"""

from .config import (
    AsymptoticsConfig,
    BandsConfig,
    CertifyConfig,
    CrossSectionConfig,
    EffectiveConfig,
    OutputConfig,
    ProfileConfig,
    ScenarioConfig,
    SolverConfig,
    TubeConfig,
)
from .reports import (
    Certificate,
    ReportEnvelope,
    ScenarioResult,
    ThresholdResponse,
    TubeResponse,
)

__all__ = [
    # Config
    "ScenarioConfig",
    "CrossSectionConfig",
    "ProfileConfig",
    "TubeConfig",
    "SolverConfig",
    "BandsConfig",
    "EffectiveConfig",
    "AsymptoticsConfig",
    "CertifyConfig",
    "OutputConfig",
    # Reports
    "Certificate",
    "ThresholdResponse",
    "TubeResponse",
    "ScenarioResult",
    "ReportEnvelope",
]
