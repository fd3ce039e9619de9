"""
CLI dependencies - scenario loading, dotted overrides and service factories.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from src.core.exceptions import ConfigError
from src.domain.models import Mesh, ProfileSpec
from src.domain.schemas.config import ScenarioConfig
from src.services.certificate_service import get_certificate_service
from src.services.effective_service import get_effective_service
from src.services.fiber_service import FiberService
from src.services.mesh_service import get_mesh_service
from src.services.report_service import get_report_service
from src.services.tube_service import TubeService


def parse_override(item: str) -> tuple[list[str], Any]:
    """'a.b.c=value' -> (['a', 'b', 'c'], value); value parsed as JSON when possible."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value, got {item!r}")
    path = [part.strip() for part in key.split(".")]
    if any(not part for part in path):
        raise ConfigError(f"empty key segment in override {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    for item in overrides:
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override {item!r} descends into non-object key {part!r}")
            node = child
        node[path[-1]] = value
    return data


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ScenarioConfig:
    """
    Read a scenario JSON file (or start from defaults), apply overrides and
    validate. Unknown keys and invalid values raise ConfigError.
    """
    data: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    apply_overrides(data, overrides or [])
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid config: {details}")


def build_mesh(cfg: ScenarioConfig) -> Mesh:
    return get_mesh_service().build(cfg.cross_section)


def build_profile(cfg: ScenarioConfig) -> ProfileSpec:
    p = cfg.profile
    return ProfileSpec.from_text(p.fprime, p.gprime, p.beta1, p.beta2)


def get_fiber_service(cfg: ScenarioConfig, mesh: Mesh | None = None) -> FiberService:
    return FiberService(mesh or build_mesh(cfg), cfg.solver)


def get_tube_service(cfg: ScenarioConfig, fiber: FiberService | None = None) -> TubeService:
    fiber = fiber or get_fiber_service(cfg)
    return TubeService(fiber.mesh, cfg.solver, fiber=fiber, tail_tol=cfg.profile.tail_tol)


__all__ = [
    "parse_override",
    "apply_overrides",
    "load_config",
    "build_mesh",
    "build_profile",
    "get_fiber_service",
    "get_tube_service",
    "get_effective_service",
    "get_certificate_service",
    "get_report_service",
]
