"""
Report service - JSON envelopes and CSV tables for every subcommand.

JSON is written with sorted keys and 2-space indent, non-finite floats become
null; CSV floats are written with repr. No timestamps, so reruns are
byte-identical.
"""

import csv
import dataclasses
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from src.core.config import get_settings
from src.core.logging import get_logger
from src.domain.models import BandTable, EffectiveModel, Mesh, ProfileSpec, SpectralReport
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import ReportEnvelope

logger = get_logger(__name__)


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; NaN and infinities map to None."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, float | np.floating):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def render_json(envelope: ReportEnvelope | dict) -> str:
    payload = to_jsonable(envelope)
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_csv(fieldnames: list[str], rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return buf.getvalue()


class ReportService:
    """Builds envelopes and writes them under one output directory."""

    def __init__(self, cfg: ScenarioConfig, directory: str | Path | None = None):
        self.cfg = cfg
        target = directory or cfg.output.directory or get_settings().default_output_dir
        self.directory = Path(target)
        self.formats = set(cfg.output.formats)

    def envelope(
        self,
        kind: str,
        payload: dict[str, Any],
        profile: ProfileSpec | None = None,
        mesh: Mesh | None = None,
    ) -> ReportEnvelope:
        return ReportEnvelope(
            kind=kind,
            config=self.cfg.model_dump(mode="json"),
            profile_hash=profile.content_hash if profile is not None else None,
            mesh=mesh.stats() if mesh is not None else None,
            payload=to_jsonable(payload),
        )

    def _path(self, stem: str, suffix: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        return self.directory / f"{self.cfg.name}_{stem}.{suffix}"

    def write_json(self, stem: str, envelope: ReportEnvelope) -> Path | None:
        if "json" not in self.formats:
            return None
        path = self._path(stem, "json")
        path.write_text(render_json(envelope), encoding="utf-8")
        logger.info("report_written", path=str(path), kind=envelope.kind)
        return path

    def write_csv(
        self, stem: str, fieldnames: list[str], rows: list[dict[str, Any]]
    ) -> Path | None:
        if "csv" not in self.formats:
            return None
        path = self._path(stem, "csv")
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(render_csv(fieldnames, rows))
        logger.info("report_written", path=str(path), rows=len(rows))
        return path

    def write_text(self, stem: str, suffix: str, text: str) -> Path:
        path = self._path(stem, suffix)
        path.write_text(text, encoding="utf-8")
        logger.info("report_written", path=str(path))
        return path


# ---------------------------------------------------------------------------
# Table builders
# ---------------------------------------------------------------------------


def band_rows(table: BandTable) -> tuple[list[str], list[dict[str, Any]]]:
    """Columns p, E1..En, residual1..residualn; invalid rows leave both blocks empty."""
    energy_fields = [f"E{j + 1}" for j in range(table.nbands)]
    residual_fields = [f"residual{j + 1}" for j in range(table.nbands)]
    rows = []
    for i, p in enumerate(table.p_grid):
        row: dict[str, Any] = {"p": float(p)}
        ok = bool(table.valid[i])
        for j in range(table.nbands):
            value = float(table.energies[i, j])
            residual = float(table.residuals[i, j])
            row[energy_fields[j]] = value if ok and math.isfinite(value) else None
            row[residual_fields[j]] = residual if ok and math.isfinite(residual) else None
        rows.append(row)
    return ["p", *energy_fields, *residual_fields], rows


def potential_rows(em: EffectiveModel) -> tuple[list[str], list[dict[str, Any]]]:
    fields = ["x", "fprime", "gprime", "V"]
    fp = em.profile.fp(em.x)
    gp = em.profile.gp(em.x)
    rows = [
        {"x": float(x), "fprime": float(a), "gprime": float(b), "V": float(v)}
        for x, a, b, v in zip(em.x, fp, gp, em.V, strict=True)
    ]
    return fields, rows


def spectrum_rows(report: SpectralReport) -> tuple[list[str], list[dict[str, Any]]]:
    fields = ["index", "eigenvalue", "residual", "threshold", "classification"]
    classes = report.classifications or ("",) * report.eigenvalues.size
    rows = [
        {
            "index": i + 1,
            "eigenvalue": float(lam),
            "residual": float(report.residuals[i]),
            "threshold": report.threshold,
            "classification": classes[i] or None,
        }
        for i, lam in enumerate(report.eigenvalues)
    ]
    return fields, rows


def get_report_service(cfg: ScenarioConfig, directory: str | Path | None = None) -> ReportService:
    """Get report service instance."""
    return ReportService(cfg, directory)
