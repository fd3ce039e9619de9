"""
Cross-section commands: `section` (threshold, constants, mesh export) and
`bands` (band functions over a momentum grid).
"""

import argparse
import math

import numpy as np

from src.cli.dependencies import build_mesh, get_fiber_service
from src.domain.models import BandTable
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import ReportEnvelope, ThresholdResponse
from src.services.report_service import ReportService, band_rows


def run_section(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    mesh = build_mesh(cfg)
    fiber = get_fiber_service(cfg, mesh)
    ground = fiber.threshold(cfg.profile.beta1, cfg.profile.beta2)

    response = ThresholdResponse(
        E1=ground.E1,
        E2=ground.E2,
        gap=ground.gap,
        degenerate=ground.degenerate,
        residual=ground.residual,
        beta1=ground.beta1,
        beta2=ground.beta2,
        v1_min=float(ground.v1.min()),
        v1_positive=ground.v1_positive,
        **ground.coefficients(),
    )
    envelope = reports.envelope("section", response.model_dump(), mesh=mesh)
    reports.write_json("section", envelope)
    row = response.model_dump()
    reports.write_csv("section", list(row), [row])
    reports.write_text("mesh", "off", mesh.to_off())
    return envelope


def gauge_summary(table: BandTable, beta1: float, beta2: float) -> dict | None:
    """max |E1(p) - E1(0) - p^2/(1+beta1^2)| / (1+p^2) from the table itself (beta2 = 0)."""
    if beta2 != 0.0:
        return None
    zero = np.flatnonzero(np.isclose(table.p_grid, 0.0, atol=1e-12))
    if not zero.size or not table.valid[zero[0]]:
        return None
    E10 = table.energies[zero[0], 0]
    worst = 0.0
    for i, p in enumerate(table.p_grid):
        if table.valid[i]:
            dev = abs(table.energies[i, 0] - E10 - p * p / (1.0 + beta1**2))
            worst = max(worst, float(dev / (1.0 + p * p)))
    return {"max_relative_deviation": worst}


def run_bands(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    mesh = build_mesh(cfg)
    fiber = get_fiber_service(cfg, mesh)
    b1, b2 = cfg.profile.beta1, cfg.profile.beta2
    table = fiber.band_structure(b1, b2, cfg.bands.grid(), cfg.bands.nbands)

    fields, rows = band_rows(table)
    payload = {
        "beta1": b1,
        "beta2": b2,
        "nbands": table.nbands,
        "points": int(table.p_grid.size),
        "diagnostics": table.diagnostics,
        "gauge": gauge_summary(table, b1, b2),
        "max_residual": float(np.nanmax(table.residuals)) if table.valid.any() else math.nan,
    }
    envelope = reports.envelope("bands", payload, mesh=mesh)
    reports.write_json("bands", envelope)
    reports.write_csv("bands", fields, rows)
    return envelope
