"""
`tube` command: full 3D spectrum on truncated tubes and candidate classification.
"""

import argparse

import numpy as np

from src.cli.dependencies import (
    build_mesh,
    build_profile,
    get_effective_service,
    get_fiber_service,
    get_tube_service,
)
from src.domain.models import ProfileSpec, SpectralReport
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import ReportEnvelope, TubeResponse
from src.services.report_service import ReportService, spectrum_rows
from src.services.tube_service import TubeService

EFFECTIVE_SLACK = 0.02


def effective_bound(
    tube: TubeService, profile: ProfileSpec, cfg: ScenarioConfig, report: SpectralReport
) -> dict:
    """
    lambda_1(tube) <= E1/eps^2 + lambda_1(1D) + 2% |lambda_1(1D)|, with the 1D
    operator built from the same discrete ground mode.
    """
    ground = tube.ground(profile.beta1, profile.beta2)
    effective = get_effective_service()
    em = effective.build_effective(
        profile, ground, X=cfg.effective.X, hx=cfg.effective.hx, eps=report.eps,
        tail_tol=cfg.profile.tail_tol,
    )
    sol = effective.solve_bound_states(em)
    if not sol.count:
        return {"lambda1_1d": None, "bound": None, "holds": None}
    lam1d = float(sol.eigenvalues[0])
    bound = report.threshold + lam1d
    lam1 = float(report.eigenvalues[0])
    return {
        "lambda1_1d": lam1d,
        "bound": bound,
        "slack": EFFECTIVE_SLACK * abs(lam1d),
        "holds": bool(lam1 <= bound + EFFECTIVE_SLACK * abs(lam1d)),
    }


def run_tube(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    profile = build_profile(cfg)
    profile.validate_tails(cfg.profile.tail_X, cfg.profile.tail_tol)
    mesh = build_mesh(cfg)
    tube = get_tube_service(cfg, get_fiber_service(cfg, mesh))
    L_list = cfg.tube.L_list
    eps = cfg.epsilon

    metric = tube.metric_check(profile, np.linspace(-L_list[-1], L_list[-1], 2001))

    lambda1_by_L: list[float] = []
    if len(L_list) >= 3:
        detection = tube.detect_discrete(profile, eps, L_list, hx=cfg.tube.hx)
        report = detection.classified
        lambda1_by_L = list(detection.lambda1_by_L)
    else:
        td = tube.assemble_tube(profile, L_list[-1], nx=cfg.tube.nx, eps=eps, hx=cfg.tube.hx)
        report = tube.lowest_modes(td)
        lambda1_by_L = [float(report.eigenvalues[0])]

    response = TubeResponse(
        eps=report.eps,
        L=report.L,
        nx=report.nx,
        threshold=report.threshold,
        eigenvalues=[float(v) for v in report.eigenvalues],
        residuals=[float(r) for r in report.residuals],
        classifications=list(report.classifications),
        metadata=dict(report.metadata),
    )
    payload = {
        **response.model_dump(),
        "L_list": L_list,
        "lambda1_by_L": lambda1_by_L,
        "n_candidates": report.n_candidates,
        "below_threshold": int(report.below_threshold.size),
        "metric_max_det_error": metric.max_det_error,
        "effective_bound": effective_bound(tube, profile, cfg, report),
    }
    envelope = reports.envelope("tube", payload, profile=profile, mesh=mesh)
    reports.write_json("tube", envelope)
    reports.write_csv("tube", *spectrum_rows(report))
    return envelope
