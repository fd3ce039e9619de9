"""
Effective 1D commands: `potential`, `bound1d`, `thin-sweep`, `asympt`.
"""

import argparse

from src.cli.dependencies import (
    build_mesh,
    build_profile,
    get_effective_service,
    get_fiber_service,
)
from src.domain.expr import parse
from src.domain.models import EffectiveModel
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import ReportEnvelope
from src.services.report_service import ReportService, potential_rows


def build_effective_model(cfg: ScenarioConfig, X: float | None = None) -> EffectiveModel:
    """Section constants from the fiber ground mode, then V sampled on [-X, X]."""
    profile = build_profile(cfg)
    profile.validate_tails(cfg.profile.tail_X, cfg.profile.tail_tol)
    fiber = get_fiber_service(cfg, build_mesh(cfg))
    ground = fiber.threshold(profile.beta1, profile.beta2)
    return get_effective_service().build_effective(
        profile,
        ground,
        X=X or cfg.effective.X,
        hx=cfg.effective.hx,
        eps=cfg.epsilon,
        tail_tol=cfg.profile.tail_tol,
    )


def run_potential(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    em = build_effective_model(cfg)
    payload = {
        "integral": em.integral,
        "v_min": em.v_min,
        "argmin": em.argmin,
        "A": em.A,
        "B": em.B,
        "C": em.C,
        "X": em.X,
        "hx": em.hx,
    }
    envelope = reports.envelope("potential", payload, profile=em.profile)
    reports.write_json("potential", envelope)
    reports.write_csv("potential", *potential_rows(em))
    return envelope


def run_bound1d(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    em = build_effective_model(cfg)
    sol = get_effective_service().solve_bound_states(em)
    payload = {
        "eps": sol.eps,
        "count": sol.count,
        "count_interval": list(sol.count_interval),
        "eigenvalues": sol.eigenvalues,
        "marginal": list(sol.marginal),
        "tol_edge": sol.tol_edge,
        "integral_V": em.integral,
        "v_min": em.v_min,
    }
    envelope = reports.envelope("bound1d", payload, profile=em.profile)
    reports.write_json("bound1d", envelope)
    rows = [{"index": i + 1, "eigenvalue": float(v)} for i, v in enumerate(sol.eigenvalues)]
    reports.write_csv("bound1d", ["index", "eigenvalue"], rows)
    return envelope


def run_thin_sweep(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    em = build_effective_model(cfg)
    sweep = get_effective_service().count_vs_epsilon(em, cfg.effective.eps_list)
    rows = [
        {
            "eps": r.eps,
            "count": r.count,
            "count_upper": r.count_upper,
            "eps2_lambda1": r.eps2_lambda1,
            "v_min": sweep.v_min,
        }
        for r in sweep.rows
    ]
    payload = {"rows": rows, "monotone": sweep.monotone, "v_min": sweep.v_min}
    envelope = reports.envelope("thin-sweep", payload, profile=em.profile)
    reports.write_json("thin_sweep", envelope)
    reports.write_csv("thin_sweep", ["eps", "count", "count_upper", "eps2_lambda1", "v_min"], rows)
    return envelope


def run_asympt(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    a = cfg.asymptotics
    sweep = get_effective_service().asymptotic_slope(parse(a.W), a.mu_list, a.j, a.X)
    rows = [
        {
            "mu": r.mu,
            "hx": r.hx,
            "lambda_j": r.eigenvalues[-1],
            "ratio": r.ratio,
            "W_min": sweep.w_min,
            "gap": r.gap,
            "drift": r.drift,
            "lower_bound_ok": r.lower_bound_ok,
        }
        for r in sweep.rows
    ]
    payload = {"W": a.W, "j": sweep.j, "X": sweep.X, "w_min": sweep.w_min, "rows": rows}
    envelope = reports.envelope("asympt", payload)
    reports.write_json("asympt", envelope)
    reports.write_csv("asympt", list(rows[0]) if rows else ["mu"], rows)
    return envelope
