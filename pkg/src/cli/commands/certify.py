"""
`certify thm12|thm13|thm14|ode` command.
"""

import argparse

from src.cli.commands.effective import build_effective_model
from src.cli.dependencies import (
    build_mesh,
    build_profile,
    get_certificate_service,
    get_fiber_service,
    get_tube_service,
)
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import Certificate, ReportEnvelope
from src.services.report_service import ReportService

THEOREMS = ("thm12", "thm13", "thm14", "ode")


def certify(cfg: ScenarioConfig, theorem: str) -> Certificate:
    c = cfg.certify
    match theorem:
        case "thm12":
            em = build_effective_model(cfg, X=max(cfg.effective.X, 2.0 * c.n_max))
            return get_certificate_service().thm12_certificate(em, c.n_max)
        case "thm13":
            profile = build_profile(cfg)
            tube = get_tube_service(cfg, get_fiber_service(cfg, build_mesh(cfg)))
            ground = tube.ground(profile.beta1, profile.beta2)
            return get_certificate_service(tube).thm13_certificate(
                profile,
                ground,
                c.xi_shifts,
                c.xi_widths,
                n_max=c.n_max,
                axis=c.axis,
                tail_X=cfg.profile.tail_X,
                tail_tol=cfg.profile.tail_tol,
            )
        case "thm14":
            em = build_effective_model(cfg)
            return get_certificate_service().thm14_trial_count(em, cfg.epsilon, c.thm14_n)
        case _:
            A_tilde = c.ode_A_tilde
            if A_tilde is None:
                A_tilde = get_fiber_service(cfg).threshold(0.0, 0.0).A_tilde
            return get_certificate_service().ode_family_residual(
                c.ode_c, c.ode_beta1, A_tilde, c.ode_grid()
            )


def certificate_rows(cert: Certificate) -> tuple[list[str], list[dict]]:
    d = cert.details
    match cert.kind:
        case "thm12":
            return ["n", "q", "error"], d["q_sequence"]
        case "thm13" if "value_sequence" in d:
            return ["n", "value", "error"], d["value_sequence"]
        case "thm13":
            return ["xi", "shift", "width", "J", "error"], d["J_table"]
        case "thm14":
            rows = [
                {"bump": i + 1, "rayleigh": v, "error": e}
                for i, (v, e) in enumerate(zip(d["rayleigh"], d["errors"], strict=True))
            ]
            return ["bump", "rayleigh", "error"], rows
        case _:
            row = {
                **cert.parameters,
                "residual": cert.value,
                "classification": d["classification"],
                "verdict": cert.verdict,
            }
            return list(row), [row]


def run_certify(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    cert = certify(cfg, args.theorem)
    profile = build_profile(cfg) if args.theorem != "ode" else None
    envelope = reports.envelope(f"certify-{cert.kind}", cert.model_dump(), profile=profile)
    stem = f"certify_{args.theorem}"
    reports.write_json(stem, envelope)
    reports.write_csv(stem, *certificate_rows(cert))
    return envelope
