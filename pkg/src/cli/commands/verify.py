"""
`verify-all` command: bundled acceptance scenarios, one pass/fail row each.
"""

import argparse

from src.core.exceptions import ConsistencyError
from src.domain.schemas.config import ScenarioConfig
from src.domain.schemas.reports import ReportEnvelope
from src.services.report_service import ReportService
from src.services.verification_service import get_verification_service


def run_verify_all(cfg: ScenarioConfig, args: argparse.Namespace, reports: ReportService) -> ReportEnvelope:
    """Writes the reports first; any failed scenario then raises (exit 4)."""
    service = get_verification_service(cfg.solver, cfg.tube, cfg.cross_section.h)
    results = service.run_all(args.only or None)

    rows = []
    for r in results:
        failed = [name for name, ok in r.criteria.items() if not ok]
        rows.append({
            "scenario": r.name,
            "passed": r.passed,
            "criteria": len(r.criteria),
            "failed_criteria": ";".join(failed) or None,
            "error": r.error,
        })
    payload = {
        "all_passed": all(r.passed for r in results),
        "scenarios": [r.model_dump() for r in results],
    }
    envelope = reports.envelope("verify-all", payload)
    reports.write_json("verify_all", envelope)
    reports.write_csv("verify_all", ["scenario", "passed", "criteria", "failed_criteria", "error"], rows)

    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ConsistencyError(f"{len(failed)} acceptance scenario(s) failed: {', '.join(failed)}")
    return envelope
