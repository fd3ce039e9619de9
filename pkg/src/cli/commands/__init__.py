"""
Subcommand handlers. Each takes (config, parsed args, report service) and
returns the report envelope it wrote.
"""

from .certify import run_certify
from .effective import run_asympt, run_bound1d, run_potential, run_thin_sweep
from .section import run_bands, run_section
from .tube import run_tube
from .verify import run_verify_all

COMMANDS = {
    "section": run_section,
    "bands": run_bands,
    "potential": run_potential,
    "bound1d": run_bound1d,
    "tube": run_tube,
    "certify": run_certify,
    "thin-sweep": run_thin_sweep,
    "asympt": run_asympt,
    "verify-all": run_verify_all,
}

__all__ = ["COMMANDS"]
