"""Independent oracles and the named self-check registry."""

from . import oracles
from .checks import CHECKS, CheckResult, run_checks

__all__ = ["CHECKS", "CheckResult", "oracles", "run_checks"]
