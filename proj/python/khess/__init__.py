"""Python access to the khess core: S_k algebra, radial profiles and the
experiment pipeline. Configs travel as JSON text; use the helpers below to
work with dicts."""

import json

from ._khess import (
    SCHEMA_VERSION,
    ConfigError,
    SolveError,
    algebra_check,
    c_nk,
    elem_sym,
    inequality_factor,
    normalize_config,
    preset_names,
    radial_profile,
    radial_report,
    regime,
    sk,
    sk_jacobian,
)
from . import _khess

EXIT_PASS, EXIT_VALIDATION, EXIT_SOLVE, EXIT_CHECK = 0, 2, 3, 4


def preset(name):
    return json.loads(_khess.preset(name))


def run(config, out):
    """Run an experiment from a config dict (or JSON text) into `out`."""
    text = config if isinstance(config, str) else json.dumps(config)
    return _khess.run(text, str(out))


def check(out):
    """Re-verify an artifact tree; returns (exit_code, log)."""
    return _khess.check(str(out))


__all__ = [
    "SCHEMA_VERSION", "ConfigError", "SolveError", "EXIT_PASS", "EXIT_VALIDATION", "EXIT_SOLVE", "EXIT_CHECK",
    "algebra_check", "c_nk", "check", "elem_sym", "inequality_factor", "normalize_config", "preset",
    "preset_names", "radial_profile", "radial_report", "regime", "run", "sk", "sk_jacobian",
]
