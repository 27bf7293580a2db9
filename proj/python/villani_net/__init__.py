"""Python access to the villani_net C++ core.

Array arguments follow the C++ layout: features are (n, d), labels are
(n,) with entries +1/-1, outer weights are (p,) and inner weights (p, d).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from . import _core
from ._core import (
    ConfigError,
    DimensionMismatch,
    Divergence,
    IdxFormatError,
    InvalidArgument,
    NumericalError,
    UnboundedActivation,
    VillaniError,
    activation_constants,
    command_names,
    exact_laplacian,
    full_grad,
    gen_synthetic,
    glip_bound,
    lambda_c,
    risk,
)

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Divergence",
    "IdxFormatError",
    "InvalidArgument",
    "NumericalError",
    "UnboundedActivation",
    "VillaniError",
    "activation_constants",
    "command_names",
    "exact_laplacian",
    "full_grad",
    "gen_synthetic",
    "gibbs_quadratic",
    "glip_bound",
    "lambda_c",
    "risk",
    "run",
    "verify_villani",
]


def verify_villani(x, y, a, w, activation: str, lam: float, s: float, seed: int = 0) -> dict[str, Any]:
    """Villani-condition report for the loss at (a, w) as a dict."""
    return json.loads(_core.verify_villani_json(x, y, a, w, activation, lam, s, seed))


def gibbs_quadratic(lam: float, dim: int = 1, temp_s: float = 1.0, box: float = 6.0,
                    grid_n: int = 256, r: float = 1.0) -> dict[str, Any]:
    """Grid lab report for the Gibbs measure of (lam/2)|w|^2."""
    return json.loads(_core.gibbs_quadratic_json(lam, dim, temp_s, box, grid_n, r))


def run(command: str, config: dict[str, Any]) -> tuple[list[Path], list[str]]:
    """Run a CLI command in-process. Returns (artifact paths, messages)."""
    artifacts, messages = _core.run_command(command, json.dumps(config))
    return [Path(p) for p in artifacts], list(messages)
