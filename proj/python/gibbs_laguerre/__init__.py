"""Periodic Laguerre tessellations and Gibbs-Laguerre samplers."""

import json
import os

from ._core import (
    Cell,
    Configuration,
    GltError,
    Tessellation,
    acceptance_probability,
    build_tessellation,
    bundled_dataset_path,
    characteristic,
    discrepancy,
    histogram,
    normalize_dataset,
    preset_config,
    presets,
)
from ._core import _run_config

__all__ = [
    "Cell",
    "Configuration",
    "GltError",
    "Tessellation",
    "acceptance_probability",
    "build_tessellation",
    "bundled_dataset_path",
    "characteristic",
    "discrepancy",
    "histogram",
    "normalize_dataset",
    "preset_config",
    "presets",
    "run",
]


def run(config_text, output_dir, seed=None, base_dir="."):
    """Run an experiment described by config text and return summary.json as a dict.

    Use preset_config(name) for a starting point; edit keys such as
    [reconstruct] max_steps before running.
    """
    return json.loads(_run_config(config_text, os.fspath(base_dir), os.fspath(output_dir), seed))
