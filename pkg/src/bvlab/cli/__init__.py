"""Command-line experiment runner."""

from __future__ import annotations

from .config import ExperimentConfig, load_config
from .experiments import RunReport, run_experiment
from .svg import emit_svg

__all__ = ["ExperimentConfig", "RunReport", "emit_svg", "load_config", "run_experiment"]
