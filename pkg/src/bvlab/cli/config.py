"""Experiment configuration: INI files with per-experiment defaults.

A config file has three sections::

    [experiment]
    name = counterexample
    seed = 0

    [space]
    extent = 2.0
    resolution = 2048
    weight = uniform

    [params]
    eps = 0.1
    chain_depth = 2

Missing keys fall back to the defaults of the named experiment.  Command-line
overrides use ``section.key=value`` (``params`` is assumed when the section is
omitted).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InvalidArgument
from ..grid import WeightSpec

__all__ = ["ExperimentConfig", "DEFAULTS", "DESCRIPTIONS", "load_config", "parse_override"]

DESCRIPTIONS = {
    "counterexample": "chain of shrinking rectangles: solution identity, capacity bounds, thickness",
    "weighted_point": "|x|^a weight: r/mu(B(0,r)) trend and origin thinness profile",
    "cartan_demo": "weak Cartan certificate around a thin set",
    "strong_cartan": "stacked capacity extremals diverging on A near a positive-capacity point",
    "harnack_sweep": "De Giorgi, weak Harnack and superminimizer checks over random solutions",
    "coarea_suite": "exact coarea on random functions and grids",
    "thinness_atlas": "thinness profiles and verdicts for a catalogue of sets",
}

_SPACE = {"dim": 2, "extent": 1.0, "resolution": 512, "weight": "uniform"}

DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "counterexample": {
        "space": {"dim": 2, "extent": 2.0, "resolution": 2048, "weight": "uniform"},
        "params": {"eps": 0.1, "chain_depth": 2, "delta": 0.25, "capacity_radii": "1.0"},
    },
    "weighted_point": {
        "space": {**_SPACE, "weight": "power_law(-1.5)"},
        "params": {"depth": 4, "r0": 0.5, "ratio_tol": 0.15, "tau": 0.01},
    },
    "cartan_demo": {
        "space": dict(_SPACE),
        "params": {"set": "cusp", "radius": 0.5, "depth": 3, "override": False},
    },
    "strong_cartan": {
        "space": {**_SPACE, "weight": "power_law(-1.5)"},
        "params": {"set": "cusp", "radius": 0.5, "k_max": 4, "override": False},
    },
    "harnack_sweep": {
        "space": {**_SPACE, "resolution": 256},
        "params": {
            "solutions": 20,
            "triples": 50,
            "trials": 200,
            "harnack_bound": 64.0,
        },
    },
    "coarea_suite": {
        "space": {**_SPACE, "resolution": 16},
        "params": {"functions": 200, "min_res": 4, "max_res": 32, "tol": 1e-12},
    },
    "thinness_atlas": {
        "space": {**_SPACE, "resolution": 256},
        "params": {"radius": 0.25, "depth": 3, "tau_thin": 0.01, "tau_thick": 0.01},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    space: dict[str, Any] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def weight_spec(self) -> WeightSpec:
        return WeightSpec.parse(str(self.space["weight"]))

    def to_ini(self) -> str:
        lines = ["[experiment]", f"name = {self.experiment}", f"seed = {self.seed}", ""]
        for section in ("space", "params"):
            lines.append(f"[{section}]")
            for key in sorted(getattr(self, section)):
                lines.append(f"{key} = {getattr(self, section)[key]}")
            lines.append("")
        return "\n".join(lines)


def _coerce(value: str, default: Any) -> Any:
    if isinstance(default, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise InvalidArgument(f"expected a boolean, got {value!r}")
    try:
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse {value!r}: {exc}") from None
    return value.strip()


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value`` (section defaults to ``params``)."""
    if "=" not in text:
        raise InvalidArgument(f"override {text!r} is not key=value")
    key, value = text.split("=", 1)
    key = key.strip()
    section, _, name = key.rpartition(".")
    return section or "params", name, value


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Read an INI file (or only overrides) into a validated config."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InvalidArgument(f"config file {str(path)!r} not found")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise InvalidArgument(f"malformed config: {exc}") from None
    raw: dict[str, dict[str, str]] = {s: dict(parser[s]) for s in parser.sections()}
    for item in overrides or []:
        section, key, value = parse_override(item)
        if section == "experiment" and key == "name":
            raw.setdefault("experiment", {})["name"] = value
        else:
            raw.setdefault(section, {})[key] = value

    exp = raw.get("experiment", {})
    name = exp.get("name", "").strip()
    if name not in DEFAULTS:
        allowed = ", ".join(sorted(DEFAULTS))
        raise InvalidArgument(f"unknown experiment {name!r}; choose one of: {allowed}")
    unknown_sections = set(raw) - {"experiment", "space", "params"}
    if unknown_sections:
        raise InvalidArgument(f"unknown config sections: {sorted(unknown_sections)}")
    seed = _coerce(exp.get("seed", "0"), 0)
    extra = set(exp) - {"name", "seed"}
    if extra:
        raise InvalidArgument(f"unknown keys in [experiment]: {sorted(extra)}")

    cfg = ExperimentConfig(name, seed)
    for section in ("space", "params"):
        defaults = DEFAULTS[name][section]
        values = dict(defaults)
        for key, value in raw.get(section, {}).items():
            if key not in defaults:
                raise InvalidArgument(
                    f"unknown key {section}.{key} for {name}; known: {sorted(defaults)}"
                )
            values[key] = _coerce(value, defaults[key])
        setattr(cfg, section, values)
    cfg.weight_spec  # validates the weight string
    return cfg
