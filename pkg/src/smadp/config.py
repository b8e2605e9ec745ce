"""Experiment configuration files and built-in presets.

A configuration is a YAML mapping.  Every key is optional; omitted keys
take the values of the selected ``preset`` (``figure1`` by default), which
in turn uses the standard parameter set: 64 taps, ``sigma_n = 0.04``,
``gamma = sqrt(5) * sigma_n``, ``alpha_max = 1e-3`` and an NLMS/PNLMS step
of 0.5.  Example::

    preset: figure2
    runs: 500
    seed: 7
    input: ar1                   # white | ar1 | ar4, or a list of them
    schedule:
      - {system: sparse, iterations: 3000}
      - {system: semi_sparse, iterations: 3000}
    params:                      # defaults for every algorithm that accepts them
      alpha_max: 1.0e-3
    algorithms:
      - sm_nlms
      - {kind: eza_sm_nlms_adp, beta: 10, label: EZA beta=10}
    output: {dir: results, svg: true, db: true}

Unknown keys are rejected, and errors report the offending line.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigError
from .experiment import PARAM_DEFAULTS, AlgoKind, AlgorithmSpec, ExperimentConfig, build_schedule
from .signal import DEFAULT_SPARSE_SUPPORT, InputModel, NoiseModel, SystemKind

_BASE = {
    "runs": 200,
    "seed": 0,
    "sigma_n": 0.04,
    "gamma": None,
    "taps": 64,
    "input": "white",
    "input_power": 1.0,
    "sparse_support": list(DEFAULT_SPARSE_SUPPORT),
    "redraw_per_trial": False,
    "steady_fraction": 0.2,
    "params": {},
    "output": {"dir": "results", "svg": False, "db": True},
}

PRESETS: dict[str, dict] = {
    "figure1": {
        "description": "Fixed-penalty sparsity-aware SM-NLMS vs NLMS and PNLMS; sparse, semi-sparse, dense plants",
        "schedule": [
            {"system": "sparse", "iterations": 1000},
            {"system": "semi_sparse", "iterations": 1000},
            {"system": "dense", "iterations": 1500},
        ],
        "algorithms": ["nlms", "pnlms", "sm_nlms", "za_sm_nlms", "rza_sm_nlms", "eza_sm_nlms"],
    },
    "figure2": {
        "description": "RZA-SM-NLMS with adjustable vs fixed penalty, oracle SM-NLMS reference, update rates",
        "schedule": [
            {"system": "sparse", "iterations": 2000},
            {"system": "semi_sparse", "iterations": 2000},
        ],
        "algorithms": [
            "oracle_sm_nlms",
            "sm_nlms",
            "rza_sm_nlms",
            "za_sm_nlms_adp",
            "rza_sm_nlms_adp",
            "eza_sm_nlms_adp",
        ],
    },
    "figure3": {
        "description": "EZA-SM-NLMS-ADP against the other adjustable-penalty and conventional algorithms",
        "schedule": [
            {"system": "sparse", "iterations": 2000},
            {"system": "semi_sparse", "iterations": 2000},
        ],
        "algorithms": ["nlms", "pnlms", "sm_nlms", "za_sm_nlms_adp", "rza_sm_nlms_adp", "eza_sm_nlms_adp"],
    },
    "figure4": {
        "description": "EZA-SM-NLMS-ADP and SM-NLMS under white, AR(1) and AR(4) inputs",
        "input": ["white", "ar1", "ar4"],
        "schedule": [
            {"system": "sparse", "iterations": 5000},
            {"system": "semi_sparse", "iterations": 5000},
        ],
        "algorithms": ["sm_nlms", "eza_sm_nlms_adp"],
    },
}

_TOP_KEYS = set(_BASE) | {"preset", "schedule", "algorithms"}
_OUTPUT_KEYS = {"dir", "svg", "db"}
_ALL_PARAMS = set().union(*PARAM_DEFAULTS.values())


class _Lines:
    """Maps key paths of a YAML document to source line numbers."""

    def __init__(self, source: str):
        self.source = source
        self.lines: dict[tuple, int] = {}
        self.loader = yaml.SafeLoader("")

    def at(self, path: tuple) -> str:
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        return f"{self.source}:{line}" if line else self.source

    def error(self, path: tuple, msg: str) -> ConfigError:
        return ConfigError(f"{self.at(path)}: {msg}")


def _construct(node, lines: _Lines, path=()):
    lines.lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if not isinstance(k, yaml.ScalarNode):
                raise ConfigError(f"{lines.source}:{k.start_mark.line + 1}: mapping keys must be plain names")
            if key in out:
                raise ConfigError(f"{lines.source}:{k.start_mark.line + 1}: duplicate key {key!r}")
            lines.lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _construct(v, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return lines.loader.construct_object(node, deep=True)


def _load_text(text: str, source: str):
    lines = _Lines(source)
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        return {}, lines
    doc = _construct(node, lines)
    if not isinstance(doc, dict):
        raise lines.error((), "configuration must be a mapping of keys to values")
    return doc, lines


def _number(value, path, lines, kind=float, positive=False, nonneg=False):
    if isinstance(value, bool):
        raise lines.error(path, f"{path[-1]} must be a number, got {value!r}")
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            out = int(value)
        else:
            out = float(value)
    except (TypeError, ValueError):
        raise lines.error(path, f"{path[-1]} must be {'an integer' if kind is int else 'a number'}, got {value!r}")
    if kind is float and not math.isfinite(out):
        raise lines.error(path, f"{path[-1]} must be finite")
    if positive and not out > 0:
        raise lines.error(path, f"{path[-1]} must be positive, got {value!r}")
    if nonneg and out < 0:
        raise lines.error(path, f"{path[-1]} must be non-negative, got {value!r}")
    return out


def _bool(value, path, lines):
    if not isinstance(value, bool):
        raise lines.error(path, f"{path[-1]} must be true or false, got {value!r}")
    return value


def _param(name, value, path, lines):
    if name == "alpha_mode":
        return str(value)
    if name == "nonnegative_alpha":
        return _bool(value, path, lines)
    return _number(value, path, lines)


@dataclass
class ConfigFile:
    """A resolved configuration document plus output options."""

    doc: dict
    lines: _Lines
    experiment: ExperimentConfig

    @property
    def out_dir(self) -> Path:
        return Path(self.doc["output"]["dir"])

    @property
    def emit_svg(self) -> bool:
        return self.doc["output"]["svg"]

    @property
    def db(self) -> bool:
        return self.doc["output"]["db"]

    @property
    def preset(self) -> str:
        return self.doc["preset"]

    def with_overrides(self, runs=None, seed=None, out=None, svg=None) -> "ConfigFile":
        doc = copy.deepcopy(self.doc)
        if runs is not None:
            doc["runs"] = runs
        if seed is not None:
            doc["seed"] = seed
        if out is not None:
            doc["output"]["dir"] = str(out)
        if svg is not None:
            doc["output"]["svg"] = svg
        return ConfigFile(doc, self.lines, _build(doc, self.lines))


def _resolve(user: dict, lines: _Lines) -> dict:
    unknown = set(user) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise lines.error((key,), f"unknown key {key!r}; allowed keys: {sorted(_TOP_KEYS)}")
    name = user.get("preset", "figure1")
    if name not in PRESETS:
        raise lines.error(("preset",), f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    preset = {k: v for k, v in PRESETS[name].items() if k != "description"}
    doc = copy.deepcopy({**_BASE, **preset})
    doc["preset"] = name
    for key, value in user.items():
        if key == "output":
            if not isinstance(value, dict):
                raise lines.error((key,), "output must be a mapping")
            bad = set(value) - _OUTPUT_KEYS
            if bad:
                raise lines.error((key, sorted(bad)[0]), f"unknown output option {sorted(bad)[0]!r}")
            doc["output"].update(value)
        elif key != "preset":
            doc[key] = value
    return doc


def _build(doc: dict, lines: _Lines) -> ExperimentConfig:
    runs = _number(doc["runs"], ("runs",), lines, int, positive=True)
    seed = _number(doc["seed"], ("seed",), lines, int, nonneg=True)
    sigma_n = _number(doc["sigma_n"], ("sigma_n",), lines, positive=True)
    gamma = None if doc["gamma"] is None else _number(doc["gamma"], ("gamma",), lines, positive=True)
    taps = _number(doc["taps"], ("taps",), lines, int, positive=True)
    power = _number(doc["input_power"], ("input_power",), lines, positive=True)
    steady = _number(doc["steady_fraction"], ("steady_fraction",), lines, positive=True)
    if steady > 1:
        raise lines.error(("steady_fraction",), "steady_fraction must not exceed 1")
    redraw = _bool(doc["redraw_per_trial"], ("redraw_per_trial",), lines)
    for key in ("svg", "db"):
        _bool(doc["output"][key], ("output", key), lines)
    if not isinstance(doc["output"]["dir"], str):
        raise lines.error(("output", "dir"), "output dir must be a string")

    support = doc["sparse_support"]
    if not isinstance(support, list) or not support:
        raise lines.error(("sparse_support",), "sparse_support must be a non-empty list of tap indices")
    support = tuple(_number(s, ("sparse_support", i), lines, int, nonneg=True) for i, s in enumerate(support))
    if max(support) >= taps or len(set(support)) != len(support):
        raise lines.error(("sparse_support",), f"sparse_support must hold distinct indices below {taps}")

    inputs = doc["input"] if isinstance(doc["input"], list) else [doc["input"]]
    if not inputs:
        raise lines.error(("input",), "input list must not be empty")
    models = []
    for i, name in enumerate(inputs):
        path = ("input", i) if isinstance(doc["input"], list) else ("input",)
        try:
            models.append(InputModel(str(name), power))
        except ConfigError as exc:
            raise lines.error(path, str(exc)) from None

    schedule = doc["schedule"]
    if not isinstance(schedule, list) or not schedule:
        raise lines.error(("schedule",), "schedule must be a non-empty list of phases")
    phases = []
    for k, ph in enumerate(schedule):
        path = ("schedule", k)
        if not isinstance(ph, dict) or set(ph) != {"system", "iterations"}:
            raise lines.error(path, "each phase needs exactly the keys 'system' and 'iterations'")
        try:
            kind = SystemKind(ph["system"]).value
        except ValueError:
            raise lines.error(path + ("system",), f"unknown system {ph['system']!r}; use sparse, semi_sparse or dense")
        phases.append((kind, _number(ph["iterations"], path + ("iterations",), lines, int, positive=True)))

    defaults = doc["params"]
    if not isinstance(defaults, dict):
        raise lines.error(("params",), "params must be a mapping")
    for name, value in defaults.items():
        if name not in _ALL_PARAMS:
            raise lines.error(("params", name), f"unknown algorithm parameter {name!r}")
        defaults[name] = _param(name, value, ("params", name), lines)

    algos_doc = doc["algorithms"]
    if not isinstance(algos_doc, list) or not algos_doc:
        raise lines.error(("algorithms",), "algorithms must be a non-empty list")
    algorithms = []
    for j, entry in enumerate(algos_doc):
        path = ("algorithms", j)
        entry = {"kind": entry} if isinstance(entry, str) else entry
        if not isinstance(entry, dict) or "kind" not in entry:
            raise lines.error(path, "an algorithm is a name or a mapping with a 'kind' key")
        try:
            kind = AlgoKind(entry["kind"])
        except ValueError:
            raise lines.error(
                path, f"unknown algorithm {entry['kind']!r}; choose from {[k.value for k in AlgoKind]}"
            ) from None
        accepted = PARAM_DEFAULTS[kind]
        params = {k: v for k, v in defaults.items() if k in accepted}
        for name, value in entry.items():
            if name in ("kind", "label"):
                continue
            if name not in accepted:
                raise lines.error(path + (name,), f"{kind.value} does not accept parameter {name!r}")
            params[name] = _param(name, value, path + (name,), lines)
        try:
            algorithms.append(AlgorithmSpec(kind, params, str(entry.get("label", ""))))
        except ConfigError as exc:
            raise lines.error(path, str(exc)) from None

    try:
        return ExperimentConfig(
            schedule=build_schedule(phases, seed, taps, support),
            algorithms=tuple(algorithms),
            inputs=tuple(models),
            noise=NoiseModel(sigma_n),
            runs=runs,
            master_seed=seed,
            gamma=gamma,
            redraw_per_trial=redraw,
            sparse_support=support,
            steady_fraction=steady,
        )
    except ConfigError as exc:
        raise lines.error((), str(exc)) from None


def load_config_text(text: str, source: str = "<config>") -> ConfigFile:
    user, lines = _load_text(text, source)
    doc = _resolve(user, lines)
    return ConfigFile(doc, lines, _build(doc, lines))


def load_config(path) -> ConfigFile:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config_text(text, str(path))


def parse_config(path) -> ExperimentConfig:
    """Read a configuration file and return the validated experiment."""
    return load_config(path).experiment


def preset(name: str, **overrides: Any) -> ConfigFile:
    """A built-in preset, optionally with top-level keys overridden."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return load_config_text(yaml.safe_dump({"preset": name, **overrides}), f"<preset {name}>")


def describe_preset(name: str) -> str:
    """YAML rendering of a preset with every default filled in."""
    cfg = preset(name)
    doc = {"preset": name, **{k: v for k, v in cfg.doc.items() if k != "preset"}}
    doc["gamma"] = cfg.experiment.gamma
    body = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
    return f"# {PRESETS[name]['description']}\n{body}"
