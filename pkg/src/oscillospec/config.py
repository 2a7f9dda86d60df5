"""Experiment configuration: versioned JSON, validated with jsonschema."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .potential import TwoScalePotential, default_potential

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


def _auto_or(t, **kw):
    return {"oneOf": [{"const": "auto"}, {"type": t, **kw}]}


def _auto(v):
    return None if v in (None, "auto") else v


ENVELOPE_SCHEMA = {
    "type": "object",
    "required": ["kind", "amplitude", "width"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["gaussian", "sech2", "rational-decay"]},
        "amplitude": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0},
    },
}

POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["terms"],
    "additionalProperties": False,
    "properties": {
        "terms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["harmonic", "envelope"],
                "additionalProperties": False,
                "properties": {
                    "harmonic": {"type": "integer", "not": {"const": 0}},
                    "envelope": ENVELOPE_SCHEMA,
                    "phase": {"type": "number"},
                },
            },
        },
        "mirror": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "potential": POTENTIAL_SCHEMA,
        "regime": {"enum": ["auto", "semiclassical", "weak-coupling", "critical"]},
        "eps_grid": {
            "oneOf": [
                {"type": "string", "minLength": 1},
                {"type": "array", "items": {"type": "number"}},
            ]
        },
        "alpha": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": _auto_or("number", exclusiveMinimum=0),
                "N_grid": _auto_or("integer", minimum=16),
                "n": _auto_or("integer", minimum=1),
                "num_eigs": {"type": "integer", "minimum": 1, "maximum": 64},
                "L_cap": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "functions": {"type": "boolean"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"}},
        },
        "cache_dir": {"type": ["string", "null"]},
        "jobs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "wkb": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 0},
                "orders": {"type": "integer", "minimum": 0, "maximum": 8},
                "jet_order": {"type": "integer", "minimum": 4, "maximum": 40},
                "cutoff_R": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "cutoff_inner": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
    },
}


def parse_eps_grid(spec) -> list[float]:
    """'a:b:dyadic' (a, a/2, ... >= b), 'a:b:halfdyadic' (steps of 2^-1/2), 'a,b,c' or a list."""
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    elif isinstance(spec, str):
        s = spec.strip()
        if ":" in s:
            parts = s.split(":")
            if len(parts) != 3:
                raise ConfigError(f"bad eps grid {spec!r}; expected start:stop:dyadic|halfdyadic")
            try:
                a, b = float(parts[0]), float(parts[1])
            except ValueError:
                raise ConfigError(f"bad eps grid bounds in {spec!r}") from None
            kind = parts[2].strip()
            step = {"dyadic": 0.5, "halfdyadic": 2.0**-0.5}.get(kind)
            if step is None:
                raise ConfigError(f"unknown eps grid kind {kind!r}")
            if not (a > 0 and b > 0 and b <= a):
                raise ConfigError("eps grid needs 0 < stop <= start")
            k = int(math.floor(math.log(b / a) / math.log(step) + 1e-9))
            vals = [a * step**j for j in range(k + 1)]
        else:
            try:
                vals = [float(v) for v in s.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"bad eps list {spec!r}") from None
    else:
        raise ConfigError("eps grid must be a string or a list")
    if not vals:
        raise ConfigError("eps grid is empty")
    for v in vals:
        if not (0.0 < v <= 1.0):
            raise ConfigError(f"eps values must lie in (0, 1], got {v}")
    return vals


def _regime_ok(regime, alpha):
    from .asymptotics import regime_of

    return regime in (None, "auto") or regime_of(alpha) == regime


@dataclass
class ExperimentConfig:
    potential: TwoScalePotential = field(default_factory=default_potential)
    eps: list = field(default_factory=lambda: [0.25, 0.125])
    alphas: list = field(default_factory=lambda: [2.0])
    regime: str = "auto"
    L: float | None = None
    N_grid: int | None = None
    n: int | None = None
    num_eigs: int = 3
    L_cap: float = 1500.0
    functions: bool = True
    csv: str | None = None
    json_out: str | None = None
    cache_dir: str | None = None
    jobs: int = 1
    seed: int = 0
    wkb: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.eps:
            raise ConfigError("eps grid is empty")
        if not self.alphas:
            raise ConfigError("alpha list is empty")
        for a in self.alphas:
            if not a > -1:
                raise ConfigError(f"alpha must exceed -1, got {a}")
            if not _regime_ok(self.regime, a):
                raise ConfigError(f"alpha={a} does not belong to the {self.regime} regime")
        for e in self.eps:
            if not 0 < e <= 1:
                raise ConfigError(f"eps values must lie in (0, 1], got {e}")
        if self.N_grid is not None and (self.N_grid & (self.N_grid - 1)):
            raise ConfigError("N_grid must be a power of two")
        if self.N_grid is not None and self.n is not None and self.L is not None:
            self._check_aliasing()

    def _check_aliasing(self):
        from .oscillatory import AliasingError, _check_grid, mode_set

        for e in self.eps:
            try:
                _check_grid(self.N_grid, mode_set(self.L, e, self.n))
            except AliasingError as exc:
                raise ConfigError(f"solver grid at eps={e}: {exc}") from None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config {where}: {exc.message}") from None
        pot = default_potential()
        if "potential" in raw:
            try:
                pot = TwoScalePotential.from_spec(raw["potential"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"config potential: {exc}") from None
        solver = raw.get("solver", {})
        alphas = raw.get("alpha", [2.0])
        alphas = [float(a) for a in (alphas if isinstance(alphas, list) else [alphas])]
        out = raw.get("output", {})
        return cls(
            potential=pot,
            eps=parse_eps_grid(raw["eps_grid"]) if "eps_grid" in raw else [0.25, 0.125],
            alphas=alphas,
            regime=raw.get("regime", "auto"),
            L=_auto(solver.get("L")),
            N_grid=_auto(solver.get("N_grid")),
            n=_auto(solver.get("n")),
            num_eigs=int(solver.get("num_eigs", 3)),
            L_cap=float(solver.get("L_cap", 1500.0)),
            functions=bool(raw.get("functions", True)),
            csv=out.get("csv"),
            json_out=out.get("json"),
            cache_dir=raw.get("cache_dir"),
            jobs=int(raw.get("jobs", 1)),
            seed=int(raw.get("seed", 0)),
            wkb=dict(raw.get("wkb", {})),
        )

    def to_dict(self) -> dict:
        d = {
            "version": CONFIG_VERSION,
            "potential": self.potential.to_spec(),
            "regime": self.regime,
            "eps_grid": list(self.eps),
            "alpha": list(self.alphas),
            "solver": {
                "L": "auto" if self.L is None else self.L,
                "N_grid": "auto" if self.N_grid is None else self.N_grid,
                "n": "auto" if self.n is None else self.n,
                "num_eigs": self.num_eigs,
                "L_cap": self.L_cap,
            },
            "functions": self.functions,
            "jobs": self.jobs,
            "seed": self.seed,
        }
        if self.wkb:
            d["wkb"] = dict(self.wkb)
        return d


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_raw(path))


def load_raw(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw
