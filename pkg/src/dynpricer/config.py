"""Experiment configuration: JSON schema, validation and market construction."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .core_types import Box, Simplex
from .exceptions import DynPricerError
from .market import BuyerDistribution, MarketInstance, unit_demand_market
from .valuations import Quadratic, SeparablePower

SCHEMA_VERSION = 1
ALGORITHMS = ("buntoprice", "owel", "owel-ud", "limited-supply", "structural-checks")

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pos_number = {"type": "number", "exclusiveMinimum": 0}
_pos_int = {"type": "integer", "minimum": 1}
_opt = lambda schema: {"oneOf": [schema, {"type": "null"}]}  # noqa: E731

_TYPE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["separable_power", "quadratic", "unit_demand"]},
        "weight": _pos_number,
        "a": _vector,
        "exponent": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "Q": {"type": "array", "items": _vector, "minItems": 1},
        "values": _vector,
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "separable_power"}}},
         "then": {"required": ["a", "exponent"]}},
        {"if": {"properties": {"kind": {"const": "quadratic"}}}, "then": {"required": ["a", "Q"]}},
        {"if": {"properties": {"kind": {"const": "unit_demand"}}}, "then": {"required": ["values"]}},
    ],
    "additionalProperties": False,
}

_PARAMS = {
    "target": _vector,
    "alpha": _pos_number,
    "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "epsilon": _opt(_pos_number),
    "xi": _opt(_pos_number),
    "eta": _opt(_pos_number),
    "iterations": _opt(_pos_int),
    "step": _opt(_pos_number),
    "scale": _pos_number,
    "restarts": _opt(_pos_int),
    "validation_samples": _pos_int,
    "radius": _opt(_pos_number),
    "inner_iterations": _pos_int,
    "inner_validation": _pos_int,
    "inner_restarts": _opt(_pos_int),
    "inner_step": _opt(_pos_number),
    "inner_radius": _opt(_pos_number),
    "price": _vector,
    "distribution": {
        "type": "object",
        "required": ["base", "eta"],
        "properties": {"base": _vector, "eta": _pos_number},
        "additionalProperties": False,
    },
    "T": {"type": "integer", "minimum": 2},
    "runs": _pos_int,
    "trials": _pos_int,
    "samples": _pos_int,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "algorithm", "seed", "market"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "algorithm": {"enum": list(ALGORITHMS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "market": {
            "type": "object",
            "required": ["mode", "types", "costs", "supply", "feasible"],
            "properties": {
                "mode": {"enum": ["divisible", "unit-demand"]},
                "types": {"type": "array", "items": _TYPE_SCHEMA, "minItems": 1},
                "costs": _vector,
                "supply": _vector,
                "feasible": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["box", "simplex"]},
                        "lower": _vector,
                        "upper": _vector,
                    },
                    "if": {"properties": {"kind": {"const": "box"}}},
                    "then": {"required": ["lower", "upper"]},
                    "additionalProperties": False,
                },
                "vmax": _pos_number,
            },
            "additionalProperties": False,
        },
        "params": {"type": "object", "properties": _PARAMS, "additionalProperties": False},
        "oracle": {"type": "boolean"},
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}


class ConfigError(DynPricerError, ValueError):
    """Invalid experiment configuration; the message names the field and constraint."""


def _path(error):
    return ".".join(str(p) for p in error.absolute_path)


def _format_error(error):
    if error.validator == "required":
        missing = [name for name in error.validator_value if name not in error.instance]
        where = _path(error)
        field = f"{where}.{missing[0]}" if where else missing[0]
        return f"{field}: required"
    return f"{_path(error) or 'config'}: {error.message}"


def validate_config(raw):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), str(list(e.absolute_path))))
    if errors:
        raise ConfigError(_format_error(errors[0]))


def config_hash(raw):
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def build_market(spec):
    """Construct a :class:`MarketInstance` from the ``market`` block of a config."""
    types = spec["types"]
    weights = np.array([t.get("weight", 1.0) for t in types], dtype=float)
    weights = weights / weights.sum()
    if spec["mode"] == "unit-demand":
        if any(t["kind"] != "unit_demand" for t in types):
            raise ConfigError("market.types: unit-demand markets take only unit_demand types")
        if spec["feasible"]["kind"] != "simplex":
            raise ConfigError("market.feasible: unit-demand markets use the simplex")
        values = [t["values"] for t in types]
        if len({len(v) for v in values}) != 1:
            raise ConfigError("market.types: all value vectors must have the same length")
        return unit_demand_market(values, weights, spec["costs"], spec["supply"], spec.get("vmax"))

    vals = []
    for k, t in enumerate(types):
        if t["kind"] == "separable_power":
            vals.append(SeparablePower(t["a"], t["exponent"]))
        elif t["kind"] == "quadratic":
            vals.append(Quadratic(t["a"], t["Q"]))
        else:
            raise ConfigError(f"market.types.{k}: unit_demand types need mode unit-demand")
    feas = spec["feasible"]
    if feas["kind"] == "box":
        feasible = Box(feas["lower"], feas["upper"])
    else:
        feasible = Simplex(vals[0].dim)
    return MarketInstance(BuyerDistribution(tuple(vals), weights), spec["costs"], spec["supply"],
                          feasible, vmax=spec.get("vmax"))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    algorithm: str
    seed: int
    market: MarketInstance
    params: dict
    oracle: bool
    out: Path | None
    hash: str


def load_config(path, seed=None, out=None):
    """Read, validate and resolve a config file; ``seed``/``out`` override the file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if seed is not None:
        raw["seed"] = int(seed)
    validate_config(raw)
    try:
        market = build_market(raw["market"])
    except ConfigError:
        raise
    except (DynPricerError, ValueError) as exc:
        raise ConfigError(f"market: {exc}") from exc
    real_goods = market.dim - int(market.unit_demand)
    oracle = raw.get("oracle", real_goods <= 3)
    out_dir = out if out is not None else raw.get("out")
    return ExperimentConfig(
        raw=raw,
        algorithm=raw["algorithm"],
        seed=int(raw["seed"]),
        market=market,
        params=dict(raw.get("params", {})),
        oracle=bool(oracle),
        out=Path(out_dir) if out_dir is not None else None,
        hash=config_hash(raw),
    )
