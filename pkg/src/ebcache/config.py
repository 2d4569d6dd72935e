"""Experiment configuration: JSON schema, defaults, validation and seeding."""

from __future__ import annotations

import copy
import difflib
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "STRATEGIES",
    "load_config",
    "resolve_config",
    "config_hash",
    "derive_seed",
    "set_path",
    "get_path",
]

STRATEGIES = ("eccds", "ucs", "brr_cvr", "oracle", "no_match")
FIGURES = ("fig2", "table1", "fig3a", "fig3b")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the JSON path of the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


DEFAULTS = {
    "topology": {
        "kind": "random",          # random | positions | edges | fig1
        "nodes": 10,
        "side": 100.0,
        "positions": None,
        "edges": None,
        "edge_file": None,
    },
    "catalog": {"contents": 10, "cache_size": 4, "zipf_beta": 1.0},
    "phy": {
        "tx_power_dbm": 20.0,
        "pathloss_exponent": 4.0,
        "noise_dbm": -120.0,
        "sinr_threshold_db": 3.0,
        "subcarriers": 10,
        "rate": 2.0,
        "trials": 10000,
        "sdp": None,
    },
    "requests": {"rate": 0.1},
    "strategy": "eccds",
    "plans": None,
    "solver": {
        "tau0": 0.05,
        "theta": 1.3,
        "tau_max": 1e4,
        "samples": 60,
        "tolerance": 1e-6,
        "max_iterations": 200,
        "spread": 1.5,
        "backend": "simplex",
        "oracle_budget": 10_000_000,
    },
    "sim": {"buffer": 100, "warmup": 10_000, "slots": 50_000, "trace": False,
            "capacity": False},
    "search": {"tolerance": 0.01, "max_probes": 40, "max_drop": 0.01, "min_delivery": 0.99},
    "sweep": {"parameter": "phy.subcarriers", "values": [2, 4, 6, 8, 10],
              "strategies": ["eccds"], "simulate": False, "figure": "table1"},
    "output": {"dir": "out", "format": "json"},
    "seed": 0,
}

_NUM = (int, float)


@dataclass(frozen=True)
class _Leaf:
    types: tuple
    check: object = None
    nullable: bool = False
    unit: str | None = None


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _at_least(k):
    return lambda v: v >= k


_SCHEMA = {
    "topology": {
        "kind": _Leaf((str,), lambda v: v in ("random", "positions", "edges", "fig1")),
        "nodes": _Leaf((int,), _at_least(2)),
        "side": _Leaf(_NUM, _positive),
        "positions": _Leaf((list,), nullable=True),
        "edges": _Leaf((list,), nullable=True),
        "edge_file": _Leaf((str,), nullable=True),
    },
    "catalog": {
        "contents": _Leaf((int,), _at_least(1)),
        "cache_size": _Leaf((int,), _at_least(1)),
        "zipf_beta": _Leaf(_NUM, _nonneg),
    },
    "phy": {
        "tx_power_dbm": _Leaf(_NUM + (str,), unit="dBm"),
        "pathloss_exponent": _Leaf(_NUM, lambda v: v > 2),
        "noise_dbm": _Leaf(_NUM + (str,), unit="dBm"),
        "sinr_threshold_db": _Leaf(_NUM + (str,), unit="dB"),
        "subcarriers": _Leaf((int,), _at_least(1)),
        "rate": _Leaf(_NUM, _positive),
        "trials": _Leaf((int,), _at_least(1000)),
        "sdp": _Leaf((list,), nullable=True),
    },
    "requests": {"rate": _Leaf(_NUM + (list,))},
    "strategy": _Leaf((str,), lambda v: v in STRATEGIES),
    "plans": _Leaf((dict,), nullable=True),
    "solver": {
        "tau0": _Leaf(_NUM, _positive),
        "theta": _Leaf(_NUM, lambda v: v > 1),
        "tau_max": _Leaf(_NUM, _positive),
        "samples": _Leaf((int,), _at_least(1)),
        "tolerance": _Leaf(_NUM, _positive),
        "max_iterations": _Leaf((int,), _at_least(1)),
        "spread": _Leaf(_NUM, _nonneg),
        "backend": _Leaf((str,), lambda v: v in ("simplex", "highs")),
        "oracle_budget": _Leaf((int,), _at_least(1)),
    },
    "sim": {
        "buffer": _Leaf((int,), _at_least(1)),
        "warmup": _Leaf((int,), _nonneg),
        "slots": _Leaf((int,), _at_least(1)),
        "trace": _Leaf((bool,)),
        "capacity": _Leaf((bool,)),
    },
    "search": {
        "tolerance": _Leaf(_NUM, _positive),
        "max_probes": _Leaf((int,), _at_least(2)),
        "max_drop": _Leaf(_NUM, _nonneg),
        "min_delivery": _Leaf(_NUM, lambda v: 0 <= v <= 1),
    },
    "sweep": {
        "parameter": _Leaf((str,)),
        "values": _Leaf((list,)),
        "strategies": _Leaf((list,), lambda v: all(s in STRATEGIES for s in v)),
        "simulate": _Leaf((bool,)),
        "figure": _Leaf((str,), lambda v: v in FIGURES, nullable=True),
    },
    "output": {
        "dir": _Leaf((str,)),
        "format": _Leaf((str,), lambda v: v in ("json", "csv")),
    },
    "seed": _Leaf((int,), _nonneg),
}

_UNIT_RE = re.compile(r"^\s*([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


def _suggest(key: str, known) -> str:
    tokens = sorted(key.lower().split("_"))
    for cand in known:
        if sorted(cand.split("_")) == tokens:
            return cand
    close = difflib.get_close_matches(key, list(known), n=1, cutoff=0.6)
    return close[0] if close else ""


def _parse_unit(path: str, value, unit: str) -> float:
    if not isinstance(value, str):
        return float(value)
    m = _UNIT_RE.match(value)
    if not m:
        raise ConfigError(path, f"cannot parse {value!r}; expected a number in {unit}")
    if m.group(2).lower() != unit.lower():
        raise ConfigError(path, f"unit {m.group(2)!r} is inconsistent with {unit}")
    return float(m.group(1))


def _validate(node, schema, path: str):
    if isinstance(schema, _Leaf):
        if node is None:
            if schema.nullable:
                return None
            raise ConfigError(path, "value is required")
        if isinstance(node, bool) and bool not in schema.types:
            raise ConfigError(path, f"expected {_names(schema.types)}, got bool")
        if not isinstance(node, schema.types):
            raise ConfigError(path, f"expected {_names(schema.types)}, got {type(node).__name__}")
        if schema.unit:
            node = _parse_unit(path, node, schema.unit)
        if isinstance(node, float) and not math.isfinite(node):
            raise ConfigError(path, "value must be finite")
        if schema.check is not None and not schema.check(node):
            raise ConfigError(path, f"invalid value {node!r}")
        return node
    if not isinstance(node, dict):
        raise ConfigError(path, "expected an object")
    out = {}
    for key, value in node.items():
        if key not in schema:
            hint = _suggest(key, schema)
            msg = f"unknown key {key!r}"
            if hint:
                msg += f" (did you mean {hint!r}?)"
            raise ConfigError(f"{path}.{key}", msg)
        out[key] = _validate(value, schema[key], f"{path}.{key}")
    return out


def _names(types):
    return " or ".join(t.__name__ for t in types)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(raw: dict) -> dict:
    """Validate ``raw`` and fill every missing key with its default."""
    checked = _validate(raw, _SCHEMA, "$")
    cfg = _merge(DEFAULTS, checked)
    cfg = _validate(cfg, _SCHEMA, "$")
    topo = cfg["topology"]
    if topo["kind"] == "positions" and not topo["positions"]:
        raise ConfigError("$.topology.positions", "required when kind is 'positions'")
    if topo["kind"] == "edges" and not (topo["edges"] or topo["edge_file"]):
        raise ConfigError("$.topology.edges", "edges or edge_file required when kind is 'edges'")
    rate = cfg["requests"]["rate"]
    if isinstance(rate, list):
        if not rate or any(not isinstance(r, _NUM) or r < 0 for r in rate):
            raise ConfigError("$.requests.rate", "per-node rates must be non-negative numbers")
    elif rate < 0:
        raise ConfigError("$.requests.rate", "rate must be non-negative")
    if cfg["solver"]["tau0"] > cfg["solver"]["tau_max"]:
        raise ConfigError("$.solver.tau0", "must not exceed tau_max")
    plans = cfg["plans"]
    if plans is not None and set(plans) != {"x", "y"}:
        raise ConfigError("$.plans", "plans need exactly the keys 'x' and 'y'")
    return cfg


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError("$", f"config file {path} does not exist")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    return resolve_config(raw)


def config_hash(cfg: dict) -> str:
    """Short digest of everything that affects results (output settings excluded)."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def derive_seed(master: int, label: str) -> int:
    """Stable per-module seed from the master seed and a label."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2 ** 63 - 1)


def get_path(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def set_path(cfg: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(cfg)
    node = out
    parts = dotted.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"$.{dotted}", "not a configurable parameter")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"$.{dotted}", "not a configurable parameter")
    node[parts[-1]] = value
    return out


def as_rate_vector(rate, n: int) -> np.ndarray:
    if isinstance(rate, list):
        if len(rate) != n:
            raise ConfigError("$.requests.rate", f"expected {n} per-node rates, got {len(rate)}")
        return np.asarray(rate, dtype=float)
    return np.full(n, float(rate))
