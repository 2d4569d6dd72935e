"""Successful delivery probability under random subcarrier contention.

Every node except the receiver transmits on one subcarrier drawn uniformly
from ``subcarriers``; a link succeeds when its SINR clears the threshold.
Pathloss is deterministic (no fading).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .topology import AdjacencyGraph, NodeLayout

__all__ = [
    "PhyConfig",
    "PhyProfile",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "link_sdp",
    "node_sdp",
    "MIN_SDP",
]

MIN_SDP = 1e-6
_CHUNK = 4096


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return db_to_linear(dbm) * 1e-3


def watts_to_dbm(w):
    return linear_to_db(np.asarray(w, dtype=float) * 1e3)


@dataclass(frozen=True)
class PhyConfig:
    tx_power_dbm: float = 20.0
    pathloss_exponent: float = 4.0
    noise_dbm: float = -120.0
    sinr_threshold_db: float = 3.0
    subcarriers: int = 10
    rate: float = 2.0
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.pathloss_exponent <= 2:
            raise ValueError("pathloss exponent must exceed 2")
        if self.subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if self.trials < 1000:
            raise ValueError("at least 1000 Monte-Carlo trials are required")
        if self.rate <= 0:
            raise ValueError("transmission rate must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhyProfile:
    """Per-node SDP (mean over outgoing links) plus the per-link estimates."""

    node: np.ndarray
    link: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "node": [float(v) for v in self.node],
            "link": [[i, j, float(p)] for (i, j), p in sorted(self.link.items())],
        }


def _subcarrier_draws(cfg: PhyConfig, n: int) -> np.ndarray:
    """Subcarrier index per (trial, node).

    Trials come in fixed-size chunks, each from its own jumped Philox stream,
    so any chunk can be regenerated independently of the others.
    """
    base = np.random.Philox(np.random.SeedSequence(cfg.seed))
    out = np.empty((cfg.trials, n), dtype=np.int32)
    for c, start in enumerate(range(0, cfg.trials, _CHUNK)):
        stop = min(start + _CHUNK, cfg.trials)
        rng = np.random.Generator(base.jumped(c + 1))
        out[start:stop] = rng.integers(0, cfg.subcarriers, size=(stop - start, n))
    return out


def _link_success(layout: NodeLayout, cfg: PhyConfig, draws: np.ndarray, dist: np.ndarray,
                  i: int, j: int) -> float:
    power = float(dbm_to_watts(cfg.tx_power_dbm))
    noise = float(dbm_to_watts(cfg.noise_dbm))
    tau = float(db_to_linear(cfg.sinr_threshold_db))
    gains = np.zeros(layout.n)
    mask = np.arange(layout.n) != j
    gains[mask] = power * dist[mask, j] ** (-cfg.pathloss_exponent)
    signal = gains[i]
    interferers = gains.copy()
    interferers[[i, j]] = 0.0
    collide = draws == draws[:, [i]]
    interference = collide @ interferers
    return float(np.mean(signal >= tau * (noise + interference)))


def link_sdp(layout: NodeLayout, graph: AdjacencyGraph, cfg: PhyConfig, i: int, j: int,
             draws: np.ndarray | None = None) -> float:
    """Monte-Carlo probability that node ``i``'s transmission reaches ``j``."""
    if not graph.has_edge(i, j):
        raise ValueError(f"({i}, {j}) is not an edge")
    if draws is None:
        draws = _subcarrier_draws(cfg, layout.n)
    return _link_success(layout, cfg, draws, layout.distances(), i, j)


def node_sdp(layout: NodeLayout, graph: AdjacencyGraph, cfg: PhyConfig) -> PhyProfile:
    """SDP of each node as the unweighted mean over its neighbour links."""
    if layout.n != graph.n:
        raise ValueError("layout and graph sizes differ")
    draws = _subcarrier_draws(cfg, layout.n)
    dist = layout.distances()
    links = {}
    node = np.empty(layout.n)
    for i in range(layout.n):
        vals = []
        for j in graph.neighbors[i]:
            p = _link_success(layout, cfg, draws, dist, i, j)
            links[(i, j)] = p
            vals.append(p)
        node[i] = max(float(np.mean(vals)), MIN_SDP) if vals else MIN_SDP
    return PhyProfile(node, links)
