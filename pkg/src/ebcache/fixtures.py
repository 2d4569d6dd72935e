"""Five-node, two-content regression fixture with hand-checked EB values.

Indices are 0-based; the docstrings and printed output use 1-based labels,
so label ``k`` is index ``k - 1``. In label terms node 1 reaches node 3 over
two minimum-hop paths (via 2 and via 5) and reaches node 4 through node 5.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .content import CachePlan, DeliveryPlan
from .topology import AdjacencyGraph

__all__ = ["FIG1_EDGES", "FIG1_RATES", "fig1_graph", "fig1_plans", "fig1_expected_eb"]

FIG1_EDGES = ((0, 1), (0, 4), (1, 2), (2, 4), (3, 4))
FIG1_RATES = (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10),
              Fraction(5, 10))


def fig1_graph() -> AdjacencyGraph:
    return AdjacencyGraph.from_edges(5, FIG1_EDGES)


def fig1_plans() -> tuple[CachePlan, DeliveryPlan]:
    """Node 1 caches content 2, nodes 2-5 cache content 1; every node fetches
    the other content from node 1 (content 2) or node 2 (content 1)."""
    x = np.array([[0, 1], [1, 0], [1, 0], [1, 0], [1, 0]], dtype=np.int64)
    providers = np.array([
        [1, 1, 2, 3, 4],   # content 1: node 1 asks node 2, others serve themselves
        [0, 0, 0, 0, 0],   # content 2: everyone uses node 1
    ])
    return CachePlan(x), DeliveryPlan.from_providers(providers)


def fig1_expected_eb() -> list[tuple[Fraction, Fraction]]:
    """Per node, the exact (q1, q2) coefficients of its EB."""
    F = Fraction
    return [
        (F(0), F(14, 15)),
        (F(1, 15), F(1, 10)),
        (F(0), F(0)),
        (F(0), F(0)),
        (F(0), F(11, 30)),
    ]
