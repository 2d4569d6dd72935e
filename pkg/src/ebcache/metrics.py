"""Efficient betweenness, path length, queue inflow and the capacity bound.

Every content request activates one delivery path from its provider to the
requester. A node is loaded by a path when it transmits along it, i.e. when
it is the provider or an intermediate hop; the requester never transmits.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .content import Catalog, DeliveryPlan, RequestProfile
from .topology import PathStats, classical_betweenness

__all__ = [
    "MetricsReport",
    "content_path_ratio",
    "path_ratio_matrix",
    "efficient_betweenness",
    "efficient_betweenness_exact",
    "average_path_length",
    "inflow_rate",
    "capacity_upper_bound",
    "relay_objective",
    "compute_metrics",
]


def _check_rates(profile: RequestProfile) -> float:
    total = profile.total
    if total <= 0:
        raise ValueError("total request rate must be positive")
    return total


def path_ratio_matrix(stats: PathStats, delivery: DeliveryPlan,
                      profile: RequestProfile) -> np.ndarray:
    """Matrix ``phi[i, s]``: demand-weighted share of content-``s`` paths through ``i``."""
    total = _check_rates(profile)
    ratio = stats.through_ratio(source_inclusive=True)
    y = delivery.y.astype(float)
    # phi[i,s] = sum_{j,k} lam_k y[j,s,k] r[j,k,i] / sum(lam)
    return np.einsum("jsk,k,jki->is", y, profile.rates, ratio, optimize=True) / total


def content_path_ratio(stats: PathStats, delivery: DeliveryPlan, profile: RequestProfile,
                       i: int, s: int) -> float:
    total = _check_rates(profile)
    ratio = stats.through_ratio(source_inclusive=True)
    y = delivery.y[:, s, :].astype(float)
    return float(np.einsum("jk,k,jk->", y, profile.rates, ratio[:, :, i]) / total)


def efficient_betweenness(stats: PathStats, delivery: DeliveryPlan, profile: RequestProfile,
                          catalog: Catalog) -> np.ndarray:
    return path_ratio_matrix(stats, delivery, profile) @ catalog.popularity


def efficient_betweenness_exact(stats: PathStats, delivery: DeliveryPlan, rates,
                                popularity) -> list[Fraction]:
    """EB in rational arithmetic.

    EB is linear in the popularity vector, so passing a unit vector for
    ``popularity`` yields the exact coefficient of that content's ``q_s``.
    """
    n, C, _ = delivery.y.shape
    rates = [Fraction(r) for r in rates]
    total = sum(rates)
    eb = [Fraction(0)] * n
    for s in range(C):
        for j, k in zip(*np.nonzero(delivery.y[:, s, :])):
            j, k = int(j), int(k)
            weight = Fraction(popularity[s]) * rates[k] / total
            for i in range(n):
                r = stats.through_ratio_exact(j, k, i)
                if r:
                    eb[i] += weight * r
    return eb


def average_path_length(stats: PathStats, delivery: DeliveryPlan, profile: RequestProfile,
                        catalog: Catalog) -> float:
    total = _check_rates(profile)
    y = delivery.y.astype(float)
    hops = stats.hops.astype(float)
    return float(np.einsum("k,s,jsk,jk->", profile.rates, catalog.popularity, y, hops) / total)


def inflow_rate(eb: np.ndarray, profile: RequestProfile, i: int | None = None,
                path_length: float | None = None):
    """Contents entering node ``i``'s transmission queue per unit time.

    Uses the load-share form ``L * sum(lam) * eb_i / sum(eb)`` when
    ``path_length`` is given, and ``eb_i * sum(lam)`` otherwise; the two agree
    because the EB values sum to the average path length.
    """
    eb = np.asarray(eb, dtype=float)
    total_eb = eb.sum()
    if total_eb <= 0:
        out = np.zeros_like(eb)
    elif path_length is None:
        out = eb * profile.total
    else:
        out = path_length * profile.total * eb / total_eb
    return out if i is None else float(out[i])


def capacity_upper_bound(eb: np.ndarray, sdp: np.ndarray, rate: float) -> float:
    """Largest network throughput (homogeneous requests) with no congested node.

    Nodes with zero EB never relay and impose no limit; if no node relays the
    bound is ``math.inf`` (capacity is not relay-limited).
    """
    eb = np.asarray(eb, dtype=float)
    sdp = np.asarray(sdp, dtype=float)
    active = eb > 0
    if not np.any(active):
        return math.inf
    return float(rate * np.min(sdp[active] / eb[active]))


def relay_objective(eb: np.ndarray, sdp: np.ndarray) -> float:
    """``max_i eb_i / p_i``; the reciprocal of ``min_i p_i / eb_i``."""
    return float(np.max(np.asarray(eb, dtype=float) / np.asarray(sdp, dtype=float)))


@dataclass
class MetricsReport:
    phi: np.ndarray
    eb: np.ndarray
    avg_path_length: float
    inflow: np.ndarray
    capacity_bound: float
    betweenness: np.ndarray
    sdp: np.ndarray

    @property
    def relay_limited(self) -> bool:
        return math.isfinite(self.capacity_bound)

    @property
    def min_sdp_eb_ratio(self) -> float:
        w = relay_objective(self.eb, self.sdp)
        return math.inf if w == 0 else 1.0 / w

    def rows(self) -> list[dict]:
        return [
            {"node": i, "betweenness": float(self.betweenness[i]), "eb": float(self.eb[i]),
             "inflow": float(self.inflow[i]), "sdp": float(self.sdp[i])}
            for i in range(self.eb.size)
        ]

    def to_json(self) -> dict:
        bound = self.capacity_bound
        return {
            "phi": self.phi.tolist(),
            "eb": self.eb.tolist(),
            "avg_path_length": self.avg_path_length,
            "inflow": self.inflow.tolist(),
            "capacity_bound": bound if math.isfinite(bound) else None,
            "relay_limited": self.relay_limited,
            "betweenness": self.betweenness.tolist(),
            "sdp": self.sdp.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["node", "betweenness", "eb", "inflow", "sdp"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()


def compute_metrics(stats: PathStats, delivery: DeliveryPlan, profile: RequestProfile,
                    catalog: Catalog, sdp, rate: float) -> MetricsReport:
    phi = path_ratio_matrix(stats, delivery, profile)
    eb = phi @ catalog.popularity
    sdp = np.asarray(sdp, dtype=float)
    return MetricsReport(
        phi=phi,
        eb=eb,
        avg_path_length=average_path_length(stats, delivery, profile, catalog),
        inflow=inflow_rate(eb, profile),
        capacity_bound=capacity_upper_bound(eb, sdp, rate),
        betweenness=classical_betweenness(stats),
        sdp=sdp,
    )
