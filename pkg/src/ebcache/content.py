"""Content catalog, cache/delivery plans and their feasibility checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Catalog",
    "CachePlan",
    "DeliveryPlan",
    "RequestProfile",
    "Violation",
    "zipf_popularity",
    "make_catalog",
    "select_catalog_subset",
    "validate_plans",
    "nearest_delivery",
]


def zipf_popularity(C: int, beta: float) -> np.ndarray:
    """Request probability of each content rank under a Zipf law."""
    if C < 1:
        raise ValueError("content count must be at least 1")
    if beta < 0:
        raise ValueError("zipf beta must be non-negative")
    weights = np.arange(1, C + 1, dtype=float) ** -float(beta)
    return weights / weights.sum()


@dataclass(frozen=True)
class Catalog:
    popularity: np.ndarray
    cache_size: int
    zipf_beta: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.popularity, dtype=float)
        if q.ndim != 1 or q.size < 1:
            raise ValueError("popularity must be a non-empty vector")
        if abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("popularity must sum to 1")
        if np.any(np.diff(q) > 1e-15):
            raise ValueError("popularity must be non-increasing")
        if self.cache_size < 1:
            raise ValueError("cache size must be at least 1")
        q.setflags(write=False)
        object.__setattr__(self, "popularity", q)

    @property
    def size(self) -> int:
        return self.popularity.size


def make_catalog(C: int, cache_size: int, beta: float) -> Catalog:
    return Catalog(zipf_popularity(C, beta), int(cache_size), float(beta))


def select_catalog_subset(C: int, n_nodes: int, cache_size: int, beta: float) -> Catalog:
    """Keep only the ``n_nodes * cache_size`` most popular contents when the
    whole catalog cannot be cached at least once."""
    budget = n_nodes * cache_size
    if C <= budget:
        return make_catalog(C, cache_size, beta)
    q = zipf_popularity(C, beta)[:budget]
    return Catalog(q / q.sum(), int(cache_size), float(beta))


@dataclass(frozen=True)
class RequestProfile:
    rates: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.rates, dtype=float)
        if lam.ndim != 1:
            raise ValueError("rates must be a vector")
        if np.any(lam < 0) or not np.any(lam > 0):
            raise ValueError("rates must be non-negative with at least one positive")
        lam.setflags(write=False)
        object.__setattr__(self, "rates", lam)

    @classmethod
    def homogeneous(cls, n: int, rate: float = 1.0) -> "RequestProfile":
        return cls(np.full(n, float(rate)))

    @property
    def total(self) -> float:
        return float(self.rates.sum())

    def scaled(self, factor: float) -> "RequestProfile":
        return RequestProfile(self.rates * factor)


@dataclass(frozen=True)
class CachePlan:
    """``x[i, s] == 1`` when node ``i`` stores content ``s``."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 2:
            raise ValueError("cache plan must be an (N, C) matrix")
        object.__setattr__(self, "x", x)

    @property
    def shape(self):
        return self.x.shape

    def to_json(self):
        return [[int(v) for v in row] for row in self.x]

    @classmethod
    def from_json(cls, rows) -> "CachePlan":
        return cls(np.array(rows, dtype=np.int64))


@dataclass(frozen=True)
class DeliveryPlan:
    """``y[i, s, j] == 1`` when requester ``j`` fetches content ``s`` from ``i``."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 3 or y.shape[0] != y.shape[2]:
            raise ValueError("delivery plan must be an (N, C, N) tensor")
        object.__setattr__(self, "y", y)

    @property
    def shape(self):
        return self.y.shape

    @classmethod
    def from_providers(cls, providers) -> "DeliveryPlan":
        """Build from ``providers[s, j]`` = node serving content ``s`` to ``j``."""
        prov = np.asarray(providers, dtype=np.int64)
        C, n = prov.shape
        y = np.zeros((n, C, n), dtype=np.int64)
        s_idx, j_idx = np.meshgrid(np.arange(C), np.arange(n), indexing="ij")
        y[prov, s_idx, j_idx] = 1
        return cls(y)

    def providers(self) -> np.ndarray:
        """Provider index per (content, requester); assumes a valid plan."""
        return self.y.argmax(axis=0)

    def to_json(self):
        return [[int(i), int(s), int(j)] for i, s, j in zip(*np.nonzero(self.y))]

    @classmethod
    def from_json(cls, triples, n: int, C: int) -> "DeliveryPlan":
        y = np.zeros((n, C, n), dtype=np.int64)
        for i, s, j in triples:
            y[i, s, j] = 1
        return cls(y)


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: tuple
    detail: str

    def __str__(self):
        return f"{self.constraint}{list(self.index)}: {self.detail}"


def validate_plans(cache: CachePlan, delivery: DeliveryPlan, catalog: Catalog) -> list[Violation]:
    """Return every violated feasibility constraint; an empty list means feasible.

    Constraint labels: ``binary_x``, ``binary_y``, ``capacity`` (per-node cache
    size), ``coverage`` (each content cached somewhere), ``single_source``
    (one provider per request), ``provider_caches`` (provider holds content).
    """
    x, y = cache.x, delivery.y
    n, C = x.shape
    if C != catalog.size or y.shape != (n, C, n):
        raise ValueError(
            f"dimension mismatch: x{x.shape}, y{y.shape}, catalog of {catalog.size}")
    out = []
    for i, s in zip(*np.nonzero((x != 0) & (x != 1))):
        out.append(Violation("binary_x", (int(i), int(s)), f"x={x[i, s]}"))
    for i, s, j in zip(*np.nonzero((y != 0) & (y != 1))):
        out.append(Violation("binary_y", (int(i), int(s), int(j)), f"y={y[i, s, j]}"))
    load = x.sum(axis=1)
    for i in np.nonzero(load > catalog.cache_size)[0]:
        out.append(Violation("capacity", (int(i),),
                             f"caches {load[i]} > {catalog.cache_size}"))
    cover = x.sum(axis=0)
    for s in np.nonzero(cover < 1)[0]:
        out.append(Violation("coverage", (int(s),), "content not cached anywhere"))
    assigned = y.sum(axis=0)
    for s, j in zip(*np.nonzero(assigned != 1)):
        out.append(Violation("single_source", (int(s), int(j)),
                             f"{assigned[s, j]} providers assigned"))
    for i, s, j in zip(*np.nonzero(y > x[:, :, None])):
        out.append(Violation("provider_caches", (int(i), int(s), int(j)),
                             f"node {i} serves content {s} without caching it"))
    return out


def nearest_delivery(hops: np.ndarray, cache: CachePlan) -> DeliveryPlan:
    """Serve every request from the hop-nearest caching node (lowest index on ties)."""
    x = cache.x
    n, C = x.shape
    providers = np.empty((C, n), dtype=np.int64)
    for s in range(C):
        holders = np.nonzero(x[:, s])[0]
        if holders.size == 0:
            raise ValueError(f"content {s} is not cached anywhere")
        # argmin returns the first minimum, i.e. the lowest holder index
        providers[s] = holders[np.argmin(hops[holders, :], axis=0)]
    return DeliveryPlan.from_providers(providers)
