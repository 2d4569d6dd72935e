"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def all_shortest_paths(neighbors, j, k):
    """Every minimum-hop path from ``j`` to ``k`` by exhaustive DFS over simple paths."""
    best, found = None, []
    stack = [(j, [j])]
    while stack:
        u, path = stack.pop()
        if best is not None and len(path) > best:
            continue
        if u == k:
            if best is None or len(path) < best:
                best, found = len(path), []
            found.append(path)
            continue
        for v in neighbors[u]:
            if v not in path:
                stack.append((v, path + [v]))
    return [p for p in found if len(p) == best]


def circumcircle_contains(a, b, c, p) -> bool:
    """True when ``p`` lies strictly inside the circumcircle of triangle abc."""
    m = np.array([
        [a[0] - p[0], a[1] - p[1], (a[0] - p[0]) ** 2 + (a[1] - p[1]) ** 2],
        [b[0] - p[0], b[1] - p[1], (b[0] - p[0]) ** 2 + (b[1] - p[1]) ** 2],
        [c[0] - p[0], c[1] - p[1], (c[0] - p[0]) ** 2 + (c[1] - p[1]) ** 2],
    ])
    orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    det = np.linalg.det(m)
    return det * np.sign(orient) > 1e-9


def delaunay_edges_bruteforce(points) -> set:
    """Edges of every triangle whose circumcircle holds no other point."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    edges = set()
    for a, b, c in itertools.combinations(range(n), 3):
        orient = ((pts[b, 0] - pts[a, 0]) * (pts[c, 1] - pts[a, 1])
                  - (pts[b, 1] - pts[a, 1]) * (pts[c, 0] - pts[a, 0]))
        if abs(orient) < 1e-12:
            continue
        if any(circumcircle_contains(pts[a], pts[b], pts[c], pts[p])
               for p in range(n) if p not in (a, b, c)):
            continue
        edges.update({(a, b), (a, c), (b, c)})
    return edges


def eb_by_enumeration(neighbors, y, rates, popularity):
    """EB from explicit path lists: each transmitting node (all but the
    requester) on every minimum-hop path gets an equal share."""
    n, C, _ = y.shape
    rates = [Fraction(r) for r in rates]
    total = sum(rates)
    eb = [Fraction(0)] * n
    for i, s, k in zip(*np.nonzero(y)):
        i, s, k = int(i), int(s), int(k)
        if i == k:
            continue
        paths = all_shortest_paths(neighbors, i, k)
        share = Fraction(popularity[s]) * rates[k] / total / len(paths)
        for path in paths:
            for node in path[:-1]:
                eb[node] += share
    return eb


def brute_force_min_w(neighbors, popularity, cache_size, rates, sdp):
    """Smallest ``max_i eb_i / p_i`` over every cache plan and every provider choice."""
    n = len(neighbors)
    C = len(popularity)
    best = None
    rows = [r for r in itertools.product((0, 1), repeat=C) if sum(r) <= cache_size]
    for x in itertools.product(rows, repeat=n):
        x = np.array(x)
        if x.sum(axis=0).min() < 1:
            continue
        holders = [np.nonzero(x[:, s])[0].tolist() for s in range(C)]
        for choice in itertools.product(*[itertools.product(h, repeat=n) for h in holders]):
            y = np.zeros((n, C, n), dtype=int)
            for s, provs in enumerate(choice):
                for k, i in enumerate(provs):
                    y[i, s, k] = 1
            eb = eb_by_enumeration(neighbors, y, rates, popularity)
            w = max(float(e) / p for e, p in zip(eb, sdp))
            best = w if best is None else min(best, w)
    return best
