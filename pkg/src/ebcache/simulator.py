"""Time-slotted simulation of content requests travelling over FIFO queues.

One slot lasts ``1 / R`` time units, so each node gets one transmission
attempt per slot; the attempt succeeds with the node's SDP. Per slot:

1. each node issues a request with probability ``lambda_i / R``; the content
   follows the catalogue popularity and the provider comes from the delivery
   plan. Self-cached content is delivered at once; otherwise a uniformly
   drawn minimum-hop route is fixed and the content joins the provider's
   queue.
2. every node with a non-empty queue attempts its head-of-line content. A
   success hands it to the next hop (or delivers it); a failure retries
   next slot. Hand-overs land after all nodes have attempted.

A content arriving at a full buffer is dropped. Counters only run after the
warm-up slots.
"""

from __future__ import annotations

import csv
import io
import math
import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .content import Catalog, DeliveryPlan
from .topology import AdjacencyGraph, PathStats

__all__ = [
    "SimConfig",
    "SimReport",
    "SearchConfig",
    "CapacityResult",
    "run_slotted_sim",
    "measure_forwarded_ratios",
    "find_capacity",
]


@dataclass(frozen=True)
class SimConfig:
    rate: float | tuple = 0.1      # requests per node per unit time (scalar or per node)
    buffer: int = 100
    warmup: int = 10_000
    slots: int = 50_000
    seed: int = 0
    trace: bool = False

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rate, dtype=float))
        if np.any(rates < 0):
            raise ValueError("request rate must be non-negative")
        if self.buffer < 1:
            raise ValueError("buffer must hold at least one content")
        if self.warmup < 0 or self.slots < 1:
            raise ValueError("invalid slot counts")


@dataclass
class SimReport:
    rate: float                     # transmission rate R
    window: int                     # measured slots
    requested: np.ndarray
    delivered: np.ndarray
    forwarded: np.ndarray
    enqueued: np.ndarray
    dropped: np.ndarray
    mean_queue: np.ndarray
    max_queue: np.ndarray
    self_served: int
    network_delivered: int
    trace: list = field(default_factory=list, repr=False)

    @property
    def duration(self) -> float:
        return self.window / self.rate

    @property
    def request_rate(self) -> np.ndarray:
        return self.requested / self.duration

    @property
    def delivered_rate(self) -> np.ndarray:
        return self.delivered / self.duration

    @property
    def inflow_rate(self) -> np.ndarray:
        return self.enqueued / self.duration

    @property
    def drops(self) -> int:
        return int(self.dropped.sum())

    @property
    def drop_fraction(self) -> float:
        req = int(self.requested.sum())
        return self.drops / req if req else 0.0

    @property
    def node_drop_fraction(self) -> np.ndarray:
        """Per node, the share of arriving contents that found the buffer full."""
        arrived = self.enqueued + self.dropped
        return np.divide(self.dropped, arrived, out=np.zeros(arrived.size),
                         where=arrived > 0)

    @property
    def delivery_ratio(self) -> float:
        req = int(self.requested.sum())
        return float(self.delivered.sum()) / req if req else 1.0

    def is_stable(self, max_drop: float = 0.01, min_delivery: float = 0.99) -> bool:
        """No node drops ``max_drop`` or more of its arrivals and at least
        ``min_delivery`` of all requests are delivered."""
        worst = float(self.node_drop_fraction.max(initial=0.0))
        return worst < max_drop and self.delivery_ratio >= min_delivery

    @property
    def stable(self) -> bool:
        return self.is_stable()

    def rows(self) -> list[dict]:
        return [
            {"node": i, "request_rate": float(self.request_rate[i]),
             "delivered_rate": float(self.delivered_rate[i]),
             "forwarded": int(self.forwarded[i]), "enqueued": int(self.enqueued[i]),
             "dropped": int(self.dropped[i]), "mean_queue": float(self.mean_queue[i]),
             "max_queue": int(self.max_queue[i])}
            for i in range(self.requested.size)
        ]

    def to_json(self) -> dict:
        return {
            "rate": self.rate,
            "window": self.window,
            "stable": self.stable,
            "drop_fraction": self.drop_fraction,
            "max_node_drop_fraction": float(self.node_drop_fraction.max(initial=0.0)),
            "delivery_ratio": self.delivery_ratio,
            "self_served": self.self_served,
            "network_delivered": self.network_delivered,
            "nodes": self.rows(),
        }

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slot", "node", "event", "content", "queue_len"])
        w.writerows(self.trace)
        return buf.getvalue()


def _arrival_slots(rng: np.random.Generator, prob: float, total: int) -> np.ndarray:
    if prob <= 0:
        return np.zeros(0, dtype=np.int64)
    if prob >= 1:
        return np.arange(total, dtype=np.int64)
    chunks = []
    last = -1
    while last < total:
        size = int(max(64, (total - last) * prob * 1.1 + 10 * math.sqrt(total * prob)))
        gaps = rng.geometric(prob, size=size)
        slots = last + np.cumsum(gaps)
        chunks.append(slots)
        last = int(slots[-1])
    out = np.concatenate(chunks)
    return out[out < total]


def _next_hop_table(graph: AdjacencyGraph, stats: PathStats):
    """``table[k][u]`` = (candidates, cumulative weights) for a step from u toward k."""
    n = graph.n
    h, sig = stats.hops, stats.sigma
    table = []
    for k in range(n):
        row = []
        for u in range(n):
            cands = [v for v in graph.neighbors[u] if h[v, k] == h[u, k] - 1]
            acc, cum = 0, []
            for v in cands:
                acc += int(sig[v, k])
                cum.append(acc)
            row.append((cands, cum, acc))
        table.append(row)
    return table


def run_slotted_sim(graph: AdjacencyGraph, stats: PathStats, delivery: DeliveryPlan,
                    catalog: Catalog, sdp, rate: float, cfg: SimConfig) -> SimReport:
    """Simulate ``cfg.warmup + cfg.slots`` slots and report the measured window."""
    n = graph.n
    lam = np.broadcast_to(np.asarray(cfg.rate, dtype=float), (n,))
    prob = lam / rate
    if np.any(prob > 1):
        raise ValueError("request rate above R: more than one arrival per slot")
    sdp = [float(p) for p in np.asarray(sdp, dtype=float)]
    providers = delivery.providers().tolist()       # [s][k]
    total = cfg.warmup + cfg.slots
    warm = cfg.warmup
    cap = cfg.buffer

    ss = np.random.SeedSequence(cfg.seed)
    arr_seed, content_seed, py_seed = ss.spawn(3)
    arr_rng = np.random.default_rng(arr_seed)
    per_node = [_arrival_slots(arr_rng, float(p), total) for p in prob]
    ev_slot = np.concatenate(per_node)
    ev_node = np.concatenate([np.full(a.size, i, dtype=np.int64) for i, a in enumerate(per_node)])
    order = np.lexsort((ev_node, ev_slot))
    ev_slot = ev_slot[order].tolist()
    ev_node = ev_node[order].tolist()
    n_ev = len(ev_slot)
    ev_content = np.random.default_rng(content_seed).choice(
        catalog.size, size=n_ev, p=catalog.popularity).tolist()
    pyrng = random.Random(int(py_seed.generate_state(1)[0]))
    draw = pyrng.random
    hop_table = _next_hop_table(graph, stats)

    requested = [0] * n
    delivered = [0] * n
    forwarded = [0] * n
    enqueued = [0] * n
    dropped = [0] * n
    qsum = [0] * n
    qmax = [0] * n
    self_served = 0
    net_delivered = 0
    queues = [deque() for _ in range(n)]
    backlog = 0
    trace = [] if cfg.trace else None

    def route(j, k):
        path = [j]
        u = j
        tab = hop_table[k]
        while u != k:
            cands, cum, tot = tab[u]
            if len(cands) == 1:
                u = cands[0]
            else:
                r = draw() * tot
                for v, c in zip(cands, cum):
                    if r < c:
                        u = v
                        break
            path.append(u)
        return path

    t = 0
    ptr = 0
    while t < total:
        if backlog == 0:
            if ptr >= n_ev:
                break
            t = ev_slot[ptr]
        measuring = t >= warm
        while ptr < n_ev and ev_slot[ptr] == t:
            k = ev_node[ptr]
            s = ev_content[ptr]
            ptr += 1
            j = providers[s][k]
            if measuring:
                requested[k] += 1
            if j == k:
                if measuring:
                    delivered[k] += 1
                    self_served += 1
                if trace is not None:
                    trace.append((t, k, "self", s, len(queues[k])))
                continue
            q = queues[j]
            if len(q) >= cap:
                if measuring:
                    dropped[j] += 1
                if trace is not None:
                    trace.append((t, j, "drop", s, len(q)))
                continue
            q.append([route(j, k), 0, s])
            backlog += 1
            if measuring:
                enqueued[j] += 1
            if trace is not None:
                trace.append((t, j, "enqueue", s, len(q)))

        moving = []
        for i in range(n):
            q = queues[i]
            if q and (sdp[i] >= 1.0 or draw() < sdp[i]):
                pkt = q.popleft()
                moving.append(pkt)
                if measuring:
                    forwarded[i] += 1
                if trace is not None:
                    trace.append((t, i, "tx", pkt[2], len(q)))
        for pkt in moving:
            pkt[1] += 1
            path = pkt[0]
            nxt = path[pkt[1]]
            backlog -= 1
            if pkt[1] == len(path) - 1:
                if measuring:
                    delivered[nxt] += 1
                    net_delivered += 1
                if trace is not None:
                    trace.append((t, nxt, "deliver", pkt[2], len(queues[nxt])))
                continue
            q = queues[nxt]
            if len(q) >= cap:
                if measuring:
                    dropped[nxt] += 1
                if trace is not None:
                    trace.append((t, nxt, "drop", pkt[2], len(q)))
                continue
            q.append(pkt)
            backlog += 1
            if measuring:
                enqueued[nxt] += 1
        if measuring and backlog:
            for i in range(n):
                ql = len(queues[i])
                if ql:
                    qsum[i] += ql
                    if ql > qmax[i]:
                        qmax[i] = ql
        t += 1

    window = cfg.slots
    return SimReport(
        rate=float(rate),
        window=window,
        requested=np.array(requested),
        delivered=np.array(delivered),
        forwarded=np.array(forwarded),
        enqueued=np.array(enqueued),
        dropped=np.array(dropped),
        mean_queue=np.array(qsum, dtype=float) / window,
        max_queue=np.array(qmax),
        self_served=self_served,
        network_delivered=net_delivered,
        trace=trace or [],
    )


def measure_forwarded_ratios(report: SimReport) -> np.ndarray:
    """Share of all transmissions made by each node."""
    total = int(report.forwarded.sum())
    if total == 0:
        raise ValueError("no content was forwarded during the measurement window")
    return report.forwarded / total


@dataclass(frozen=True)
class SearchConfig:
    tolerance: float = 0.01         # relative bracket width at which the search stops
    max_probes: int = 40
    max_drop: float = 0.01
    min_delivery: float = 0.99


@dataclass
class CapacityResult:
    capacity: float                 # lambda_max * N
    per_node_rate: float
    relay_limited: bool
    probes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"capacity": self.capacity, "per_node_rate": self.per_node_rate,
                "relay_limited": self.relay_limited,
                "probes": [[lam, ok] for lam, ok in self.probes]}


def find_capacity(graph: AdjacencyGraph, stats: PathStats, delivery: DeliveryPlan,
                  catalog: Catalog, sdp, rate: float, sim_cfg: SimConfig = SimConfig(),
                  search: SearchConfig = SearchConfig()) -> CapacityResult:
    """Largest homogeneous per-node request rate whose simulation is stable,
    reported as network throughput ``lambda * N``.

    The rate is searched in ``(0, R]``: halving from ``R`` until a stable rate
    is found, then bisecting. Every probe reuses ``sim_cfg.seed``.
    """
    n = graph.n
    probes = []

    def stable(lam):
        cfg = SimConfig(rate=lam, buffer=sim_cfg.buffer, warmup=sim_cfg.warmup,
                        slots=sim_cfg.slots, seed=sim_cfg.seed)
        rep = run_slotted_sim(graph, stats, delivery, catalog, sdp, rate, cfg)
        ok = rep.is_stable(search.max_drop, search.min_delivery)
        probes.append((lam, ok))
        return ok

    hi = float(rate)
    if stable(hi):
        return CapacityResult(hi * n, hi, False, probes)
    lo = 0.0
    while len(probes) < search.max_probes:
        mid = hi / 2 if lo == 0.0 else 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
        if lo > 0 and hi - lo <= search.tolerance * hi:
            break
    return CapacityResult(lo * n, lo, True, probes)
