"""Joint caching/delivery optimisation: maximise ``min_i p_i / eb_i``.

The problem is written in epigraph form, minimise ``w`` subject to
``eb_i / p_i <= w``, over binary cache variables ``x[i, s]`` and delivery
variables ``y[i, s, j]``. The solver (ECCDS) relaxes binarity to the box,
draws recovery seeds around the relaxed optimum and pushes each seed to a
binary point with a penalty convex-concave procedure: the concave part of
``z - z**2 <= 0`` is linearised at the current iterate and violations are
penalised with a growing weight.

Variable layout of ``z = [y, x]`` (0-based): ``y[i, s, j]`` sits at
``i*N*C + j*C + s`` and ``x[i, s]`` at ``N*N*C + i*C + s``. LPs carry ``w``
as one extra trailing variable.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .content import (Catalog, CachePlan, DeliveryPlan, RequestProfile, nearest_delivery,
                      validate_plans)
from .lp import LPInfeasible, solve_lp
from .metrics import efficient_betweenness, relay_objective
from .topology import PathStats

__all__ = [
    "InfeasibleInstance",
    "BudgetExceeded",
    "IlpInstance",
    "CcpConfig",
    "Relaxation",
    "CcpOutcome",
    "SolveResult",
    "assemble_p1",
    "solve_relaxation",
    "sample_recovery_seeds",
    "penalty_ccp_round",
    "eccds_solve",
    "baseline_ucs",
    "baseline_brr_cvr",
    "baseline_no_match",
    "exhaustive_oracle",
    "enumeration_size",
    "evaluate_plans",
]

log = logging.getLogger(__name__)


class InfeasibleInstance(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class IlpInstance:
    stats: PathStats
    catalog: Catalog
    profile: RequestProfile
    sdp: np.ndarray
    load: np.ndarray          # load[i, j, s, k]: eb_i / p_i contributed by y[j, s, k]
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    n_eq15: int               # the last n_eq15 rows of A_ub are the w-epigraph rows

    @property
    def n(self) -> int:
        return self.stats.n

    @property
    def C(self) -> int:
        return self.catalog.size

    @property
    def dim(self) -> int:
        return (self.n + 1) * self.n * self.C

    @property
    def n_y(self) -> int:
        return self.n * self.n * self.C

    def y_index(self, i, s, j):
        return i * self.n * self.C + j * self.C + s

    def x_index(self, i, s):
        return self.n_y + i * self.C + s

    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x[N, C], y[N, C, N])`` views of a flat ``z``."""
        z = np.asarray(z)
        n, C = self.n, self.C
        y = z[:self.n_y].reshape(n, n, C).transpose(0, 2, 1)
        x = z[self.n_y:self.dim].reshape(n, C)
        return x, y

    def join(self, x, y) -> np.ndarray:
        return np.concatenate([np.asarray(y).transpose(0, 2, 1).ravel(),
                               np.asarray(x).ravel()]).astype(float)

    def objective(self, z) -> float:
        """``max_i eb_i / p_i`` for a (possibly fractional) ``z``."""
        return float(np.max(self.load_matrix() @ np.asarray(z, dtype=float)[:self.n_y]))

    def load_matrix(self) -> np.ndarray:
        """Rows of the w-epigraph constraints restricted to the y block."""
        return self.A_ub[-self.n_eq15:, :self.n_y]

    def to_plans(self, z) -> tuple[CachePlan, DeliveryPlan]:
        x, y = self.split(np.rint(z).astype(np.int64))
        return CachePlan(x.copy()), DeliveryPlan(y.copy())


@dataclass(frozen=True)
class CcpConfig:
    tau0: float = 0.05
    theta: float = 1.3
    tau_max: float = 1e4
    samples: int = 60
    tolerance: float = 1e-6
    max_iterations: int = 200
    spread: float = 1.5
    backend: str = "simplex"

    def __post_init__(self):
        if self.tau0 <= 0 or self.tau0 > self.tau_max:
            raise ValueError("need 0 < tau0 <= tau_max")
        if self.theta <= 1:
            raise ValueError("growth factor theta must exceed 1")
        if self.samples < 1:
            raise ValueError("need at least one recovery sample")


@dataclass
class Relaxation:
    z: np.ndarray
    w_lower: float


@dataclass
class CcpOutcome:
    z: np.ndarray | None
    w: float
    iterations: int
    objectives: list = field(default_factory=list)
    penalties: list = field(default_factory=list)
    anchors: list = field(default_factory=list)  # merit of the incoming iterate at the same tau


@dataclass
class SolveResult:
    cache: CachePlan
    delivery: DeliveryPlan
    w: float
    feasible: bool
    strategy: str
    trace: dict = field(default_factory=dict)

    @property
    def min_ratio(self) -> float:
        """The max-min objective ``min_i p_i / eb_i`` (infinite when nothing relays)."""
        return math.inf if self.w == 0 else 1.0 / self.w

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "feasible": self.feasible,
            "w": self.w,
            "min_ratio": None if self.w == 0 else 1.0 / self.w,
            "x": self.cache.to_json(),
            "y": self.delivery.to_json(),
            "trace": self.trace,
        }


def _load_tensor(stats: PathStats, catalog: Catalog, profile: RequestProfile, sdp) -> np.ndarray:
    ratio = stats.through_ratio(source_inclusive=True)        # [j, k, i]
    lam = profile.rates / profile.total
    q = catalog.popularity
    sdp = np.asarray(sdp, dtype=float)
    # load[i, j, s, k] = q_s lam_k r[j,k,i] / (sum(lam) p_i)
    return np.einsum("jki,s,k->ijsk", ratio, q, lam) / sdp[:, None, None, None]


def assemble_p1(stats: PathStats, catalog: Catalog, profile: RequestProfile, sdp) -> IlpInstance:
    """Build the linear constraints of the epigraph problem (binarity excluded)."""
    n, C, S = stats.n, catalog.size, catalog.cache_size
    sdp = np.asarray(sdp, dtype=float)
    if sdp.shape != (n,) or profile.rates.shape != (n,):
        raise ValueError("sdp and request rates need one entry per node")
    if np.any(sdp <= 0):
        raise ValueError("sdp must be positive")
    if C > n * S:
        raise InfeasibleInstance(f"{C} contents cannot fit in {n} caches of size {S}")
    n_y = n * n * C
    dim = n_y + n * C
    cols = dim + 1                                   # trailing w

    def yi(i, s, j):
        return i * n * C + j * C + s

    def xi(i, s):
        return n_y + i * C + s

    rows, rhs = [], []
    for i in range(n):                               # cache size
        r = np.zeros(cols)
        r[[xi(i, s) for s in range(C)]] = 1.0
        rows.append(r)
        rhs.append(S)
    for s in range(C):                               # coverage
        r = np.zeros(cols)
        r[[xi(i, s) for i in range(n)]] = -1.0
        rows.append(r)
        rhs.append(-1.0)
    for i in range(n):                               # provider must cache
        for s in range(C):
            for j in range(n):
                r = np.zeros(cols)
                r[yi(i, s, j)] = 1.0
                r[xi(i, s)] = -1.0
                rows.append(r)
                rhs.append(0.0)
    load = _load_tensor(stats, catalog, profile, sdp)
    for i in range(n):                               # eb_i / p_i <= w
        r = np.zeros(cols)
        r[:n_y] = load[i].transpose(0, 2, 1).ravel()
        r[-1] = -1.0
        rows.append(r)
        rhs.append(0.0)
    eq = np.zeros((n * C, cols))                     # one provider per request
    for j in range(n):
        for s in range(C):
            eq[j * C + s, [yi(i, s, j) for i in range(n)]] = 1.0
    return IlpInstance(
        stats=stats, catalog=catalog, profile=profile, sdp=sdp, load=load,
        A_ub=np.array(rows), b_ub=np.array(rhs, dtype=float),
        A_eq=eq, b_eq=np.ones(n * C), n_eq15=n,
    )


def _box(instance: IlpInstance) -> np.ndarray:
    upper = np.ones(instance.dim + 1)
    upper[-1] = np.inf
    return upper


def solve_relaxation(instance: IlpInstance, backend: str = "simplex") -> Relaxation:
    """Optimal point of the box relaxation; its ``w`` lower-bounds the integer optimum."""
    c = np.zeros(instance.dim + 1)
    c[-1] = 1.0
    try:
        res = solve_lp(c, instance.A_ub, instance.b_ub, instance.A_eq, instance.b_eq,
                       _box(instance), backend=backend)
    except LPInfeasible as exc:
        raise InfeasibleInstance(str(exc)) from exc
    z = np.clip(res.x[:-1], 0.0, 1.0)
    return Relaxation(z=z, w_lower=float(res.x[-1]))


def sample_recovery_seeds(z, count: int, spread: float, rng: np.random.Generator) -> list:
    """Starting points for the rounding stage.

    The first seed is the relaxed optimum itself; the rest alternate between
    independent Bernoulli roundings of ``z`` and ``z`` plus clipped Gaussian
    noise of standard deviation ``spread``.
    """
    z = np.asarray(z, dtype=float)
    seeds = [z.copy()]
    for l in range(1, count):
        if l % 2:
            seeds.append((rng.random(z.size) < z).astype(float))
        else:
            seeds.append(np.clip(z + spread * rng.standard_normal(z.size), 0.0, 1.0))
    return seeds


def _is_binary(z, tol=1e-6) -> bool:
    return bool(np.all(np.minimum(np.abs(z), np.abs(z - 1.0)) < tol))


_FLAT_NUDGE = 1e-3


def penalty_ccp_round(instance: IlpInstance, seed, cfg: CcpConfig = CcpConfig()) -> CcpOutcome:
    """Map one seed to a binary feasible point, or report failure (``z is None``).

    Each iteration solves, at the current iterate ``a``,

        min  w + tau * sum(omega)
        s.t. problem constraints, 0 <= z <= 1, omega >= 0,
             z_l - (a_l**2 + 2 a_l (z_l - a_l)) <= omega_l

    then sets ``tau = min(theta * tau, tau_max)``. On the box the linearised
    left-hand side ``(1 - 2 a_l) z_l + a_l**2`` is never negative, so the
    optimal ``omega`` equals it and the LP is solved with ``omega``
    substituted out. The loop stops once ``tau == tau_max`` and the iterate
    moves less than ``cfg.tolerance``, or earlier when a binary iterate is
    reproduced: with zero penalty there it stays optimal for every larger
    ``tau``.

    An entry sitting exactly at 1/2 has a flat tangent and would never move,
    so it is linearised slightly below 1/2 instead. The offsets are fixed
    pseudo-random values (the same for every call on a given dimension) so
    that symmetric faces of the feasible set cannot cancel them out.
    ``anchors`` hold the surrogate value of the incoming iterate, which the
    LP optimum can never exceed.
    """
    dim = instance.dim
    upper = _box(instance)
    z = np.clip(np.asarray(seed, dtype=float), 0.0, 1.0)
    tau = cfg.tau0
    nudge = _FLAT_NUDGE * np.random.default_rng(dim).uniform(0.5, 1.5, dim)
    objectives, penalties, anchors = [], [], []
    it = 0
    while it < cfg.max_iterations:
        a = z.copy()
        flat = np.abs(a - 0.5) < 1e-9
        a[flat] = 0.5 - nudge[flat]
        slope = 1.0 - 2.0 * a
        c = np.zeros(dim + 1)
        c[:dim] = tau * slope
        c[dim] = 1.0
        # the raw seed need not satisfy the constraints, so it has no anchor
        anchors.append(math.nan if it == 0 else
                       instance.objective(z) + tau * float(np.sum(slope * z + a * a)))
        try:
            res = solve_lp(c, instance.A_ub, instance.b_ub, instance.A_eq, instance.b_eq,
                           upper, backend=cfg.backend)
        except LPInfeasible:
            return CcpOutcome(None, math.inf, it + 1, objectives, penalties, anchors[:-1])
        it += 1
        z_new = np.clip(res.x[:dim], 0.0, 1.0)
        omega = np.maximum(slope * z_new + a * a, 0.0)
        penalties.append(float(omega.sum()))
        objectives.append(float(res.x[dim] + tau * omega.sum()))
        step = float(np.max(np.abs(z_new - z)))
        z = z_new
        at_max = tau >= cfg.tau_max
        tau = min(cfg.theta * tau, cfg.tau_max)
        if step < cfg.tolerance and (at_max or _is_binary(z)):
            break

    if not _is_binary(z):
        return CcpOutcome(None, math.inf, it, objectives, penalties, anchors)
    z = np.rint(z)
    cache, delivery = instance.to_plans(z)
    if validate_plans(cache, delivery, instance.catalog):
        return CcpOutcome(None, math.inf, it, objectives, penalties, anchors)
    return CcpOutcome(z, instance.objective(z), it, objectives, penalties, anchors)


def evaluate_plans(instance: IlpInstance, cache: CachePlan, delivery: DeliveryPlan) -> float:
    """``max_i eb_i / p_i`` recomputed through the metrics module."""
    eb = efficient_betweenness(instance.stats, delivery, instance.profile, instance.catalog)
    return relay_objective(eb, instance.sdp)


def _result(instance, cache, delivery, strategy, trace) -> SolveResult:
    feasible = not validate_plans(cache, delivery, instance.catalog)
    w = evaluate_plans(instance, cache, delivery)
    return SolveResult(cache, delivery, w, feasible, strategy, trace)


def eccds_solve(instance: IlpInstance, cfg: CcpConfig = CcpConfig(),
                rng: np.random.Generator | None = None) -> SolveResult:
    """Relax, sample recovery seeds, round each with penalty CCP, keep the best.

    Ties on ``w`` go to the earliest sample. When no sample yields a feasible
    binary point the uniform-caching baseline is returned, flagged in
    ``trace["fallback"]``.
    """
    rng = np.random.default_rng(rng)
    relax = solve_relaxation(instance, cfg.backend)
    seeds = sample_recovery_seeds(relax.z, cfg.samples, cfg.spread, rng)
    best, best_w, best_idx = None, math.inf, -1
    iterations = []
    n_ok = 0
    for idx, seed in enumerate(seeds):
        out = penalty_ccp_round(instance, seed, cfg)
        iterations.append(out.iterations)
        n_ok += out.z is not None
        if out.z is not None and out.w < best_w - 1e-12:
            best, best_w, best_idx = out.z, out.w, idx
    trace = {
        "lp_solves": 1 + sum(iterations),
        "ccp_iterations": iterations,
        "samples_attempted": len(seeds),
        "samples_feasible": n_ok,
        "best_sample": best_idx,
        "w_lower": relax.w_lower,
        "fallback": best is None,
    }
    if best is None:
        log.warning("no recovery sample was feasible; falling back to uniform caching")
        fallback = baseline_ucs(instance, rng)
        fallback.strategy = "eccds"
        fallback.trace = {**trace, "fallback_trace": fallback.trace}
        return fallback
    cache, delivery = instance.to_plans(best)
    return _result(instance, cache, delivery, "eccds", trace)


def _repair_coverage(x: np.ndarray) -> None:
    """Ensure every content is cached somewhere by swapping out duplicated copies."""
    n, C = x.shape
    for s in range(C):
        if x[:, s].any():
            continue
        placed = False
        for i in range(n):
            if x[i].sum() == 0:
                continue
            dup = [t for t in range(C - 1, -1, -1) if x[i, t] and x[:, t].sum() > 1]
            if dup:
                x[i, dup[0]] = 0
                x[i, s] = 1
                placed = True
                break
        if not placed:
            raise InfeasibleInstance(f"cannot place content {s}")


def baseline_ucs(instance: IlpInstance, rng: np.random.Generator | None = None,
                 strategy: str = "ucs") -> SolveResult:
    """Uniform caching: each node stores ``S`` contents drawn without replacement;
    requests go to the hop-nearest copy."""
    rng = np.random.default_rng(rng)
    n, C, S = instance.n, instance.C, instance.catalog.cache_size
    x = np.zeros((n, C), dtype=np.int64)
    for i in range(n):
        x[i, rng.choice(C, size=min(S, C), replace=False)] = 1
    _repair_coverage(x)
    cache = CachePlan(x)
    delivery = nearest_delivery(instance.stats.hops, cache)
    return _result(instance, cache, delivery, strategy, {})


def baseline_no_match(instance: IlpInstance, rng: np.random.Generator | None = None) -> SolveResult:
    """Uniform caching with nearest-copy delivery: placement ignores SDP entirely."""
    return baseline_ucs(instance, rng, strategy="no_match")


def baseline_brr_cvr(instance: IlpInstance, betweenness) -> SolveResult:
    """Popular contents at high-betweenness nodes.

    Cache slots are filled round by round, visiting nodes in decreasing
    betweenness (lowest index first on ties) and handing out contents in
    decreasing popularity, cycling through the catalogue and skipping
    contents a node already holds.
    """
    n, C, S = instance.n, instance.C, instance.catalog.cache_size
    bet = np.asarray(betweenness, dtype=float)
    order = sorted(range(n), key=lambda i: (-bet[i], i))
    contents = sorted(range(C), key=lambda s: (-instance.catalog.popularity[s], s))
    x = np.zeros((n, C), dtype=np.int64)
    ptr = 0
    for _ in range(min(S, C)):
        for i in order:
            for step in range(C):
                s = contents[(ptr + step) % C]
                if not x[i, s]:
                    x[i, s] = 1
                    ptr = (ptr + step + 1) % C
                    break
    cache = CachePlan(x)
    delivery = nearest_delivery(instance.stats.hops, cache)
    return _result(instance, cache, delivery, "brr_cvr", {})


def _cache_options(C: int, S: int):
    opts = []
    for r in range(min(S, C) + 1):
        for combo in itertools.combinations(range(C), r):
            row = np.zeros(C, dtype=np.int64)
            row[list(combo)] = 1
            opts.append(row)
    return opts


def _feasible_caches(n: int, C: int, S: int):
    opts = _cache_options(C, S)
    for choice in itertools.product(range(len(opts)), repeat=n):
        x = np.array([opts[c] for c in choice])
        if x.sum(axis=0).min() >= 1:
            yield x


def enumeration_size(n: int, C: int, S: int) -> int:
    """Number of (x, y) pairs the exhaustive search visits."""
    total = 0
    for x in _feasible_caches(n, C, S):
        total += int(np.prod(x.sum(axis=0).astype(object) ** n))
    return total


def exhaustive_oracle(instance: IlpInstance, budget: int = 10 ** 7) -> SolveResult:
    """Exact optimum by enumerating every feasible binary (x, y).

    Refuses with :class:`BudgetExceeded` rather than approximating when the
    search space exceeds ``budget``.
    """
    n, C, S = instance.n, instance.C, instance.catalog.cache_size
    if C > n * S:
        raise InfeasibleInstance(f"{C} contents cannot fit in {n} caches of size {S}")
    n_opts = len(_cache_options(C, S))
    if n_opts ** n > budget:
        raise BudgetExceeded(f"{n_opts ** n} cache plans exceed budget {budget}")
    size = enumeration_size(n, C, S)
    if size > budget:
        raise BudgetExceeded(f"enumeration of {size} plan pairs exceeds budget {budget}")

    load = instance.load                              # [i, j, s, k]
    best_w, best_x, best_prov = math.inf, None, None
    visited = 0
    for x in _feasible_caches(n, C, S):
        holders = [np.nonzero(x[:, s])[0] for s in range(C)]
        acc = np.zeros((1, n))
        radices = []
        for s in range(C):
            for k in range(n):
                opts = holders[s]
                contrib = load[:, opts, s, k].T          # [option, i]
                acc = (acc[:, None, :] + contrib[None, :, :]).reshape(-1, n)
                radices.append(opts)
        visited += acc.shape[0]
        w = acc.max(axis=1)
        idx = int(np.argmin(w))
        if w[idx] < best_w - 1e-12:
            best_w = float(w[idx])
            best_x = x
            choice = []
            for opts in reversed(radices):
                idx, digit = divmod(idx, len(opts))
                choice.append(int(opts[digit]))
            best_prov = np.array(choice[::-1]).reshape(C, n)
    cache = CachePlan(best_x)
    delivery = DeliveryPlan.from_providers(best_prov)
    return _result(instance, cache, delivery, "oracle", {"visited": visited})
