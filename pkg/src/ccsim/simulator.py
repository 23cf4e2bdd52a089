"""Event-driven simulation of the spatial colonization-and-collapse processes.

Two variants share one engine:

* ``run_cc``: at most one colony per vertex; founding attempts aimed at an
  occupied vertex die (simultaneous attempts at one empty vertex still create
  exactly one colony, so only the hit/no-hit bit per neighbor matters).
* ``run_xi``: occupancy never blocks and each collapse creates at most one
  colony per neighbor; this is the non-blocking process whose per-collapse
  offspring law is exactly ``kernel.offspring_pmf``.

Colony sizes are never materialized as individual agents: only the size at
collapse matters, and only through powers s^Y inside the hit-pattern law.
Sizes beyond 2^53 are carried as floats (possibly inf); the hit pattern is
then almost surely all-ones and is short-circuited once the miss probability
underflows past e^-45.

Randomness comes from counter-based Philox streams keyed by
(seed, replica_index), so replicas are independent and replayable regardless
of how they are scheduled; draws inside one replica are consumed sequentially
from buffered blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from heapq import heappush, heappop
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .graphs import Lattice, Topology, Vertex
from .kernel import ModelParams

__all__ = [
    "Status",
    "Colony",
    "SimConfig",
    "SimResult",
    "SurvivalEstimate",
    "SpeedEstimate",
    "Stream",
    "sample_collapse_size",
    "sample_hit_pattern",
    "run_cc",
    "run_xi",
    "run_replicas",
    "edge_speed_experiment",
    "wilson_interval",
    "DEFAULT_SEED",
]

DEFAULT_SEED = 1729
_WILSON_Z = 1.959963984540054  # two-sided 95%
_LOG_MISS_CUTOFF = -45.0  # per-slot miss probability below e^-45: treat as all-hit
_MAX_EXACT_COUNT = float(2**53)


class Status(str, Enum):
    EXTINCT = "extinct"
    SURVIVED_TO_HORIZON = "survived_to_horizon"
    REACHED_COLONY_CAP = "reached_colony_cap"
    EVENT_CAP_EXCEEDED = "event_cap_exceeded"


#: statuses counted as survival by the desk-scale proxy
SURVIVAL_STATUSES = frozenset({Status.SURVIVED_TO_HORIZON, Status.REACHED_COLONY_CAP})


@dataclass(frozen=True)
class Colony:
    """One colony: where it sits, when it was founded, when it collapses."""

    vertex: Vertex
    founded_at: float
    collapse_at: float

    def __post_init__(self):
        if not self.collapse_at > self.founded_at:
            raise DomainError("collapse_at must exceed founded_at")


@dataclass(frozen=True)
class SimConfig:
    """Termination and accounting knobs for a single replica."""

    t_max: float
    n_max: int = 10_000
    event_max: int = 10_000_000
    track_vertex: Optional[Vertex] = None
    seed: int = DEFAULT_SEED
    replica_index: int = 0

    def __post_init__(self):
        if not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if self.n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {self.n_max}")
        if self.event_max < 1:
            raise DomainError(f"event_max must be >= 1, got {self.event_max}")


@dataclass(frozen=True)
class SimResult:
    """Outcome of one replica."""

    status: Status
    extinction_time: Optional[float]
    collapses: int
    max_colonies: int
    origin_colonizations: int
    last_origin_time: Optional[float]
    rightmost_site: Optional[int]
    # bookkeeping beyond the CSV contract
    final_colonies: int = 0
    neighbor_queries: int = 0
    neighbor_hits: int = 0
    offspring_counts: Optional[dict[int, int]] = None

    @property
    def survived(self) -> bool:
        return self.status in SURVIVAL_STATUSES


@dataclass(frozen=True)
class SurvivalEstimate:
    """Aggregated replica statistics with a Wilson 95% interval."""

    replicas: int
    survived: int
    survived_fraction: float
    ci_low: float
    ci_high: float
    results: Optional[tuple[SimResult, ...]] = None


@dataclass(frozen=True)
class SpeedEstimate:
    mean_speed: float
    std_error: float
    replicas_used: int
    replicas: int


class Stream:
    """Buffered draws from a Philox stream keyed by (seed, replica_index)."""

    BLOCK = 4096

    def __init__(self, seed: int, replica_index: int = 0):
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF, replica_index], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))
        self._uni: list[float] = []
        self._ui = 0
        self._exp: list[float] = []
        self._ei = 0

    def random(self) -> float:
        if self._ui >= len(self._uni):
            self._uni = self.generator.random(self.BLOCK).tolist()
            self._ui = 0
        v = self._uni[self._ui]
        self._ui += 1
        return v

    def exponential(self) -> float:
        if self._ei >= len(self._exp):
            self._exp = self.generator.standard_exponential(self.BLOCK).tolist()
            self._ei = 0
        v = self._exp[self._ei]
        self._ei += 1
        return v


def sample_collapse_size(birth_rate: float, lifetime: float, u: float):
    """Colony size at collapse given its lifetime.

    Conditioned on the lifetime tau, the size is geometric on {1, 2, ...}
    with success parameter e^(-lambda*tau); inversion gives
    Y = 1 + floor(log u / log(1 - e^(-lambda*tau))).  Returns an int below
    2^53 and a float (possibly inf) beyond, where only the hit pattern cares.
    """
    if birth_rate == 0.0:
        return 1
    if not lifetime > 0.0:
        raise DomainError(f"lifetime must be positive, got {lifetime}")
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must be in (0, 1), got {u}")
    x = birth_rate * lifetime
    # log(1 - e^-x), stable on both ends
    if x <= 0.6931471805599453:
        log_q1 = math.log(-math.expm1(-x))
    else:
        log_q1 = math.log1p(-math.exp(-x))
    if log_q1 == 0.0:  # e^-x underflowed: size is astronomically large
        return math.inf
    ratio = math.log(u) / log_q1
    if ratio >= _MAX_EXACT_COUNT:  # beyond exact float integers; possibly inf
        return 1.0 + ratio
    return int(1 + math.floor(ratio))


def _hit_bits(n_query: int, m: int, size, p: float, rand: Callable[[], float]) -> list[bool]:
    """Hit indicators for ``n_query`` of the m neighbor slots of a collapse.

    The joint hit pattern over all m slots is exchangeable and independent of
    the occupancy state, so querying any fixed subset is the same law as
    querying the first ``n_query`` slots.  Cells are sampled sequentially: with
    z misses and h hits revealed, the next cell is empty with probability

        P = [ sum_{i<=h} (-1)^i C(h,i) r(z+1+i) ] / [ sum_{i<=h} (-1)^i C(h,i) r(z+i) ]

    where r(j) = (1 - j p / m)^size, evaluated in log domain.  With h = 0 this
    reduces to ((1-(z+1)p/m) / (1-z p/m))^size.
    """
    if p == 0.0 or n_query == 0:
        return [False] * n_query
    log1 = math.log1p(-p / m)
    if size * log1 < _LOG_MISS_CUTOFF:
        # miss probability per slot below e^-45: all queried slots are hit
        return [True] * n_query
    if size == 1:
        # one individual: survives w.p. p and picks one slot uniformly
        u = rand()
        bits = [False] * n_query
        r = u * m / p
        if r < n_query:
            bits[int(r)] = True
        return bits
    # log r(j) for j = 0..n_query (powers never exceed z+1+h <= n_query)
    logr = [0.0]
    for j in range(1, n_query + 1):
        arg = 1.0 - j * p / m
        logr.append(size * math.log(arg) if arg > 0.0 else -math.inf)
    bits = []
    z = 0
    h = 0
    comb = math.comb
    exp = math.exp
    for _ in range(n_query):
        if h == 0:
            d = logr[z + 1] - logr[z]
            p_empty = exp(d) if d > -math.inf else 0.0
        else:
            base = logr[z + 1] - logr[z]
            if base == -math.inf:
                p_empty = 0.0
            else:
                num = 0.0
                den = 0.0
                for i in range(h + 1):
                    c = comb(h, i) if i % 2 == 0 else -comb(h, i)
                    dn = logr[z + 1 + i] - logr[z + 1]
                    dd = logr[z + i] - logr[z]
                    num += c * (exp(dn) if dn > -math.inf else 0.0)
                    den += c * (exp(dd) if dd > -math.inf else 0.0)
                if den <= 0.0:
                    p_empty = 0.0
                else:
                    p_empty = exp(base) * num / den
                    if p_empty > 1.0:
                        p_empty = 1.0
                    elif p_empty < 0.0:
                        p_empty = 0.0
        if rand() < p_empty:
            bits.append(False)
            z += 1
        else:
            bits.append(True)
            h += 1
    return bits


def sample_hit_pattern(m: int, size, p: float, rng) -> list[bool]:
    """Which of the m neighbors of a collapsing colony receive an attempt.

    ``size`` is the colony size at collapse (int, or float for huge values);
    ``rng`` is anything with a ``random()`` method.  Each slot is hit with
    marginal probability 1 - (1 - p/m)^size and the joint law is the exact
    occupancy pattern of the survivors' uniform choices.
    """
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must be in [0, 1], got {p}")
    if not size >= 1:
        raise DomainError(f"size must be >= 1, got {size}")
    return _hit_bits(m, m, size, p, rng.random)


def _is_z1(topology: Topology) -> bool:
    return isinstance(topology, Lattice) and topology.d == 1


def _prepare(topology: Topology, init: Sequence[Vertex], cfg: SimConfig):
    if not init:
        raise DomainError("init must contain at least one vertex")
    if len(set(init)) != len(init):
        raise DomainError("init vertices must be distinct")
    for v in init:
        if not topology.contains(v):
            raise DomainError(f"init vertex {v!r} is not in the graph")
    track = cfg.track_vertex if cfg.track_vertex is not None else init[0]
    stream = Stream(cfg.seed, cfg.replica_index)
    return track, stream


def run_cc(topology: Topology, params: ModelParams, init: Sequence[Vertex], cfg: SimConfig) -> SimResult:
    """One replica of the blocking (at most one colony per vertex) process.

    Discrete-event loop over a priority queue of collapse events: pop the
    earliest collapse, draw the colony size from its lifetime, sample the hit
    pattern over the collapsing vertex's neighbor slots, and found a colony at
    every *empty* hit neighbor (attempts at occupied or off-box slots die; the
    collapsing vertex is empty before attempts land, but is not a target).
    """
    track, stream = _prepare(topology, init, cfg)
    rand = stream.random
    rexp = stream.exponential
    lam = params.birth_rate
    p = params.survival_prob
    boxed = isinstance(topology, Lattice) and topology.box is not None
    neighbors = topology.neighbors
    contains = topology.contains

    heap: list[tuple[float, int, Vertex, float]] = []
    seq = 0
    occupied: set[Vertex] = set()
    for v in init:
        occupied.add(v)
        heappush(heap, (rexp(), seq, v, 0.0))
        seq += 1

    t_max = cfg.t_max
    n_max = cfg.n_max
    event_max = cfg.event_max
    collapses = 0
    peak = len(occupied)
    origin_hits = 0
    last_origin = None
    queries = 0
    hits = 0
    status = None
    end_time = None

    while heap:
        t, _, x, born = heappop(heap)
        if t > t_max:
            status = Status.SURVIVED_TO_HORIZON
            break
        collapses += 1
        occupied.discard(x)
        nbrs = neighbors(x)
        if boxed:
            empties = [w for w in nbrs if w not in occupied and contains(w)]
        else:
            empties = [w for w in nbrs if w not in occupied]
        if empties:
            u = rand()
            while u <= 0.0:
                u = rand()
            size = sample_collapse_size(lam, t - born, u)
            bits = _hit_bits(len(empties), len(nbrs), size, p, rand)
            queries += len(empties)
            for w, hit in zip(empties, bits):
                if not hit:
                    continue
                hits += 1
                occupied.add(w)
                heappush(heap, (t + rexp(), seq, w, t))
                seq += 1
                if w == track:
                    origin_hits += 1
                    last_origin = t
        n = len(occupied)
        if n > peak:
            peak = n
        if n == 0:
            status = Status.EXTINCT
            end_time = t
            break
        if n >= n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if collapses >= event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break

    if status is None:  # queue drained without hitting a break: impossible by construction
        status = Status.EXTINCT
        end_time = 0.0

    rightmost = None
    if _is_z1(topology) and occupied:
        rightmost = max(v[0] for v in occupied)
    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=collapses,
        max_colonies=peak,
        origin_colonizations=origin_hits,
        last_origin_time=last_origin,
        rightmost_site=rightmost,
        final_colonies=len(occupied),
        neighbor_queries=queries,
        neighbor_hits=hits,
    )


def run_xi(topology: Topology, params: ModelParams, init: Sequence[Vertex], cfg: SimConfig) -> SimResult:
    """One replica of the non-blocking process (vertices hold any number of colonies).

    Identical dynamics to ``run_cc`` except that occupancy never blocks a
    founding, so every hit neighbor slot creates a colony and each collapse
    spawns between 0 and degree new colonies.  Records the per-collapse
    offspring histogram for validation against the exact law.
    """
    track, stream = _prepare(topology, init, cfg)
    rand = stream.random
    rexp = stream.exponential
    lam = params.birth_rate
    p = params.survival_prob
    boxed = isinstance(topology, Lattice) and topology.box is not None
    neighbors = topology.neighbors
    contains = topology.contains

    heap: list[tuple[float, int, Vertex, float]] = []
    seq = 0
    for v in init:
        heappush(heap, (rexp(), seq, v, 0.0))
        seq += 1
    live = len(init)

    t_max = cfg.t_max
    n_max = cfg.n_max
    event_max = cfg.event_max
    collapses = 0
    peak = live
    origin_hits = 0
    last_origin = None
    queries = 0
    hits = 0
    offspring: dict[int, int] = {}
    status = None
    end_time = None

    while heap:
        t, _, x, born = heappop(heap)
        if t > t_max:
            status = Status.SURVIVED_TO_HORIZON
            heappush(heap, (t, seq, x, born))  # colony is still alive at the horizon
            seq += 1
            break
        collapses += 1
        live -= 1
        nbrs = neighbors(x)
        if boxed:
            targets = [w for w in nbrs if contains(w)]
        else:
            targets = nbrs
        u = rand()
        while u <= 0.0:
            u = rand()
        size = sample_collapse_size(lam, t - born, u)
        bits = _hit_bits(len(targets), len(nbrs), size, p, rand)
        queries += len(targets)
        created = 0
        for w, hit in zip(targets, bits):
            if not hit:
                continue
            created += 1
            heappush(heap, (t + rexp(), seq, w, t))
            seq += 1
            if w == track:
                origin_hits += 1
                last_origin = t
        hits += created
        live += created
        offspring[created] = offspring.get(created, 0) + 1
        if live > peak:
            peak = live
        if live == 0:
            status = Status.EXTINCT
            end_time = t
            break
        if live >= n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if collapses >= event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break

    if status is None:
        status = Status.EXTINCT
        end_time = 0.0

    rightmost = None
    if _is_z1(topology) and heap:  # heap entries are exactly the live colonies
        rightmost = max(entry[2][0] for entry in heap)
    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=collapses,
        max_colonies=peak,
        origin_colonizations=origin_hits,
        last_origin_time=last_origin,
        rightmost_site=rightmost,
        final_colonies=live,
        neighbor_queries=queries,
        neighbor_hits=hits,
        offspring_counts=offspring,
    )


def wilson_interval(successes: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise DomainError("n must be >= 1")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


def _replica_block(args) -> list[SimResult]:
    topology, params, init, cfg, indices, which = args
    runner = run_xi if which == "xi" else run_cc
    return [runner(topology, params, init, replace(cfg, replica_index=r)) for r in indices]


def run_replicas(
    topology: Topology,
    params: ModelParams,
    init: Sequence[Vertex],
    cfg: SimConfig,
    replicas: int,
    *,
    process: str = "cc",
    jobs: int = 1,
    keep_results: bool = False,
) -> SurvivalEstimate:
    """Run independent replicas and aggregate the survival proxy.

    Replica r draws from the stream keyed (cfg.seed, r); survival means
    status in {survived_to_horizon, reached_colony_cap}.  Results are reduced
    in replica order, so the estimate does not depend on ``jobs``.
    """
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if process not in ("cc", "xi"):
        raise DomainError(f"process must be 'cc' or 'xi', got {process!r}")
    indices = list(range(replicas))
    if jobs > 1 and replicas > 1:
        chunks = [indices[i::jobs] for i in range(jobs)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            blocks = list(
                pool.map(
                    _replica_block,
                    [(topology, params, init, cfg, c, process) for c in chunks],
                )
            )
        by_index: dict[int, SimResult] = {}
        for chunk, block in zip(chunks, blocks):
            by_index.update(zip(chunk, block))
        results = [by_index[r] for r in indices]
    else:
        results = _replica_block((topology, params, init, cfg, indices, process))
    survived = sum(1 for r in results if r.survived)
    lo, hi = wilson_interval(survived, replicas)
    return SurvivalEstimate(
        replicas=replicas,
        survived=survived,
        survived_fraction=survived / replicas,
        ci_low=lo,
        ci_high=hi,
        results=tuple(results) if keep_results else None,
    )


def half_full_interval(radius: int = 10) -> list[Vertex]:
    """Every other site of [-radius, radius] on the line, endpoints included."""
    return [(x,) for x in range(-radius, radius + 1, 2)]


def edge_speed_experiment(
    params: ModelParams,
    t_max: float,
    replicas: int,
    seed: int = DEFAULT_SEED,
    *,
    init: Optional[Sequence[Vertex]] = None,
    jobs: int = 1,
) -> SpeedEstimate:
    """Mean rightmost-front speed on the line, started from a half-full interval.

    Each replica runs the blocking process on the 1-d lattice to the horizon
    and measures (r_T - r_0) / T, the rightmost occupied site's displacement
    per unit time.  Replicas extinct before the horizon carry no front and are
    excluded; if none survive an InsufficientDataError is raised.
    """
    if not (params.birth_rate > 0.0 and params.survival_prob > 0.0):
        raise DomainError("edge speed experiment requires lambda > 0 and p > 0")
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    line = Lattice(1)
    if init is None:
        init = half_full_interval(10)
    r0 = max(v[0] for v in init)
    cfg = SimConfig(
        t_max=t_max,
        n_max=2**62,
        event_max=10_000_000_000,
        seed=seed,
    )
    est = run_replicas(
        line, params, list(init), cfg, replicas, jobs=jobs, keep_results=True
    )
    speeds = [
        (res.rightmost_site - r0) / t_max
        for res in est.results
        if res.status is Status.SURVIVED_TO_HORIZON and res.rightmost_site is not None
    ]
    if not speeds:
        raise InsufficientDataError(
            f"all {replicas} replicas went extinct before t={t_max}; no front to measure"
        )
    mean = sum(speeds) / len(speeds)
    if len(speeds) > 1:
        var = sum((s - mean) ** 2 for s in speeds) / (len(speeds) - 1)
        se = math.sqrt(var / len(speeds))
    else:
        se = math.inf
    return SpeedEstimate(
        mean_speed=mean, std_error=se, replicas_used=len(speeds), replicas=replicas
    )
