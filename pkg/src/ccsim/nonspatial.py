"""Non-spatial catastrophe models: one big colony versus many small ones.

Both models share per-individual birth rate ``lambda`` and death rate ``mu``,
plus collapse events at rate ``a`` per colony in which each member survives
independently with probability ``p``:

* single: one colony; a collapse thins it binomially in place,
* multi: every collapse survivor founds a fresh singleton colony, so the
  population is spread over an evolving set of colonies.

Each model has an explicit survival criterion and critical survival
probability (``p1`` for single, ``p2`` for multi, with ``p1 > p2`` whenever
``lambda > mu``: dispersal helps).

Simulation strategy.  Between collapse events every colony is a linear
birth-death process whose transition law from n0 individuals is classical:
each of the n0 lineages independently dies out by time t with probability
alpha(t), and a surviving lineage's size is geometric with parameter
1 - beta(t).  The simulators therefore jump from collapse to collapse with
exact transition draws instead of stepping birth/death events one at a time
(a per-event Gillespie loop is retained as ``method="event"`` for
cross-validation; populations near the default caps make it unusably slow).
Lineage death times are also sampled exactly by inverting alpha, so reported
extinction times are exact.

For the multi-colony model, a run whose live colony count reaches a
calibrated threshold is classified as survived immediately: with per-line
extinction probability q < 1 (computed from the colony offspring pgf), the
chance that C independent lines all die is at most q^C, and the threshold is
chosen so q^C < 1e-15.  Near criticality (q ~ 1) the threshold exceeds the
colony cap and the shortcut never fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from heapq import heappush, heappop
from typing import Optional

import numpy as np

from .errors import DomainError
from .simulator import (
    SimConfig,
    SimResult,
    Status,
    Stream,
    SurvivalEstimate,
    wilson_interval,
)

__all__ = [
    "CatastropheParams",
    "critical_p",
    "survival_condition",
    "simulate_single",
    "simulate_multi",
    "run_replicas",
    "colony_line_extinction_prob",
]

SINGLE = "single"
MULTI = "multi"
_MODELS = (SINGLE, MULTI)

_SHORTCUT_LOG_RISK = math.log(1e-15)  # per-replica misclassification budget
_SMALL_BINOMIAL = 16


@dataclass(frozen=True)
class CatastropheParams:
    """Rates for the catastrophe models: births, deaths, collapses, survival."""

    birth_rate: float
    death_rate: float
    collapse_rate: float
    survival_prob: float

    def __post_init__(self):
        if not (self.birth_rate >= 0.0):
            raise DomainError(f"birth_rate must be >= 0, got {self.birth_rate}")
        if not (self.death_rate >= 0.0):
            raise DomainError(f"death_rate must be >= 0, got {self.death_rate}")
        if not (self.collapse_rate > 0.0):
            raise DomainError(f"collapse_rate must be > 0, got {self.collapse_rate}")
        if not (0.0 <= self.survival_prob <= 1.0):
            raise DomainError(f"survival_prob must be in [0, 1], got {self.survival_prob}")


def _check_model(model: str) -> None:
    if model not in _MODELS:
        raise DomainError(f"model must be one of {_MODELS}, got {model!r}")


def critical_p(model: str, params: CatastropheParams) -> Optional[float]:
    """Critical survival probability, or None when no p in (0,1] can work.

    single: p1 = exp(-(lambda-mu)/a) for lambda > mu.
    multi:  p2 = 1 - (lambda-mu)/a for mu < lambda < mu+a; 0 when
            lambda >= mu+a (any positive p survives).  lambda <= mu admits no
            survival at any p, hence None.
    """
    _check_model(model)
    lam, mu_d, a = params.birth_rate, params.death_rate, params.collapse_rate
    if lam <= mu_d:
        return None
    if model == SINGLE:
        return min(1.0, max(0.0, math.exp(-(lam - mu_d) / a)))
    if lam >= mu_d + a:
        return 0.0
    return min(1.0, max(0.0, 1.0 - (lam - mu_d) / a))


def survival_condition(model: str, params: CatastropheParams) -> bool:
    """Whether survival has positive probability at these parameters.

    single: lambda > mu and mu - a log p < lambda.
    multi:  lambda > mu and p E[exp((lambda-mu) T)] > 1 for T ~ Exp(a),
            i.e. p a / (a - lambda + mu) > 1 when lambda - mu < a and
            trivially true when lambda >= mu + a.
    p = 0 never survives (the log diverges; every collapse is total).
    """
    _check_model(model)
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    if p <= 0.0 or lam <= mu_d:
        return False
    if model == SINGLE:
        return mu_d - a * math.log(p) < lam
    if lam >= mu_d + a:
        return True
    return p * a / (a - lam + mu_d) > 1.0


# ---------------------------------------------------------------------------
# linear birth-death transition law
# ---------------------------------------------------------------------------


def bd_coefficients(lam: float, mu_d: float, t: float) -> tuple[float, float]:
    """(alpha, beta) of the linear birth-death transition over time t.

    From one individual: extinct by t with probability alpha; alive sizes are
    geometric on {1,2,...} with parameter 1-beta.  Stable forms via expm1:
    alpha = mu*em1 / (lam*em1 + r), beta = lam*em1 / (lam*em1 + r) with
    r = lam - mu and em1 = expm1(r t); the r = 0 limit is lam*t/(1+lam*t).
    """
    if t < 0.0:
        raise DomainError("t must be >= 0")
    if t == 0.0 or (lam == 0.0 and mu_d == 0.0):
        return 0.0, 0.0
    r = lam - mu_d
    if r == 0.0:
        x = lam * t
        v = x / (1.0 + x)
        return v, v
    if r * t > 690.0:  # e^(rt) overflows; use the t -> inf limits
        return mu_d / lam, 1.0 - 1e-16
    em1 = math.expm1(r * t)
    denom = lam * em1 + r
    alpha = mu_d * em1 / denom
    beta = lam * em1 / denom
    if beta >= 1.0:
        beta = 1.0 - 1e-16
    return alpha, beta


def _invert_alpha(lam: float, mu_d: float, target: float) -> float:
    """Time t with alpha(t) = target; used to sample exact lineage death times."""
    if target <= 0.0:
        return 0.0
    r = lam - mu_d
    if lam == 0.0:
        return -math.log1p(-target) / mu_d
    if r == 0.0:
        return target / (lam * (1.0 - target))
    e_rt = mu_d * (target - 1.0) / (target * lam - mu_d)
    return math.log(e_rt) / r


def _sample_absorption_max(
    lam: float, mu_d: float, tau: float, n0: int, alpha_tau: float, u: float
) -> float:
    """Death time of the whole group, given all n0 lineages died within tau.

    The maximum of n0 conditioned lineage death times has cdf
    (alpha(t)/alpha(tau))^n0, inverted in closed form.
    """
    target = alpha_tau * u ** (1.0 / n0)
    t = _invert_alpha(lam, mu_d, target)
    return min(t, tau)


def _sample_bd(n0: int, alpha: float, beta: float, gen) -> int:
    """Exact draw of a linear birth-death population after an epoch."""
    survivors = gen.binomial(n0, 1.0 - alpha) if alpha > 0.0 else n0
    if survivors == 0:
        return 0
    if beta <= 0.0:
        return int(survivors)
    return int(survivors + gen.negative_binomial(survivors, 1.0 - beta))


def _binomial(stream: Stream, n: int, p: float) -> int:
    """Binomial draw; small n by explicit Bernoullis from the uniform buffer."""
    if p >= 1.0:
        return n
    if p <= 0.0 or n == 0:
        return 0
    if n <= _SMALL_BINOMIAL:
        rand = stream.random
        return sum(1 for _ in range(n) if rand() < p)
    return int(stream.generator.binomial(n, p))


# ---------------------------------------------------------------------------
# single-colony model
# ---------------------------------------------------------------------------


def simulate_single(
    params: CatastropheParams,
    cfg: SimConfig,
    init_size: int = 1,
    method: str = "exact",
) -> SimResult:
    """One replica of the single-colony model.

    The population follows a linear birth-death process punctuated by
    catastrophes at rate ``a`` that replace n by Binomial(n, p); absorbed at 0.
    Survival proxy as in the spatial simulator: alive at the horizon, or
    population reaching ``cfg.n_max``.  ``method="exact"`` jumps
    catastrophe-to-catastrophe with exact transition draws (population is
    observed at catastrophe and horizon instants); ``method="event"`` is the
    literal one-transition-per-step Gillespie loop.
    """
    if init_size < 1:
        raise DomainError("init_size must be >= 1")
    if method == "event":
        return _single_event_loop(params, cfg, init_size)
    if method != "exact":
        raise DomainError(f"method must be 'exact' or 'event', got {method!r}")
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    stream = Stream(cfg.seed, cfg.replica_index)
    gen = stream.generator
    rexp = stream.exponential

    t = 0.0
    n = init_size
    peak = n
    catastrophes = 0
    status = None
    end_time = None

    while True:
        if n == 0:
            status = Status.EXTINCT
            end_time = t if end_time is None else end_time
            break
        if n >= cfg.n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if catastrophes >= cfg.event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break
        dt = rexp() / a
        horizon = t + dt >= cfg.t_max
        tau = (cfg.t_max - t) if horizon else dt
        alpha_t, beta_t = bd_coefficients(lam, mu_d, tau)
        n_next = _sample_bd(n, alpha_t, beta_t, gen)
        if n_next == 0:
            status = Status.EXTINCT
            end_time = t + _sample_absorption_max(lam, mu_d, tau, n, alpha_t, stream.random())
            break
        if n_next > peak:
            peak = n_next
        t += tau
        if horizon:
            status = (
                Status.REACHED_COLONY_CAP if n_next >= cfg.n_max else Status.SURVIVED_TO_HORIZON
            )
            break
        if n_next >= cfg.n_max:
            status = Status.REACHED_COLONY_CAP
            break
        catastrophes += 1
        n = _binomial(stream, n_next, p)

    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=catastrophes,
        max_colonies=peak,
        origin_colonizations=0,
        last_origin_time=None,
        rightmost_site=None,
        final_colonies=n,
    )


def _single_event_loop(params: CatastropheParams, cfg: SimConfig, init_size: int) -> SimResult:
    """Reference Gillespie loop: one birth/death/catastrophe per step."""
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    stream = Stream(cfg.seed, cfg.replica_index)
    rand = stream.random
    rexp = stream.exponential
    t = 0.0
    n = init_size
    peak = n
    catastrophes = 0
    events = 0
    status = None
    end_time = None
    while True:
        if n == 0:
            status = Status.EXTINCT
            end_time = t
            break
        if n >= cfg.n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if events >= cfg.event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break
        total = n * (lam + mu_d) + a
        t_next = t + rexp() / total
        if t_next >= cfg.t_max:
            status = Status.SURVIVED_TO_HORIZON
            break
        t = t_next
        events += 1
        u = rand() * total
        if u < n * lam:
            n += 1
            if n > peak:
                peak = n
        elif u < n * (lam + mu_d):
            n -= 1
        else:
            catastrophes += 1
            n = _binomial(stream, n, p)
    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=catastrophes,
        max_colonies=peak,
        origin_colonizations=0,
        last_origin_time=None,
        rightmost_site=None,
        final_colonies=n,
    )


# ---------------------------------------------------------------------------
# multi-colony model
# ---------------------------------------------------------------------------


def colony_line_extinction_prob(params: CatastropheParams, tol: float = 1e-10) -> float:
    """Extinction probability of the descendant line of one fresh colony.

    A colony founded by one individual collapses after T ~ Exp(a); its size
    then is the birth-death transition from 1 (zero when the lineage already
    died), and each member independently founds a child colony with
    probability p.  The offspring pgf is

        f(s) = E[ h_T(1 - p + p s) ],   h_t(z) = alpha + (1-alpha)(1-beta) z / (1 - beta z),

    evaluated by Gauss-Legendre quadrature after substituting w = e^(-aT);
    the line extinction probability is the least fixed point of f.
    """
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    # mean offspring p*a/(a-r) (infinite when r >= a): subcritical lines die
    r = lam - mu_d
    if r < a and p * a / (a - r) <= 1.0:
        return 1.0
    nodes, weights = np.polynomial.legendre.leggauss(80)
    w = 0.5 * (nodes + 1.0)  # map to (0, 1)
    wt = 0.5 * weights
    taus = -np.log(w) / a
    ab = [bd_coefficients(lam, mu_d, float(t)) for t in taus]
    al = np.array([x[0] for x in ab])
    be = np.array([x[1] for x in ab])

    def f(s: float) -> float:
        z = 1.0 - p + p * s
        h = al + (1.0 - al) * (1.0 - be) * z / (1.0 - be * z)
        return float(wt @ h)

    s = 0.0
    for _ in range(200_000):
        s_next = f(s)
        if abs(s_next - s) < tol:
            return s_next
        s = s_next
    return s


@lru_cache(maxsize=64)
def _shortcut_threshold(params: CatastropheParams, n_max: int) -> int:
    """Live-colony count at which survival is certain to within 1e-15."""
    q = colony_line_extinction_prob(params)
    if q >= 1.0 - 1e-9:
        return n_max  # (near-)critical or subcritical: no early classification
    c = int(math.ceil(_SHORTCUT_LOG_RISK / math.log(q))) if q > 0.0 else 1
    return min(n_max, max(64, c))


_ATTRITION = 0
_COLLAPSE = 1


def simulate_multi(
    params: CatastropheParams,
    cfg: SimConfig,
    init_sizes: tuple[int, ...] = (1,),
    method: str = "exact",
) -> SimResult:
    """One replica of the multi-colony model.

    Colonies are independent linear birth-death populations; each collapses at
    rate ``a``, and every collapse survivor founds a new singleton colony.
    ``cfg.n_max`` caps the number of live colonies (each holds at least one
    individual, so the population cap is hit no later).  The exact method
    processes one colony-end event per step from a priority queue, with
    lineage attrition times sampled in closed form; a calibrated live-colony
    threshold classifies clearly-supercritical runs as survived early (see
    module docstring).  ``method="event"`` is the literal per-transition
    Gillespie loop over all individuals.
    """
    if not init_sizes or any(s < 1 for s in init_sizes):
        raise DomainError("init_sizes must be nonempty with every size >= 1")
    if method == "event":
        return _multi_event_loop(params, cfg, init_sizes)
    if method != "exact":
        raise DomainError(f"method must be 'exact' or 'event', got {method!r}")
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    sure_survival = _shortcut_threshold(params, cfg.n_max)
    stream = Stream(cfg.seed, cfg.replica_index)
    gen = stream.generator
    rand = stream.random
    rexp = stream.exponential

    # heap entries: (end_time, seq, kind, lifetime, lineages_alive_at_collapse)
    heap: list[tuple[float, int, int, float, int]] = []
    seq = 0

    def push_colony(born: float, size: int) -> None:
        # a size-n colony is n independent lineages sharing one collapse clock
        nonlocal seq
        life = rexp() / a
        alpha_t, _ = bd_coefficients(lam, mu_d, life)
        dead = 0
        if alpha_t > 0.0:
            dead = _binomial(stream, size, alpha_t)
        if dead == size:
            u = rand()
            while u <= 0.0:
                u = rand()
            t_dead = _sample_absorption_max(lam, mu_d, life, size, alpha_t, u)
            heappush(heap, (born + t_dead, seq, _ATTRITION, 0.0, 0))
        else:
            heappush(heap, (born + life, seq, _COLLAPSE, life, size - dead))
        seq += 1

    for s0 in init_sizes:
        push_colony(0.0, s0)
    live = len(init_sizes)
    peak = live
    collapses = 0
    events = 0
    status = None
    end_time = None

    while heap:
        t, _, kind, life, alive = heappop(heap)
        if t > cfg.t_max:
            status = Status.SURVIVED_TO_HORIZON
            break
        events += 1
        if events > cfg.event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break
        live -= 1
        if kind == _COLLAPSE:
            collapses += 1
            _, beta_t = bd_coefficients(lam, mu_d, life)
            # size at collapse: each alive lineage is geometric(1 - beta)
            if beta_t > 0.0:
                if alive == 1:
                    u = rand()
                    while u <= 0.0:
                        u = rand()
                    size = 1 + int(math.log(u) / math.log(beta_t))
                else:
                    size = alive + int(gen.negative_binomial(alive, 1.0 - beta_t))
            else:
                size = alive
            children = _binomial(stream, size, p)
            for _ in range(children):
                push_colony(t, 1)
            live += children
            if live > peak:
                peak = live
        if live == 0:
            status = Status.EXTINCT
            end_time = t
            break
        if live >= cfg.n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if live >= sure_survival:
            # q^live < 1e-15: the run reaches the cap (or horizon) almost surely
            status = Status.REACHED_COLONY_CAP
            break

    if status is None:
        status = Status.EXTINCT
        end_time = 0.0

    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=collapses,
        max_colonies=peak,
        origin_colonizations=0,
        last_origin_time=None,
        rightmost_site=None,
        final_colonies=live,
    )


def _multi_event_loop(
    params: CatastropheParams, cfg: SimConfig, init_sizes: tuple[int, ...]
) -> SimResult:
    """Reference Gillespie loop over individual births/deaths and collapses."""
    lam, mu_d, a, p = (
        params.birth_rate,
        params.death_rate,
        params.collapse_rate,
        params.survival_prob,
    )
    stream = Stream(cfg.seed, cfg.replica_index)
    rand = stream.random
    rexp = stream.exponential
    sizes = list(init_sizes)
    total = sum(sizes)
    t = 0.0
    peak = len(sizes)
    collapses = 0
    events = 0
    status = None
    end_time = None
    while True:
        k = len(sizes)
        if k == 0:
            status = Status.EXTINCT
            end_time = t
            break
        if k >= cfg.n_max:
            status = Status.REACHED_COLONY_CAP
            break
        if events >= cfg.event_max:
            status = Status.EVENT_CAP_EXCEEDED
            break
        rate = total * (lam + mu_d) + k * a
        t_next = t + rexp() / rate
        if t_next >= cfg.t_max:
            status = Status.SURVIVED_TO_HORIZON
            break
        t = t_next
        events += 1
        u = rand() * rate
        if u < total * (lam + mu_d):
            # pick an individual, weighted by colony size
            target = u / (lam + mu_d)
            acc = 0.0
            idx = 0
            for idx, s in enumerate(sizes):
                acc += s
                if target < acc:
                    break
            if rand() < lam / (lam + mu_d):
                sizes[idx] += 1
                total += 1
            else:
                sizes[idx] -= 1
                total -= 1
                if sizes[idx] == 0:
                    sizes.pop(idx)
        else:
            collapses += 1
            idx = int(rand() * len(sizes))
            n = sizes.pop(idx)
            total -= n
            children = _binomial(stream, n, p)
            sizes.extend([1] * children)
            total += children
            if len(sizes) > peak:
                peak = len(sizes)
    return SimResult(
        status=status,
        extinction_time=end_time,
        collapses=collapses,
        max_colonies=peak,
        origin_colonizations=0,
        last_origin_time=None,
        rightmost_site=None,
        final_colonies=len(sizes),
    )


def _nonspatial_block(args) -> list[SimResult]:
    model, params, cfg, indices, method = args
    run = simulate_single if model == SINGLE else simulate_multi
    return [run(params, replace(cfg, replica_index=r), method=method) for r in indices]


def run_replicas(
    model: str,
    params: CatastropheParams,
    cfg: SimConfig,
    replicas: int,
    *,
    method: str = "exact",
    jobs: int = 1,
    keep_results: bool = False,
) -> SurvivalEstimate:
    """Aggregate survival over independent replicas of either model."""
    _check_model(model)
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    indices = list(range(replicas))
    if jobs > 1 and replicas > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [indices[i::jobs] for i in range(jobs) if indices[i::jobs]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            blocks = list(
                pool.map(_nonspatial_block, [(model, params, cfg, c, method) for c in chunks])
            )
        by_index: dict[int, SimResult] = {}
        for chunk, block in zip(chunks, blocks):
            by_index.update(zip(chunk, block))
        results = [by_index[r] for r in indices]
    else:
        results = _nonspatial_block((model, params, cfg, indices, method))
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
