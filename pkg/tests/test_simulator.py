"""Simulator laws against the exact kernel quantities, plus determinism."""

import math
from collections import Counter

import pytest

from ccsim.errors import DomainError, InsufficientDataError
from ccsim.graphs import Lattice, Tree, complete_graph
from ccsim.kernel import ModelParams, attempt_gf, offspring_pmf, yule_size_pmf
from ccsim.simulator import (
    SimConfig,
    Status,
    Stream,
    edge_speed_experiment,
    half_full_interval,
    run_cc,
    run_replicas,
    run_xi,
    sample_collapse_size,
    sample_hit_pattern,
    wilson_interval,
)

Z1 = Lattice(1)


# ---------------------------------------------------------------------------
# collapse-size sampling
# ---------------------------------------------------------------------------


def test_collapse_size_frozen_cases():
    assert sample_collapse_size(0.0, 3.0, 0.7) == 1
    assert sample_collapse_size(1.0, math.log(2.0), 0.5) == 2
    assert sample_collapse_size(100.0, 10.0, 0.5) == math.inf


def test_collapse_size_monotone_in_rate():
    sizes = [sample_collapse_size(lam, 2.0, 0.123) for lam in (0.1, 1.0, 5.0, 50.0)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_collapse_size_matches_yule_pmf():
    params = ModelParams(1.0, 0.5)
    stream = Stream(21, 0)
    n = 100_000
    ones = 0
    for _ in range(n):
        tau = stream.exponential()
        u = stream.random()
        while u <= 0.0:
            u = stream.random()
        if sample_collapse_size(1.0, tau, u) == 1:
            ones += 1
    assert ones / n == pytest.approx(yule_size_pmf(params, 1), abs=0.01)


def test_collapse_size_rejects_bad_inputs():
    with pytest.raises(DomainError):
        sample_collapse_size(1.0, 0.0, 0.5)
    with pytest.raises(DomainError):
        sample_collapse_size(1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# hit patterns
# ---------------------------------------------------------------------------


def test_hit_pattern_single_survivor_is_one_hot():
    stream = Stream(3, 0)
    seen = Counter()
    for _ in range(40_000):
        bits = sample_hit_pattern(2, 1, 1.0, stream)
        assert sum(bits) == 1
        seen[tuple(bits)] += 1
    assert seen[(True, False)] / 40_000 == pytest.approx(0.5, abs=0.01)


def test_hit_pattern_one_individual_half_survival():
    stream = Stream(5, 0)
    seen = Counter()
    n = 60_000
    for _ in range(n):
        seen[tuple(sample_hit_pattern(2, 1, 0.5, stream))] += 1
    assert seen[(False, False)] / n == pytest.approx(0.5, abs=0.01)
    assert seen[(True, False)] / n == pytest.approx(0.25, abs=0.01)
    assert seen[(False, True)] / n == pytest.approx(0.25, abs=0.01)


def test_hit_pattern_exact_joint_law_two_survivors():
    # two surviving individuals over two slots: (1,0) 1/4, (0,1) 1/4, (1,1) 1/2
    stream = Stream(7, 0)
    seen = Counter()
    n = 60_000
    for _ in range(n):
        seen[tuple(sample_hit_pattern(2, 2, 1.0, stream))] += 1
    assert seen[(True, True)] / n == pytest.approx(0.5, abs=0.01)
    assert seen[(True, False)] / n == pytest.approx(0.25, abs=0.01)
    assert seen[(False, True)] / n == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("m,size,p", [(3, 4, 0.7), (4, 2, 0.3), (2, 7, 0.9)])
def test_hit_pattern_marginal_rate(m, size, p):
    stream = Stream(11, 0)
    n = 30_000
    hits = 0
    for _ in range(n):
        hits += sum(sample_hit_pattern(m, size, p, stream))
    marginal = 1.0 - (1.0 - p / m) ** size
    assert hits / (n * m) == pytest.approx(marginal, abs=0.01)


def test_hit_pattern_huge_size_all_ones():
    stream = Stream(13, 0)
    assert sample_hit_pattern(3, math.inf, 0.4, stream) == [True] * 3
    assert sample_hit_pattern(3, 10**9, 0.4, stream) == [True] * 3


def test_hit_pattern_p_zero_all_misses():
    stream = Stream(17, 0)
    assert sample_hit_pattern(4, 50, 0.0, stream) == [False] * 4


def test_hit_pattern_validation():
    stream = Stream(19, 0)
    with pytest.raises(DomainError):
        sample_hit_pattern(0, 1, 0.5, stream)
    with pytest.raises(DomainError):
        sample_hit_pattern(2, 0, 0.5, stream)
    with pytest.raises(DomainError):
        sample_hit_pattern(2, 1, 1.5, stream)


# ---------------------------------------------------------------------------
# run_cc
# ---------------------------------------------------------------------------


def test_cc_zero_rate_full_survival_is_random_walk():
    # lambda=0, p=1: exactly one colony at all times, moving like a walk
    res = run_cc(Lattice(3), ModelParams(0.0, 1.0), [(0, 0, 0)], SimConfig(t_max=50.0, seed=2))
    assert res.status is Status.SURVIVED_TO_HORIZON
    assert res.max_colonies == 1
    assert res.final_colonies == 1
    assert res.collapses > 10  # rate-1 collapses over 50 time units


def test_cc_p_zero_dies_after_initial_collapses():
    init = [(0,), (5,), (9,)]
    res = run_cc(Z1, ModelParams(2.0, 0.0), init, SimConfig(t_max=1e6, seed=3))
    assert res.status is Status.EXTINCT
    assert res.collapses == len(init)
    assert res.final_colonies == 0
    assert res.extinction_time is not None and res.extinction_time > 0


def test_cc_isolated_boxed_site_dies_in_one_collapse():
    cell = Lattice(1, box=(1,))
    res = run_cc(cell, ModelParams(50.0, 1.0), [(0,)], SimConfig(t_max=1e6, seed=4))
    assert res.status is Status.EXTINCT
    assert res.collapses == 1


def test_cc_determinism_and_replica_independence():
    cfg = SimConfig(t_max=40.0, seed=77, replica_index=0)
    params = ModelParams(1.0, 0.6)
    a = run_cc(Z1, params, [(0,)], cfg)
    b = run_cc(Z1, params, [(0,)], cfg)
    assert a == b
    c = run_cc(Z1, params, [(0,)], SimConfig(t_max=40.0, seed=77, replica_index=1))
    assert c != a


def test_cc_subcritical_k5_goes_extinct():
    # mean offspring mu(4) ~ 0.63 at these rates: dies fast on any graph
    k5 = complete_graph(5)
    for r in range(20):
        res = run_cc(k5, ModelParams(1.0, 0.2), [0], SimConfig(t_max=1e6, seed=5, replica_index=r))
        assert res.status is Status.EXTINCT


def test_cc_event_cap_status():
    res = run_cc(Z1, ModelParams(8.0, 0.9), [(0,)], SimConfig(t_max=1e9, n_max=10**6, event_max=50, seed=6))
    assert res.status in (Status.EVENT_CAP_EXCEEDED, Status.EXTINCT)


def test_cc_colony_cap_status():
    res = run_cc(Z1, ModelParams(50.0, 0.9), [(0,)], SimConfig(t_max=1e9, n_max=30, seed=8))
    assert res.status in (Status.REACHED_COLONY_CAP, Status.EXTINCT)
    if res.status is Status.REACHED_COLONY_CAP:
        assert res.max_colonies >= 30


def test_cc_tracks_origin_recolonizations():
    res = run_cc(Z1, ModelParams(5.0, 0.8), [(0,)], SimConfig(t_max=60.0, n_max=500, seed=9))
    if res.origin_colonizations > 0:
        assert res.last_origin_time is not None
        assert res.last_origin_time <= 60.0


def test_cc_init_validation():
    with pytest.raises(DomainError):
        run_cc(Z1, ModelParams(1.0, 0.5), [], SimConfig(t_max=1.0))
    with pytest.raises(DomainError):
        run_cc(Z1, ModelParams(1.0, 0.5), [(0,), (0,)], SimConfig(t_max=1.0))
    with pytest.raises(DomainError):
        run_cc(Z1, ModelParams(1.0, 0.5), [(0, 0)], SimConfig(t_max=1.0))


def test_cc_per_neighbor_hit_rate_matches_kernel():
    params = ModelParams(1.0, 0.5)
    hits = queries = 0
    r = 0
    while queries < 60_000:
        res = run_cc(Z1, params, [(0,)], SimConfig(t_max=1e6, seed=23, replica_index=r))
        hits += res.neighbor_hits
        queries += res.neighbor_queries
        r += 1
    rate = hits / queries
    expect = 1.0 - attempt_gf(0.75, params)
    se = math.sqrt(expect * (1 - expect) / queries)
    assert abs(rate - expect) < 3 * se + 1e-9


# ---------------------------------------------------------------------------
# run_xi
# ---------------------------------------------------------------------------


def test_xi_p0_l0_dies_after_exactly_init_collapses():
    init = [(0,), (2,), (4,), (6,)]
    res = run_xi(Z1, ModelParams(0.0, 0.0), init, SimConfig(t_max=1e6, seed=31))
    assert res.status is Status.EXTINCT
    assert res.collapses == len(init)
    assert res.offspring_counts == {0: len(init)}


def test_xi_offspring_matches_exact_pmf():
    params = ModelParams(1.0, 0.5)
    exact = offspring_pmf(2, params)
    counts = Counter()
    total = 0
    r = 0
    while total < 30_000:
        res = run_xi(Z1, params, [(0,)], SimConfig(t_max=1e9, n_max=10**9, event_max=10**9, seed=37, replica_index=r))
        counts.update(res.offspring_counts)
        total += res.collapses
        r += 1
    tv = 0.5 * sum(abs(counts.get(w, 0) / total - exact.probs[w]) for w in range(3))
    assert tv < 0.02


def test_xi_dominates_cc_in_mean_final_colonies():
    # non-blocking process holds at least as many colonies, statistically
    params = ModelParams(1.0, 0.5)
    n = 1000
    cc_f, xi_f = [], []
    for r in range(n):
        cfg = SimConfig(t_max=5.0, n_max=10**6, seed=41, replica_index=r)
        cc_f.append(run_cc(Z1, params, [(0,)], cfg).final_colonies)
        xi_f.append(run_xi(Z1, params, [(0,)], cfg).final_colonies)
    mean_cc = sum(cc_f) / n
    mean_xi = sum(xi_f) / n
    var_cc = sum((x - mean_cc) ** 2 for x in cc_f) / (n - 1)
    var_xi = sum((x - mean_xi) ** 2 for x in xi_f) / (n - 1)
    pooled_se = math.sqrt(var_cc / n + var_xi / n)
    assert mean_xi >= mean_cc - 3 * pooled_se


def test_xi_explodes_to_cap_when_supercritical():
    res = run_xi(Tree(2), ModelParams(8.0, 0.9), [()], SimConfig(t_max=1e9, n_max=200, seed=43))
    assert res.status is Status.REACHED_COLONY_CAP
    assert res.max_colonies >= 200


# ---------------------------------------------------------------------------
# replica aggregation
# ---------------------------------------------------------------------------


def test_wilson_interval_basics():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0
    lo95, hi95 = wilson_interval(30, 40)
    assert 0.0 < lo95 < 0.75 < hi95 < 1.0


def test_replicas_deterministic_and_bounded():
    params = ModelParams(1.0, 0.6)
    cfg = SimConfig(t_max=30.0, seed=47)
    a = run_replicas(Z1, params, [(0,)], cfg, 60, keep_results=True)
    b = run_replicas(Z1, params, [(0,)], cfg, 60, keep_results=True)
    assert a == b
    assert a.ci_low <= a.survived_fraction <= a.ci_high
    assert a.replicas == 60 and len(a.results) == 60


def test_replicas_jobs_do_not_change_results():
    params = ModelParams(1.0, 0.6)
    cfg = SimConfig(t_max=15.0, seed=53)
    serial = run_replicas(Z1, params, [(0,)], cfg, 12, jobs=1, keep_results=True)
    parallel = run_replicas(Z1, params, [(0,)], cfg, 12, jobs=3, keep_results=True)
    assert serial == parallel


def test_replicas_monotone_in_rate_with_common_seeds():
    cfg = SimConfig(t_max=50.0, n_max=300, seed=59)
    fracs = [
        run_replicas(Z1, ModelParams(lam, 0.9), [(0,)], cfg, 80).survived_fraction
        for lam in (0.3, 1.2, 30.0)
    ]
    assert all(a <= b for a, b in zip(fracs, fracs[1:]))


def test_replicas_p0_never_survive():
    est = run_replicas(Z1, ModelParams(4.0, 0.0), [(0,)], SimConfig(t_max=50.0, seed=61), 40)
    assert est.survived_fraction == 0.0


def test_replicas_validation():
    with pytest.raises(DomainError):
        run_replicas(Z1, ModelParams(1.0, 0.5), [(0,)], SimConfig(t_max=1.0), 0)
    with pytest.raises(DomainError):
        run_replicas(Z1, ModelParams(1.0, 0.5), [(0,)], SimConfig(t_max=1.0), 5, process="bogus")


# ---------------------------------------------------------------------------
# edge speed
# ---------------------------------------------------------------------------


def test_half_full_interval_layout():
    sites = half_full_interval(10)
    assert sites[0] == (-10,) and sites[-1] == (10,)
    assert len(sites) == 11
    assert all(b[0] - a[0] == 2 for a, b in zip(sites, sites[1:]))


def test_edge_speed_zero_rate_walk_is_slow():
    # single colony at the origin: symmetric walk, displacement per time -> 0
    est = edge_speed_experiment(
        ModelParams(1e-9, 1.0), t_max=150.0, replicas=60, seed=67, init=[(0,)]
    )
    assert abs(est.mean_speed) < 0.15
    assert est.replicas_used == 60


def test_edge_speed_monotone_in_rate():
    speeds = [
        edge_speed_experiment(ModelParams(lam, 0.9), t_max=40.0, replicas=40, seed=71).mean_speed
        for lam in (1.0, 10.0, 100.0)
    ]
    assert all(a <= b for a, b in zip(speeds, speeds[1:]))
    assert speeds[-1] > 0.8


def test_edge_speed_insufficient_data():
    with pytest.raises(InsufficientDataError):
        edge_speed_experiment(ModelParams(0.05, 0.05), t_max=200.0, replicas=5, seed=73)
    with pytest.raises(DomainError):
        edge_speed_experiment(ModelParams(0.0, 0.5), t_max=10.0, replicas=5)


def test_colony_invariant():
    from ccsim.simulator import Colony

    c = Colony(vertex=(0,), founded_at=1.0, collapse_at=2.5)
    assert c.collapse_at > c.founded_at
    with pytest.raises(DomainError):
        Colony(vertex=(0,), founded_at=2.0, collapse_at=2.0)
