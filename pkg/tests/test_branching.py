"""Galton-Watson analytics: fixed points, chain Monte Carlo, reach sums."""

import math

import pytest

from ccsim.branching import (
    GWModel,
    expected_reachers,
    gw_extinction_prob,
    gw_simulate,
    theorem1_verdict,
)
from ccsim.errors import DivergenceError, DomainError
from ccsim.kernel import ModelParams, OffspringDistribution, offspring_pgf


def test_extinct_when_subcritical():
    model = GWModel.from_params(2, ModelParams(1.0, 0.5))  # mean 0.9242
    assert gw_extinction_prob(model) == 1.0


def test_extinct_exactly_at_mean_one():
    model = GWModel(OffspringDistribution(m=2, probs=(0.25, 0.5, 0.25)))  # mean 1
    assert gw_extinction_prob(model) == 1.0


def test_supercritical_fixed_point():
    model = GWModel.from_params(2, ModelParams(10.0, 0.9))
    q = gw_extinction_prob(model, tol=1e-13)
    assert 0.0 < q < 1.0
    assert offspring_pgf(q, model.offspring) == pytest.approx(q, abs=1e-10)


def test_no_mass_at_zero_means_certain_survival():
    # with survival probability 1 a collapse always founds somewhere, so the
    # chain can never die: the least fixed point from 0 is 0 itself
    model = GWModel.from_params(2, ModelParams(10.0, 1.0))
    assert model.offspring.probs[0] == 0.0
    assert gw_extinction_prob(model) == 0.0


def test_concentrated_at_zero_is_certain_extinction():
    model = GWModel(OffspringDistribution(m=2, probs=(1.0, 0.0, 0.0)))
    assert gw_extinction_prob(model) == 1.0


def test_simulation_matches_fixed_point_supercritical():
    model = GWModel.from_params(2, ModelParams(10.0, 0.9))
    q = gw_extinction_prob(model)
    freq = gw_simulate(model, generations=500, replicas=8000, seed=5)
    assert freq == pytest.approx(q, abs=0.02)


def test_simulation_subcritical_all_die():
    model = GWModel.from_params(2, ModelParams(1.0, 0.5))
    freq = gw_simulate(model, generations=1000, replicas=3000, seed=7)
    assert freq >= 0.999


def test_simulation_degenerate_never_dies():
    model = GWModel(OffspringDistribution(m=1, probs=(0.0, 1.0)))
    assert gw_simulate(model, generations=200, replicas=50, seed=9) == 0.0


def test_simulation_validation():
    model = GWModel.from_params(2, ModelParams(1.0, 0.5))
    with pytest.raises(DomainError):
        gw_simulate(model, generations=0, replicas=5)
    with pytest.raises(DomainError):
        gw_extinction_prob(model, tol=-1.0)


# ---------------------------------------------------------------------------
# expected reachers
# ---------------------------------------------------------------------------


def test_expected_reachers_closed_forms():
    assert expected_reachers("lattice", 2, 0.5) == pytest.approx(3.0, abs=1e-12)
    assert expected_reachers("tree", 2, 0.25) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("d,mu_value", [(1, 0.4), (2, 0.5), (3, 0.8)])
def test_expected_reachers_lattice_matches_partial_sum(d, mu_value):
    partial = math.fsum(
        math.comb(n + d - 1, n) * mu_value**n for n in range(1, 1001)
    )
    assert expected_reachers("lattice", d, mu_value) == pytest.approx(partial, abs=1e-9)


@pytest.mark.parametrize("d,mu_value", [(2, 0.25), (3, 0.3), (4, 0.05)])
def test_expected_reachers_tree_matches_partial_sum(d, mu_value):
    terms = []
    term = (d + 1) * mu_value  # n = 1
    for _ in range(1000):
        terms.append(term)
        term *= d * mu_value
    assert expected_reachers("tree", d, mu_value) == pytest.approx(
        math.fsum(terms), abs=1e-9
    )


def test_expected_reachers_divergence():
    with pytest.raises(DivergenceError):
        expected_reachers("lattice", 1, 1.0)
    with pytest.raises(DivergenceError):
        expected_reachers("tree", 2, 0.5)
    with pytest.raises(DomainError):
        expected_reachers("ring", 2, 0.2)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def test_verdict_subcritical_line():
    v = theorem1_verdict("lattice", 1, ModelParams(1.0, 0.5))
    assert v.m == 2
    assert v.mu == pytest.approx(0.92419624, abs=1e-8)
    assert v.global_extinct is True
    assert v.local_extinct is True


def test_verdict_tree_above_thresholds_is_unknown():
    v = theorem1_verdict("tree", 2, ModelParams(1.0, 0.5))
    assert v.m == 3
    assert v.mu == pytest.approx(1.07505568, abs=1e-8)
    assert v.global_extinct is None
    assert v.local_extinct is None


def test_verdict_p0_always_extinct():
    for family, d in [("lattice", 2), ("tree", 3)]:
        v = theorem1_verdict(family, d, ModelParams(5.0, 0.0))
        assert v.mu == 0.0
        assert v.global_extinct is True
        assert v.local_extinct is True


def test_verdict_tree_local_needs_stricter_threshold():
    # mean between 1/d and 1: global certified, local not
    v = theorem1_verdict("tree", 2, ModelParams(1.0, 0.42))
    assert 0.5 < v.mu <= 1.0
    assert v.global_extinct is True
    assert v.local_extinct is None


def test_verdict_never_turns_on_with_stronger_parameters():
    # raising either rate can only lose certificates, never gain them
    for family, d in [("lattice", 1), ("tree", 2)]:
        for p in (0.2, 0.5, 0.8):
            flags = []
            for lam in (0.2, 1.0, 5.0, 25.0):
                v = theorem1_verdict(family, d, ModelParams(lam, p))
                flags.append((v.global_extinct, v.local_extinct))
            for (g1, l1), (g2, l2) in zip(flags, flags[1:]):
                assert not (g1 is None and g2 is True)
                assert not (l1 is None and l2 is True)


def test_verdict_json_shape():
    v = theorem1_verdict("lattice", 2, ModelParams(0.5, 0.3))
    d = v.to_json_dict()
    assert set(d) == {"family", "d", "m", "mu", "global_extinct", "local_extinct"}


def test_verdict_validation():
    with pytest.raises(DomainError):
        theorem1_verdict("ring", 1, ModelParams(1.0, 0.5))
    with pytest.raises(DomainError):
        theorem1_verdict("lattice", 0, ModelParams(1.0, 0.5))


def test_simulation_matches_fixed_point_no_zero_mass():
    # survival probability 1 leaves no mass at zero offspring: the chain
    # never dies and the Monte Carlo frequency agrees with the fixed point 0
    model = GWModel.from_params(2, ModelParams(10.0, 1.0))
    freq = gw_simulate(model, generations=400, replicas=300, seed=11)
    assert abs(freq - gw_extinction_prob(model)) < 0.01
