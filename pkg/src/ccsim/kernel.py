"""Closed-form quantities for the colonization-and-collapse dynamics.

A colony grows as a pure-birth process with per-capita rate ``lambda`` and is
destroyed by an independent rate-1 collapse clock.  The colony size at collapse
has pmf ``P[Y=k] = (1/lambda) * B(1 + 1/lambda, k)`` with ``B`` the beta
function; its generating function ``g(s) = E[s^Y]`` drives everything else:

* ``alpha = g(1-p)``            -- chance a collapse founds nothing,
* ``mu(m) = m * (1 - g(1-p/m))`` -- mean new colonies per collapse on an
  m-regular graph when occupancy never blocks,
* the exact distribution of the number of new colonies per collapse, obtained
  from ``g`` by inclusion-exclusion over neighbor subsets.

All beta values come from the multiplicative recurrence ``B(a,1) = 1/a``,
``B(a,k+1) = B(a,k) * k/(a+k)`` -- never from gamma-function quotients, so
there is no overflow and each term is exact to relative rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    ConvergenceError,
    DomainError,
    NoSolutionError,
    BracketError,
    NumericInstabilityError,
)

__all__ = [
    "ModelParams",
    "SeriesControl",
    "OffspringDistribution",
    "yule_size_pmf",
    "attempt_gf",
    "mu",
    "mu_hypergeometric",
    "alpha",
    "offspring_pmf",
    "q_lower_bound",
    "offspring_pgf",
    "solve_lambda_for_mu",
]

DEFAULT_REL_TOL = 1e-12
DEFAULT_MAX_TERMS = 10_000_000


@dataclass(frozen=True)
class ModelParams:
    """Spatial model parameters: per-capita birth rate and survival chance.

    ``birth_rate`` is the pure-birth rate per individual (>= 0); the collapse
    rate is fixed at 1.  ``survival_prob`` is the chance each individual
    survives its colony's collapse, in [0, 1].
    """

    birth_rate: float
    survival_prob: float

    def __post_init__(self):
        if not (self.birth_rate >= 0.0) or math.isinf(self.birth_rate):
            raise DomainError(f"birth_rate must be finite and >= 0, got {self.birth_rate}")
        if not (0.0 <= self.survival_prob <= 1.0):
            raise DomainError(f"survival_prob must be in [0, 1], got {self.survival_prob}")


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the series evaluations in this module."""

    rel_tol: float = DEFAULT_REL_TOL
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        if not (self.rel_tol > 0.0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_terms < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


_DEFAULT_CTL = SeriesControl()


@dataclass(frozen=True)
class OffspringDistribution:
    """Exact pmf of the number of new colonies founded by one collapse.

    ``probs[w]`` is the chance that exactly ``w`` of the ``m`` neighbors
    receive at least one successful founding attempt when nothing blocks.
    ``probs[0]`` equals ``alpha`` and ``probs[m]`` is the all-neighbors-hit
    probability whose large-birth-rate limit is 1.
    """

    m: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"degree m must be >= 1, got {self.m}")
        if len(self.probs) != self.m + 1:
            raise DomainError(
                f"probs must have length m+1 = {self.m + 1}, got {len(self.probs)}"
            )
        if any(q < 0.0 for q in self.probs):
            raise DomainError("probs must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"probs must sum to 1 within 1e-9, got {total!r}")

    @property
    def mean(self) -> float:
        return math.fsum(w * q for w, q in enumerate(self.probs))


def yule_size_pmf(params: ModelParams, k: int) -> float:
    """P[colony has k individuals at collapse] = (1/lambda) B(1+1/lambda, k)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    lam = params.birth_rate
    if lam == 0.0:
        return 1.0 if k == 1 else 0.0
    a = 1.0 + 1.0 / lam
    b = 1.0 / a
    for j in range(1, k):
        b *= j / (a + j)
    return b / lam


def _kahan_add(total: float, comp: float, term: float) -> tuple[float, float]:
    y = term - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def attempt_gf(s: float, params: ModelParams, ctl: SeriesControl = _DEFAULT_CTL) -> float:
    """Generating function g(s) = E[s^Y] of the colony size at collapse.

    Evaluated as (1/lambda) * sum_k B(1+1/lambda, k) s^k.  The beta terms
    decrease in k, so the tail after K terms is below
    B(a, K+1) s^(K+1) / (1-s); iteration stops when that bound drops under
    ``rel_tol`` relative to the running sum.  s=1 returns the identity value 1
    directly instead of summing the (slow) boundary series.
    """
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"s must be in [0, 1], got {s}")
    lam = params.birth_rate
    if lam == 0.0:
        return s  # degenerate colony of one: g(s) = s
    if s == 1.0:
        return 1.0
    if s == 0.0:
        return 0.0
    a = 1.0 + 1.0 / lam
    b = 1.0 / a  # B(a, 1)
    s_pow = 1.0
    total = 0.0
    comp = 0.0
    inv_one_minus_s = 1.0 / (1.0 - s)
    for k in range(1, ctl.max_terms + 1):
        s_pow *= s
        total, comp = _kahan_add(total, comp, b * s_pow)
        b *= k / (a + k)  # now B(a, k+1)
        tail = b * s_pow * s * inv_one_minus_s
        if tail <= ctl.rel_tol * total:
            return total / lam
    raise ConvergenceError(
        f"attempt_gf did not converge within {ctl.max_terms} terms (s={s}, lambda={lam})",
        partial=total / lam,
    )


def _tight(ctl: SeriesControl) -> SeriesControl:
    # Internal headroom so downstream differences (e.g. the 1e-10 relative
    # cross-check between the series and hypergeometric paths) are dominated
    # by the formulas, not by truncation.
    return SeriesControl(rel_tol=min(ctl.rel_tol, 1e-14), max_terms=ctl.max_terms)


def mu(m: int, params: ModelParams, ctl: SeriesControl = _DEFAULT_CTL) -> float:
    """Mean number of new colonies per collapse on an m-regular graph."""
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    g = attempt_gf(1.0 - params.survival_prob / m, params, _tight(ctl))
    return m * (1.0 - g)


def mu_hypergeometric(m: int, params: ModelParams, ctl: SeriesControl = _DEFAULT_CTL) -> float:
    """Same mean via the Gauss hypergeometric form.

    mu(m) = m - ((m-p)/(lambda+1)) * 2F1(1, 1; 2 + 1/lambda; 1 - p/m),
    with 2F1 summed by its power series: term ratios are
    (n+1) z / (c+n) < z < 1, so the tail after a term t is below t*z/(1-z).
    Only the (1, 1; c; z) family with z in [0, 1) is supported.
    """
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    lam = params.birth_rate
    p = params.survival_prob
    if lam <= 0.0:
        raise DomainError("mu_hypergeometric requires lambda > 0")
    if p == 0.0:
        # z = 1: Gauss summation gives 2F1(1,1;c;1) = (c-1)/(c-2) = lambda+1,
        # hence mu = m - (m-0) = 0 exactly.
        return 0.0
    z = 1.0 - p / m
    c = 2.0 + 1.0 / lam
    rel_tol = min(ctl.rel_tol, 1e-14)
    term = 1.0
    total = 1.0
    comp = 0.0
    for n in range(ctl.max_terms):
        term *= (n + 1.0) * z / (c + n)
        total, comp = _kahan_add(total, comp, term)
        if term * z / (1.0 - z) <= rel_tol * total:
            return m - (m - p) / (lam + 1.0) * total
    raise ConvergenceError(
        f"2F1 series stalled within {ctl.max_terms} terms (z={z}, c={c})",
        partial=m - (m - p) / (lam + 1.0) * total,
    )


def alpha(params: ModelParams, ctl: SeriesControl = _DEFAULT_CTL) -> float:
    """Probability that a collapse founds no new colony: g(1-p)."""
    return attempt_gf(1.0 - params.survival_prob, params, ctl)


def offspring_pmf(m: int, params: ModelParams, ctl: SeriesControl = _DEFAULT_CTL) -> OffspringDistribution:
    """Exact law of the number of neighbors receiving a founding at a collapse.

    By inclusion-exclusion over which of ``w`` designated neighbors are hit:
    P[W=w] = C(m,w) * sum_{i=0..w} (-1)^i C(w,i) g(1 - (m-w+i) p/m).
    Signed terms are combined with exact compensated summation (math.fsum);
    a result below -1e-9 indicates real instability rather than rounding and
    raises.
    """
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    p = params.survival_prob
    tight = _tight(ctl)
    # g evaluated at 1 - j*p/m for j = 0..m; j = 0 is exactly 1.
    g = [1.0]
    for j in range(1, m + 1):
        arg = 1.0 - j * p / m
        g.append(attempt_gf(arg if arg > 0.0 else 0.0, params, tight))
    probs = []
    for w in range(m + 1):
        signed = [
            (-1.0 if i % 2 else 1.0) * math.comb(w, i) * g[m - w + i]
            for i in range(w + 1)
        ]
        q = math.comb(m, w) * math.fsum(signed)
        if q < -1e-9:
            raise NumericInstabilityError(
                f"offspring pmf term P[W={w}] = {q!r} below -1e-9 (m={m}, params={params})"
            )
        probs.append(max(q, 0.0))
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise NumericInstabilityError(
            f"offspring pmf sums to {total!r}, off by more than 1e-9"
        )
    dist = OffspringDistribution(m=m, probs=tuple(probs))
    mean_gap = dist.mean - mu(m, params, ctl)
    if abs(mean_gap) > 1e-9:
        raise NumericInstabilityError(
            f"offspring pmf mean disagrees with mu by {mean_gap!r}"
        )
    return dist


def q_lower_bound(m: int, params: ModelParams) -> float:
    """Lower bound 1 - (m/lambda) log(m/p) for the all-neighbors-hit probability.

    May be negative (vacuous), but always lies below ``offspring_pmf(...).probs[m]``
    and tends to 1 as lambda grows.
    """
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    lam = params.birth_rate
    p = params.survival_prob
    if p <= 0.0:
        raise DomainError("q_lower_bound requires p > 0 (log divergence at p=0)")
    if lam <= 0.0:
        raise DomainError("q_lower_bound requires lambda > 0")
    return 1.0 - (m / lam) * math.log(m / p)


def offspring_pgf(s: float, dist: OffspringDistribution) -> float:
    """Probability generating function of an offspring distribution at s."""
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"s must be in [0, 1], got {s}")
    acc = 0.0
    for q in reversed(dist.probs):
        acc = acc * s + q
    return acc


_BRACKET_LO = 2.0 ** -20
_BRACKET_HI = 2.0 ** 20
_MAX_BISECT = 300


def solve_lambda_for_mu(m: int, p: float, target: float, tol: float = 1e-10) -> float:
    """Invert lambda -> mu(m, lambda, p) by bisection.

    mu is continuous and increasing in lambda, sweeping (p, m) as lambda runs
    over (0, inf); targets outside that open interval have no solution.  The
    bracket is fixed at [2^-20, 2^20]: mu approaches m only as lambda -> inf,
    so targets near the edges legitimately fail rather than looping.
    """
    if m < 1:
        raise DomainError(f"degree m must be >= 1, got {m}")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must be in [0, 1], got {p}")
    if tol <= 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    if p == 0.0 or not (p < target < m):
        raise NoSolutionError(
            f"target {target} outside attainable range ({p}, {m}) for m={m}, p={p}"
        )

    def f(lam: float) -> float:
        return mu(m, ModelParams(birth_rate=lam, survival_prob=p))

    lo, hi = _BRACKET_LO, _BRACKET_HI
    if not (f(lo) < target < f(hi)):
        raise BracketError(
            f"mu range over lambda in [2^-20, 2^20] does not bracket target {target}"
        )
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - target) < tol:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    raise BracketError(
        f"bisection exhausted {_MAX_BISECT} iterations without |mu - target| < {tol}"
    )
