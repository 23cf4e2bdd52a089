"""Phase-diagram production: survival curves, birth-rate brackets, thresholds.

The survival probability is nondecreasing in the birth rate and in the
survival probability at collapse, so a critical birth rate separates the
extinction and survival regimes on the infinite lattices and trees.  No
closed form exists for it; this module estimates a desk-scale stand-in by
bisection of the finite-horizon survival proxy, always reporting a bracket
rather than a point, because the proxy is biased in an unquantified way
relative to the true critical value.

All grid points and bisection evaluations share one base seed: replica r of
every evaluation uses the stream keyed (seed, r), so comparisons across
birth rates are common-random-number coupled and the empirical curve is
monotone for a fixed seed, which makes bisection honest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import BracketError, DomainError
from .graphs import Lattice, Topology, Tree, Vertex
from .kernel import ModelParams, mu, solve_lambda_for_mu
from .errors import NoSolutionError
from .simulator import SimConfig, SurvivalEstimate, run_replicas

__all__ = [
    "SweepSpec",
    "CurvePoint",
    "LambdaBracket",
    "Thresholds",
    "survival_curve",
    "estimate_lambda_c",
    "theorem_thresholds",
]

LATTICE = "lattice"
TREE = "tree"


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: where, at which survival probability, over which rates."""

    topology: Topology
    p: float
    replicas: int
    cfg: SimConfig
    lambdas: Optional[tuple[float, ...]] = None
    bounds: Optional[tuple[float, float]] = None
    init: Optional[tuple[Vertex, ...]] = None
    jobs: int = 1

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise DomainError(f"p must be in [0, 1], got {self.p}")
        if self.replicas < 1:
            raise DomainError("replicas must be >= 1")
        if self.lambdas is not None:
            if len(self.lambdas) == 0:
                raise DomainError("lambda grid must be nonempty")
            if any(l < 0.0 for l in self.lambdas):
                raise DomainError("lambda grid values must be >= 0")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not (0.0 < lo < hi):
                raise DomainError(f"bounds must satisfy 0 < lo < hi, got {self.bounds}")

    def start(self) -> tuple[Vertex, ...]:
        if self.init is not None:
            return self.init
        return (self.topology.origin(),)


@dataclass(frozen=True)
class CurvePoint:
    lam: float
    p: float
    replicas: int
    survived_fraction: float
    ci_low: float
    ci_high: float


def _evaluate(spec: SweepSpec, lam: float) -> SurvivalEstimate:
    params = ModelParams(birth_rate=lam, survival_prob=spec.p)
    return run_replicas(
        spec.topology,
        params,
        list(spec.start()),
        spec.cfg,
        spec.replicas,
        jobs=spec.jobs,
    )


def survival_curve(spec: SweepSpec) -> list[CurvePoint]:
    """Survival proxy at every grid birth rate, in grid order, common seeds."""
    if spec.lambdas is None:
        raise DomainError("survival_curve needs a lambda grid in the spec")
    out = []
    for lam in spec.lambdas:
        est = _evaluate(spec, lam)
        out.append(
            CurvePoint(
                lam=lam,
                p=spec.p,
                replicas=spec.replicas,
                survived_fraction=est.survived_fraction,
                ci_low=est.ci_low,
                ci_high=est.ci_high,
            )
        )
    return out


@dataclass(frozen=True)
class LambdaBracket:
    """Final bisection bracket around the survival-proxy crossing."""

    lam_lo: float
    lam_hi: float
    survival_lo: float
    survival_hi: float
    target: float
    width_tol: float
    iterations: int
    mu_at_lo: Optional[float] = None  # mean offspring at lam_lo for regular families

    @property
    def mu_lo_leq_one(self) -> Optional[bool]:
        if self.mu_at_lo is None:
            return None
        return self.mu_at_lo <= 1.0


def _regular_degree(topology: Topology) -> Optional[int]:
    if isinstance(topology, Lattice) and topology.box is None:
        return 2 * topology.d
    if isinstance(topology, Tree):
        return topology.d + 1
    return None


def estimate_lambda_c(
    spec: SweepSpec, target: float = 0.5, width_tol: float = 0.5
) -> LambdaBracket:
    """Bisection bracket for the birth rate where the survival proxy crosses target.

    Requires the proxy to be below target at the lower bound and above it at
    the upper bound (validated first).  Every evaluation reuses the same base
    seed, so the bracket is deterministic and shrinks monotonically; the
    result is a bracket, never a point estimate.
    """
    if spec.bounds is None:
        raise DomainError("estimate_lambda_c needs bisection bounds in the spec")
    if not (0.0 < target < 1.0):
        raise DomainError(f"target must be in (0, 1), got {target}")
    if width_tol <= 0.0:
        raise DomainError("width_tol must be positive")
    lo, hi = spec.bounds
    f_lo = _evaluate(spec, lo).survived_fraction
    f_hi = _evaluate(spec, hi).survived_fraction
    if not (f_lo < target < f_hi):
        raise BracketError(
            f"survival proxy does not bracket target {target}: "
            f"f({lo}) = {f_lo}, f({hi}) = {f_hi}; widen the bounds"
        )
    iterations = 0
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        f_mid = _evaluate(spec, mid).survived_fraction
        iterations += 1
        if f_mid < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    m = _regular_degree(spec.topology)
    mu_at_lo = (
        mu(m, ModelParams(birth_rate=lo, survival_prob=spec.p)) if m is not None else None
    )
    return LambdaBracket(
        lam_lo=lo,
        lam_hi=hi,
        survival_lo=f_lo,
        survival_hi=f_hi,
        target=target,
        width_tol=width_tol,
        iterations=iterations,
        mu_at_lo=mu_at_lo,
    )


@dataclass(frozen=True)
class Thresholds:
    """Analytic extinction frontier rates, None where the target is unattainable."""

    family: str
    d: int
    p: float
    m: int
    lambda_global: Optional[float]
    lambda_local: Optional[float]
    local_target: float

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "d": self.d,
            "p": self.p,
            "lambda_global": self.lambda_global,
            "lambda_local": self.lambda_local,
        }


def theorem_thresholds(family: str, d: int, p: float, tol: float = 1e-10) -> Thresholds:
    """Birth rates below which the analytic extinction conclusions hold.

    ``lambda_global`` solves mean-offspring = 1 (extinction from any finite
    start below it); ``lambda_local`` solves the local-death target (1 on
    lattices, so it coincides with the global rate; 1/d on trees).  A target
    outside the attainable range (p, m) yields None: the mean offspring
    already exceeds the target at birth rate 0+.
    """
    if family not in (LATTICE, TREE):
        raise DomainError(f"family must be 'lattice' or 'tree', got {family!r}")
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must be in (0, 1), got {p}")
    m = 2 * d if family == LATTICE else d + 1

    def solve(target: float) -> Optional[float]:
        try:
            return solve_lambda_for_mu(m, p, target, tol=tol)
        except NoSolutionError:
            return None

    lambda_global = solve(1.0)
    if family == LATTICE:
        local_target = 1.0
        lambda_local = lambda_global
    else:
        local_target = 1.0 / d
        lambda_local = lambda_global if d == 1 else solve(local_target)
    return Thresholds(
        family=family,
        d=d,
        p=p,
        m=m,
        lambda_global=lambda_global,
        lambda_local=lambda_local,
        local_target=local_target,
    )
