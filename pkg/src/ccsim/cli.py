"""Command-line interface: one subcommand per toolkit operation.

Every run resolves its configuration from flags layered over an optional JSON
config file (flags win), echoes the fully-resolved configuration -- including
the seed -- as a JSON header so any output can be reproduced byte-for-byte,
and writes CSV or JSON to a path or stdout.

Exit codes: 0 success, 1 usage/config error, 2 numeric non-convergence,
3 a simulation produced too little data for the requested statistic,
4 I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import branching, kernel, nonspatial, sweep
from .errors import (
    BracketError,
    CCSimError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    EdgeListFormatError,
    GraphValidationError,
    InsufficientDataError,
    NoSolutionError,
    NumericInstabilityError,
)
from .graphs import Lattice, Topology, Tree, parse_edge_list
from .kernel import ModelParams, SeriesControl
from .simulator import (
    DEFAULT_SEED,
    SimConfig,
    Status,
    edge_speed_experiment,
    run_replicas,
)

__all__ = ["main", "run_command", "RunConfig"]

COMMANDS = (
    "mu",
    "pmf",
    "thresholds",
    "verdict",
    "simulate",
    "xi",
    "speed",
    "gw",
    "nonspatial",
    "sweep",
    "bisect",
    "report",
)


class UsageError(CCSimError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit code 1
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """A fully-resolved invocation: the command plus every effective value."""

    command: str
    values: dict

    def to_json_dict(self) -> dict:
        return {"command": self.command, **self.values}


def _fmt(x) -> str:
    """CSV cell formatting: '.' decimal separator, 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, Status):
        return x.value
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _csv_document(config: RunConfig, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(config.to_json_dict()) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(cell) for cell in row) + "\n")
    return buf.getvalue()


def _json_document(config: RunConfig, result) -> str:
    return json.dumps({"config": config.to_json_dict(), "result": result}, indent=2) + "\n"


def _parse_graph(spec: str, box: Optional[int]) -> tuple[Topology, str]:
    if spec.startswith("file:"):
        if box is not None:
            raise UsageError("--box applies only to lattice graphs")
        path = spec[len("file:"):]
        with open(path, "rb") as fh:
            return parse_edge_list(fh), spec
    if spec.startswith("tree:"):
        if box is not None:
            raise UsageError("--box applies only to lattice graphs")
        d = _int_or_usage(spec[len("tree:"):], "tree dimension")
        return Tree(d), spec
    if spec.startswith("z:"):
        d = _int_or_usage(spec[len("z:"):], "lattice dimension")
    elif spec.startswith("z") and spec[1:].isdigit():
        d = int(spec[1:])
    else:
        raise UsageError(
            f"unknown graph spec {spec!r} (use z1/z2/..., z:D, tree:D, or file:PATH)"
        )
    return Lattice(d, box=None if box is None else (box,) * d), spec


def _int_or_usage(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"invalid {what}: {text!r}") from None


def _graph_dimension(topology: Topology):
    if isinstance(topology, (Lattice, Tree)):
        return topology.d
    return None


# ---------------------------------------------------------------------------
# option resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Opt:
    name: str  # underscore form, also the config-file key
    type: Callable
    default: object = None
    required: bool = False
    help: str = ""


_COMMON = [
    _Opt("out", str, None, help="output path (default: stdout)"),
    _Opt("format", str, None, help="csv or json (default depends on command)"),
]

_SEEDED = [
    _Opt("seed", int, None, help=f"base RNG seed (default {DEFAULT_SEED})"),
    _Opt("jobs", int, None, help="worker processes (default: CCSIM_JOBS or cpu count)"),
]


def _resolve(args: argparse.Namespace, opts: Sequence[_Opt], file_config: dict) -> dict:
    values = {}
    for o in opts:
        v = getattr(args, o.name, None)
        if v is None:
            v = file_config.get(o.name, o.default)
        if v is None and o.required:
            raise UsageError(f"missing required option --{o.name.replace('_', '-')}")
        values[o.name] = v
    unknown = set(file_config) - {o.name for o in opts} - {"command"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return values


def _resolve_seed(values: dict) -> None:
    if values.get("seed") is None:
        if values.pop("entropy", False):
            values["seed"] = int.from_bytes(os.urandom(8), "big") & 0x7FFFFFFFFFFFFFFF
        else:
            values["seed"] = DEFAULT_SEED
    else:
        values.pop("entropy", None)
    if values.get("jobs") is None:
        env = os.environ.get("CCSIM_JOBS")
        values["jobs"] = int(env) if env else (os.cpu_count() or 1)


def _series_control(values: dict) -> SeriesControl:
    return SeriesControl(
        rel_tol=values.get("rel_tol") or kernel.DEFAULT_REL_TOL,
        max_terms=values.get("max_terms") or kernel.DEFAULT_MAX_TERMS,
    )


def _sim_config(values: dict) -> SimConfig:
    return SimConfig(
        t_max=values["t_max"],
        n_max=values["n_max"],
        event_max=values["event_max"],
        seed=values["seed"],
    )


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _cmd_mu(values: dict) -> str:
    params = ModelParams(values["lambda"], values["p"])
    ctl = _series_control(values)
    dist = kernel.offspring_pmf(values["m"], params, ctl)
    result = {
        "m": values["m"],
        "lambda": values["lambda"],
        "p": values["p"],
        "mu": kernel.mu(values["m"], params, ctl),
        "mu_hypergeometric": (
            kernel.mu_hypergeometric(values["m"], params, ctl)
            if values["lambda"] > 0
            else None
        ),
        "alpha": kernel.alpha(params, ctl),
        "q": dist.probs[values["m"]],
    }
    return _json_document(RunConfig("mu", values), result)


def _cmd_pmf(values: dict) -> str:
    params = ModelParams(values["lambda"], values["p"])
    ctl = _series_control(values)
    dist = kernel.offspring_pmf(values["m"], params, ctl)
    config = RunConfig("pmf", values)
    if (values.get("format") or "json") == "csv":
        rows = [(w, q) for w, q in enumerate(dist.probs)]
        return _csv_document(config, ["w", "probability"], rows)
    return _json_document(
        config, {"m": dist.m, "probs": list(dist.probs), "mean": dist.mean}
    )


def _cmd_thresholds(values: dict) -> str:
    th = sweep.theorem_thresholds(
        values["family"], values["d"], values["p"], tol=values["tol"]
    )
    return _json_document(RunConfig("thresholds", values), th.to_json_dict())


def _cmd_verdict(values: dict) -> str:
    v = branching.theorem1_verdict(
        values["family"], values["d"], ModelParams(values["lambda"], values["p"])
    )
    return _json_document(RunConfig("verdict", values), v.to_json_dict())


def _simulate_common(values: dict, process: str) -> str:
    topology, _ = _parse_graph(values["graph"], values.get("box"))
    params = ModelParams(values["lambda"], values["p"])
    cfg = _sim_config(values)
    est = run_replicas(
        topology,
        params,
        [topology.origin()],
        cfg,
        values["replicas"],
        process=process,
        jobs=values["jobs"],
        keep_results=True,
    )
    header = [
        "replica",
        "seed",
        "status",
        "extinction_time",
        "collapses",
        "max_colonies",
        "origin_colonizations",
        "rightmost_site",
    ]
    rows = [
        (
            r,
            values["seed"],
            res.status,
            res.extinction_time,
            res.collapses,
            res.max_colonies,
            res.origin_colonizations,
            res.rightmost_site,
        )
        for r, res in enumerate(est.results)
    ]
    config = RunConfig(process if process == "xi" else "simulate", values)
    if (values.get("format") or "csv") == "json":
        payload = [dict(zip(header, row)) for row in rows]
        for item in payload:
            item["status"] = item["status"].value
        return _json_document(config, payload)
    return _csv_document(config, header, rows)


def _cmd_simulate(values: dict) -> str:
    return _simulate_common(values, "cc")


def _cmd_xi(values: dict) -> str:
    return _simulate_common(values, "xi")


def _cmd_speed(values: dict) -> str:
    est = edge_speed_experiment(
        ModelParams(values["lambda"], values["p"]),
        values["t_max"],
        values["replicas"],
        values["seed"],
        jobs=values["jobs"],
    )
    result = {
        "mean_speed": est.mean_speed,
        "std_error": est.std_error,
        "replicas_used": est.replicas_used,
        "replicas": est.replicas,
    }
    return _json_document(RunConfig("speed", values), result)


def _cmd_gw(values: dict) -> str:
    params = ModelParams(values["lambda"], values["p"])
    model = branching.GWModel.from_params(values["m"], params)
    result = {
        "m": values["m"],
        "lambda": values["lambda"],
        "p": values["p"],
        "mu": model.offspring.mean,
        "extinction_prob": branching.gw_extinction_prob(model, tol=values["tol"]),
        "simulated_extinction_frequency": None,
    }
    if values["replicas"] > 0:
        result["simulated_extinction_frequency"] = branching.gw_simulate(
            model, values["generations"], values["replicas"], values["seed"]
        )
    return _json_document(RunConfig("gw", values), result)


def _cmd_nonspatial(values: dict) -> str:
    params = nonspatial.CatastropheParams(
        birth_rate=values["lambda"],
        death_rate=values["mu"],
        collapse_rate=values["a"],
        survival_prob=values["p"],
    )
    cfg = _sim_config(values)
    est = nonspatial.run_replicas(
        values["model"], params, cfg, values["replicas"],
        method=values["method"], jobs=values["jobs"],
    )
    row = (
        values["model"],
        values["lambda"],
        values["mu"],
        values["a"],
        values["p"],
        values["replicas"],
        est.survived_fraction,
        est.ci_low,
        est.ci_high,
        nonspatial.critical_p("single", params),
        nonspatial.critical_p("multi", params),
    )
    header = [
        "model", "lambda", "mu", "a", "p", "replicas",
        "survived_fraction", "ci_low", "ci_high", "p1", "p2",
    ]
    config = RunConfig("nonspatial", values)
    if (values.get("format") or "csv") == "json":
        return _json_document(config, dict(zip(header, row)))
    return _csv_document(config, header, [row])


def _parse_lambda_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"invalid lambda grid {text!r}") from None
    if not grid:
        raise UsageError("lambda grid is empty")
    return grid


def _cmd_sweep(values: dict) -> str:
    topology, gname = _parse_graph(values["graph"], values.get("box"))
    grid = _parse_lambda_grid(values["lambdas"])
    spec = sweep.SweepSpec(
        topology=topology,
        p=values["p"],
        replicas=values["replicas"],
        cfg=_sim_config(values),
        lambdas=grid,
        jobs=values["jobs"],
    )
    points = sweep.survival_curve(spec)
    header = [
        "graph", "d", "p", "lambda", "replicas", "t_max", "n_max", "seed",
        "survived_fraction", "ci_low", "ci_high",
    ]
    rows = [
        (
            gname,
            _graph_dimension(topology),
            pt.p,
            pt.lam,
            pt.replicas,
            values["t_max"],
            values["n_max"],
            values["seed"],
            pt.survived_fraction,
            pt.ci_low,
            pt.ci_high,
        )
        for pt in points
    ]
    config = RunConfig("sweep", values)
    if (values.get("format") or "csv") == "json":
        return _json_document(config, [dict(zip(header, row)) for row in rows])
    return _csv_document(config, header, rows)


def _cmd_bisect(values: dict) -> str:
    topology, _ = _parse_graph(values["graph"], values.get("box"))
    spec = sweep.SweepSpec(
        topology=topology,
        p=values["p"],
        replicas=values["replicas"],
        cfg=_sim_config(values),
        bounds=(values["lo"], values["hi"]),
        jobs=values["jobs"],
    )
    br = sweep.estimate_lambda_c(spec, target=values["target"], width_tol=values["width_tol"])
    result = {
        "lambda_lo": br.lam_lo,
        "lambda_hi": br.lam_hi,
        "survival_lo": br.survival_lo,
        "survival_hi": br.survival_hi,
        "target": br.target,
        "width_tol": br.width_tol,
        "iterations": br.iterations,
        "mu_at_lo": br.mu_at_lo,
        "mu_lo_leq_one": br.mu_lo_leq_one,
    }
    return _json_document(RunConfig("bisect", values), result)


def _cmd_report(values: dict) -> str:
    from . import report

    out = values.get("out") or (os.path.splitext(values["input"])[0] + ".png")
    path = report.render(values["input"], out, kind=values.get("kind"))
    return json.dumps({"figure": path}) + "\n"


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

_KERNELISH = [
    _Opt("m", int, required=True, help="graph degree"),
    _Opt("lambda", float, required=True, help="birth rate"),
    _Opt("p", float, required=True, help="per-individual survival probability"),
    _Opt("rel_tol", float, None, help="series relative tolerance"),
    _Opt("max_terms", int, None, help="series term budget"),
]

_SIMULATION = [
    _Opt("graph", str, required=True, help="z1/z2/z3, z:D, tree:D, or file:PATH"),
    _Opt("box", int, None, help="box extent per axis (lattice only; blocked boundary)"),
    _Opt("lambda", float, required=True, help="birth rate"),
    _Opt("p", float, required=True, help="survival probability at collapse"),
    _Opt("replicas", int, 100, help="number of replicas"),
    _Opt("t_max", float, 100.0, help="time horizon"),
    _Opt("n_max", int, 10_000, help="colony-count survival threshold"),
    _Opt("event_max", int, 10_000_000, help="hard event cap"),
    _Opt("entropy", bool, False, help="draw the seed from the OS instead of the fixed default"),
]

_COMMAND_OPTS: dict[str, list[_Opt]] = {
    "mu": _KERNELISH + _COMMON,
    "pmf": _KERNELISH + _COMMON,
    "thresholds": [
        _Opt("family", str, required=True, help="lattice or tree"),
        _Opt("d", int, required=True, help="dimension / branching parameter"),
        _Opt("p", float, required=True),
        _Opt("tol", float, 1e-10, help="bisection tolerance on the mean"),
    ] + _COMMON,
    "verdict": [
        _Opt("family", str, required=True, help="lattice or tree"),
        _Opt("d", int, required=True),
        _Opt("lambda", float, required=True),
        _Opt("p", float, required=True),
    ] + _COMMON,
    "simulate": _SIMULATION + _SEEDED + _COMMON,
    "xi": _SIMULATION + _SEEDED + _COMMON,
    "speed": [
        _Opt("lambda", float, required=True),
        _Opt("p", float, required=True),
        _Opt("t_max", float, 200.0, help="horizon for the front displacement"),
        _Opt("replicas", int, 100),
        _Opt("entropy", bool, False),
    ] + _SEEDED + _COMMON,
    "gw": [
        _Opt("m", int, required=True),
        _Opt("lambda", float, required=True),
        _Opt("p", float, required=True),
        _Opt("tol", float, 1e-12, help="fixed-point tolerance"),
        _Opt("generations", int, 1000),
        _Opt("replicas", int, 0, help="chain replicas (0: analytics only)"),
        _Opt("entropy", bool, False),
    ] + _SEEDED + _COMMON,
    "nonspatial": [
        _Opt("model", str, required=True, help="single or multi"),
        _Opt("lambda", float, required=True, help="per-individual birth rate"),
        _Opt("mu", float, required=True, help="per-individual death rate"),
        _Opt("a", float, required=True, help="collapse rate per colony"),
        _Opt("p", float, required=True, help="survival probability at collapse"),
        _Opt("replicas", int, 1000),
        _Opt("t_max", float, 1000.0),
        _Opt("n_max", int, 1_000_000),
        _Opt("event_max", int, 10_000_000),
        _Opt("method", str, "exact", help="exact (default) or event"),
        _Opt("entropy", bool, False),
    ] + _SEEDED + _COMMON,
    "sweep": [
        _Opt("graph", str, required=True),
        _Opt("box", int, None),
        _Opt("p", float, required=True),
        _Opt("lambdas", str, required=True, help="comma-separated birth-rate grid"),
        _Opt("replicas", int, 200),
        _Opt("t_max", float, 200.0),
        _Opt("n_max", int, 10_000),
        _Opt("event_max", int, 10_000_000),
        _Opt("entropy", bool, False),
    ] + _SEEDED + _COMMON,
    "bisect": [
        _Opt("graph", str, required=True),
        _Opt("box", int, None),
        _Opt("p", float, required=True),
        _Opt("lo", float, required=True, help="lower birth-rate bound"),
        _Opt("hi", float, required=True, help="upper birth-rate bound"),
        _Opt("target", float, 0.5, help="survival-proxy crossing level"),
        _Opt("width_tol", float, 0.5, help="final bracket width"),
        _Opt("replicas", int, 200),
        _Opt("t_max", float, 200.0),
        _Opt("n_max", int, 10_000),
        _Opt("event_max", int, 10_000_000),
        _Opt("entropy", bool, False),
    ] + _SEEDED + _COMMON,
    "report": [
        _Opt("input", str, required=True, help="CSV/JSON emitted by sweep, pmf, or nonspatial"),
        _Opt("kind", str, None, help="curve, pmf, or nonspatial (default: sniff)"),
        _Opt("out", str, None, help="figure path (default: input with .png)"),
    ],
}

_HANDLERS = {
    "mu": _cmd_mu,
    "pmf": _cmd_pmf,
    "thresholds": _cmd_thresholds,
    "verdict": _cmd_verdict,
    "simulate": _cmd_simulate,
    "xi": _cmd_xi,
    "speed": _cmd_speed,
    "gw": _cmd_gw,
    "nonspatial": _cmd_nonspatial,
    "sweep": _cmd_sweep,
    "bisect": _cmd_bisect,
    "report": _cmd_report,
}



def _build_parser() -> _Parser:
    parser = _Parser(prog="ccsim", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name, opts in _COMMAND_OPTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            if o.type is bool:
                p.add_argument(flag, action="store_true", default=None, dest=o.name, help=o.help)
            else:
                p.add_argument(flag, type=o.type, default=None, dest=o.name, help=o.help)
    return parser


def run_command(argv: Sequence[str]) -> tuple[int, str]:
    """Dispatch one command line; returns (exit code, emitted text)."""
    parser = _build_parser()
    args = parser.parse_args(list(argv))
    if args.command is None:
        raise UsageError(f"expected one of: {' | '.join(COMMANDS)}")
    file_config = {}
    if args.config:
        with open(args.config) as fh:
            file_config = json.load(fh)
        if not isinstance(file_config, dict):
            raise UsageError("config file must hold a JSON object")
        declared = file_config.pop("command", args.command)
        if declared != args.command:
            raise UsageError(
                f"config file is for command {declared!r}, invoked as {args.command!r}"
            )
    opts = _COMMAND_OPTS[args.command]
    values = _resolve(args, opts, file_config)
    if values.get("format") not in (None, "csv", "json"):
        raise UsageError(f"format must be csv or json, got {values['format']!r}")
    if any(o.name == "seed" for o in opts):
        _resolve_seed(values)
    else:
        values.pop("entropy", None)
    text = _HANDLERS[args.command](values)
    out = None if args.command == "report" else values.get("out")
    _emit(text, out)
    return 0, text


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        code, _ = run_command(argv)
        return code
    except UsageError as exc:
        print(f"ccsim: usage error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, NoSolutionError, BracketError, DivergenceError,
            EdgeListFormatError, GraphValidationError) as exc:
        print(f"ccsim: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, NumericInstabilityError) as exc:
        print(f"ccsim: numeric failure: {exc}", file=sys.stderr)
        return 2
    except InsufficientDataError as exc:
        print(f"ccsim: insufficient simulation data: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ccsim: i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
