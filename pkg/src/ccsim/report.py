"""Render figures from emitted CSV/JSON files.

The delimited files are the data contract; this module is the downstream
consumer that turns them into quick-look figures: survival curves from
``sweep`` output, offspring pmf bars from ``pmf`` output, and the
single-versus-multi comparison from ``nonspatial`` rows.
"""

from __future__ import annotations

import csv
import io
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DomainError

__all__ = ["render", "plot_survival_curve", "plot_offspring_pmf", "plot_nonspatial"]


def _read_rows(path: str) -> tuple[dict, list[dict]]:
    with open(path) as fh:
        text = fh.read()
    meta = {}
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0].lstrip("# "))
        except json.JSONDecodeError:
            meta = {}
        lines = lines[1:]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    return meta, list(reader)


def _sniff(path: str) -> str:
    if path.endswith(".json"):
        return "pmf"
    meta, rows = _read_rows(path)
    fields = set(rows[0].keys()) if rows else set()
    if {"lambda", "survived_fraction"} <= fields and "graph" in fields:
        return "curve"
    if "p1" in fields:
        return "nonspatial"
    raise DomainError(f"cannot infer report kind for {path!r}; pass --kind")


def plot_survival_curve(path: str, out: str) -> str:
    meta, rows = _read_rows(path)
    if not rows:
        raise DomainError(f"no data rows in {path!r}")
    lams = [float(r["lambda"]) for r in rows]
    frac = [float(r["survived_fraction"]) for r in rows]
    lo = [float(r["ci_low"]) for r in rows]
    hi = [float(r["ci_high"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(
        lams,
        frac,
        yerr=[[f - l for f, l in zip(frac, lo)], [h - f for f, h in zip(frac, hi)]],
        fmt="o-",
        capsize=3,
    )
    if max(lams) / max(min(lams), 1e-12) > 30:
        ax.set_xscale("log")
    ax.set_xlabel(r"birth rate $\lambda$")
    ax.set_ylabel("survival fraction")
    ax.set_ylim(-0.02, 1.02)
    p = rows[0].get("p")
    graph = rows[0].get("graph", "")
    ax.set_title(f"survival proxy on {graph}, p={p}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_offspring_pmf(path: str, out: str) -> str:
    with open(path) as fh:
        doc = json.load(fh)
    result = doc.get("result", doc)
    probs = result["probs"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(probs)), probs, color="steelblue")
    ax.set_xlabel("new colonies per collapse")
    ax.set_ylabel("probability")
    ax.set_title(f"offspring law, mean {result.get('mean', float('nan')):.6f}")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_nonspatial(path: str, out: str) -> str:
    meta, rows = _read_rows(path)
    if not rows:
        raise DomainError(f"no data rows in {path!r}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in ("single", "multi"):
        pts = [(float(r["p"]), float(r["survived_fraction"])) for r in rows if r["model"] == model]
        if pts:
            pts.sort()
            ax.plot([x for x, _ in pts], [y for _, y in pts], "o-", label=model)
    p1 = rows[0].get("p1")
    p2 = rows[0].get("p2")
    if p1:
        ax.axvline(float(p1), color="tab:red", ls="--", lw=1, label="$p_1$ (single)")
    if p2:
        ax.axvline(float(p2), color="tab:green", ls="--", lw=1, label="$p_2$ (multi)")
    ax.set_xlabel("survival probability at collapse p")
    ax.set_ylabel("survival fraction")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


_RENDERERS = {
    "curve": plot_survival_curve,
    "pmf": plot_offspring_pmf,
    "nonspatial": plot_nonspatial,
}


def render(path: str, out: str, kind: str | None = None) -> str:
    """Render the figure for an emitted file; returns the figure path."""
    if not os.path.exists(path):
        raise OSError(f"input file not found: {path}")
    kind = kind or _sniff(path)
    if kind not in _RENDERERS:
        raise DomainError(f"unknown report kind {kind!r}; use one of {sorted(_RENDERERS)}")
    return _RENDERERS[kind](path, out)
