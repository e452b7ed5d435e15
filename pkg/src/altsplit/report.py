"""Delimited output and figure rendering for the command-line front end.

CSV files carry a leading ``# config ...`` comment embedding the full
effective configuration, so a run can be reproduced from its output alone.
Floats are written with 17 significant digits and LF line endings.
Figures are rendered with the Agg backend next to the delimited files.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "fmt_float",
    "config_line",
    "write_csv",
    "write_json",
    "render_sweep_figure",
    "render_spectrum_figure",
]

SWEEP_HEADER = "alpha,precond,iterations,converged,setup_s,solve_s,relres"


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def config_line(config: dict) -> str:
    """Single-line comment embedding the effective configuration."""
    return "# config " + json.dumps(config, sort_keys=True)


def write_csv(path, header: str, rows: Sequence[Sequence], config: Optional[dict] = None) -> None:
    """Write rows as CSV; floats get 17 significant digits, everything else
    str()."""
    with open(path, "w", newline="\n") as f:
        if config is not None:
            f.write(config_line(config) + "\n")
        f.write(header + "\n")
        for row in rows:
            cells = [
                fmt_float(c) if isinstance(c, float) else str(c) for c in row
            ]
            f.write(",".join(cells) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def render_sweep_figure(path, rows: Sequence[Sequence], maxit: int) -> None:
    """Iterations versus alpha on a log-x axis, one line per preconditioner.

    rows follow SWEEP_HEADER order; non-converged cells are drawn at maxit
    with an open marker.
    """
    by_precond: dict[str, list] = {}
    for alpha, precond, iters, converged, *_ in rows:
        by_precond.setdefault(str(precond), []).append(
            (float(alpha), int(iters), bool(converged))
        )
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name, pts in by_precond.items():
        pts.sort()
        al = [p[0] for p in pts]
        it = [p[1] for p in pts]
        line, = ax.semilogx(al, it, "-o", markersize=4, label=name)
        bad = [(a, i) for a, i, c in pts if not c]
        if bad:
            ax.semilogx(
                [a for a, _ in bad], [i for _, i in bad],
                "o", markersize=7, markerfacecolor="none",
                color=line.get_color(),
            )
    ax.set_xlabel("alpha")
    ax.set_ylabel("iterations")
    ax.axhline(maxit, color="gray", linestyle=":", linewidth=0.8)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_spectrum_figure(path, re: np.ndarray, im: np.ndarray) -> None:
    """Eigenvalue scatter plot with the unit disk centered at (1, 0)."""
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    theta = np.linspace(0, 2 * np.pi, 400)
    ax.plot(1 + np.cos(theta), np.sin(theta), "k--", linewidth=0.8)
    ax.plot(re, im, ".", markersize=4)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
