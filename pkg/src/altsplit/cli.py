"""Command-line front end.

Subcommands: gen, solve, sweep, bounds, spectrum.  Every command accepts a
JSON config file via --config; flags given on the command line override the
file.  Outputs embed the full effective configuration so that a run can be
reproduced from its output alone.

Exit codes: 0 success, 1 usage or parse error, 2 numerical breakdown,
3 non-convergence (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from .factorizations import FactorizationError
from .krylov import (
    NotSpdError,
    NumericalBreakdownError,
    SolveOptions,
    gmres_right,
    pcg,
    stationary_alternating,
)
from .operators import LowRankUpdatedOperator, from_augmented_lagrangian
from .preconditioners import (
    Mode,
    Preconditioner,
    build_product,
    build_shift_only,
    build_symmetrized,
    build_unshifted,
    identity_preconditioner,
)
from .problems import (
    ProblemSpec,
    gen_kkt_schur,
    gen_oseen_mac,
    gen_random_spd_lowrank,
    gen_sparse_dense_ls,
    gen_stokes_mac,
)
from .report import (
    SWEEP_HEADER,
    render_spectrum_figure,
    render_sweep_figure,
    write_csv,
    write_json,
)
from .sparse_core import CsrMatrix, MatrixMarketError, mm_read, mm_write
from .spectra import (
    EIG_GENERAL_CAP,
    Spectrum,
    bounds_report,
    eig_general,
    preconditioned_spectrum,
)

__all__ = ["main"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_NOCONV = 0, 1, 2, 3

PRECOND_CHOICES = (
    "none",
    "product",
    "product-inexact",
    "symmetrized",
    "symmetrized-inexact",
    "unshifted",
    "shift-only",
)
METHOD_CHOICES = ("gmres", "pcg", "stationary")


class CliError(Exception):
    """Usage, config, or input-file problem (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="altsplit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--matrix-a", dest="matrix_a", help="Matrix Market file for A")
        sp.add_argument("--matrix-u", dest="matrix_u", help="Matrix Market file for U")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--scale-diag", dest="scale_diag", action="store_true", default=None)
        sp.add_argument("--normalize", action="store_true", default=None)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (file or stem)")

    sp = sub.add_parser("solve", help="solve one system")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--method", choices=METHOD_CHOICES)
    sp.add_argument("--precond", choices=PRECOND_CHOICES)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--maxit", type=int)
    sp.add_argument("--restart", type=int)
    sp.add_argument("--beta", type=float, help="damping for the stationary method")
    sp.add_argument("--rhs", help="Matrix Market array file for b (default: b = A_g * ones)")

    sp = sub.add_parser("sweep", help="alpha sweep over one or more preconditioners")
    common(sp)
    sp.add_argument("--alpha-grid", dest="alpha_grid", help="min:max:points (log-spaced)")
    sp.add_argument("--method", choices=METHOD_CHOICES)
    sp.add_argument("--precond", help="comma-separated preconditioner list")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--maxit", type=int)
    sp.add_argument("--restart", type=int)
    sp.add_argument("--rhs")
    sp.add_argument(
        "--timings", action="store_true", default=None,
        help="record wall-clock setup/solve times (off by default so output is deterministic)",
    )

    sp = sub.add_parser("bounds", help="evaluate spectral bounds (normalizes first)")
    common(sp)
    sp.add_argument("--alpha", type=float)

    sp = sub.add_parser("spectrum", help="eigenvalues of the preconditioned operator")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--precond", choices=PRECOND_CHOICES)

    sp = sub.add_parser("gen", help="generate a seeded test problem")
    sp.add_argument("--config")
    sp.add_argument("--kind", choices=("stokes", "oseen", "random-spd", "kkt", "ls"))
    sp.add_argument("--nx", type=int)
    sp.add_argument("--ny", type=int)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--wind")
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--m1", type=int)
    sp.add_argument("--cond", type=float)
    sp.add_argument("--density", type=float)
    sp.add_argument("--rank-deficient", dest="rank_deficient", action="store_true", default=None)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory")
    return p


DEFAULTS = {
    "solve": dict(gamma=1.0, alpha=1.0, method="gmres", precond="product",
                  tol=1e-6, maxit=2000, restart=20, beta=1.0,
                  scale_diag=False, normalize=False, seed=0),
    "sweep": dict(gamma=1.0, alpha_grid="0.01:100:25", method="gmres",
                  precond="product", tol=1e-6, maxit=2000, restart=20,
                  scale_diag=False, normalize=False, seed=0, timings=False),
    "bounds": dict(gamma=1.0, alpha=1.0, scale_diag=False, normalize=True, seed=0),
    "spectrum": dict(gamma=1.0, alpha=1.0, precond="product",
                     scale_diag=False, normalize=False, seed=0),
    "gen": dict(kind="stokes", nx=16, ny=16, nu=0.01, wind="recirculating_vortex",
                n=100, k=5, m1=200, cond=100.0, density=0.1,
                rank_deficient=False, seed=0),
}


def _effective_config(args: argparse.Namespace) -> dict:
    """Merge defaults <- config file <- explicit flags."""
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    cfg["command"] = cmd
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                file_cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config file: {e}") from e
        if not isinstance(file_cfg, dict):
            raise CliError("config file must hold a JSON object")
        for key, val in file_cfg.items():
            cfg[key.replace("-", "_")] = val
    for key, val in vars(args).items():
        if key in ("command", "config"):
            continue
        if val is not None:
            cfg[key] = val
    return cfg


def _load_operator(cfg: dict) -> LowRankUpdatedOperator:
    if not cfg.get("matrix_a") or not cfg.get("matrix_u"):
        raise CliError("--matrix-a and --matrix-u (or config equivalents) are required")
    try:
        a = mm_read(cfg["matrix_a"])
        u = mm_read(cfg["matrix_u"])
    except (OSError, MatrixMarketError) as e:
        raise CliError(f"cannot load input matrices: {e}") from e
    if not isinstance(a, CsrMatrix):
        a = CsrMatrix.from_dense(a)
    try:
        op = LowRankUpdatedOperator(a, u, float(cfg["gamma"]))
        if cfg.get("scale_diag"):
            op = op.with_diagonal_scaling()
        if cfg.get("normalize"):
            op, _ = op.normalize()
    except ValueError as e:
        raise CliError(str(e)) from e
    return op


def _build_precond(op: LowRankUpdatedOperator, name: str, alpha: float) -> Preconditioner:
    try:
        if name == "none":
            return identity_preconditioner(op.n)
        if name == "product":
            return build_product(op, alpha, Mode.EXACT)
        if name == "product-inexact":
            return build_product(op, alpha, Mode.INEXACT)
        if name == "symmetrized":
            return build_symmetrized(op, alpha, Mode.EXACT)
        if name == "symmetrized-inexact":
            return build_symmetrized(op, alpha, Mode.INEXACT)
        if name == "unshifted":
            return build_unshifted(op, alpha)
        if name == "shift-only":
            return build_shift_only(op, alpha)
    except ValueError as e:
        raise CliError(str(e)) from e
    raise CliError(f"unknown preconditioner {name!r}")


def _rhs(op: LowRankUpdatedOperator, cfg: dict) -> np.ndarray:
    """Right-hand side in the space the solver works in.

    User-supplied rhs files live in the original (unscaled) space and get
    mapped into the scaled space when diagonal scaling is active; the
    default rhs makes the all-ones vector the exact solution of the system
    actually passed to the solver.
    """
    if cfg.get("rhs"):
        try:
            b = mm_read(cfg["rhs"])
        except (OSError, MatrixMarketError) as e:
            raise CliError(f"cannot load rhs: {e}") from e
        b = np.asarray(b, dtype=np.float64).ravel()
        if b.shape != (op.n,):
            raise CliError(f"rhs must have length {op.n}")
        if op.scaling is not None:
            b = b / op.scaling
        return b
    return op.apply(np.ones(op.n))


def _run_once(op, b, cfg, precond_name, alpha):
    method = cfg["method"]
    opts = SolveOptions(
        tol=float(cfg["tol"]), maxit=int(cfg["maxit"]),
        restart=int(cfg["restart"]), beta=float(cfg.get("beta", 1.0)),
    )
    t0 = time.perf_counter()
    if method == "stationary":
        x, rep = stationary_alternating(op, b, alpha, opts)
        return x, rep
    precond = _build_precond(op, precond_name, alpha)
    setup = time.perf_counter() - t0
    if method == "gmres":
        x, rep = gmres_right(op, b, precond, opts)
    elif method == "pcg":
        x, rep = pcg(op, b, precond, opts)
    else:
        raise CliError(f"unknown method {cfg['method']!r}")
    rep.setup_seconds = setup
    return x, rep


def cmd_solve(cfg: dict) -> int:
    op = _load_operator(cfg)
    b = _rhs(op, cfg)
    x, rep = _run_once(op, b, cfg, cfg["precond"], float(cfg["alpha"]))
    # with diagonal scaling active the solver saw the scaled system;
    # report both residuals and unscale the solution
    relres_scaled = rep.final_relres
    if op.scaling is not None:
        x_out = x / op.scaling
        raw = LowRankUpdatedOperator(op.A, op.U, op.gamma)
        b_raw = b * op.scaling
        relres_unscaled = float(
            np.linalg.norm(b_raw - raw.apply(x_out)) / np.linalg.norm(b_raw)
        )
    else:
        x_out = x
        relres_unscaled = relres_scaled
    out = cfg.get("out") or "solve_out"
    stem = out[:-4] if out.endswith((".mtx", ".json")) else out
    mm_write(x_out, stem + ".mtx")
    write_json(stem + ".json", {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "relres": relres_scaled,
        "relres_unscaled": relres_unscaled,
        "setup_seconds": rep.setup_seconds,
        "solve_seconds": rep.solve_seconds,
        "config": cfg,
    })
    print(
        f"converged={rep.converged} iterations={rep.iterations} "
        f"relres={relres_scaled:.6e}"
    )
    return EXIT_OK if rep.converged else EXIT_NOCONV


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo_s, hi_s, pts_s = text.split(":")
        lo, hi, pts = float(lo_s), float(hi_s), int(pts_s)
    except ValueError:
        raise CliError("--alpha-grid must be min:max:points") from None
    if lo <= 0 or hi < lo or pts < 1:
        raise CliError("--alpha-grid needs 0 < min <= max and points >= 1")
    if pts == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, pts)


def cmd_sweep(cfg: dict) -> int:
    op = _load_operator(cfg)
    b = _rhs(op, cfg)
    grid = _parse_grid(str(cfg["alpha_grid"]))
    preconds = [s.strip() for s in str(cfg["precond"]).split(",") if s.strip()]
    for name in preconds:
        if name not in PRECOND_CHOICES:
            raise CliError(f"unknown preconditioner {name!r}")
    timings = bool(cfg.get("timings"))
    rows = []
    any_converged = False
    for alpha in grid:
        for name in preconds:
            try:
                _, rep = _run_once(op, b, cfg, name, float(alpha))
                iters, conv, relres = rep.iterations, rep.converged, rep.final_relres
                setup_s, solve_s = rep.setup_seconds, rep.solve_seconds
            except (NumericalBreakdownError, NotSpdError, FactorizationError):
                iters, conv, relres = int(cfg["maxit"]), False, float("nan")
                setup_s = solve_s = 0.0
            any_converged = any_converged or conv
            rows.append([
                float(alpha), name, iters, "true" if conv else "false",
                setup_s if timings else 0.0, solve_s if timings else 0.0,
                float(relres),
            ])
    out = cfg.get("out") or "sweep_out.csv"
    stem = out[:-4] if out.endswith(".csv") else out
    write_csv(stem + ".csv", SWEEP_HEADER, rows, config=cfg)
    fig_rows = [(r[0], r[1], r[2], r[3] == "true") for r in rows]
    render_sweep_figure(stem + ".png", fig_rows, int(cfg["maxit"]))
    # best alpha per preconditioner (fewest iterations among converged runs,
    # falling back to fewest iterations overall)
    print(SWEEP_HEADER)
    for name in preconds:
        mine = [r for r in rows if r[1] == name]
        good = [r for r in mine if r[3] == "true"] or mine
        best = min(good, key=lambda r: (r[2], r[0]))
        print(",".join(
            f"{c:.17g}" if isinstance(c, float) else str(c) for c in best
        ))
    return EXIT_OK if any_converged else EXIT_NOCONV


def cmd_bounds(cfg: dict) -> int:
    op = _load_operator(cfg)
    alpha = float(cfg["alpha"])
    spectrum: Optional[Spectrum] = None
    note = None
    if op.n <= EIG_GENERAL_CAP:
        spectrum = _exact_product_spectrum(op, alpha)
    else:
        note = f"spectrum portion skipped (n > {EIG_GENERAL_CAP})"
    rep = bounds_report(op, alpha, spectrum)
    payload = rep.to_dict()
    payload["config"] = cfg
    if note:
        payload["note"] = note
    out = cfg.get("out")
    if out:
        write_json(out, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _exact_product_spectrum(op: LowRankUpdatedOperator, alpha: float) -> Spectrum:
    """Spectrum of the exactly inverted product preconditioner applied to
    A_g, by dense assembly (works for nonsymmetric A too)."""
    ag = op.assemble_dense(cap=EIG_GENERAL_CAP)
    a, u, g = op.effective_parts()
    from .sparse_core import tall_to_dense

    ad = a.to_dense()
    ud = tall_to_dense(u)
    n = op.n
    i_n = np.eye(n)
    p = (ad + alpha * i_n) @ (alpha * i_n + g * (ud @ ud.T)) / (2.0 * alpha)
    return eig_general(np.linalg.solve(p, ag))


def cmd_spectrum(cfg: dict) -> int:
    op = _load_operator(cfg)
    if op.n > EIG_GENERAL_CAP:
        raise CliError(f"spectrum needs n <= {EIG_GENERAL_CAP}, got {op.n}")
    precond = _build_precond(op, cfg["precond"], float(cfg["alpha"]))
    spec = preconditioned_spectrum(op, precond)
    out = cfg.get("out") or "spectrum_out.csv"
    stem = out[:-4] if out.endswith(".csv") else out
    rows = [[float(re), float(im)] for re, im in zip(spec.real, spec.imag)]
    write_csv(stem + ".csv", "re,im", rows, config=cfg)
    render_spectrum_figure(stem + ".png", spec.real, spec.imag)
    print(f"wrote {len(rows)} eigenvalues to {stem}.csv")
    return EXIT_OK


def cmd_gen(cfg: dict) -> int:
    out = cfg.get("out")
    if not out:
        raise CliError("gen requires --out DIRECTORY")
    os.makedirs(out, exist_ok=True)
    kind = cfg["kind"]
    seed = int(cfg["seed"])
    files = {}

    def put(name, obj):
        path = os.path.join(out, name)
        mm_write(obj, path)
        files[name.split(".")[0]] = name

    if kind in ("stokes", "oseen"):
        nx, ny = int(cfg["nx"]), int(cfg["ny"])
        if kind == "stokes":
            a, bmat, w = gen_stokes_mac(nx, ny)
            params = {"nx": nx, "ny": ny}
            spec = ProblemSpec("stokes_mac", params)
        else:
            a, bmat, w = gen_oseen_mac(nx, ny, float(cfg["nu"]), cfg["wind"])
            params = {"nx": nx, "ny": ny, "nu": float(cfg["nu"]), "wind": cfg["wind"]}
            spec = ProblemSpec("oseen_mac", params)
        gamma = float(cfg.get("gamma", 1.0))
        op = from_augmented_lagrangian(a, bmat, w, gamma)
        put("A.mtx", a)
        put("B.mtx", bmat)
        put("W.mtx", w)
        put("U.mtx", op.U)
    elif kind == "random-spd":
        n, k = int(cfg["n"]), int(cfg["k"])
        a, u = gen_random_spd_lowrank(n, k, float(cfg["cond"]), seed)
        spec = ProblemSpec("random_spd_lowrank", {
            "n": n, "k": k, "cond_target": float(cfg["cond"]), "seed": seed,
        })
        put("A.mtx", a)
        put("U.mtx", u)
    elif kind == "kkt":
        n, k = int(cfg["n"]), int(cfg["k"])
        h, c, z, lam = gen_kkt_schur(n, k, seed)
        spec = ProblemSpec("kkt_schur", {"n": n, "k": k, "seed": seed})
        from .operators import from_kkt_schur

        op = from_kkt_schur(h, c, z, lam)
        put("A.mtx", h)
        put("C.mtx", c)
        put("z.mtx", z)
        put("lambda.mtx", lam)
        put("U.mtx", op.U)
    elif kind == "ls":
        m1, k, n = int(cfg["m1"]), int(cfg["k"]), int(cfg["n"])
        b1, b2, c = gen_sparse_dense_ls(
            m1, k, n, float(cfg["density"]), seed,
            rank_deficient=bool(cfg.get("rank_deficient")),
        )
        spec = ProblemSpec("sparse_dense_ls", {
            "m1": m1, "k": k, "n": n, "density": float(cfg["density"]),
            "seed": seed, "rank_deficient": bool(cfg.get("rank_deficient")),
        })
        from .operators import from_normal_equations

        op, rhs_builder = from_normal_equations(b1, b2)
        put("B1.mtx", b1)
        put("B2.mtx", b2)
        put("c.mtx", c)
        put("A.mtx", op.A)
        put("U.mtx", op.U)
        put("b.mtx", rhs_builder(c))
    else:
        raise CliError(f"unknown problem kind {kind!r}")

    sidecar = {
        "spec": json.loads(spec.to_json()),
        "files": files,
        "config": cfg,
    }
    write_json(os.path.join(out, "problem.json"), sidecar)
    print(f"wrote {len(files)} matrices + problem.json to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _effective_config(args)
        handler = {
            "solve": cmd_solve,
            "sweep": cmd_sweep,
            "bounds": cmd_bounds,
            "spectrum": cmd_spectrum,
            "gen": cmd_gen,
        }[cfg["command"]]
        return handler(cfg)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalBreakdownError, NotSpdError, FactorizationError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
