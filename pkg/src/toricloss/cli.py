"""Command line front end: Monte Carlo failure rates, threshold fits,
phase-diagram and percolation sweeps, and solver cross-checks.

Every subcommand writes CSV tables plus a JSON run manifest into the
output directory. Data rows depend only on (config, seed), never on the
worker count, so reruns are diffable byte for byte.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    NoCrossingError,
    PfailCurve,
    WORKERS_ENV,
    _resolve_workers,
    compare_tau,
    crossing_point,
    default_pcomp_grid,
    estimate_pfail,
    fit_scaling,
    linearized_boundary,
    mu_sweep,
    percolation_fit,
    scaled_percolation_point,
    solve_p_scale,
)
from .degrade import apply_losses, restored_weights
from .lattice import Lattice
from .matching import build_syndrome_graph, min_weight_perfect_matching
from .noise import sample_errors
from .oracle import MAX_ENUM_NODES, enumerate_matchings, presentation_bias_test

SEED_SCHEME = (
    "per-trial generator: numpy.random.default_rng(SeedSequence((master_seed, "
    "trial_index, stream))); stream 0 draws losses, stream 1 draws component "
    "errors; trial indices are global, so results are identical for any "
    "worker count"
)

PFAIL_COLUMNS = (
    "L",
    "p_loss",
    "p_comp",
    "tau",
    "n_trials",
    "n_fail",
    "p_fail",
    "stderr",
    "n_loss_blocked",
)
FIT_COLUMNS = ("p_loss", "p_thr", "p_thr_err", "nu0", "a", "b", "resid")
TAUFIT_COLUMNS = ("tau", "p_thr", "p_thr_err", "nu0", "a", "b", "resid")
PERC_COLUMNS = ("L", "p_loss", "n_trials", "mu_mean", "x_scaled", "y_scaled")
ORACLE_COLUMNS = (
    "instance",
    "L",
    "p_loss",
    "n_syndromes",
    "solver_weight",
    "enum_weight",
    "agree",
)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


class CsvWriter:
    """Header + rows with fixed formatting, flushed per row so an
    interrupted run still leaves usable partial output."""

    def __init__(self, path: Path, columns):
        self.path = path
        self.columns = tuple(columns)
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()
        self.n_rows = 0

    def row(self, values) -> None:
        values = tuple(values)
        if len(values) != len(self.columns):
            raise ValueError("row length does not match header")
        self._fh.write(",".join(_fmt(v) for v in values) + "\n")
        self._fh.flush()
        self.n_rows += 1

    def close(self) -> None:
        self._fh.close()


def _pfail_row(est):
    return (
        est.L,
        est.p_loss,
        est.p_comp,
        est.tau,
        est.n_trials,
        est.n_fail,
        est.p_fail,
        est.stderr,
        est.n_loss_blocked,
    )


def _versions() -> dict:
    import numba
    import scipy

    return {
        "toricloss": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _write_manifest(outdir: Path, command: str, config: dict, results: dict,
                    workers: int, t0: float, status: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "versions": _versions(),
        "workers": workers,
        "seed_scheme": SEED_SCHEME,
        "status": status,
        "wall_time_s": round(time.time() - t0, 3),
        "results": results,
    }
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, outdir: Path, workers: int) -> tuple[int, dict]:
    writer = CsvWriter(outdir / "pfail.csv", PFAIL_COLUMNS)
    try:
        for L in args.L:
            for p_loss in args.p_loss:
                for p_comp in args.p_comp:
                    est = estimate_pfail(
                        L, p_loss, p_comp, args.tau, args.trials, args.seed, workers
                    )
                    writer.row(_pfail_row(est))
    finally:
        writer.close()
    return 0, {"cells": writer.n_rows, "outputs": ["pfail.csv"]}


def _threshold_scan(args, pfail_writer, p_loss: float, grid, tau: float, workers: int):
    """Run the p_comp grid for every size, emit rows, return (data, curves)."""
    data = []
    curves = {}
    for L in args.L:
        ests = []
        for p_comp in grid:
            est = estimate_pfail(
                L, p_loss, float(p_comp), tau, args.trials, args.seed, workers
            )
            pfail_writer.row(_pfail_row(est))
            ests.append(est)
            data.append((L, est.p_comp, est.p_fail, est.stderr))
        curves[L] = PfailCurve.from_estimates(ests)
    return data, curves


def _crossings(curves: dict) -> list[dict]:
    sizes = sorted(curves)
    out = []
    for L1, L2 in zip(sizes[:-1], sizes[1:]):
        entry = {"L1": L1, "L2": L2}
        try:
            cross = crossing_point(curves[L1], curves[L2])
            entry["p_cross"] = cross.p
            entry["stderr"] = cross.stderr
        except (NoCrossingError, ValueError) as exc:
            entry["error"] = str(exc)
        out.append(entry)
    return out


def _fit_row(key, fit):
    return (key, fit.p_thr, fit.p_thr_err, fit.nu0, fit.a, fit.b, fit.resid)


def cmd_threshold(args, outdir: Path, workers: int) -> tuple[int, dict]:
    y_window = args.y_window if args.y_window > 0 else None
    pf = CsvWriter(outdir / "pfail.csv", PFAIL_COLUMNS)
    fw = CsvWriter(outdir / "fit.csv", FIT_COLUMNS)
    results = {"fits": [], "outputs": ["pfail.csv", "fit.csv"]}
    try:
        for p_loss in args.p_loss:
            grid = args.p_comp if args.p_comp else default_pcomp_grid(p_loss)
            data, curves = _threshold_scan(args, pf, p_loss, grid, args.tau, workers)
            fit = fit_scaling(data, seed=args.seed, y_window=y_window)
            fw.row(_fit_row(p_loss, fit))
            results["fits"].append(
                {
                    "p_loss": p_loss,
                    "p_thr": fit.p_thr,
                    "p_thr_err": fit.p_thr_err,
                    "nu0": fit.nu0,
                    "n_kept": fit.n_kept,
                    "crossings": _crossings(curves),
                }
            )
    finally:
        pf.close()
        fw.close()
    return 0, results


def cmd_phase_diagram(args, outdir: Path, workers: int) -> tuple[int, dict]:
    y_window = args.y_window if args.y_window > 0 else None
    pf = CsvWriter(outdir / "pfail.csv", PFAIL_COLUMNS)
    fw = CsvWriter(outdir / "fit.csv", FIT_COLUMNS)
    points = []
    results = {"outputs": ["pfail.csv", "fit.csv"]}
    try:
        for p_loss in args.p_loss:
            grid = args.p_comp if args.p_comp else default_pcomp_grid(p_loss)
            data, _ = _threshold_scan(args, pf, p_loss, grid, args.tau, workers)
            fit = fit_scaling(data, seed=args.seed, y_window=y_window)
            fw.row(_fit_row(p_loss, fit))
            points.append((p_loss, fit.p_thr, fit.p_thr_err))
    finally:
        pf.close()
        fw.close()
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    es = np.array([max(p[2], 1e-6) for p in points])
    results["thresholds"] = [
        {"p_loss": float(x), "p_thr": float(y), "p_thr_err": float(e)}
        for x, y, e in points
    ]
    if len(points) >= 3:
        coeffs = np.polyfit(xs, ys, 2, w=1.0 / es)
        results["quadratic"] = [float(c) for c in coeffs]
        results["slope_at_zero"] = float(coeffs[1])
    results["linearized_alpha"] = linearized_boundary(0.0).alpha
    return 0, results


def cmd_percolation(args, outdir: Path, workers: int) -> tuple[int, dict]:
    writer = CsvWriter(outdir / "percolation.csv", PERC_COLUMNS)
    p_grid = np.asarray(args.p_loss, dtype=float)
    samples = []
    results = {"outputs": ["percolation.csv"], "p_scale": []}
    try:
        for L in args.L:
            mu = mu_sweep(L, p_grid, args.trials, args.seed, workers)
            for p, m in zip(p_grid, mu):
                if p == 0.5:
                    x = y = float("nan")
                else:
                    x, y = scaled_percolation_point(L, float(p), float(m))
                writer.row((L, float(p), args.trials, float(m), x, y))
                if p < 0.5:
                    samples.append((L, float(p), float(m)))
            entry = {"L": L}
            try:
                entry["p_scale"] = solve_p_scale(L, p_grid, mu)
            except ValueError as exc:
                entry["error"] = str(exc)
            results["p_scale"].append(entry)
    finally:
        writer.close()
    try:
        fit = percolation_fit(samples)
        results["fit"] = {"chi": fit.chi, "xi": fit.xi, "resid": fit.resid}
    except ValueError as exc:
        results["fit"] = {"error": str(exc)}
    return 0, results


def cmd_tau_sweep(args, outdir: Path, workers: int) -> tuple[int, dict]:
    y_window = args.y_window if args.y_window > 0 else None
    pf = CsvWriter(outdir / "pfail.csv", PFAIL_COLUMNS)
    fw = CsvWriter(outdir / "taufit.csv", TAUFIT_COLUMNS)
    results = {"fits": [], "outputs": ["pfail.csv", "taufit.csv"]}
    grid = args.p_comp if args.p_comp else default_pcomp_grid(args.p_loss)
    try:
        for tau in args.tau:
            data, _ = _threshold_scan(args, pf, args.p_loss, grid, tau, workers)
            fit = fit_scaling(data, seed=args.seed, y_window=y_window)
            fw.row(_fit_row(tau, fit))
            results["fits"].append(
                {"tau": tau, "p_thr": fit.p_thr, "p_thr_err": fit.p_thr_err}
            )
        if len(args.tau) >= 2 and args.paired_trials > 0:
            lo, hi = min(args.tau), max(args.tau)
            comp = compare_tau(
                max(args.L), args.p_loss, float(np.median(grid)), lo, hi,
                args.paired_trials, args.seed, workers,
            )
            results["paired"] = {
                "tau_a": lo,
                "tau_b": hi,
                "n_trials": comp.n_trials,
                "n_fail_a": comp.n_fail_a,
                "n_fail_b": comp.n_fail_b,
                "n_only_a": comp.n_only_a,
                "n_only_b": comp.n_only_b,
                "sign_test_pvalue": comp.sign_test_pvalue(),
            }
    finally:
        pf.close()
        fw.close()
    return 0, results


def cmd_oracle_check(args, outdir: Path, workers: int) -> tuple[int, dict]:
    del workers  # instances are small; enumeration dominates anyway
    writer = CsvWriter(outdir / "oracle.csv", ORACLE_COLUMNS)
    mismatches = 0
    bias_checked = 0
    bias_clean = True
    checked = 0
    try:
        k = 0
        attempts = 0
        while checked < args.instances and attempts < 100 * args.instances:
            attempts += 1
            L = args.L[k % len(args.L)]
            p_loss = args.p_loss[(k // len(args.L)) % len(args.p_loss)]
            rng = np.random.default_rng((args.seed, attempts))
            lattice = Lattice(L)
            loss = apply_losses(lattice, p_loss, rng)
            degraded = restored_weights(lattice, loss, args.p_comp)
            if degraded.blocked[0] or degraded.blocked[1]:
                continue
            error = sample_errors(lattice, loss, args.p_comp, rng)
            syndrome = lattice.syndrome(error)
            try:
                graph = build_syndrome_graph(degraded, syndrome, tau=0.0)
            except ValueError:
                continue
            if len(graph.nodes) == 0 or len(graph.nodes) > MAX_ENUM_NODES:
                continue
            k += 1
            matching = min_weight_perfect_matching(graph)
            ensemble = enumerate_matchings(graph)
            enum_weight = min(ensemble.effective_weights)
            agree = bool(
                abs(matching.total_weight - enum_weight)
                <= 1e-9 * max(1.0, abs(enum_weight))
            )
            mismatches += not agree
            checked += 1
            writer.row(
                (
                    checked,
                    L,
                    p_loss,
                    len(graph.nodes),
                    matching.total_weight,
                    enum_weight,
                    agree,
                )
            )
            if len(graph.nodes) == 4 and bias_checked < args.bias_instances:
                graph1 = build_syndrome_graph(degraded, syndrome, tau=1.0)
                ens1 = enumerate_matchings(graph1)
                ws = np.sort(ens1.effective_weights)
                # permutation invariance is only testable when the optimum
                # is unique; degenerate optima may differ across orderings
                if ws[1] - ws[0] > 1e-7 * max(1.0, abs(ws[0])):
                    hist = presentation_bias_test(graph1, min_weight_perfect_matching)
                    bias_checked += 1
                    if len(hist) != 1:
                        bias_clean = False
    finally:
        writer.close()
    results = {
        "outputs": ["oracle.csv"],
        "instances": checked,
        "mismatches": mismatches,
        "bias_instances": bias_checked,
        "bias_clean": bias_clean,
    }
    status = 0 if (mismatches == 0 and bias_clean and checked == args.instances) else 1
    return status, results


# ---------------------------------------------------------------------------
# argument parsing


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _size(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("lattice size must be >= 2")
    return value


def _add_common(sub, trials_default: int):
    sub.add_argument("--trials", type=_positive_int, default=trials_default,
                     help=f"Monte Carlo trials per cell (default {trials_default})")
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument("--out", default="out", help="output directory (default ./out)")
    sub.add_argument("--workers", type=_positive_int, default=None,
                     help=f"worker processes (default ${WORKERS_ENV} or 1)")


def _add_window(sub):
    sub.add_argument("--y-window", type=float, default=0.15,
                     help="collapse-fit linear window; <= 0 fits every point "
                          "(default 0.15)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toricloss",
        description="Monte Carlo error correction on the toric code with "
                    "qubit loss: failure rates, thresholds, percolation.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="failure rate for explicit parameter cells")
    p.add_argument("-L", type=_size, nargs="+", required=True, help="lattice sizes")
    p.add_argument("--p-loss", type=float, nargs="+", default=[0.0])
    p.add_argument("--p-comp", type=float, nargs="+", required=True)
    p.add_argument("--tau", type=float, default=0.0)
    _add_common(p, 10000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="p_comp grid, scaling collapse, crossings")
    p.add_argument("-L", type=_size, nargs="+", default=[8, 12, 16])
    p.add_argument("--p-loss", type=float, nargs="+", default=[0.0])
    p.add_argument("--p-comp", type=float, nargs="+", default=None,
                   help="explicit grid (default: 7 points around the "
                        "linearized boundary)")
    p.add_argument("--tau", type=float, default=0.0)
    _add_window(p)
    _add_common(p, 10000)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("phase-diagram",
                       help="threshold per loss rate plus quadratic boundary fit")
    p.add_argument("-L", type=_size, nargs="+", default=[8, 12, 16])
    p.add_argument("--p-loss", type=float, nargs="+",
                   default=[0.0, 0.05, 0.1, 0.15, 0.2])
    p.add_argument("--p-comp", type=float, nargs="+", default=None)
    p.add_argument("--tau", type=float, default=0.0)
    _add_window(p)
    _add_common(p, 10000)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("percolation",
                       help="largest-superplaquette sweep, collapse fit, p_scale")
    p.add_argument("-L", type=_size, nargs="+", default=[8, 16, 32])
    p.add_argument("--p-loss", type=float, nargs="+",
                   default=[round(x, 4) for x in np.linspace(0.30, 0.48, 10)])
    _add_common(p, 200)
    p.set_defaults(func=cmd_percolation)

    p = sub.add_parser("tau-sweep", help="threshold as a function of tau")
    p.add_argument("-L", type=_size, nargs="+", default=[12, 16])
    p.add_argument("--tau", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    p.add_argument("--p-loss", type=float, default=0.0)
    p.add_argument("--p-comp", type=float, nargs="+", default=None)
    p.add_argument("--paired-trials", type=int, default=0,
                   help="paired same-noise comparison of min/max tau (0 = skip)")
    _add_window(p)
    _add_common(p, 10000)
    p.set_defaults(func=cmd_tau_sweep)

    p = sub.add_parser("oracle-check",
                       help="matching solver versus exhaustive enumeration")
    p.add_argument("-L", type=_size, nargs="+", default=[4, 5, 6])
    p.add_argument("--p-loss", type=float, nargs="+", default=[0.0, 0.2])
    p.add_argument("--p-comp", type=float, default=0.1)
    p.add_argument("--instances", type=_positive_int, default=100)
    p.add_argument("--bias-instances", type=int, default=5,
                   help="4-syndrome instances to permutation-test (default 5)")
    _add_common(p, 1)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def _validate(parser: argparse.ArgumentParser, args) -> None:
    p_losses = args.p_loss if isinstance(args.p_loss, list) else [args.p_loss]
    for v in p_losses:
        if not 0.0 <= v < 1.0:
            parser.error(f"p_loss {v} outside [0, 1)")
    p_comps = getattr(args, "p_comp", None)
    if p_comps is not None:
        if not isinstance(p_comps, list):
            p_comps = [p_comps]
        for v in p_comps:
            if not 0.0 <= v < 0.5:
                parser.error(f"p_comp {v} outside [0, 0.5)")
    taus = getattr(args, "tau", None)
    if taus is not None:
        for v in taus if isinstance(taus, list) else [taus]:
            if v < 0.0:
                parser.error(f"tau {v} must be >= 0")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    workers = _resolve_workers(args.workers)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    config = {
        k: v for k, v in vars(args).items() if k not in ("func", "command", "workers")
    }
    t0 = time.time()
    try:
        code, results = args.func(args, outdir, workers)
        status = "ok" if code == 0 else "failed"
    except KeyboardInterrupt:
        _write_manifest(outdir, args.command, config, {"interrupted": True},
                        workers, t0, "interrupted")
        return 130
    _write_manifest(outdir, args.command, config, results, workers, t0, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
