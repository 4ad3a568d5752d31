"""Monte Carlo harness and estimators: failure-rate curves, scaling
collapse fits, crossing points, the linearized phase boundary, and
superplaquette percolation scaling.

Seeding gives every trial its own substreams derived from
(master seed, trial index, stream), so results are independent of worker
count and two runs sharing a master seed are fully paired: the same
trial index sees the same losses and errors regardless of tau or of
which grid point is being estimated (common random numbers).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize
from scipy.stats import binom

from .degrade import (
    DegradedLattice,
    LossPattern,
    detect_loss_percolation,
    form_superplaquettes,
    losses_from_uniforms,
    restored_weights,
)
from .homology import close_with_lost, homology_class, trial_failed
from .lattice import Lattice
from .matching import build_syndrome_graph, matching_to_correction, min_weight_perfect_matching
from .noise import errors_from_uniforms

P_C0 = 0.103          # lossless threshold used by the linearized boundary
PERC_NU = 4.0 / 3.0   # 2d percolation correlation-length exponent
PERC_D = 91.0 / 48.0  # 2d percolation fractal dimension
PERC_DIM = 2.0

WORKERS_ENV = "TORICLOSS_WORKERS"


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def trial_rng(seed: int, trial_index: int, stream: int) -> np.random.Generator:
    """Deterministic substream generator for one trial.

    Entropy is the tuple (seed, trial_index, stream) fed to numpy's
    SeedSequence; stream 0 draws losses, stream 1 draws errors.
    """
    return np.random.default_rng((seed, trial_index, stream))


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of a single decode trial."""

    trial_index: int
    L: int
    p_loss: float
    p_comp: float
    tau: float
    failed: bool
    loss_blocked: bool
    syndrome_size: int
    wall_time: float


def run_trial(
    lattice: Lattice,
    p_loss: float,
    p_comp: float,
    tau: float,
    seed: int,
    trial_index: int,
    degraded0: DegradedLattice | None = None,
) -> TrialRecord:
    """One full pipeline pass: losses, degradation, errors, syndrome,
    matching, correction, homology.

    degraded0 optionally caches the lossless degraded lattice so the
    p_loss=0 fast path skips rebuilding it each trial.
    """
    t0 = time.perf_counter()
    L = lattice.L

    if p_loss > 0.0:
        u = trial_rng(seed, trial_index, 0).random(lattice.n_qubits)
        loss = losses_from_uniforms(u, p_loss)
    else:
        loss = None

    if p_comp == 0.0:
        if loss is None:
            blocked = (False, False)
        else:
            blocked = detect_loss_percolation(lattice, loss)
        failed = blocked[0] or blocked[1]
        return TrialRecord(
            trial_index, L, p_loss, p_comp, tau, failed,
            blocked[0] or blocked[1], 0, time.perf_counter() - t0,
        )

    if loss is None:
        if degraded0 is None:
            degraded0 = restored_weights(
                lattice, LossPattern(np.zeros(lattice.n_qubits, bool), 0.0), p_comp
            )
        degraded = degraded0
    else:
        degraded = restored_weights(lattice, loss, p_comp)

    error = errors_from_uniforms(
        trial_rng(seed, trial_index, 1).random(lattice.n_qubits), loss, p_comp
    )
    syndrome = lattice.syndrome(error)
    ssize = int(degraded.super_syndrome(syndrome).sum())
    blocked = degraded.blocked

    if blocked[0] or blocked[1]:
        # already failed; the wrap bits cannot rescue the trial
        failed = True
    else:
        if ssize == 0:
            residual = error
        else:
            graph = build_syndrome_graph(degraded, syndrome, tau)
            matching = min_weight_perfect_matching(graph)
            correction = matching_to_correction(graph, matching)
            residual = error ^ correction
        if loss is not None:
            residual = close_with_lost(degraded, residual)
        wrap = homology_class(lattice, residual)
        failed = trial_failed(wrap, blocked)

    return TrialRecord(
        trial_index, L, p_loss, p_comp, tau, failed,
        blocked[0] or blocked[1], ssize, time.perf_counter() - t0,
    )


def _count_chunk(args) -> tuple[int, int]:
    L, p_loss, p_comp, tau, seed, start, stop = args
    lattice = Lattice(L)
    degraded0 = None
    if p_loss == 0.0 and 0.0 < p_comp < 0.5:
        degraded0 = restored_weights(
            lattice, LossPattern(np.zeros(lattice.n_qubits, bool), 0.0), p_comp
        )
    n_fail = 0
    n_blocked = 0
    for t in range(start, stop):
        rec = run_trial(lattice, p_loss, p_comp, tau, seed, t, degraded0)
        n_fail += rec.failed
        n_blocked += rec.loss_blocked
    return n_fail, n_blocked


@dataclass(frozen=True)
class PfailEstimate:
    """Estimated failure probability for one parameter cell."""

    p_fail: float
    stderr: float
    L: int
    p_loss: float
    p_comp: float
    tau: float
    n_trials: int
    n_fail: int
    n_loss_blocked: int
    seed: int


def estimate_pfail(
    L: int,
    p_loss: float,
    p_comp: float,
    tau: float,
    n_trials: int,
    seed: int,
    workers: int | None = None,
) -> PfailEstimate:
    """Mean failure rate and binomial standard error over n_trials.

    Deterministic for a fixed seed, independent of worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    workers = _resolve_workers(workers)
    if workers == 1:
        n_fail, n_blocked = _count_chunk((L, p_loss, p_comp, tau, seed, 0, n_trials))
    else:
        bounds = np.linspace(0, n_trials, workers + 1).astype(int)
        jobs = [
            (L, p_loss, p_comp, tau, seed, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_chunk, jobs))
        n_fail = sum(p[0] for p in parts)
        n_blocked = sum(p[1] for p in parts)
    p_fail = n_fail / n_trials
    stderr = float(np.sqrt(p_fail * (1.0 - p_fail) / n_trials))
    return PfailEstimate(
        p_fail=float(p_fail),
        stderr=stderr,
        L=L,
        p_loss=float(p_loss),
        p_comp=float(p_comp),
        tau=float(tau),
        n_trials=int(n_trials),
        n_fail=int(n_fail),
        n_loss_blocked=int(n_blocked),
        seed=int(seed),
    )


@dataclass(frozen=True)
class PairedTauComparison:
    """Paired-seed outcomes of two tau settings on identical trials."""

    n_trials: int
    n_fail_a: int
    n_fail_b: int
    n_only_a: int  # trials failing under tau_a but not tau_b
    n_only_b: int

    def sign_test_pvalue(self) -> float:
        """One-sided sign test that tau_b fails less often than tau_a."""
        n = self.n_only_a + self.n_only_b
        if n == 0:
            return 1.0
        return float(binom.cdf(self.n_only_b, n, 0.5))


def compare_tau(
    L: int,
    p_loss: float,
    p_comp: float,
    tau_a: float,
    tau_b: float,
    n_trials: int,
    seed: int,
    workers: int | None = None,
) -> PairedTauComparison:
    """Run the same trials (same losses and errors) under two tau values
    and tally discordant outcomes."""
    workers = _resolve_workers(workers)
    args = [
        (L, p_loss, p_comp, tau_a, tau_b, seed, int(a), int(b))
        for a, b in _chunk_bounds(n_trials, workers)
    ]
    if workers == 1:
        parts = [_paired_chunk(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_paired_chunk, args))
    fa = sum(p[0] for p in parts)
    fb = sum(p[1] for p in parts)
    oa = sum(p[2] for p in parts)
    ob = sum(p[3] for p in parts)
    return PairedTauComparison(n_trials, fa, fb, oa, ob)


def _chunk_bounds(n: int, workers: int):
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _paired_chunk(args) -> tuple[int, int, int, int]:
    L, p_loss, p_comp, tau_a, tau_b, seed, start, stop = args
    lattice = Lattice(L)
    degraded0 = None
    if p_loss == 0.0 and 0.0 < p_comp < 0.5:
        degraded0 = restored_weights(
            lattice, LossPattern(np.zeros(lattice.n_qubits, bool), 0.0), p_comp
        )
    fa = fb = oa = ob = 0
    for t in range(start, stop):
        ra = run_trial(lattice, p_loss, p_comp, tau_a, seed, t, degraded0)
        rb = run_trial(lattice, p_loss, p_comp, tau_b, seed, t, degraded0)
        fa += ra.failed
        fb += rb.failed
        oa += ra.failed and not rb.failed
        ob += rb.failed and not ra.failed
    return fa, fb, oa, ob


# ---------------------------------------------------------------------------
# scaling collapse


@dataclass(frozen=True)
class ThresholdFit:
    """Linear scaling collapse p_fail = a + b (p - p_thr) L^(1/nu0)."""

    p_thr: float
    nu0: float
    a: float
    b: float
    resid: float
    p_thr_err: float
    weighted: bool
    unweighted_params: tuple[float, float, float, float] | None = None
    y_window: float | None = None
    n_kept: int = 0


def _collapse_model(theta, Ls, ps):
    p_thr, lnnu, a, b = theta
    # wandering Nelder-Mead steps can overflow L^(1/nu); the objective
    # then rejects them, so the warnings are just noise
    with np.errstate(over="ignore", invalid="ignore"):
        return a + b * (ps - p_thr) * Ls ** (1.0 / np.exp(lnnu))


def _fit_collapse_once(Ls, ps, ys, w, theta0, restarts: int = 5, fast: bool = False):
    def obj(theta):
        r = ys - _collapse_model(theta, Ls, ps)
        return float(np.sum(w * r * r))

    if fast:
        opts = {"xatol": 1e-10, "fatol": 1e-12, "maxiter": 8000, "maxfev": 8000}
    else:
        opts = {"xatol": 1e-12, "fatol": 1e-14, "maxiter": 40000, "maxfev": 40000}
    best = None
    rng = np.random.default_rng(12345)
    jitter = np.array([0.004, 0.15, 0.05, 0.25])
    for k in range(restarts):
        x0 = np.asarray(theta0, dtype=float)
        if k > 0:
            x0 = x0 + rng.normal(size=4) * jitter
        res = minimize(obj, x0, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    if not fast:
        # polish from the winner
        res = minimize(
            obj,
            best.x,
            method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 40000, "maxfev": 40000},
        )
        if res.fun <= best.fun:
            best = res
    return best


def _window_keep(theta, Ls, ps, y_window):
    # keep points whose fitted deviation from the critical value a stays
    # within the linear regime of the collapse; never drop below 4 per size
    p_thr, lnnu, a, b = theta
    with np.errstate(over="ignore", invalid="ignore"):
        dev = np.abs(b * (ps - p_thr) * Ls ** (1.0 / np.exp(lnnu)))
    keep = dev <= y_window
    for L in np.unique(Ls):
        sel = Ls == L
        if keep[sel].sum() < 4:
            cut = np.sort(dev[sel])[min(3, int(sel.sum()) - 1)]
            keep[sel] = dev[sel] <= cut + 1e-12
    return keep


def _fit_windowed(Ls, ps, ys, w, theta0, y_window, fast: bool = False):
    best = _fit_collapse_once(Ls, ps, ys, w, theta0, restarts=1 if fast else 5, fast=fast)
    keep = np.ones(len(ys), dtype=bool)
    if y_window is None:
        return best, keep
    for _ in range(2):
        new = _window_keep(best.x, Ls, ps, y_window)
        if (new == keep).all():
            break
        keep = new
        best = _fit_collapse_once(
            Ls[keep], ps[keep], ys[keep], w[keep], best.x, restarts=1 if fast else 2, fast=fast
        )
    return best, keep


def _prepare_collapse_data(data):
    arr = np.asarray([(L, p, y, e) for (L, p, y, e) in data], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4 or len(arr) < 8:
        raise ValueError("need (L, p_comp, p_fail, stderr) tuples, several per size")
    Ls, ps, ys, es = arr.T
    if len(np.unique(Ls)) < 2:
        raise ValueError("scaling fit needs at least two lattice sizes")
    return Ls, ps, ys, es


def _initial_guess(Ls, ps, ys):
    # p_thr guess: the grid point where the per-L curves are closest
    best_p, best_spread = None, np.inf
    for p in np.unique(ps):
        sel = ps == p
        if len(np.unique(Ls[sel])) < 2:
            continue
        spread = ys[sel].max() - ys[sel].min()
        if spread < best_spread:
            best_spread, best_p = spread, p
    if best_p is None:
        best_p = float(np.median(ps))
    nu0 = 1.5
    a0 = float(np.mean(ys))
    x = (ps - best_p) * Ls ** (1.0 / nu0)
    denom = float(np.dot(x, x))
    b0 = float(np.dot(x, ys - a0) / denom) if denom > 0 else 1.0
    return (float(best_p), float(np.log(nu0)), a0, b0)


def fit_scaling(
    data,
    weighted: bool = True,
    n_boot: int = 50,
    seed: int = 0,
    y_window: float | None = 0.15,
) -> ThresholdFit:
    """Fit (p_thr, nu0, a, b) by derivative-free least squares.

    data is an iterable of (L, p_comp, p_fail, stderr). Weighted fits use
    inverse-variance weights; the unweighted parameters are reported
    alongside. p_thr_err comes from a parametric bootstrap: resample each
    point as Normal(p_fail, stderr) and refit.

    The linear collapse only holds near the crossing, so after an initial
    all-points fit the points with a fitted |p_fail - a| above y_window are
    dropped and the fit repeated (at most twice, keeping at least four
    points per size). Pass y_window=None to fit every point.
    """
    Ls, ps, ys, es = _prepare_collapse_data(data)
    w = 1.0 / np.maximum(es, 1e-6) ** 2 if weighted else np.ones_like(ys)
    theta0 = _initial_guess(Ls, ps, ys)
    best, kept = _fit_windowed(Ls, ps, ys, w, theta0, y_window)
    p_thr, lnnu, a, b = best.x

    other, _ = _fit_windowed(Ls, ps, ys, np.ones_like(ys), theta0, y_window)
    op, ol, oa, ob = other.x
    unweighted_params = (float(op), float(np.exp(ol)), float(oa), float(ob))

    boot = []
    rng = np.random.default_rng(seed)
    for _ in range(n_boot):
        yb = ys + rng.normal(size=len(ys)) * es
        res, _ = _fit_windowed(Ls, ps, yb, w, best.x, y_window, fast=True)
        boot.append(res.x[0])
    if boot:
        # central 68% half-width; robust to the odd diverged replicate
        q16, q84 = np.quantile(boot, [0.1587, 0.8413])
        p_thr_err = float(0.5 * (q84 - q16))
    else:
        p_thr_err = float("nan")

    return ThresholdFit(
        p_thr=float(p_thr),
        nu0=float(np.exp(lnnu)),
        a=float(a),
        b=float(b),
        resid=float(best.fun),
        p_thr_err=p_thr_err,
        weighted=weighted,
        unweighted_params=unweighted_params,
        y_window=y_window,
        n_kept=int(kept.sum()),
    )


# ---------------------------------------------------------------------------
# crossings and the linearized boundary


@dataclass(frozen=True)
class PfailCurve:
    """p_fail as a function of one scan parameter at fixed L."""

    L: int
    p: np.ndarray
    p_fail: np.ndarray
    stderr: np.ndarray
    n_trials: np.ndarray

    @staticmethod
    def from_estimates(estimates, scan: str = "p_comp") -> "PfailCurve":
        ests = sorted(estimates, key=lambda e: getattr(e, scan))
        L = ests[0].L
        return PfailCurve(
            L=L,
            p=np.array([getattr(e, scan) for e in ests]),
            p_fail=np.array([e.p_fail for e in ests]),
            stderr=np.array([e.stderr for e in ests]),
            n_trials=np.array([e.n_trials for e in ests]),
        )


class NoCrossingError(ValueError):
    """The two curves do not cross on the shared grid."""


@dataclass(frozen=True)
class CrossingEstimate:
    p: float
    stderr: float


def _interp_crossing(p, d) -> float:
    """First sign change of d over grid p, linearly interpolated."""
    for i in range(len(p) - 1):
        if d[i] == 0.0 and (
            (i > 0 and i + 1 < len(p) and d[i - 1] * d[i + 1] < 0.0)
            or (i == 0 and d[i + 1] != 0.0)
        ):
            return float(p[i])
        if d[i] * d[i + 1] < 0.0:
            return float(p[i] - d[i] * (p[i + 1] - p[i]) / (d[i + 1] - d[i]))
    if len(p) and d[-1] == 0.0 and len(p) > 1 and d[-2] != 0.0:
        return float(p[-1])
    raise NoCrossingError("curves do not cross on the shared grid")


def crossing_point(
    curve1: PfailCurve,
    curve2: PfailCurve,
    n_boot: int = 200,
    seed: int = 0,
) -> CrossingEstimate:
    """Crossing of two failure curves by sign-change interpolation, with
    a bootstrap standard error over the binomial trial counts."""
    shared, i1, i2 = np.intersect1d(curve1.p, curve2.p, return_indices=True)
    if len(shared) < 2:
        raise ValueError("curves need at least two shared grid points")
    f1, f2 = curve1.p_fail[i1], curve2.p_fail[i2]
    n1, n2 = curve1.n_trials[i1], curve2.n_trials[i2]
    est = _interp_crossing(shared, f1 - f2)

    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        b1 = rng.binomial(n1, np.clip(f1, 0, 1)) / n1
        b2 = rng.binomial(n2, np.clip(f2, 0, 1)) / n2
        try:
            boots.append(_interp_crossing(shared, b1 - b2))
        except NoCrossingError:
            continue
    stderr = float(np.std(boots)) if len(boots) >= 2 else float("inf")
    return CrossingEstimate(p=est, stderr=stderr)


def _odd_flip(n: float, p: float) -> float:
    return 0.5 * (1.0 - (1.0 - 2.0 * p) ** n)


@dataclass(frozen=True)
class LinearizedBoundary:
    p_thr: float
    alpha: float


def linearized_boundary(p_loss: float, p_c0: float = P_C0) -> LinearizedBoundary:
    """Small-loss phase boundary estimate.

    Matches the per-stabilizer error rate of a sparsely lossy lattice
    (mixture of 4-qubit plaquettes and 6-qubit superplaquettes) to the
    lossless lattice at its known threshold p_c0, solving for p_comp by
    bisection. Also returns the closed-form slope
    alpha = -2 p_c0 (1 - p_c0)(1 - 2 p_c0).
    """
    if not 0.0 <= p_loss < 1.0:
        raise ValueError("p_loss must lie in [0, 1)")
    target = _odd_flip(4, p_c0)
    w4 = (1.0 - p_loss) ** 4

    def g(p_comp: float) -> float:
        return w4 * _odd_flip(4, p_comp) + (1.0 - w4) * _odd_flip(6, p_comp) - target

    alpha = -2.0 * p_c0 * (1.0 - p_c0) * (1.0 - 2.0 * p_c0)
    if p_loss == 0.0:
        return LinearizedBoundary(p_thr=p_c0, alpha=alpha)
    p_thr = float(bisect(g, 1e-9, 0.5 - 1e-9, xtol=1e-12))
    return LinearizedBoundary(p_thr=p_thr, alpha=alpha)


def default_pcomp_grid(p_loss: float, n_points: int = 7, spacing: float = 0.005) -> np.ndarray:
    """p_comp grid centered on the linearized boundary prediction."""
    center = linearized_boundary(p_loss).p_thr
    offsets = (np.arange(n_points) - (n_points - 1) / 2) * spacing
    return np.clip(center + offsets, 1e-4, 0.499)


# ---------------------------------------------------------------------------
# percolation scaling


def largest_superplaquette(lattice: Lattice, loss: LossPattern) -> int:
    """Size (in plaquettes) of the largest superplaquette after island
    filling: disconnected leftovers of the plaquette adjacency graph,
    other than the biggest one, count as part of it."""
    from .degrade import _merge_lost  # kernel reuse

    partition = form_superplaquettes(lattice, loss)
    labels, counts = np.unique(partition, return_counts=True)
    s_label = labels[int(np.argmax(counts))]
    s_size = int(counts.max())
    in_s = partition == s_label
    ends = lattice.qubit_endpoints
    outside_edge = ~(in_s[ends[:, 0]] | in_s[ends[:, 1]])
    part2, _ = _merge_lost(ends, outside_edge, lattice.n_plaquettes)
    rest = part2[~in_s]
    if len(rest) == 0:
        return s_size
    _, comp_counts = np.unique(rest, return_counts=True)
    islands = int(comp_counts.sum() - comp_counts.max())
    return s_size + islands


def mu_sweep(
    L: int,
    p_grid: np.ndarray,
    n_trials: int,
    seed: int,
    workers: int | None = None,
) -> np.ndarray:
    """Mean island-filled largest-superplaquette size over a p_loss grid.

    Each trial draws one set of uniforms and thresholds it at every grid
    value, so the per-trial curves are nested in p_loss.
    """
    workers = _resolve_workers(workers)
    p_grid = np.asarray(p_grid, dtype=float)
    args = [(L, p_grid, seed, int(a), int(b)) for a, b in _chunk_bounds(n_trials, workers)]
    if workers == 1:
        parts = [_mu_chunk(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_mu_chunk, args))
    return np.sum(parts, axis=0) / n_trials


def _mu_chunk(args) -> np.ndarray:
    L, p_grid, seed, start, stop = args
    lattice = Lattice(L)
    totals = np.zeros(len(p_grid))
    for t in range(start, stop):
        u = trial_rng(seed, t, 0).random(lattice.n_qubits)
        for i, p in enumerate(p_grid):
            totals[i] += largest_superplaquette(lattice, losses_from_uniforms(u, p))
    return totals


@dataclass(frozen=True)
class PercolationFit:
    """Fit of mu_L / s_p = chi * ln(xi * (L^2 / s_p^(d/D))^(D/d) + 1)."""

    chi: float
    xi: float
    resid: float
    nu: float = PERC_NU
    D: float = PERC_D
    d: float = PERC_DIM


def percolation_spread(p_loss: float) -> float:
    """Scaling factor s_p = |p - 1/2|^(-nu D), diverging at threshold."""
    gap = abs(p_loss - 0.5)
    if gap == 0.0:
        raise ValueError("s_p diverges at p_loss = 1/2")
    return gap ** (-PERC_NU * PERC_D)


def scaled_percolation_point(L: int, p_loss: float, mu: float) -> tuple[float, float]:
    """Map a (L, p_loss, mu_L) sample to collapse coordinates (x, y)."""
    s = percolation_spread(p_loss)
    x = L * L / s ** (PERC_DIM / PERC_D)
    y = mu / s
    return x, y


def percolation_fit(samples) -> PercolationFit:
    """Least-squares (chi, xi) for the percolation collapse.

    samples is an iterable of (L, p_loss, mean mu_L) with p_loss < 1/2.
    """
    arr = np.asarray([(L, p, m) for (L, p, m) in samples], dtype=float)
    if arr.ndim != 2 or len(arr) < 6:
        raise ValueError("need several (L, p_loss, mu) samples")
    if len(np.unique(arr[:, 0])) < 2 or len(np.unique(arr[:, 1])) < 3:
        raise ValueError("percolation fit needs >= 2 sizes and >= 3 loss rates")
    if np.any(arr[:, 1] >= 0.5):
        raise ValueError("percolation fit requires p_loss < 1/2")
    xy = np.array([scaled_percolation_point(int(L), p, m) for L, p, m in arr])
    x, y = xy[:, 0], xy[:, 1]
    z = x ** (PERC_D / PERC_DIM)

    def model(theta):
        chi, xi = np.exp(theta)
        return chi * np.log1p(xi * z)

    def obj(theta):
        r = y - model(theta)
        return float(np.dot(r, r))

    # data-driven start: for large x the model is affine in ln(x^(D/d))
    sel = z >= np.median(z)
    A = np.stack([np.log(z[sel]), np.ones(sel.sum())], axis=1)
    slope, icept = np.linalg.lstsq(A, y[sel], rcond=None)[0]
    chi0 = max(slope, 1e-3)
    xi0 = float(np.exp(np.clip(icept / chi0, -10, 10)))
    theta0 = np.log([chi0, max(xi0, 1e-3)])

    rng = np.random.default_rng(54321)
    best = None
    for k in range(5):
        x0 = theta0 if k == 0 else theta0 + rng.normal(size=2) * 0.4
        res = minimize(
            obj, x0, method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000, "maxfev": 20000},
        )
        if best is None or res.fun < best.fun:
            best = res
    chi, xi = np.exp(best.x)
    return PercolationFit(chi=float(chi), xi=float(xi), resid=float(best.fun))


def solve_p_scale(L: int, p_grid: np.ndarray, mu_means: np.ndarray) -> float:
    """Loss rate where the island-filled largest superplaquette reaches
    half the lattice, from an isotonically smoothed Monte Carlo curve."""
    from scipy.optimize import isotonic_regression

    p_grid = np.asarray(p_grid, dtype=float)
    mu = np.asarray(mu_means, dtype=float)
    if len(p_grid) != len(mu) or len(p_grid) < 3:
        raise ValueError("need matching p and mu arrays with >= 3 points")
    order = np.argsort(p_grid)
    p_grid, mu = p_grid[order], mu[order]
    smooth = isotonic_regression(mu).x
    target = L * L / 2.0
    if smooth[0] > target or smooth[-1] < target:
        raise ValueError("mu curve does not reach L^2/2 on this grid")
    exact = np.flatnonzero(smooth == target)
    if len(exact):
        return float(p_grid[exact[0]])
    i = int(np.searchsorted(smooth, target))
    lo, hi = p_grid[i - 1], p_grid[i]

    def f(p):
        return np.interp(p, p_grid, smooth) - target

    return float(bisect(f, lo, hi, xtol=1e-10))
