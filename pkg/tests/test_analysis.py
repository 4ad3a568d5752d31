"""Monte Carlo harness, scaling fits, crossings, percolation scaling."""

import math

import numpy as np
import pytest
from scipy.stats import binom

from toricloss.analysis import (
    NoCrossingError,
    P_C0,
    PairedTauComparison,
    PfailCurve,
    compare_tau,
    crossing_point,
    default_pcomp_grid,
    estimate_pfail,
    fit_scaling,
    largest_superplaquette,
    linearized_boundary,
    mu_sweep,
    percolation_fit,
    percolation_spread,
    run_trial,
    scaled_percolation_point,
    solve_p_scale,
    trial_rng,
)
from toricloss.degrade import LossPattern
from toricloss.lattice import Lattice


def lose(lat, qubits):
    lost = np.zeros(lat.n_qubits, dtype=bool)
    lost[list(qubits)] = True
    return LossPattern(lost, 0.0)


# --- trial harness ---------------------------------------------------------


def test_trial_rng_substreams():
    a = trial_rng(7, 3, 0).random(5)
    b = trial_rng(7, 3, 0).random(5)
    assert (a == b).all()
    assert not (trial_rng(7, 3, 1).random(5) == a).all()
    assert not (trial_rng(7, 4, 0).random(5) == a).all()
    assert not (trial_rng(8, 3, 0).random(5) == a).all()


def test_run_trial_loss_only_fast_path():
    lat = Lattice(8)
    rec = run_trial(lat, 0.0, 0.0, 0.0, seed=1, trial_index=0)
    assert not rec.failed and not rec.loss_blocked
    assert rec.syndrome_size == 0
    # deep in the percolating phase the trial should usually fail
    fails = sum(
        run_trial(lat, 0.9, 0.0, 0.0, seed=1, trial_index=t).failed for t in range(20)
    )
    assert fails == 20


def test_run_trial_reproducible():
    lat = Lattice(6)
    a = run_trial(lat, 0.15, 0.08, 0.5, seed=9, trial_index=4)
    b = run_trial(lat, 0.15, 0.08, 0.5, seed=9, trial_index=4)
    assert (a.failed, a.loss_blocked, a.syndrome_size) == (
        b.failed,
        b.loss_blocked,
        b.syndrome_size,
    )


def test_estimate_pfail_counts_and_stderr():
    est = estimate_pfail(6, 0.1, 0.08, 0.0, n_trials=40, seed=3)
    lat = Lattice(6)
    manual = sum(run_trial(lat, 0.1, 0.08, 0.0, 3, t).failed for t in range(40))
    assert est.n_fail == manual
    assert est.p_fail == manual / 40
    assert est.stderr == pytest.approx(math.sqrt(est.p_fail * (1 - est.p_fail) / 40))
    with pytest.raises(ValueError):
        estimate_pfail(6, 0.1, 0.08, 0.0, n_trials=0, seed=3)
    with pytest.raises(ValueError):
        estimate_pfail(6, 0.1, 0.08, 0.0, n_trials=10, seed=3, workers=0)


def test_estimate_pfail_worker_count_invariant():
    kw = dict(L=6, p_loss=0.2, p_comp=0.08, tau=1.0, n_trials=60, seed=11)
    one = estimate_pfail(**kw, workers=1)
    two = estimate_pfail(**kw, workers=2)
    assert one == two


def test_compare_tau_pairs_with_estimates():
    cmp = compare_tau(8, 0.0, 0.1, 0.0, 1.0, n_trials=300, seed=5)
    est_a = estimate_pfail(8, 0.0, 0.1, 0.0, n_trials=300, seed=5)
    est_b = estimate_pfail(8, 0.0, 0.1, 1.0, n_trials=300, seed=5)
    # same seed means the paired run sees exactly the same trials
    assert cmp.n_fail_a == est_a.n_fail
    assert cmp.n_fail_b == est_b.n_fail
    assert cmp.n_fail_a - cmp.n_fail_b == cmp.n_only_a - cmp.n_only_b
    same = compare_tau(8, 0.0, 0.1, 0.4, 0.4, n_trials=50, seed=5)
    assert same.n_only_a == same.n_only_b == 0
    assert same.sign_test_pvalue() == 1.0


def test_sign_test_pvalue():
    cmp = PairedTauComparison(100, 10, 3, 8, 1)
    assert cmp.sign_test_pvalue() == pytest.approx(float(binom.cdf(1, 9, 0.5)))


# --- scaling collapse ------------------------------------------------------


def synthetic_collapse(p_thr=0.104, nu0=1.45, a=0.28, b=1.6):
    rows = []
    for L in (8, 12, 16):
        for p in np.linspace(p_thr - 0.015, p_thr + 0.015, 7):
            y = a + b * (p - p_thr) * L ** (1.0 / nu0)
            rows.append((L, float(p), float(y), 0.004))
    return rows


def test_fit_scaling_recovers_synthetic():
    fit = fit_scaling(synthetic_collapse(), n_boot=10, seed=1)
    assert fit.p_thr == pytest.approx(0.104, abs=1e-6)
    assert fit.nu0 == pytest.approx(1.45, abs=1e-4)
    assert fit.a == pytest.approx(0.28, abs=1e-6)
    assert fit.b == pytest.approx(1.6, abs=1e-4)
    assert fit.p_thr_err < 0.005
    assert fit.weighted
    up, unu, ua, ub = fit.unweighted_params
    assert up == pytest.approx(0.104, abs=1e-6)


def test_fit_scaling_window_control():
    rows = synthetic_collapse(b=8.0)  # steep: outer points leave the window
    full = fit_scaling(rows, n_boot=0, y_window=None)
    assert full.n_kept == len(rows)
    win = fit_scaling(rows, n_boot=0, y_window=0.15)
    assert win.n_kept < len(rows)
    assert win.n_kept >= 4 * 3
    assert win.p_thr == pytest.approx(0.104, abs=1e-5)


def test_fit_scaling_input_validation():
    with pytest.raises(ValueError):
        fit_scaling([(8, 0.1, 0.2, 0.01)] * 7)  # too few rows
    rows = [(8, 0.09 + 0.002 * i, 0.1 * i, 0.01) for i in range(10)]
    with pytest.raises(ValueError):
        fit_scaling(rows)  # single size


# --- crossings and the linearized boundary ---------------------------------


def linear_curve(L, slope, icept, grid):
    p = np.asarray(grid)
    y = np.clip(icept + slope * p, 0.0, 1.0)
    return PfailCurve(L=L, p=p, p_fail=y, stderr=np.full(len(p), 0.01),
                      n_trials=np.full(len(p), 4000))


def test_crossing_point_linear():
    grid = np.linspace(0.08, 0.12, 9)
    c1 = linear_curve(16, 2.0, 0.1, grid)
    c2 = linear_curve(24, 4.0, 0.1 - 0.2, grid)  # crosses at p = 0.1
    est = crossing_point(c1, c2, n_boot=100, seed=0)
    assert est.p == pytest.approx(0.1, abs=1e-9)
    assert 0 < est.stderr < 0.05


def test_crossing_point_no_crossing():
    grid = np.linspace(0.08, 0.12, 5)
    c1 = linear_curve(16, 1.0, 0.5, grid)
    c2 = linear_curve(24, 1.0, 0.2, grid)
    with pytest.raises(NoCrossingError):
        crossing_point(c1, c2)
    with pytest.raises(ValueError):
        crossing_point(c1, linear_curve(24, 1.0, 0.2, grid + 1.0))


def test_pfail_curve_sorts_estimates():
    ests = [
        estimate_pfail(4, 0.0, p, 0.0, n_trials=5, seed=0) for p in (0.2, 0.05, 0.1)
    ]
    curve = PfailCurve.from_estimates(ests)
    assert (np.diff(curve.p) > 0).all()
    assert curve.L == 4


def test_linearized_boundary_values():
    b0 = linearized_boundary(0.0)
    assert b0.p_thr == P_C0
    assert b0.alpha == pytest.approx(-2 * P_C0 * (1 - P_C0) * (1 - 2 * P_C0))
    assert linearized_boundary(0.1).p_thr == pytest.approx(0.09085, abs=5e-4)
    # boundary decreases with loss and its initial slope matches alpha
    ps = [linearized_boundary(x).p_thr for x in (0.0, 0.05, 0.1, 0.2)]
    assert all(x > y for x, y in zip(ps, ps[1:]))
    fd = (linearized_boundary(1e-5).p_thr - P_C0) / 1e-5
    assert fd == pytest.approx(b0.alpha, rel=0.02)
    with pytest.raises(ValueError):
        linearized_boundary(1.0)


def test_default_pcomp_grid():
    grid = default_pcomp_grid(0.0)
    assert len(grid) == 7
    assert grid[3] == pytest.approx(P_C0)
    assert np.diff(grid) == pytest.approx(np.full(6, 0.005))
    assert (default_pcomp_grid(0.45) > 0).all()


# --- percolation scaling ---------------------------------------------------


def test_largest_superplaquette_basics():
    lat = Lattice(4)
    assert largest_superplaquette(lat, lose(lat, [])) == 1
    assert largest_superplaquette(lat, lose(lat, range(lat.n_qubits))) == 16
    assert largest_superplaquette(lat, lose(lat, [5])) == 2


def test_largest_superplaquette_counts_islands():
    # merge rows 0 and 2 into one 9-plaquette cluster bridged through
    # (1,0); row 3 is then disconnected from the rest and filled in
    lat = Lattice(4)
    qs = [lat.horizontal_qubit(0, c) for c in range(4)]
    qs += [lat.horizontal_qubit(2, c) for c in range(4)]
    qs += [lat.vertical_qubit(0, 0), lat.vertical_qubit(1, 0)]
    assert largest_superplaquette(lat, lose(lat, qs)) == 9 + 3


def test_mu_sweep_nested_and_deterministic():
    grid = np.array([0.1, 0.25, 0.4])
    mu = mu_sweep(6, grid, n_trials=30, seed=2)
    assert (np.diff(mu) > 0).all()
    assert (mu_sweep(6, grid, n_trials=30, seed=2, workers=2) == mu).all()
    lat = Lattice(6)
    from toricloss.degrade import losses_from_uniforms

    manual = np.zeros(3)
    for t in range(30):
        u = trial_rng(2, t, 0).random(lat.n_qubits)
        for i, p in enumerate(grid):
            manual[i] += largest_superplaquette(lat, losses_from_uniforms(u, p))
    assert mu == pytest.approx(manual / 30)


def test_percolation_spread_and_points():
    assert percolation_spread(0.3) == pytest.approx(percolation_spread(0.7))
    with pytest.raises(ValueError):
        percolation_spread(0.5)
    x, y = scaled_percolation_point(16, 0.4, 100.0)
    s = percolation_spread(0.4)
    assert x == pytest.approx(256 / s ** (2.0 / (91.0 / 48.0)))
    assert y == pytest.approx(100.0 / s)


def test_percolation_fit_recovers_synthetic():
    chi, xi = 0.116, 7.74
    samples = []
    for L in (8, 16, 32):
        for p in np.linspace(0.30, 0.45, 6):
            s = percolation_spread(p)
            x = L * L / s ** (2.0 / (91.0 / 48.0))
            mu = s * chi * math.log1p(xi * x ** ((91.0 / 48.0) / 2.0))
            samples.append((L, float(p), mu))
    fit = percolation_fit(samples)
    assert fit.chi == pytest.approx(chi, rel=1e-3)
    assert fit.xi == pytest.approx(xi, rel=1e-3)
    assert fit.resid < 1e-10


def test_percolation_fit_validation():
    with pytest.raises(ValueError):
        percolation_fit([(8, 0.3, 1.0)] * 3)
    bad = [(8, p, 1.0) for p in (0.3, 0.4, 0.55)] + [(16, p, 2.0) for p in (0.3, 0.4, 0.55)]
    with pytest.raises(ValueError):
        percolation_fit(bad)


def test_solve_p_scale():
    L = 16
    grid = np.linspace(0.3, 0.48, 10)
    # synthetic monotone curve crossing L^2/2 at 0.42
    mu = L * L / 2.0 + 900.0 * (grid - 0.42)
    assert solve_p_scale(L, grid, mu) == pytest.approx(0.42, abs=1e-6)
    with pytest.raises(ValueError):
        solve_p_scale(L, grid, mu * 0.01)  # never reaches half
    with pytest.raises(ValueError):
        solve_p_scale(L, grid, mu[:-1])
