"""Fast self-check suite behind ``mutsel verify``.

Each check is a small numerical property of the library that runs in well
under a second; the suite prints one PASS/FAIL line per check.
"""
from __future__ import annotations

import math
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .analysis import expansion_rate, fit_rate, l1_distance
from .config import RunConfig, build_initial, parse_config
from .core import Interval, ModelParams, MutationKernel, build_grid, eval_kernel, integrate, make_model
from .errors import MutselError
from .profiles import eps0_exact, gamma2, steady_state
from .simulator import StepperConfig, duhamel_residual, run, step
from .spectral import apply_operator, characteristic_F, solve_lambda, spectral_projection

UNIT = Interval(-1.0, 1.0)
REFERENCE_INTERVAL = Interval(-1.5, 1.5)
REFERENCE_KERNEL = MutationKernel("gaussian", sigma2=10.0)


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


def _check(name: str, value: float, bound: float) -> CheckResult:
    return CheckResult(name, bool(value <= bound), f"{value:.3e} <= {bound:.1e}")


def check_trapezoid_affine():
    grid = build_grid(Interval(-1.0, 2.0), 37)
    err = abs(integrate(grid, 3.0 * grid.nodes + 1.0) - 7.5) / 7.5
    return _check("trapezoid exact on affine functions", err, 1e-12)


def check_kernel_mass():
    grid = build_grid(REFERENCE_INTERVAL, 1501)
    err = abs(integrate(grid, eval_kernel(REFERENCE_KERNEL, grid)) - 1.0)
    return _check("normalized kernel has unit mass", err, 1e-10)


def check_arctan_oracle():
    eps = 0.1
    lo, hi = 1e-6, 10.0  # (eps / nu) atan(1 / nu) decreases in nu
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if eps / mid * math.atan(1.0 / mid) > 1.0:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    spec = solve_lambda(ModelParams(eps, UNIT, MutationKernel("uniform")), build_grid(UNIT, 201))
    return _check("uniform kernel eigenvalue matches arctan root", abs(spec.lam - (1 - eps + nu * nu)), 1e-12)


def check_spectral_residuals():
    worst = 0.0
    for kernel, interval in ((MutationKernel("uniform"), UNIT), (REFERENCE_KERNEL, REFERENCE_INTERVAL)):
        grid = build_grid(interval, 201)
        for eps in (1e-1, 1e-2, 1e-3):
            spec = solve_lambda(ModelParams(eps, interval, kernel), grid)
            worst = max(worst, spec.residual, abs(spec.psi_mass - 1.0))
    return _check("characteristic residual and psi mass", worst, 1e-10)


def check_monotone_F():
    params = ModelParams(0.05, REFERENCE_INTERVAL, REFERENCE_KERNEL)
    lams = 0.95 + np.geomspace(1e-6, 1e3, 25)
    values = [characteristic_F(params, lam) for lam in lams]
    ok = all(b < a for a, b in zip(values, values[1:]))
    return CheckResult("F strictly decreasing", ok, f"{len(lams)} points")


def _reference_spec(n=1501, eps=0.01):
    model = make_model(ModelParams(eps, REFERENCE_INTERVAL, REFERENCE_KERNEL), n)
    return model, solve_lambda(model.params, model.grid)


def check_pairing():
    model, spec = _reference_spec()
    return _check("adjoint pairing <psi*, psi> = 1", abs(spec.pairing() - 1.0), 1e-8)


def check_eigen_relation():
    model, spec = _reference_spec(eps=0.05)
    Apsi = apply_operator(model.epsilon, model.gamma, model.grid, spec.psi)
    err = l1_distance(Apsi, spec.lam * spec.psi, model.grid) / integrate(model.grid, spec.psi) / spec.lam
    return _check("A psi = lam psi", err, 1e-6)


def check_fixed_point():
    # the trapezoid mass of psi is off by O(h^2); n = 3001 keeps that below 1e-9
    model, spec = _reference_spec(n=3001)
    state = model.state(0.0, steady_state(spec).values)
    out = step(model, state, StepperConfig(dt=0.05, t_end=0.05))
    err = l1_distance(out.values, state.values, model.grid) / state.mass
    return _check("steady state is a fixed point of one rk4 step", err, 1e-10)


def check_projection():
    model, spec = _reference_spec()
    c1 = spectral_projection(spec, model.state(0.0, spec.psi))
    c2 = spectral_projection(spec, model.state(0.0, 2.0 * spec.psi))
    return _check("projection of psi and 2 psi", max(abs(c1 - 1.0), abs(c2 - 2.0)), 1e-8)


def check_eps0_oracle():
    model = make_model(ModelParams(0.0, UNIT, MutationKernel("uniform")), 401)
    f0 = model.state(0.0, np.full(401, 0.1))
    traj = run(model, f0, StepperConfig(dt=0.01, t_end=5.0, snapshot_times=(1.0, 2.5, 5.0)))
    worst = max(l1_distance(s.values, eps0_exact(f0, s.t, model.grid).values, model.grid) for s in traj.snapshots)
    return _check("eps = 0 run matches the closed form", worst, 1e-8)


def check_mass_trap():
    params = ModelParams(0.1, REFERENCE_INTERVAL, REFERENCE_KERNEL)
    model = make_model(params, 301)
    rng = np.random.default_rng(7)
    values = rng.uniform(0.0, 1.0, 301)
    values *= 0.9 / integrate(model.grid, values)
    traj = run(model, model.state(0.0, values), StepperConfig(dt=0.05, t_end=20.0, snapshot_times=(0.0, 20.0)))
    m = traj.mass_values
    over = max(float(m.max()) - 1.0, -float(m.min()), 0.0)
    ok = over <= 1e-10 and all(np.all(s.values >= 0) for s in traj.snapshots)
    return CheckResult("mass stays in [0, 1] and density nonnegative", ok, f"max mass {m.max():.6f}")


def check_duhamel():
    model = make_model(ModelParams(0.05, REFERENCE_INTERVAL, REFERENCE_KERNEL), 301)
    f0 = model.state(0.0, 0.5 * np.ones(301) / 3.0)
    traj = run(model, f0, StepperConfig(dt=0.02, t_end=5.0, snapshot_times=(0.0, 5.0)))
    return _check("variation-of-constants residual", duhamel_residual(model, traj), 1e-4)


def check_cauchy_trend():
    gaps = []
    for eps, n in ((1e-2, 1501), (1e-3, 6001)):
        model, spec = _reference_spec(n=n, eps=eps)
        gaps.append(l1_distance(steady_state(spec).values, gamma2(model.params, model.grid).values, model.grid))
    return CheckResult("steady state approaches the Cauchy profile", gaps[1] * 2 <= gaps[0], f"{gaps[0]:.3e} -> {gaps[1]:.3e}")


def check_fit_rate():
    xs = np.geomspace(1e-3, 1e-1, 7)
    slope, r2 = fit_rate(xs, xs**2)
    return _check("power-law fit recovers slope 2", abs(slope - 2.0) + abs(r2 - 1.0), 1e-10)


def check_expansion_rate():
    res = expansion_rate(UNIT, MutationKernel("uniform"))
    ok = 2.5 <= res.slope <= 3.5 and res.r2 >= 0.98
    return CheckResult("eigenvalue expansion error slope in [2.5, 3.5]", ok, f"slope {res.slope:.3f}, r2 {res.r2:.4f}")


def check_config_roundtrip(config: Optional[RunConfig] = None):
    cfg = config or parse_config(
        '{"epsilon": 0.01, "domain": [-1.5, 1.5], "kernel": {"type": "gaussian", "sigma2": 10, "normalize": true}}'
    )
    text = cfg.canonical()
    again = parse_config(text, cfg.base_dir).canonical()
    return CheckResult("config round-trips through canonical JSON", text == again, f"{len(text)} bytes")


def check_initial_state(config: Optional[RunConfig] = None):
    if config is None:
        return CheckResult("configured initial state is valid", True, "no config given")
    model = config.model()
    f0 = build_initial(config, model)
    ok = bool(np.all(f0.values >= 0) and f0.mass > 0)
    return CheckResult("configured initial state is valid", ok, f"mass {f0.mass:.6g}")


CHECKS: List[Callable] = [
    check_trapezoid_affine,
    check_kernel_mass,
    check_arctan_oracle,
    check_spectral_residuals,
    check_monotone_F,
    check_pairing,
    check_eigen_relation,
    check_fixed_point,
    check_projection,
    check_eps0_oracle,
    check_mass_trap,
    check_duhamel,
    check_cauchy_trend,
    check_fit_rate,
    check_expansion_rate,
    check_config_roundtrip,
    check_initial_state,
]


def run_checks(config: Optional[RunConfig] = None) -> List[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            if "config" in check.__code__.co_varnames[: check.__code__.co_argcount]:
                res = check(config)
            else:
                res = check()
        except MutselError as exc:
            res = CheckResult(check.__name__, False, f"{type(exc).__name__}: {exc}")
        results.append(res)
    return results
