"""L1 error curves against the reference profiles, regime maps and power-law fits."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Grid, Interval, ModelParams, MutationKernel, PopulationState, build_grid, integrate
from .errors import InvalidArgument, MutselError
from .profiles import gamma1, gamma2, steady_state
from .spectral import SpectralData, expansion_gap, expansion_prediction, solve_lambda
from .config import RunConfig, build_initial
from .simulator import Trajectory, run

log = logging.getLogger(__name__)

WINNERS = ("gaussian", "cauchy", "neither")
NEITHER_THRESHOLD = 0.5


@dataclass(eq=False)
class ErrorCurve:
    times: np.ndarray
    err_gamma1: np.ndarray
    err_gamma2: np.ndarray
    err_steady: np.ndarray
    mass: np.ndarray

    def rows(self):
        return zip(self.times, self.err_gamma1, self.err_gamma2, self.err_steady, self.mass)


@dataclass(eq=False)
class RegimeMap:
    eps_values: np.ndarray
    t_values: np.ndarray
    winner: List[List[str]]
    margins: np.ndarray
    failures: Dict[float, str] = field(default_factory=dict)

    def rows(self):
        for i, eps in enumerate(self.eps_values):
            for j, t in enumerate(self.t_values):
                yield eps, t, self.winner[i][j], self.margins[i, j]


def l1_distance(a, b, grid: Grid) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape != (grid.n,):
        raise InvalidArgument("l1_distance needs two arrays sampled on the grid")
    return integrate(grid, np.abs(a - b))


def error_curves(trajectory: Trajectory, spec: SpectralData, f0: Optional[PopulationState] = None) -> ErrorCurve:
    """Per-snapshot L1 distances to gamma1(t), gamma2 and lam * psi.

    Snapshots at t = 0 are skipped, since the Gaussian profile needs t > 0.
    """
    grid = spec.grid
    if trajectory.params.interval != grid.interval:
        raise InvalidArgument("trajectory and spectral data live on different intervals")
    if f0 is None:
        f0 = trajectory.snapshots[0]
    if any(len(s.values) != grid.n for s in trajectory.snapshots) or len(f0.values) != grid.n:
        raise InvalidArgument("trajectory snapshots are not on the spectral grid")
    g2 = gamma2(trajectory.params, grid).values
    st = steady_state(spec).values
    rows = []
    for snap in trajectory.snapshots:
        if snap.t <= 0:
            continue
        g1 = gamma1(f0, snap.t, grid).values
        rows.append((
            snap.t,
            l1_distance(snap.values, g1, grid),
            l1_distance(snap.values, g2, grid),
            l1_distance(snap.values, st, grid),
            snap.mass,
        ))
    cols = np.array(rows, dtype=float).reshape(-1, 5).T
    return ErrorCurve(*cols)


def classify(err1: float, err2: float, norm: float, threshold: float = NEITHER_THRESHOLD) -> Tuple[str, float]:
    """Winner label and margin |err1 - err2| / min(err1, err2)."""
    margin = abs(err1 - err2) / max(min(err1, err2), 1e-300)
    if err1 / norm > threshold and err2 / norm > threshold:
        return "neither", margin
    return ("gaussian" if err1 < err2 else "cauchy"), margin


def _sweep_one(eps: float, t_values: Tuple[float, ...], base: RunConfig) -> Tuple[float, List[str], List[float], Optional[str]]:
    cfg = base.with_epsilon(eps)
    try:
        model = cfg.model()
        f0 = build_initial(cfg, model)
        spec = solve_lambda(cfg.params, model.grid)
        stepper = replace(cfg.stepper, t_end=max(t_values), snapshot_times=tuple(sorted({0.0, *t_values})))
        traj = run(model, f0, stepper)
        curve = error_curves(traj, spec, f0)
    except MutselError as exc:
        log.warning("sweep cell eps=%g failed: %s", eps, exc)
        n = len(t_values)
        return eps, ["neither"] * n, [math.nan] * n, f"{type(exc).__name__}: {exc}"
    winners, margins = [], []
    for t in t_values:
        j = int(np.argmin(np.abs(curve.times - t)))
        w, m = classify(curve.err_gamma1[j], curve.err_gamma2[j], curve.mass[j])
        winners.append(w)
        margins.append(m)
    return eps, winners, margins, None


def regime_sweep(eps_list: Sequence[float], t_list: Sequence[float], base_config: RunConfig, threads: int = 1) -> RegimeMap:
    """Classify every (eps, t) cell by the closer profile in L1.

    One trajectory per eps is run up to max(t_list); cells where both
    relative errors exceed 0.5 are labelled ``neither``.
    """
    eps_values = [float(e) for e in eps_list]
    t_values = tuple(sorted(float(t) for t in t_list))
    if not eps_values or not t_values:
        raise InvalidArgument("regime sweep needs nonempty eps and t lists")
    if min(t_values) <= 0:
        raise InvalidArgument("sweep times must be positive")
    if threads > 1 and len(eps_values) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_one, eps_values, [t_values] * len(eps_values), [base_config] * len(eps_values)))
    else:
        results = [_sweep_one(e, t_values, base_config) for e in eps_values]
    winner = [r[1] for r in results]
    margins = np.array([r[2] for r in results], dtype=float)
    failures = {r[0]: r[3] for r in results if r[3] is not None}
    return RegimeMap(np.array(eps_values), np.array(t_values), winner, margins, failures)


def fit_rate(xs, ys) -> Tuple[float, float]:
    """Least-squares slope of log(ys) against log(xs) and its r^2."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 3:
        raise InvalidArgument("fit_rate needs at least 3 paired points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgument("fit_rate needs positive data")
    return _linear_fit(np.log(xs), np.log(ys))


def fit_decay_rate(ts, ys) -> Tuple[float, float]:
    """Exponential decay rate r in ys ~ C exp(-r t), with r^2 of the log fit."""
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ts.shape != ys.shape or ts.size < 3:
        raise InvalidArgument("fit_decay_rate needs at least 3 paired points")
    if np.any(ys <= 0):
        raise InvalidArgument("fit_decay_rate needs positive data")
    slope, r2 = _linear_fit(ts, np.log(ys))
    return -slope, r2


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


@dataclass
class ExpansionRate:
    slope: float
    r2: float
    points: List[dict]


def expansion_rate(
    interval: Interval,
    kernel: MutationKernel,
    eps_list: Sequence[float] = (1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3),
    n: int = 201,
) -> ExpansionRate:
    """Log-log slope of |lam - prediction| against eps over an eps ladder.

    The two smallest-eps points are dropped from the fit when their gap sits
    at the floating-point floor (below 1e-12 * lam).
    """
    grid = build_grid(interval, n)
    points = []
    for eps in sorted(eps_list, reverse=True):
        params = ModelParams(eps, interval, kernel)
        spec = solve_lambda(params, grid)
        points.append({
            "epsilon": eps,
            "lambda": spec.lam,
            "prediction": expansion_prediction(params, grid),
            "gap": expansion_gap(spec),
        })
    used = list(points)
    floor = [p for p in sorted(points, key=lambda p: p["epsilon"])[:2] if p["gap"] < 1e-12 * p["lambda"]]
    used = [p for p in used if p not in floor]
    for p in points:
        p["used"] = p in used
    slope, r2 = fit_rate([p["epsilon"] for p in used], [p["gap"] for p in used])
    return ExpansionRate(slope, r2, points)
