"""Explicit time integration of the selection-mutation-competition model.

The semi-discrete system on a grid is

    f' = (1 - eps - x^2 - I(f)) f + eps * gamma * I(f),    I(f) = trapezoid(f),

and the shifted linear problem replaces ``I(f)`` in the selection term by the
dominant eigenvalue ``lam``. Two schemes are available: classical RK4 and an
exponential Euler step that integrates the diagonal reaction exactly with the
mutation influx frozen over the step. Long runs switch from RK4 to exponential
Euler once the dynamics has slowed down (``switch_time``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Model, ModelParams, PopulationState, integrate
from .errors import InvalidArgument, NumericalFailure
from .spectral import SpectralData, spectral_projection

log = logging.getLogger(__name__)

SCHEMES = ("rk4", "exponential-euler")
CLAMP_RELATIVE = 1e-13


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "rk4"
    dt: float = 0.05
    t_end: float = 100.0
    snapshot_times: Optional[Sequence[float]] = None
    switch_time: Optional[float] = 1000.0
    late_scheme: str = "exponential-euler"
    late_dt: float = 0.5
    record_every: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES or self.late_scheme not in SCHEMES:
            raise InvalidArgument(f"scheme must be one of {SCHEMES}")
        if not self.dt > 0 or not self.late_dt > 0:
            raise InvalidArgument("time steps must be positive")
        if not self.t_end >= self.dt:
            raise InvalidArgument("t_end must be at least dt")
        if self.switch_time is not None and not self.switch_time > 0:
            raise InvalidArgument("switch_time must be positive")
        if self.record_every < 1:
            raise InvalidArgument("record_every must be >= 1")
        if self.snapshot_times is not None:
            times = tuple(float(t) for t in self.snapshot_times)
            if any(t < 0 or t > self.t_end * (1 + 1e-12) for t in times):
                raise InvalidArgument("snapshot times must lie in [0, t_end]")
            if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
                raise InvalidArgument("snapshot times must be strictly increasing")
            object.__setattr__(self, "snapshot_times", times)

    @property
    def switches(self) -> bool:
        return self.switch_time is not None and self.t_end > self.switch_time

    def resolved_snapshot_times(self) -> np.ndarray:
        if self.snapshot_times is not None:
            return np.asarray(self.snapshot_times, dtype=float)
        return default_snapshot_times(self.t_end)


def default_snapshot_times(t_end: float, count: int = 60) -> np.ndarray:
    """t = 0 followed by ``count`` log-spaced times from 0.1 to t_end."""
    start = min(0.1, t_end)
    return np.concatenate(([0.0], np.geomspace(start, t_end, count)))


def time_grid(config: StepperConfig):
    """Step times and, per step, the scheme used to reach the next time."""
    first_end = config.switch_time if config.switches else config.t_end
    n1 = max(1, int(round(first_end / config.dt)))
    times = [np.linspace(0.0, first_end, n1 + 1)]
    schemes = [config.scheme] * n1
    if config.switches:
        span = config.t_end - config.switch_time
        n2 = max(1, int(round(span / config.late_dt)))
        times.append(config.switch_time + np.linspace(0.0, span, n2 + 1)[1:])
        schemes += [config.late_scheme] * n2
    return np.concatenate(times), schemes


@dataclass(eq=False)
class Trajectory:
    params: ModelParams
    config: StepperConfig
    snapshots: List[PopulationState]
    mass_times: np.ndarray
    mass_values: np.ndarray
    h_series: Optional[np.ndarray] = None

    @property
    def mass_series(self) -> np.ndarray:
        return np.column_stack((self.mass_times, self.mass_values))

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def snapshot_at(self, t: float) -> PopulationState:
        """The snapshot whose time is nearest to ``t``."""
        return self.snapshots[int(np.argmin(np.abs(self.times - t)))]


@dataclass(eq=False)
class LinearRun:
    spec: SpectralData
    c_f0: float
    times: np.ndarray
    v_norm: np.ndarray  # ||T(t) f0 - c psi||_1, from the deflated companion
    mass: np.ndarray  # int T(t) f0
    snapshots: List[PopulationState] = field(default_factory=list)

    @property
    def phi(self) -> np.ndarray:
        return self.mass - self.c_f0

    @property
    def v_norm_series(self) -> np.ndarray:
        return np.column_stack((self.times, self.v_norm))

    @property
    def phi_series(self) -> np.ndarray:
        return np.column_stack((self.times, self.phi))


# -- right-hand side and steps ----------------------------------------------

class _System:
    """f' = (growth - s) f + eps gamma I(f) with s = I(f) or a fixed shift."""

    def __init__(self, model: Model, shift: Optional[float] = None):
        self.growth = model.growth
        self.weights = model.grid.weights
        self.source = model.epsilon * model.gamma
        self.shift = shift

    def rate(self, f):
        mass = float(f @ self.weights)
        s = mass if self.shift is None else self.shift
        return self.growth - s, mass

    def rhs(self, f):
        r, mass = self.rate(f)
        return r * f + self.source * mass

    def rk4(self, f, dt):
        k1 = self.rhs(f)
        k2 = self.rhs(f + 0.5 * dt * k1)
        k3 = self.rhs(f + 0.5 * dt * k2)
        k4 = self.rhs(f + dt * k3)
        return f + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)

    def exponential_euler(self, f, dt):
        r, mass = self.rate(f)
        rdt = r * dt
        growth = np.exp(rdt)
        small = np.abs(r) < 1e-12
        phi = np.where(small, dt, np.expm1(rdt) / np.where(small, 1.0, r))
        return f * growth + self.source * mass * phi

    def step(self, scheme, f, dt):
        if scheme == "rk4":
            return self.rk4(f, dt)
        return self.exponential_euler(f, dt)


def rhs(model: Model, state: PopulationState) -> np.ndarray:
    """(1 - eps - x^2 - I) f + eps gamma I with I recomputed from the values."""
    return _System(model).rhs(np.asarray(state.values, dtype=float))


def check_stability(model: Model, config: StepperConfig) -> None:
    limit = 2.5 / float(np.max(np.abs(model.growth)))
    if config.scheme == "rk4" and config.dt > limit:
        raise InvalidArgument(f"rk4 step {config.dt} exceeds the stability guard {limit:.4g}")
    if config.switches and config.late_scheme == "rk4" and config.late_dt > limit:
        raise InvalidArgument(f"rk4 step {config.late_dt} exceeds the stability guard {limit:.4g}")


def _clamp(f: np.ndarray, t: float) -> np.ndarray:
    lowest = f.min()
    if lowest < 0:
        top = f.max()
        if -lowest > CLAMP_RELATIVE * top:
            raise NumericalFailure(f"density went negative ({lowest:.3e})", t)
        np.maximum(f, 0.0, out=f)
    return f


def step(model: Model, state: PopulationState, config: StepperConfig, scheme: Optional[str] = None) -> PopulationState:
    """Advance ``state`` by one step of size ``config.dt``."""
    scheme = scheme or config.scheme
    f = _System(model).step(scheme, np.asarray(state.values, dtype=float), config.dt)
    t = state.t + config.dt
    mass = integrate(model.grid, f)
    if not math.isfinite(mass) or not np.all(np.isfinite(f)):
        raise NumericalFailure("non-finite density", t)
    f = _clamp(f, t)
    return PopulationState(t, f, integrate(model.grid, f))


def _snapshot_steps(step_times: np.ndarray, wanted: np.ndarray) -> List[int]:
    idx = np.searchsorted(step_times, wanted)
    idx = np.clip(idx, 1, len(step_times) - 1)
    left = step_times[idx - 1]
    right = step_times[idx]
    idx = np.where(np.abs(wanted - left) <= np.abs(right - wanted), idx - 1, idx)
    return sorted(set(int(i) for i in idx))


def run(model: Model, f0: PopulationState, config: StepperConfig) -> Trajectory:
    """Integrate the nonlinear model from ``f0`` up to ``config.t_end``."""
    check_stability(model, config)
    step_times, schemes = time_grid(config)
    wanted = set(_snapshot_steps(step_times, config.resolved_snapshot_times()))
    system = _System(model)
    weights = model.grid.weights

    f = np.array(f0.values, dtype=float)
    snapshots = []
    rec_t = [0.0]
    rec_m = [float(f @ weights)]
    if 0 in wanted:
        snapshots.append(PopulationState(0.0, f.copy(), rec_m[0]))
    for k, scheme in enumerate(schemes, start=1):
        t = step_times[k]
        f = system.step(scheme, f, t - step_times[k - 1])
        mass = float(f @ weights)
        if not math.isfinite(mass):
            raise NumericalFailure("non-finite density", t)
        f = _clamp(f, t)
        if k % config.record_every == 0 or k == len(schemes):
            rec_t.append(t)
            rec_m.append(float(f @ weights))
        if k in wanted:
            snapshots.append(PopulationState(float(t), f.copy(), float(f @ weights)))
    return Trajectory(model.params, config, snapshots, np.array(rec_t), np.array(rec_m))


# -- shifted linear semigroup ----------------------------------------------

def linear_run(spec: SpectralData, model: Model, f0: PopulationState, config: StepperConfig) -> LinearRun:
    """Integrate u' = (A - lam) u from ``f0``.

    Besides ``u`` itself, the non-dominant part ``v = u - c psi`` is stepped
    directly as a companion, with its (discrete) component along ``psi``
    removed after every step. This keeps ``||v||`` accurate long after it
    has dropped below the rounding level of ``u``.
    """
    check_stability(model, config)
    step_times, schemes = time_grid(config)
    wanted = set(_snapshot_steps(step_times, config.resolved_snapshot_times()))
    system = _System(model, shift=spec.lam)
    weights = model.grid.weights
    c = spectral_projection(spec, f0)

    psi = spec.psi
    left = weights * spec.psi_adjoint
    left = left / float(left @ psi)

    def deflate(v):
        return v - float(left @ v) * psi

    u = np.array(f0.values, dtype=float)
    v = deflate(u - c * psi)
    n = len(schemes)
    mass = np.empty(n + 1)
    vnorm = np.empty(n + 1)
    mass[0] = u @ weights
    vnorm[0] = np.abs(v) @ weights
    snapshots = [PopulationState(0.0, u.copy(), float(mass[0]))] if 0 in wanted else []
    for k, scheme in enumerate(schemes, start=1):
        dt = step_times[k] - step_times[k - 1]
        u = system.step(scheme, u, dt)
        v = deflate(system.step(scheme, v, dt))
        mass[k] = u @ weights
        vnorm[k] = np.abs(v) @ weights
        if not (math.isfinite(mass[k]) and math.isfinite(vnorm[k])):
            raise NumericalFailure("non-finite linear solution", step_times[k])
        if k in wanted:
            snapshots.append(PopulationState(float(step_times[k]), np.maximum(u, 0.0), float(mass[k])))
    return LinearRun(spec, c, step_times, vnorm, mass, snapshots)


def h_compose(
    spec: SpectralData,
    model: Model,
    f0: PopulationState,
    config: StepperConfig,
    linear: Optional[LinearRun] = None,
) -> Trajectory:
    """Nonlinear solution rebuilt as f = h(t) T(t) f0.

    h solves h' = (lam - h * int T(t) f0) h, h(0) = 1, by RK4 on the time grid
    of the companion linear run; the mass of T(t) f0 between grid times comes
    from a cubic spline through the stored samples.
    """
    if linear is None:
        linear = linear_run(spec, model, f0, config)
    times, U = linear.times, linear.mass
    spline = CubicSpline(times, U)
    lam = spec.lam

    def g(t, h):
        return (lam - h * float(spline(t))) * h

    h = np.empty_like(times)
    h[0] = 1.0
    for k in range(1, len(times)):
        t0, dt = times[k - 1], times[k] - times[k - 1]
        y = h[k - 1]
        k1 = g(t0, y)
        k2 = g(t0 + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = g(t0 + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = g(t0 + dt, y + dt * k3)
        h[k] = y + dt / 6.0 * (k1 + 2 * (k2 + k3) + k4)
        if not math.isfinite(h[k]):
            raise NumericalFailure("h blew up", times[k])

    index = {float(t): i for i, t in enumerate(times)}
    snapshots = []
    for s in linear.snapshots:
        hk = h[index[s.t]]
        values = hk * s.values
        snapshots.append(PopulationState(s.t, values, hk * s.mass))
    return Trajectory(model.params, config, snapshots, times.copy(), h * U, np.column_stack((times, h)))


# -- variation-of-constants self check --------------------------------------

def duhamel_residual(model: Model, trajectory: Trajectory, times: Optional[Sequence[float]] = None, block: int = 64) -> float:
    """Largest relative L1 mismatch between snapshots and the variation-of-constants formula.

    For each checked snapshot at time t the formula

        f(t) = f(0) e^{g t - J(t)} + eps gamma int_0^t I(s) e^{g (t-s) - (J(t) - J(s))} ds,

    with g = 1 - eps - x^2 and J the running integral of the mass, is
    evaluated by the trapezoid rule over the recorded mass series.
    """
    snaps = trajectory.snapshots
    if not snaps or snaps[0].t != 0.0:
        raise InvalidArgument("trajectory needs a snapshot at t = 0")
    f0 = snaps[0].values
    ts, ms = trajectory.mass_times, trajectory.mass_values
    J = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (ms[1:] + ms[:-1]))))
    checked = snaps[1:] if times is None else [trajectory.snapshot_at(t) for t in times]
    grid = model.grid
    g = model.growth
    eps_gamma = model.epsilon * model.gamma
    worst = 0.0
    for snap in checked:
        t = snap.t
        k = int(np.argmin(np.abs(ts - t)))
        if abs(ts[k] - t) > 1e-9 * max(1.0, t):
            raise InvalidArgument(f"mass series has no sample at snapshot time {t}")
        if k < 10 * t:
            raise InvalidArgument(f"mass series too sparse on [0, {t}] ({k} samples)")
        s = ts[: k + 1]
        wts = np.empty(k + 1)
        ds = np.diff(s)
        wts[:-1] = 0.5 * ds
        wts[-1] = 0.0
        wts[1:] += 0.5 * ds
        weighted_mass = wts * ms[: k + 1]
        lag_J = J[k] - J[: k + 1]
        lag_t = t - s
        pred = np.empty(grid.n)
        for lo in range(0, grid.n, block):
            gx = g[lo: lo + block, None]
            expo = gx * lag_t[None, :] - lag_J[None, :]
            pred[lo: lo + block] = np.exp(expo) @ weighted_mass
        pred = f0 * np.exp(g * t - J[k]) + eps_gamma * pred
        denom = integrate(grid, np.abs(snap.values))
        worst = max(worst, integrate(grid, np.abs(pred - snap.values)) / denom)
    return worst
