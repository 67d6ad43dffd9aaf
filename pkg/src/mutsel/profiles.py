"""Reference profiles: the Gaussian-type transient, the Cauchy limit, the
steady state and the exact mutation-free solution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Grid, ModelParams, PopulationState, integrate, kernel_at_zero
from .errors import DegenerateProfile, InvalidArgument
from .spectral import SpectralData

LABELS = ("gamma1", "gamma2", "steady", "eps0_exact")


@dataclass(frozen=True, eq=False)
class ProfileSample:
    label: str
    t: float
    values: np.ndarray


def cauchy_profile(epsilon: float, gamma0: float, x) -> np.ndarray:
    """eps gamma(0) / ((gamma(0) pi eps)^2 + x^2), i.e. a Cauchy density of scale gamma(0) pi eps."""
    scale = gamma0 * math.pi * epsilon
    return epsilon * gamma0 / (scale * scale + np.square(x))


def gamma2(params: ModelParams, grid: Grid) -> ProfileSample:
    eps = params.epsilon
    if eps <= 0:
        raise DegenerateProfile("the Cauchy profile needs eps > 0")
    g0 = kernel_at_zero(params.kernel, params.interval, grid)
    if not g0 > 0:
        raise DegenerateProfile("the Cauchy profile needs gamma(0) > 0")
    return ProfileSample("gamma2", math.nan, cauchy_profile(eps, g0, grid.nodes))


def gaussian_normalizer(grid: Grid) -> float:
    """int_I exp(-y^2) dy over the actual (finite) interval."""
    a, b = grid.interval.a, grid.interval.b
    return 0.5 * math.sqrt(math.pi) * (math.erf(b) - math.erf(a))


def gamma1(f0: PopulationState, t: float, grid: Grid) -> ProfileSample:
    if not t > 0:
        raise InvalidArgument(f"the Gaussian profile needs t > 0, got {t}")
    values0 = np.asarray(f0.values, dtype=float)
    peak = values0[grid.zero_index]
    if not peak > 0:
        raise InvalidArgument("initial density must be positive at the optimal trait x = 0")
    x = grid.nodes
    values = values0 * math.sqrt(t) * np.exp(-x * x * t) / (peak * gaussian_normalizer(grid))
    return ProfileSample("gamma1", float(t), values)


def steady_state(spec: SpectralData) -> ProfileSample:
    return ProfileSample("steady", math.inf, spec.lam * spec.psi)


def eps0_exact(f0: PopulationState, t: float, grid: Grid) -> ProfileSample:
    """Exact solution of the mutation-free (eps = 0) model on the grid.

    f(t, x) = f0(x) e^{(1-x^2) t} / (1 + int_0^t int_I f0(y) e^{(1-y^2) s} dy ds).

    The time integral is taken in closed form, (e^{k t} - 1)/k with
    k = 1 - y^2, and the y integral uses the grid's trapezoid rule, so the
    result is the exact solution of the spatially discretized model. Numerator
    and denominator are scaled by e^{-m t}, m = max k, to avoid overflow.
    """
    if t < 0:
        raise InvalidArgument("t must be nonnegative")
    values0 = np.asarray(f0.values, dtype=float)
    if t == 0:
        return ProfileSample("eps0_exact", 0.0, values0.copy())
    k = 1.0 - grid.nodes**2
    m = float(k.max())
    scaled_growth = np.exp((k - m) * t)
    # e^{-m t} (e^{k t} - 1)/k, split by sign of k so no exponential overflows
    pos = k > 1e-300
    neg = k < -1e-300
    safe_k = np.where(pos | neg, k, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        from_pos = scaled_growth * -np.expm1(-k * t) / safe_k
        from_neg = math.exp(-m * t) * np.expm1(k * t) / safe_k
    time_integral = np.where(pos, from_pos, np.where(neg, from_neg, t * math.exp(-m * t)))
    denom = math.exp(-m * t) + integrate(grid, values0 * time_integral)
    return ProfileSample("eps0_exact", float(t), values0 * scaled_growth / denom)
