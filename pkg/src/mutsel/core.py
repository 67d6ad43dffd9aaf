"""Domain types, the spatial grid, trapezoid quadrature and mutation kernels.

Everything downstream works on a uniform grid over a finite interval
``I = [a, b]`` with ``a < 0 < b``; densities are stored as samples at the grid
nodes and integrated with the composite trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InvalidArgument

KERNEL_KINDS = ("uniform", "gaussian", "tabulated")


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidArgument(f"interval endpoints must be finite, got [{a}, {b}]")
        if not a < 0.0 < b:
            raise InvalidArgument(f"interval must satisfy a < 0 < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class MutationKernel:
    """Law of the trait of a mutated offspring (house-of-cards kernel).

    ``gaussian`` is the truncated Gaussian ``amplitude * exp(-x^2 / (2 sigma2))``
    with ``amplitude`` defaulting to ``1 / (4 pi sigma2)``; for ``sigma2 = 10``
    this is ``exp(-x^2/20) / (40 pi)``. ``uniform`` is ``1/(b - a)`` on ``I``.
    ``tabulated`` interpolates ``table`` linearly (constant beyond its ends).
    """

    kind: str = "gaussian"
    sigma2: Optional[float] = None
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    amplitude: Optional[float] = None
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidArgument(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma2 is None or not self.sigma2 > 0:
                raise InvalidArgument("gaussian kernel needs sigma2 > 0")
            if self.amplitude is not None and not self.amplitude > 0:
                raise InvalidArgument("gaussian amplitude must be positive")
        if self.kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise InvalidArgument("tabulated kernel needs at least two (x, value) rows")
            table = tuple((float(x), float(v)) for x, v in self.table)
            xs = [x for x, _ in table]
            if any(x1 <= x0 for x0, x1 in zip(xs, xs[1:])):
                raise InvalidArgument("tabulated kernel nodes must be strictly increasing")
            if any(not v > 0 for _, v in table):
                raise InvalidArgument("tabulated kernel values must be strictly positive")
            object.__setattr__(self, "table", table)

    @property
    def gaussian_amplitude(self) -> float:
        if self.amplitude is not None:
            return float(self.amplitude)
        return 1.0 / (4.0 * math.pi * self.sigma2)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    interval: Interval
    kernel: MutationKernel = field(default_factory=lambda: MutationKernel("gaussian", sigma2=10.0))

    def __post_init__(self):
        eps = float(self.epsilon)
        if not 0.0 <= eps < 1.0:
            raise InvalidArgument(f"epsilon must lie in [0, 1), got {eps}")
        object.__setattr__(self, "epsilon", eps)


@dataclass(frozen=True, eq=False)
class Grid:
    interval: Interval
    n: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def h(self) -> float:
        return self.interval.length / (self.n - 1)

    @cached_property
    def zero_index(self) -> int:
        """Index of the node nearest to the optimal trait x = 0."""
        return int(np.argmin(np.abs(self.nodes)))

    def same_as(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and self.interval == other.interval
        )


@dataclass(eq=False)
class PopulationState:
    t: float
    values: np.ndarray
    mass: float

    @classmethod
    def from_values(cls, grid: Grid, t: float, values) -> "PopulationState":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise InvalidArgument(f"expected {grid.n} samples, got shape {values.shape}")
        if np.any(values < 0):
            raise InvalidArgument("population density must be nonnegative")
        return cls(float(t), values, integrate(grid, values))


def build_grid(interval: Interval, n: int) -> Grid:
    if n < 3:
        raise InvalidArgument(f"grid needs at least 3 nodes, got {n}")
    if not interval.a < interval.b:
        raise InvalidArgument("interval is empty")
    nodes = np.linspace(interval.a, interval.b, n)
    h = interval.length / (n - 1)
    weights = np.full(n, h)
    weights[0] = weights[-1] = 0.5 * h
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(interval, int(n), nodes, weights)


def integrate(grid: Grid, samples) -> float:
    """Composite trapezoid rule over the grid."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1:] != (grid.n,):
        raise InvalidArgument(f"expected {grid.n} samples, got shape {samples.shape}")
    return float(samples @ grid.weights)


# -- kernels ----------------------------------------------------------------

def _raw_kernel(kernel: MutationKernel, interval: Interval) -> Callable[[np.ndarray], np.ndarray]:
    if kernel.kind == "uniform":
        value = 1.0 / interval.length
        return lambda x: np.full(np.shape(x), value)
    if kernel.kind == "gaussian":
        amp, s2 = kernel.gaussian_amplitude, kernel.sigma2
        return lambda x: amp * np.exp(-np.square(x) / (2.0 * s2))
    xs = np.array([x for x, _ in kernel.table])
    vs = np.array([v for _, v in kernel.table])
    return lambda x: np.interp(x, xs, vs)


def raw_kernel_mass(kernel: MutationKernel, interval: Interval) -> float:
    """Exact integral of the un-normalized kernel over the interval."""
    a, b = interval.a, interval.b
    if kernel.kind == "uniform":
        return 1.0
    if kernel.kind == "gaussian":
        s = math.sqrt(2.0 * kernel.sigma2)
        return kernel.gaussian_amplitude * 0.5 * math.sqrt(math.pi) * s * (math.erf(b / s) - math.erf(a / s))
    # piecewise linear: trapezoid over the breakpoints is exact
    xs = np.array([x for x, _ in kernel.table])
    pts = np.unique(np.concatenate(([a, b], xs[(xs > a) & (xs < b)])))
    vals = _raw_kernel(kernel, interval)(pts)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)))


def kernel_function(kernel: MutationKernel, interval: Interval) -> Callable[[np.ndarray], np.ndarray]:
    """gamma as a callable, normalized by its exact mass when requested."""
    raw = _raw_kernel(kernel, interval)
    if not kernel.normalize:
        return raw
    scale = 1.0 / raw_kernel_mass(kernel, interval)
    return lambda x: scale * raw(x)


def eval_kernel(kernel: MutationKernel, grid: Grid) -> np.ndarray:
    """Sample gamma at the grid nodes.

    With ``normalize`` set, the samples are rescaled so that their trapezoid
    quadrature over the grid is exactly 1, which keeps the discrete mass
    balance of the model consistent.
    """
    values = np.asarray(_raw_kernel(kernel, grid.interval)(grid.nodes), dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise InvalidArgument("mutation kernel must be strictly positive on I")
    if kernel.normalize:
        values = values / integrate(grid, values)
    return values


def kernel_at_zero(kernel: MutationKernel, interval: Interval, grid: Optional[Grid] = None) -> float:
    """gamma(0); tabulated kernels are read at the grid node nearest 0."""
    if kernel.kind == "tabulated" and grid is not None:
        return float(eval_kernel(kernel, grid)[grid.zero_index])
    return float(kernel_function(kernel, interval)(np.array(0.0)))


# -- the discretized model --------------------------------------------------

@dataclass(frozen=True, eq=False)
class Model:
    """A ModelParams bound to a grid, with the node-wise data precomputed."""

    params: ModelParams
    grid: Grid
    gamma: np.ndarray
    growth: np.ndarray  # 1 - eps - x^2
    gamma0: float

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def state(self, t: float, values) -> PopulationState:
        return PopulationState.from_values(self.grid, t, values)


def make_model(params: ModelParams, n: int) -> Model:
    grid = build_grid(params.interval, n)
    return model_on_grid(params, grid)


def model_on_grid(params: ModelParams, grid: Grid) -> Model:
    if grid.interval != params.interval:
        raise InvalidArgument("grid interval differs from the model interval")
    gamma = eval_kernel(params.kernel, grid)
    gamma.setflags(write=False)
    growth = 1.0 - params.epsilon - grid.nodes**2
    growth.setflags(write=False)
    return Model(params, grid, gamma, growth, kernel_at_zero(params.kernel, params.interval, grid))


def resolution_ok(model: Model) -> bool:
    """True when the grid spacing resolves the Cauchy scale gamma(0) pi eps."""
    eps = model.epsilon
    if eps == 0:
        return True
    return model.grid.h <= model.gamma0 * math.pi * eps / 4.0
