"""Dominant eigenpair of the linear selection-mutation operator.

The operator is ``A u = (1 - eps - x^2) u + eps * gamma * int_I u``. Its
dominant eigenvalue ``lam`` is the unique root above ``1 - eps`` of the
characteristic equation ``F(lam) = 1`` with

    F(lam) = eps * int_I gamma(x) / (lam - (1 - eps) + x^2) dx.

Root finding is done on the shift ``alpha = lam - (1 - eps) = nu^2`` rather
than on ``lam`` itself, so that small shifts keep their relative accuracy.
Integrals with the Cauchy factor ``1/(nu^2 + x^2)`` are evaluated after the
substitution ``x = nu tan(theta)``, which removes the near-singular peak, and a
Gauss-Legendre rule in theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import roots_legendre

from .core import Grid, ModelParams, PopulationState, integrate, kernel_at_zero, kernel_function
from .errors import InvalidArgument, NoEigenvalue, NumericalFailure, OutOfDomain

DEFAULT_THETA_NODES = 2001


@dataclass(frozen=True, eq=False)
class SpectralData:
    epsilon: float
    lam: float
    nu: float
    alpha: float
    psi: np.ndarray
    psi_adjoint: np.ndarray
    residual: float
    psi_mass: float
    gamma0: float
    grid: Grid

    @property
    def rho(self) -> float:
        """Decay-rate parameter alpha/2 used in the convergence estimates."""
        return 0.5 * self.alpha

    def pairing(self) -> float:
        """Trapezoid quadrature of psi_adjoint * psi on the grid (ideally 1)."""
        return integrate(self.grid, self.psi_adjoint * self.psi)


@lru_cache(maxsize=8)
def _legendre(n: int):
    return roots_legendre(n)


@lru_cache(maxsize=8)
def _split_rule(n: int):
    """Gauss-Legendre nodes on [-1, 0] and [0, 1] with about n nodes in total.

    Splitting at theta = 0 (x = 0) keeps both panels' node clustering at the
    ends of the theta range, where x runs over the O(1) part of the interval.
    """
    z, w = _legendre(max(2, (n + 1) // 2))
    z = np.concatenate((0.5 * (z - 1.0), 0.5 * (z + 1.0)))
    w = np.concatenate((0.5 * w, 0.5 * w))
    return z, w


def _theta_rule(a: float, b: float, nu: float, n: int):
    lo, hi = math.atan(a / nu), math.atan(b / nu)
    z, w = _split_rule(n)
    # map [-1, 0] -> [lo, 0] and [0, 1] -> [0, hi]
    theta = np.where(z < 0, -lo * z, hi * z)
    weights = np.where(z < 0, -lo * w, hi * w)
    return theta, nu * np.tan(theta), weights


class _Characteristic:
    """F and its derivatives as functions of the shift alpha > 0."""

    def __init__(self, params: ModelParams, n_theta: int = DEFAULT_THETA_NODES):
        self.eps = params.epsilon
        self.a, self.b = params.interval.a, params.interval.b
        self.gamma = kernel_function(params.kernel, params.interval)
        self.n_theta = n_theta

    def F(self, alpha: float) -> float:
        nu = math.sqrt(alpha)
        _, x, w = _theta_rule(self.a, self.b, nu, self.n_theta)
        return self.eps / nu * float(w @ self.gamma(x))

    def dF(self, alpha: float, n: Optional[int] = None) -> float:
        """dF/dlam = -eps * int gamma / (alpha + x^2)^2."""
        return -self.square_integral(alpha, n or self.n_theta)

    def square_integral(self, alpha: float, n: int) -> float:
        nu = math.sqrt(alpha)
        theta, x, w = _theta_rule(self.a, self.b, nu, n)
        return self.eps / nu**3 * float(w @ (self.gamma(x) * np.cos(theta) ** 2))


def characteristic_F(params: ModelParams, lam: float, n_theta: int = DEFAULT_THETA_NODES) -> float:
    alpha = lam - (1.0 - params.epsilon)
    if not alpha > 0:
        raise OutOfDomain(f"F is defined for lam > 1 - eps = {1.0 - params.epsilon}, got {lam}")
    return _Characteristic(params, n_theta).F(alpha)


def _solve_alpha(char: _Characteristic, eps: float) -> float:
    lo, hi = 0.0, eps * eps
    for _ in range(200):
        if char.F(hi) < 1.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalFailure("could not bracket the dominant eigenvalue")

    # bisect down to a few ulps of the shift (tighter than 1e-14 * max(1, lam))
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if char.F(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    alpha = 0.5 * (lo + hi)

    # one Newton polish on the same quadrature
    r = char.F(alpha) - 1.0
    polished = alpha - r / char.dF(alpha)
    if lo <= polished <= hi and abs(char.F(polished) - 1.0) <= abs(r):
        alpha = polished
    return alpha


def solve_lambda(
    params: ModelParams,
    grid: Grid,
    tol: float = 1e-10,
    n_theta: int = DEFAULT_THETA_NODES,
) -> SpectralData:
    """Dominant eigenvalue, eigenvector and adjoint eigenvector.

    ``psi`` is normalized by ``int psi = 1`` (which is ``F(lam) = 1``) and
    ``psi_adjoint`` by ``<psi_adjoint, psi> = 1``; both are sampled on ``grid``.
    """
    eps = params.epsilon
    if eps == 0.0:
        raise NoEigenvalue("the eps = 0 operator has no isolated dominant eigenvalue")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    if grid.interval != params.interval:
        raise InvalidArgument("grid interval differs from the model interval")

    char = _Characteristic(params, n_theta)
    alpha = _solve_alpha(char, eps)
    psi_mass = char.F(alpha)
    residual = abs(psi_mass - 1.0)
    if residual > tol:
        raise NumericalFailure(f"characteristic residual {residual:.3e} exceeds tol {tol:.1e}")

    x2 = grid.nodes**2
    psi = eps * char.gamma(grid.nodes) / (alpha + x2)
    norm = char.square_integral(alpha, 2 * n_theta - 1)
    psi_adjoint = 1.0 / (norm * (alpha + x2))
    for arr in (psi, psi_adjoint):
        arr.setflags(write=False)
    return SpectralData(
        epsilon=eps,
        lam=(1.0 - eps) + alpha,
        nu=math.sqrt(alpha),
        alpha=alpha,
        psi=psi,
        psi_adjoint=psi_adjoint,
        residual=residual,
        psi_mass=psi_mass,
        gamma0=kernel_at_zero(params.kernel, params.interval, grid),
        grid=grid,
    )


def expansion_prediction(params: ModelParams, grid: Optional[Grid] = None) -> float:
    """Second-order small-eps prediction (1 - eps) + gamma(0)^2 pi^2 eps^2."""
    g0 = kernel_at_zero(params.kernel, params.interval, grid)
    eps = params.epsilon
    return (1.0 - eps) + (g0 * math.pi * eps) ** 2


def expansion_gap(spec: SpectralData) -> float:
    """|lam - (1 - eps) - gamma(0)^2 pi^2 eps^2|, computed on the shift."""
    return abs(spec.alpha - (spec.gamma0 * math.pi * spec.epsilon) ** 2)


def spectral_projection(spec: SpectralData, f0: PopulationState) -> float:
    """Coefficient c of the projection of f0 onto span(psi): <psi_adjoint, f0>."""
    values = np.asarray(f0.values, dtype=float)
    if values.shape != spec.psi.shape:
        raise InvalidArgument("initial state is not sampled on the spectral grid")
    if not np.any(values != 0):
        raise InvalidArgument("initial state is identically zero")
    return integrate(spec.grid, values * spec.psi_adjoint)


def apply_operator(epsilon: float, gamma: np.ndarray, grid: Grid, u: np.ndarray) -> np.ndarray:
    """Discretized A u with trapezoid quadrature for the mutation influx."""
    return (1.0 - epsilon - grid.nodes**2) * u + epsilon * gamma * integrate(grid, u)
