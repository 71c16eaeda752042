"""Potential terms of the target density exp(-F(x) - G(x)) / Z.

F is smooth (value, gradient, Lipschitz and strong-convexity constants),
G is convex but possibly nonsmooth (value only; proximal evaluation
lives in :mod:`proxlangevin.inexact_prox`). Potentials are immutable and
shareable across chains.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linops import grad_apply

__all__ = [
    "DomainError",
    "SmoothPotential",
    "NonsmoothPotential",
    "gaussian_likelihood",
    "poisson_likelihood",
    "l1_potential",
    "tv_potential",
    "zero_potential",
    "nonneg_indicator",
]


class DomainError(ValueError):
    """Evaluation requested outside the domain of a potential."""


@dataclass(frozen=True)
class SmoothPotential:
    """Smooth convex potential F with gradient and curvature constants.

    Attributes
    ----------
    value : callable
        x -> float; +inf outside the domain.
    gradient : callable
        x -> ndarray of x's shape; raises DomainError outside the domain.
    lipschitz_L : float
        Lipschitz constant of the gradient (an upper bound).
    strong_convexity : float
        Strong convexity modulus, 0 for merely convex F.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    strong_convexity: float = 0.0

    def __post_init__(self):
        if self.lipschitz_L < 0 or self.strong_convexity < 0:
            raise ValueError("curvature constants must be nonnegative")
        if self.strong_convexity > self.lipschitz_L * (1 + 1e-12):
            raise ValueError("strong convexity cannot exceed the Lipschitz constant")


@dataclass(frozen=True)
class NonsmoothPotential:
    """Proper convex lsc potential G, evaluated by value only.

    `domain_ok` reports whether value(x) is finite; value returns +inf
    exactly when it is not.
    """

    value: Callable[[np.ndarray], float]
    domain_ok: Callable[[np.ndarray], bool]


def gaussian_likelihood(A, y, sigma):
    """Negative log-likelihood of Gaussian data: ||Ax - y||^2 / (2 sigma^2).

    Parameters
    ----------
    A : LinearOperator
        Forward operator with `apply`, `adjoint` and `spectrum_bounds`.
    y : ndarray
        Observed data, shaped like A x.
    sigma : float
        Noise standard deviation, > 0.
    """
    if sigma <= 0:
        raise ValueError(f"noise std must be positive, got {sigma}")
    y = np.asarray(y, dtype=float)
    inv_var = 1.0 / sigma**2
    lam_min, lam_max = A.spectrum_bounds()

    def value(x):
        r = A.apply(x) - y
        return 0.5 * inv_var * float(np.sum(r * r))

    def gradient(x):
        return inv_var * A.adjoint(A.apply(x) - y)

    return SmoothPotential(
        value=value,
        gradient=gradient,
        lipschitz_L=lam_max * inv_var,
        strong_convexity=lam_min * inv_var,
    )


def poisson_likelihood(A, y, background):
    """Negative log-likelihood of Poisson counts with known background.

    F(x) = sum_i (Ax)_i - y_i log((Ax)_i + b_i), finite wherever
    Ax + b > 0 (which contains the nonnegative orthant for a
    positivity-preserving A and positive background b). The chain's
    nonnegativity constraint is carried by the nonsmooth term, so F is
    kept finite slightly outside the orthant; this is what lets the
    backtracking line search probe trial points near the boundary.

    The Lipschitz constant is the global bound ||A||^2 max_i(y_i/b_i^2),
    which is typically very conservative for small backgrounds.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("count data must be nonnegative")
    background = np.broadcast_to(np.asarray(background, dtype=float), y.shape).copy()
    if np.any(background <= 0):
        raise ValueError("background must be positive componentwise")
    _, lam_max = A.spectrum_bounds()
    lipschitz = lam_max * float(np.max(y / background**2))
    ones_back = A.adjoint(np.ones_like(y))

    def value(x):
        ax = A.apply(x)
        rate = ax + background
        if np.min(rate) <= 0:
            return np.inf
        return float(np.sum(ax) - np.sum(y * np.log(rate)))

    def gradient(x):
        rate = A.apply(x) + background
        if np.min(rate) <= 0:
            raise DomainError("gradient requested where Ax + background <= 0")
        return ones_back - A.adjoint(y / rate)

    return SmoothPotential(
        value=value,
        gradient=gradient,
        lipschitz_L=lipschitz,
        strong_convexity=0.0,
    )


def l1_potential(weight):
    """G(z) = weight * ||z||_1 with full domain."""
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")

    def value(z):
        return weight * float(np.sum(np.abs(z)))

    return NonsmoothPotential(value=value, domain_ok=lambda z: True)


def tv_potential(weight, nonneg=False):
    """Isotropic total variation, optionally plus the nonnegativity indicator.

    G(x) = weight * sum_ij sqrt((Dh x)_ij^2 + (Dv x)_ij^2), with forward
    differences and Neumann boundary; +inf outside the nonnegative
    orthant when `nonneg` is set.
    """
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")

    def domain_ok(x):
        return (not nonneg) or bool(np.all(x >= 0))

    def value(x):
        if not domain_ok(x):
            return np.inf
        field = grad_apply(x)
        return weight * float(np.sum(np.sqrt(field[0] ** 2 + field[1] ** 2)))

    return NonsmoothPotential(value=value, domain_ok=domain_ok)


def zero_potential():
    """G identically zero (the sampler then degenerates to a fully explicit scheme)."""
    return NonsmoothPotential(value=lambda x: 0.0, domain_ok=lambda x: True)


def nonneg_indicator():
    """G = indicator of the nonnegative orthant."""

    def value(x):
        return 0.0 if np.all(x >= 0) else np.inf

    return NonsmoothPotential(value=value, domain_ok=lambda x: bool(np.all(x >= 0)))
