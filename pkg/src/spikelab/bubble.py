"""Bubble profiles on R^4 and their dilation/translation derivatives.

A bubble with scale ``delta`` and center ``xi`` is

    U(x) = c4 * delta / (delta^2 + |x-xi|^2),

the positive entire solution of ``-Lap U = U^3``.  Its scaled version
``mu**-0.5 * U`` solves ``-Lap U = mu U^3``.  The five kernel directions of
the linearization are the scage-weighted derivatives

    psi_0 = delta * dU/d(delta),    psi_j = delta * dU/d(xi_j),  j=1..4.

All functions are vectorized over the evaluation points: ``x`` may be a
single point of shape (4,) or a batch of shape (n, 4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C4
from .errors import DomainValidityError


@dataclass(frozen=True)
class BubbleParams:
    """One bubble: concentration scale, center, self-interaction weight."""

    delta: float
    xi: tuple
    mu: float = 1.0

    def __post_init__(self):
        if self.delta <= 0:
            raise DomainValidityError(f"delta must be positive, got {self.delta}")
        if self.mu <= 0:
            raise DomainValidityError(f"mu must be positive, got {self.mu}")
        object.__setattr__(self, "xi", tuple(float(c) for c in self.xi))
        if len(self.xi) != 4:
            raise DomainValidityError("xi must be a point in R^4")

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.xi)


def _r2(b: BubbleParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return ((x - b.center) ** 2).sum(axis=-1)


def bubble_value(b: BubbleParams, x) -> np.ndarray:
    """U(x); maximum c4/delta at the center, strictly positive.

    For tiny delta the naive form would square delta before use; evaluating
    via (c4/delta) / (1 + |x-xi|^2/delta^2) keeps delta down to ~1e-8 exact.
    """
    r2 = _r2(b, x)
    d = b.delta
    return (C4 / d) / (1.0 + r2 / (d * d))


def bubble_value_scaled(b: BubbleParams, x) -> np.ndarray:
    """mu**-0.5 * U(x), the profile adapted to -Lap u = mu u^3."""
    return bubble_value(b, x) / np.sqrt(b.mu)


def bubble_derivative(b: BubbleParams, j: int, x) -> np.ndarray:
    """psi_j(x) for j in 0..4.

    j=0: c4*delta*(|x-xi|^2-delta^2)/(delta^2+|x-xi|^2)^2
    j>=1: 2*c4*delta^2*(x_j-xi_j)/(delta^2+|x-xi|^2)^2
    """
    if not 0 <= j <= 4:
        raise DomainValidityError(f"derivative index must be 0..4, got {j}")
    r2 = _r2(b, x)
    d = b.delta
    q = 1.0 + r2 / (d * d)           # (delta^2+r^2)/delta^2
    if j == 0:
        return (C4 / d) * (r2 / (d * d) - 1.0) / (q * q)
    x = np.asarray(x, dtype=float)
    comp = x[..., j - 1] - b.xi[j - 1]
    return (2.0 * C4 / (d * d)) * comp / (q * q)


def bubble_gradient(b: BubbleParams, x) -> np.ndarray:
    """Spatial gradient of U at x (shape (..., 4))."""
    x = np.asarray(x, dtype=float)
    r2 = _r2(b, x)
    d = b.delta
    q = d * d + r2
    return -2.0 * C4 * d * (x - b.center) / (q * q)[..., None]


def bubble_laplacian(b: BubbleParams, x) -> np.ndarray:
    """Lap U = -U^3 in closed form (used as a finite-difference oracle)."""
    return -bubble_value(b, x) ** 3
