"""Universal constants and closed-form radial integrals.

Everything downstream (projection expansions, energy levels, the reduced
functional) is written in terms of the quantities collected here:

* ``C4 = 2*sqrt(2)``        -- normalization of the standard bubble profile,
* ``OMEGA3 = 2*pi**2``      -- surface measure of the unit sphere S^3 in R^4,
* ``ALPHA4 = 1/(2*OMEGA3)`` -- Newtonian kernel constant in R^4,
* ``A = C4/ALPHA4``         -- mass of the cubed unit bubble over R^4,
* ``I(p)``                  -- the radial integral of (1+|y|^2)^(-p) over R^4,
* ``sigma``                 -- the 5x5 matrix of linearized-kernel
                               normalization integrals (diagonal).

The leading energy level per component is ``(C4**4/4) * I(4) = 8*pi**2/3``
for unit self-interaction.  All closed forms carry an independent quadrature
oracle used by the test suite and by ``spikelab verify-all``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainValidityError

C4 = 2.0 * math.sqrt(2.0)
OMEGA3 = 2.0 * math.pi**2
ALPHA4 = 1.0 / (2.0 * OMEGA3)

#: exponents for which the constants table pre-evaluates I(p)
_TABLE_EXPONENTS = (2.5, 8.0 / 3.0, 3.0, 10.0 / 3.0, 4.0, 5.0, 6.0)


def radial_integral(p: float) -> float:
    """Integral of (1+|y|^2)^(-p) over R^4, in closed form.

    Reduces to ``OMEGA3 * int_0^inf t^3 (1+t^2)^(-p) dt`` and the middle
    integral equals ``1/(2(p-1)(p-2))`` for p > 2.  Diverges
    (logarithmically at p == 2) otherwise.
    """
    if p <= 2.0:
        raise DomainValidityError(
            f"radial integral diverges for exponent p={p} (requires p > 2)")
    return OMEGA3 / (2.0 * (p - 1.0) * (p - 2.0))


def radial_integral_quadrature(p: float) -> float:
    """Adaptive-quadrature oracle for :func:`radial_integral`.

    Independent path: 1-D adaptive quadrature of the radial profile, split
    at t=1 and mapped to a bounded interval for the tail.
    """
    if p <= 2.0:
        raise DomainValidityError(
            f"radial integral diverges for exponent p={p} (requires p > 2)")
    head, _ = quad(lambda t: t**3 / (1.0 + t * t) ** p, 0.0, 1.0,
                   epsabs=1e-14, epsrel=1e-13)
    # tail via t = 1/s so the interval is bounded: dt = -ds/s^2
    tail, _ = quad(lambda s: (1.0 / s) ** 3 / (1.0 + 1.0 / s**2) ** p / s**2,
                   0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return OMEGA3 * (head + tail)


def sigma_entry(j: int, k: int) -> float:
    """Entry (j,k) of the normalization matrix sigma, 0 <= j,k <= 4.

    Diagonal entries are ``32*pi**2/15`` (same value for the dilation index
    0 and the four translation indices); off-diagonal entries vanish by
    parity of the angular factors.
    """
    if not (0 <= j <= 4 and 0 <= k <= 4):
        raise DomainValidityError(f"sigma index out of range: ({j},{k})")
    if j != k:
        return 0.0
    # int_0^inf t^3 (t^2-1)^2 (1+t^2)^-6 dt = int_0^inf t^5 (1+t^2)^-6 dt = 1/60
    return C4**4 * OMEGA3 / 60.0


def sigma_entry_quadrature(j: int, k: int) -> float:
    """4-D quadrature oracle for :func:`sigma_entry` via radial reduction.

    The angular averages of ``y_j*y_k`` over S^3 are ``delta_jk/4``; the
    remaining radial integrals are done adaptively.
    """
    if not (0 <= j <= 4 and 0 <= k <= 4):
        raise DomainValidityError(f"sigma index out of range: ({j},{k})")

    def radial(f):
        head, _ = quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        tail, _ = quad(lambda s: f(1.0 / s) / s**2, 1e-12, 1.0,
                       epsabs=1e-14, epsrel=1e-13)
        return OMEGA3 * (head + tail)

    if j == 0 and k == 0:
        return C4**4 * radial(lambda t: t**3 * (t * t - 1.0) ** 2 / (1.0 + t * t) ** 6)
    if j == 0 or k == 0:
        # integrand odd in the translation coordinate: angular average 0
        return 0.0
    if j == k:
        # 4 * c4^4 * y_j^2: angular average of y_j^2 is |y|^2/4
        return 4.0 * C4**4 * radial(lambda t: t**3 * (t * t / 4.0) / (1.0 + t * t) ** 6)
    return 0.0


@dataclass(frozen=True)
class ConstantsTable:
    """All universal constants, frozen at construction."""

    c4: float = C4
    omega3: float = OMEGA3
    alpha4: float = ALPHA4
    A: float = C4 / ALPHA4
    I: dict = field(default_factory=lambda: {
        p: radial_integral(p) for p in _TABLE_EXPONENTS})
    sigma: np.ndarray = field(default_factory=lambda: np.diag(
        [sigma_entry(j, j) for j in range(5)]))

    @property
    def leading_level(self) -> float:
        """Per-component leading energy level for unit self-interaction,
        (c4^4/4) * I(4) = 8*pi^2/3."""
        return self.c4**4 / 4.0 * self.I[4.0]

    def as_dict(self) -> dict:
        """Plain-dict view used by the CLI JSON dump."""
        out = {
            "c4": self.c4,
            "omega3": self.omega3,
            "alpha4": self.alpha4,
            "A": self.A,
            "leading_level": self.leading_level,
        }
        for p in sorted(self.I):
            label = f"I_{p:g}" if float(p).is_integer() else f"I_{p:.6g}"
            out[label] = self.I[p]
        out["sigma_diag"] = [float(self.sigma[j, j]) for j in range(5)]
        return out


TABLE = ConstantsTable()

# construction-time closure checks: the two routes to A must agree exactly
# at the double-precision level, and sigma must be symmetric positive diag.
assert abs(TABLE.A - C4**3 * radial_integral(3.0)) <= 1e-12 * TABLE.A
assert all(TABLE.sigma[j, j] > 0 for j in range(5))
