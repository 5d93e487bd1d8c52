"""Deterministic point sets: spheres, spherical designs, low-discrepancy boxes.

The collocation solver and the quadrature engine never use wall-clock
randomness; every point family here is a pure function of its arguments so
runs are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from itertools import combinations, product

# irrationals for the super-Fibonacci spiral on S^3
_PHI1 = np.sqrt(2.0)
_PHI2 = 1.5337511687552042


def sphere3_points(n: int, rot: float = 0.0) -> np.ndarray:
    """n near-uniform points on the unit S^3 (super-Fibonacci spiral).

    ``rot`` offsets the two spiral phases so independent families do not
    alias against each other.
    """
    i = np.arange(n, dtype=float)
    s = (i + 0.5) / n
    r = np.sqrt(s)
    rr = np.sqrt(1.0 - s)
    a = 2.0 * np.pi * (i / _PHI1 + rot)
    b = 2.0 * np.pi * (i / _PHI2 + rot)
    return np.column_stack([r * np.sin(a), r * np.cos(a),
                            rr * np.sin(b), rr * np.cos(b)])


_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def sphere2_points(n: int, rot: float = 0.0) -> np.ndarray:
    """n Fibonacci points on the unit S^2."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    th = 2.0 * np.pi * (i / _GOLDEN + rot)
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def circle_points(n: int, rot: float = 0.0) -> np.ndarray:
    th = 2.0 * np.pi * (np.arange(n) / n + rot)
    return np.column_stack([np.cos(th), np.sin(th)])


def tangent_frame(unit: np.ndarray) -> np.ndarray:
    """Columns: an orthonormal basis of the tangent space at ``unit`` in R^4."""
    b = unit / np.linalg.norm(unit)
    vs = []
    for e in np.eye(4):
        v = e - (e @ b) * b
        for u in vs:
            v -= (v @ u) * u
        nv = np.linalg.norm(v)
        if nv > 1e-10:
            vs.append(v / nv)
        if len(vs) == 3:
            break
    return np.column_stack(vs)


def geodesic_cap(center: np.ndarray, shell_radii, n_per_shell: int) -> np.ndarray:
    """Points on concentric geodesic circles around ``center`` on S^3.

    ``shell_radii`` are geodesic radii (radians); shells past pi/2 are
    dropped.  Used to refine collocation near a boundary peak.
    """
    b = center / np.linalg.norm(center)
    T = tangent_frame(b)
    chunks = []
    for k, rho in enumerate(shell_radii):
        if rho <= 0 or rho >= 0.5 * np.pi:
            continue
        dirs = sphere2_points(n_per_shell, rot=0.173 * (k + 1)) @ T.T
        chunks.append(np.cos(rho) * b + np.sin(rho) * dirs)
    if not chunks:
        return np.zeros((0, 4))
    return np.vstack(chunks)


def halton(n: int, dim: int, skip: int = 10) -> np.ndarray:
    """Classic Halton sequence in [0,1)^dim (bases 2,3,5,7)."""
    primes = (2, 3, 5, 7)[:dim]
    out = np.empty((n, dim))
    idx = np.arange(skip, skip + n)
    for d, p in enumerate(primes):
        res = np.zeros(n)
        ii = idx.copy()
        scale = 1.0 / p
        while ii.max() > 0:
            res += (ii % p) * scale
            ii //= p
            scale /= p
        out[:, d] = res
    return out


def box_points(n: int, lo, hi, seed: int = 0) -> np.ndarray:
    """Scrambled-Sobol points in the box [lo, hi] (deterministic per seed).

    Draws the next power of two and truncates, keeping the Sobol balance
    properties intact.
    """
    from scipy.stats import qmc

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    eng = qmc.Sobol(d=len(lo), scramble=True, seed=seed)
    m = max(1, int(np.ceil(np.log2(max(n, 2)))))
    u = eng.random_base2(m)[:n]
    return lo + u * (hi - lo)


def ball_points(n: int, center, radius: float, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points in a solid 4-ball (radial Halton + S^3 spiral)."""
    u = halton(n, 1, skip=29)[:, 0]
    r = radius * u**0.25
    return np.asarray(center) + r[:, None] * sphere3_points(n, rot=0.289)


def _f4_design() -> np.ndarray:
    """48-point spherical 7-design on S^3 (24-cell plus its dual)."""
    pts = set()
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i, j in combinations(range(4), 2):
        for si, sj in product((1.0, -1.0), repeat=2):
            v = [0.0] * 4
            v[i], v[j] = si * inv_sqrt2, sj * inv_sqrt2
            pts.add(tuple(v))
    for i in range(4):
        for s in (1.0, -1.0):
            v = [0.0] * 4
            v[i] = s
            pts.add(tuple(v))
    for signs in product((0.5, -0.5), repeat=4):
        pts.add(tuple(signs))
    return np.array(sorted(pts))


def _24cell() -> np.ndarray:
    """24-cell vertices: a spherical 5-design on S^3."""
    pts = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i, j in combinations(range(4), 2):
        for si, sj in product((1.0, -1.0), repeat=2):
            v = [0.0] * 4
            v[i], v[j] = si * inv_sqrt2, sj * inv_sqrt2
            pts.append(v)
    return np.array(pts)


def _product_rule(n_t1: int, n_t2: int, n_phi: int):
    """Gauss-Chebyshev x Gauss x trapezoid rule on S^3 angles.

    theta1 carries the sin^2 weight, i.e. a Chebyshev weight of the second
    kind in cos(theta1); theta2's sin weight is flat in cos(theta2).  Exact
    fallback for angular degrees beyond the fixed designs; weights sum to
    the surface measure.
    """
    from numpy.polynomial.legendre import leggauss

    k = np.arange(1, n_t1 + 1)
    th1 = k * np.pi / (n_t1 + 1.0)     # Chebyshev-2 nodes in cos(theta1)
    w1 = np.pi / (n_t1 + 1.0) * np.sin(th1) ** 2
    c2, w2 = leggauss(n_t2)            # cos(theta2) uniform in [-1,1]
    th2 = np.arccos(c2)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    TH1, TH2, PHI = np.meshgrid(th1, th2, phi, indexing="ij")
    W = (w1[:, None, None] * w2[None, :, None]
         * np.full(n_phi, wphi)[None, None, :]).ravel()
    pts = np.column_stack([
        np.cos(TH1).ravel(),
        (np.sin(TH1) * np.cos(TH2)).ravel(),
        (np.sin(TH1) * np.sin(TH2) * np.cos(PHI)).ravel(),
        (np.sin(TH1) * np.sin(TH2) * np.sin(PHI)).ravel(),
    ])
    return pts, W


def sphere3_design(degree: int = 7):
    """(points, weights) averaging rule on S^3, exact for polynomials of the
    given total degree.  Weights sum to 1 (average, not surface integral).

    degree <= 5 uses the 24-cell, degree <= 7 the 48-point set; higher
    degrees fall back to a product Gauss rule sized for exactness.
    """
    if degree <= 5:
        pts = _24cell()
    elif degree <= 7:
        pts = _f4_design()
    else:
        n = degree // 2 + 2
        pts, w = _product_rule(n + 2, n, 2 * n + 2)
        return pts, w / w.sum()
    return pts, np.full(len(pts), 1.0 / len(pts))
