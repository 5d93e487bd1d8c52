"""Bounded domains in R^4: analytic balls and collocation-defined shapes.

Every domain exposes the same surface expected by the collocation solver:

* ``margin(x)``            signed distance-like inside margin (>0 inside),
* ``boundary_samples(n)``  quasi-uniform boundary points with outward
                           normals and a local length scale,
* ``charge_points()``      source points strictly outside the domain,
* ``nearest_boundary(x)``  closest boundary point, outward normal, distance,
* ``boundary_patch(x, d)`` refined boundary nodes around the point of the
                           boundary nearest to an interior source.

The named shapes mirror the two standard multi-spike examples: a dumbbell
(two balls joined by a thin tube) and a perforated ball (off-center hole,
so the critical points of the Robin function stay isolated).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainValidityError
from .pointsets import (circle_points, geodesic_cap, sphere2_points,
                        sphere3_points, tangent_frame)

# exterior charge shells, in units of charge_offset * local_scale: a near
# shell for boundary detail plus two far shells whose potentials are
# spectrally smooth on the boundary (they carry the low-order content).
RING_DEPTHS = (1.0, 4.0, 11.0)
RING_FRACTIONS = (0.60, 0.26, 0.14)
# geodesic shell radii for boundary refinement near a peaked source, in
# units of the source-to-boundary distance
PATCH_SHELLS = (0.15, 0.3, 0.5, 0.8, 1.3, 2.0, 3.2, 5.0, 8.0)


@dataclass
class BoundarySet:
    points: np.ndarray    # (n, 4)
    normals: np.ndarray   # (n, 4), outward
    scales: np.ndarray    # (n,), local inradius-like length


class Domain:
    """Shared helpers; concrete shapes implement the geometry."""

    kind = "abstract"
    force_collocation = False

    # -- geometry interface (overridden) ---------------------------------
    def margin(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary_samples(self, n: int) -> BoundarySet:
        raise NotImplementedError

    def boundary_proximities(self, x):
        """[(boundary point, outward normal, distance, local scale)] for
        every boundary piece, nearest first."""
        raise NotImplementedError

    def nearest_boundary(self, x):
        return self.boundary_proximities(x)[0]

    # -- shared -----------------------------------------------------------
    def inside(self, x) -> np.ndarray:
        return self.margin(x) > 0.0

    def require_interior(self, x, min_margin: float = 0.0, what: str = "point"):
        m = float(self.margin(x))
        if m <= min_margin:
            raise DomainValidityError(
                f"{what} has boundary margin {m:.3g}, need > {min_margin:.3g}")
        return m

    def charge_points(self, n: int, offset: float) -> np.ndarray:
        """Exterior sources: shells pushed off the boundary along normals."""
        chunks = []
        for depth_mult, frac in zip(RING_DEPTHS, RING_FRACTIONS):
            bs = self.boundary_samples(max(8, int(n * frac)))
            pts = bs.points + (offset * depth_mult * bs.scales)[:, None] * bs.normals
            keep = self.margin(pts) < -0.25 * offset * bs.scales
            chunks.append(pts[keep])
        return np.vstack(chunks)

    def boundary_patch(self, x: np.ndarray, n_per_shell: int = 14) -> np.ndarray:
        """Refined boundary nodes around the boundary point nearest to x."""
        bpt, normal, dist, _ = self.nearest_boundary(x)
        return self._patch_at(bpt, normal, dist, n_per_shell)

    def _patch_at(self, bpt, normal, dist, n_per_shell) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------


class BallDomain(Domain):
    """Ball of given center and radius; closed forms available unless
    ``force_collocation`` is set (then it behaves as a generic shape)."""

    kind = "ball"

    def __init__(self, center=(0.0, 0.0, 0.0, 0.0), radius=1.0,
                 force_collocation=False):
        if radius <= 0:
            raise ConfigError(f"ball radius must be positive, got {radius}")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.force_collocation = bool(force_collocation)
        self.inradius = self.radius
        pad = 0.05 * radius
        self.bounding_box = (self.center - radius - pad, self.center + radius + pad)

    @property
    def is_analytic_ball(self) -> bool:
        return not self.force_collocation

    def margin(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = self.radius - np.linalg.norm(x - self.center, axis=-1)
        return m if m.size > 1 else m[0]

    def boundary_samples(self, n: int) -> BoundarySet:
        dirs = sphere3_points(n)
        pts = self.center + self.radius * dirs
        scales = np.full(n, self.radius)
        return BoundarySet(pts, dirs, scales)

    def boundary_proximities(self, x):
        x = np.asarray(x, dtype=float)
        v = x - self.center
        r = np.linalg.norm(v)
        if r < 1e-13 * self.radius:
            normal = np.array([1.0, 0.0, 0.0, 0.0])
        else:
            normal = v / r
        return [(self.center + self.radius * normal, normal,
                 self.radius - r, self.radius)]

    def _patch_at(self, bpt, normal, dist, n_per_shell) -> np.ndarray:
        rel = np.asarray(PATCH_SHELLS) * max(dist, 1e-6 * self.radius) / self.radius
        dirs = geodesic_cap((bpt - self.center) / self.radius, rel, n_per_shell)
        return self.center + self.radius * dirs

    def interior_seed(self) -> np.ndarray:
        return self.center.copy()

    def meridian_system(self, n_rows: int = 480):
        """(rows, ring charges) in meridian coordinates, for the
        axisymmetric solver (mainly a validation path on balls)."""
        R = self.radius
        c1 = float(self.center[0])
        psi = np.linspace(0.0, np.pi, n_rows)
        rows = np.column_stack([c1 + R * np.cos(psi), R * np.sin(psi)])
        charges = []
        for fac, cnt in ((1.15, 96), (1.5, 48), (2.6, 24), (6.0, 12)):
            ps = np.linspace(0.0, np.pi, cnt)
            charges.append(np.column_stack([c1 + fac * R * np.cos(ps),
                                            fac * R * np.sin(ps)]))
        for sgn in (1.0, -1.0):
            lad = np.array([(c1 + sgn * (R + d * R), 0.0)
                            for d in 0.04 * 1.45 ** np.arange(12) if d < 6.0])
            charges.append(lad)
        return rows, np.vstack(charges)


# ---------------------------------------------------------------------------


class DumbbellDomain(Domain):
    """Two balls of radius ``lobe_radius`` centered at +-``lobe_center_x``
    along the first axis, joined by a handle whose waist radius is
    ``handle_radius``.

    The handle is a surface of revolution ``|x'| = rho + c*x1^2`` matched
    tangentially to the lobes, so the boundary is corner-free (a crease at
    a sphere-cylinder junction would put the shape outside the smooth-domain
    scope and wreck the collocation fit).  As the waist shrinks the domain
    decreases, so the Robin function at the lobe centers increases toward
    its handle-free limit.
    """

    kind = "dumbbell"
    is_analytic_ball = False

    def __init__(self, lobe_radius=1.0, lobe_center_x=1.05, handle_radius=0.1):
        if not 0 < handle_radius < lobe_radius:
            raise ConfigError("need 0 < handle_radius < lobe_radius")
        if lobe_center_x <= lobe_radius:
            # overlapping lobes would not be a dumbbell
            raise ConfigError("lobe_center_x must exceed lobe_radius")
        self.lobe_radius = float(lobe_radius)
        self.a = float(lobe_center_x)
        self.rho = float(handle_radius)
        self.centers = np.array([[-self.a, 0, 0, 0], [self.a, 0, 0, 0]])
        self._solve_neck()
        self.inradius = self.lobe_radius
        self.solver_hints = {"boundary_count": 1472, "charge_count": 480,
                             "residual_threshold": 5.0}
        lo = np.array([-self.a - lobe_radius] + [-lobe_radius] * 3)
        hi = np.array([self.a + lobe_radius] + [lobe_radius] * 3)
        pad = 0.05 * lobe_radius
        self.bounding_box = (lo - pad, hi + pad)

    def _solve_neck(self):
        """Tangency point t and parabola coefficient c of the neck profile."""
        a, R, rho = self.a, self.lobe_radius, self.rho

        def f(t):
            return np.sqrt(R * R - (t - a) ** 2)

        def F(t):
            return f(t) - (a - t) * t / (2.0 * f(t)) - rho

        lo, hi = a - R + 1e-9 * R, a - 1e-9 * R
        if F(lo) > 0 or F(hi) < 0:
            raise ConfigError("no tangential neck for these parameters")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if F(mid) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * R:
                break
        self.neck_t = 0.5 * (lo + hi)
        self.neck_c = (a - self.neck_t) / (2.0 * self.neck_t * f(self.neck_t))

    def neck_profile(self, x1):
        return self.rho + self.neck_c * np.asarray(x1) ** 2

    def _margins(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m0 = self.lobe_radius - np.linalg.norm(x - self.centers[0], axis=-1)
        m1 = self.lobe_radius - np.linalg.norm(x - self.centers[1], axis=-1)
        s = np.linalg.norm(x[:, 1:], axis=-1)
        prof = self.neck_profile(x[:, 0])
        slope = 2.0 * self.neck_c * np.abs(x[:, 0])
        # distance-like margin of the neck wall, valid near the wall; the
        # neck region only exists for |x1| <= t (its end caps are interior
        # to the lobes, so they carry no boundary of their own)
        m_wall = (prof - s) / np.sqrt(1.0 + slope**2)
        mt = np.where(np.abs(x[:, 0]) <= self.neck_t, m_wall, -np.inf)
        return m0, m1, mt

    def margin(self, x) -> np.ndarray:
        m0, m1, mt = self._margins(x)
        m = np.maximum(np.maximum(m0, m1), mt)
        return m if m.size > 1 else m[0]

    def _neck_wall(self, x1, girth_rot=0.0, n_girth=16):
        """Points and outward normals on the neck wall at one station."""
        sph = sphere2_points(n_girth, rot=girth_rot)
        s = float(self.neck_profile(x1))
        p = np.zeros((n_girth, 4))
        p[:, 0] = x1
        p[:, 1:] = s * sph
        slope = 2.0 * self.neck_c * x1
        nrm = np.zeros((n_girth, 4))
        nrm[:, 0] = -slope
        nrm[:, 1:] = sph
        nrm /= np.sqrt(1.0 + slope**2)
        return p, nrm

    def _collar_rings(self, which: int, offsets, n_girth: int, rot: float = 0.0):
        """Rings on lobe ``which`` at angular offsets from the junction circle
        (the fine-structure zone of every harmonic fit on this shape)."""
        c = self.centers[which]
        R = self.lobe_radius
        sgn = np.sign(c[0])
        # junction circle direction from this lobe center: first component
        # sgn*cos(psi*) with cos(psi*) = (t - a)/R
        psi_star = np.arccos(np.clip((self.neck_t - abs(c[0])) / R, -1, 1))
        pts, nrm = [], []
        for k, phi in enumerate(offsets):
            psi = psi_star - phi
            if psi <= 0.02 or psi >= np.pi - 0.02:
                continue
            sph = sphere2_points(n_girth, rot=rot + 0.29 * (k + 1))
            w = np.zeros((n_girth, 4))
            w[:, 0] = sgn * np.cos(psi)
            w[:, 1:] = np.sin(psi) * sph
            pts.append(c + R * w)
            nrm.append(w)
        if not pts:
            return np.zeros((0, 4)), np.zeros((0, 4))
        return np.vstack(pts), np.vstack(nrm)

    def boundary_samples(self, n: int) -> BoundarySet:
        n_neck = max(160, int(0.25 * n))
        n_collar = max(96, int(0.18 * n))
        n_lobe = max(32, (n - n_neck - n_collar) // 2)
        pts, nrm, scl = [], [], []
        for c in self.centers:
            dirs = sphere3_points(n_lobe, rot=0.05 * c[0])
            p = c + self.lobe_radius * dirs
            keep = self.margin(p) < 1e-9
            pts.append(p[keep]), nrm.append(dirs[keep])
            scl.append(np.full(int(keep.sum()), self.lobe_radius))
        # junction collars on both lobes
        collar_offsets = (0.02, 0.05, 0.09, 0.15, 0.24, 0.38, 0.55)
        n_g = max(16, n_collar // (2 * len(collar_offsets)))
        for which in (0, 1):
            p, d = self._collar_rings(which, collar_offsets, n_g)
            keep = self.margin(p) < 1e-9
            pts.append(p[keep]), nrm.append(d[keep])
            scl.append(np.full(int(keep.sum()),
                               float(self.neck_profile(self.neck_t))))
        t = self.neck_t
        # stations clustered toward the junction ends
        u = np.linspace(-1.0, 1.0, int(np.clip(
            np.ceil(2 * t / (0.25 * self.rho)), 11, max(11, n_neck // 8))))
        stations = t * np.sign(u) * np.abs(u) ** 0.7 * 0.999
        n_girth = max(10, n_neck // len(stations))
        for k, xx in enumerate(stations):
            p, d = self._neck_wall(float(xx), girth_rot=0.37 * k, n_girth=n_girth)
            keep = self.margin(p) < 1e-9
            pts.append(p[keep]), nrm.append(d[keep])
            scl.append(np.full(int(keep.sum()), float(self.neck_profile(xx))))
        return BoundarySet(np.vstack(pts), np.vstack(nrm), np.concatenate(scl))

    def charge_points(self, n: int, offset: float) -> np.ndarray:
        chunks = []
        n_lobe_total = int(0.75 * n)
        for c in self.centers:
            for depth_mult, frac in zip(RING_DEPTHS, RING_FRACTIONS):
                cnt = max(8, int(0.5 * n_lobe_total * frac))
                dirs = sphere3_points(cnt, rot=0.07 * depth_mult + 0.03 * c[0])
                r = self.lobe_radius + offset * depth_mult * self.lobe_radius
                chunks.append(c + r * dirs)
        # junction collars: exterior necklaces straddling the tangency circle;
        # counts keep the in-ring spacing below the standoff depth, otherwise
        # the wall sees the discreteness of the charges
        flare = float(self.neck_profile(self.neck_t))
        for which in (0, 1):
            for depth, phis in ((0.13, (-0.06, 0.05, 0.16)),
                                (0.32, (-0.12, 0.1, 0.35))):
                r_g = (self.lobe_radius + depth) * min(1.0, flare + depth)
                n_g = int(np.clip(4.0 * np.pi * r_g**2 / (0.9 * depth) ** 2, 10, 56))
                p, d = self._collar_rings(which, phis, n_g, rot=0.43 * depth)
                q = p + self.lobe_radius * depth * d
                q = q[self.margin(q) < -0.2 * depth * self.lobe_radius]
                if len(q):
                    chunks.append(q)
        # neck: necklaces at depth ~ local radius so charge spacing stays
        # comparable to the depth (graininess control on the thin waist)
        t = self.neck_t
        for depth_fac, rot in ((1.2, 0.21), (3.0, 0.57)):
            x1 = -t
            k = 0
            while x1 <= t:
                s = float(self.neck_profile(x1))
                d = depth_fac * s
                n_g = max(8, int(4.0 * np.pi * (s + d) ** 2 / (0.9 * d) ** 2))
                n_g = min(n_g, 56)
                sph = sphere2_points(n_g, rot=rot * (k + 1))
                p = np.zeros((n_g, 4))
                p[:, 0] = x1
                p[:, 1:] = (s + d) * sph
                p = p[self.margin(p) < -0.2 * d]
                if len(p):
                    chunks.append(p)
                x1 += 0.8 * d
                k += 1
        pts = np.vstack(chunks)
        return pts[self.margin(pts) < 0.0]

    def boundary_proximities(self, x):
        x = np.asarray(x, dtype=float)
        cands = []
        for c in self.centers:
            v = x - c
            r = np.linalg.norm(v)
            nhat = v / r if r > 1e-13 else np.array([1.0, 0, 0, 0])
            cands.append((c + self.lobe_radius * nhat, nhat,
                          self.lobe_radius - r, self.lobe_radius))
        s = np.linalg.norm(x[1:])
        if s > 1e-13 and np.abs(x[0]) < self.neck_t:
            prof = float(self.neck_profile(x[0]))
            slope = 2.0 * self.neck_c * x[0]
            nhat = np.zeros(4)
            nhat[0] = -slope
            nhat[1:] = x[1:] / s
            nhat /= np.sqrt(1.0 + slope**2)
            bp = x.copy()
            bp[1:] = prof * x[1:] / s
            cands.append((bp, nhat, (prof - s) / np.sqrt(1.0 + slope**2), prof))
        # a piece is a genuine proximity only when the point is on its
        # inside (nonnegative distance) and the projection lands on the
        # union boundary
        kept = [c for c in cands
                if c[2] >= -1e-12 and self.margin(c[0]) < 1e-9]
        if not kept:
            kept = [max(cands, key=lambda tt: tt[2])]
        kept.sort(key=lambda tt: tt[2])
        return kept

    def _patch_at(self, bpt, normal, dist, n_per_shell) -> np.ndarray:
        # refinement near a lobe-sphere point; neck sources stay coarse
        for c in self.centers:
            if abs(np.linalg.norm(bpt - c) - self.lobe_radius) < 1e-7:
                rel = np.asarray(PATCH_SHELLS) * max(dist, 1e-8) / self.lobe_radius
                pts = c + self.lobe_radius * geodesic_cap(
                    (bpt - c) / self.lobe_radius, rel, n_per_shell)
                return pts[self.margin(pts) < 1e-9]
        pts = []
        for k, r in enumerate(np.asarray(PATCH_SHELLS) * max(dist, 1e-8)):
            x1 = bpt[0] + r * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
            for xx in x1[np.abs(x1) < self.neck_t]:
                p, _ = self._neck_wall(float(xx), girth_rot=0.31 * k,
                                       n_girth=max(6, n_per_shell // 2))
                pts.append(p)
        if not pts:
            return np.zeros((0, 4))
        pts = np.vstack(pts)
        return pts[self.margin(pts) < 1e-9]

    def interior_seed(self) -> np.ndarray:
        return self.centers[1].copy()

    def lobe_ball(self, which: int = 1) -> BallDomain:
        """The isolated lobe (limit shape of the handle width -> 0)."""
        return BallDomain(self.centers[which], self.lobe_radius)

    # -- axisymmetric reduction (for the meridian solver) -----------------

    def meridian_system(self, n_rows: int = 720):
        """(rows, ring charges) in meridian coordinates (x1, s)."""
        a, R, t = self.a, self.lobe_radius, self.neck_t
        psi_star = np.arccos(np.clip((t - a) / R, -1, 1))
        n_lobe = max(60, int(0.32 * n_rows))
        n_fine = max(40, int(0.5 * n_lobe))
        rows = []
        # lobe arcs, refined toward the junction
        coarse = np.linspace(0.0, psi_star - 0.25, n_lobe - n_fine)
        fine = psi_star - 0.25 * np.geomspace(1.0, 2e-4, n_fine)
        for sgn in (1.0, -1.0):
            for psi in np.concatenate([coarse, fine]):
                rows.append((sgn * (a + R * np.cos(psi)), R * np.sin(psi)))
        # neck wall, refined toward both junctions plus a waist cluster
        n_neck = max(60, n_rows - 2 * n_lobe)
        v = np.linspace(-1.0, 1.0, int(0.7 * n_neck))
        xs = t * np.sign(v) * np.abs(v) ** 0.6 * 0.9995
        xs = np.concatenate([xs, np.linspace(-0.3 * t, 0.3 * t,
                                             n_neck - len(v))])
        for xx in xs:
            rows.append((xx, float(self.neck_profile(xx))))
        rows = np.array(sorted(set(rows)))
        # charges: normal offsets from a coarse meridian, several depths,
        # plus axis ladders beyond the poles (images of axis sources)
        charges = []
        for stride, depth_fac in ((5, 2.5), (15, 9.0), (45, 30.0)):
            sub = rows[::stride]
            spacing = np.full(len(sub), 2.0 * t / 40.0)
            for k, (x1, s) in enumerate(sub):
                n2 = self._meridian_normal(x1, s)
                d = depth_fac * self._meridian_spacing(rows, x1, s)
                q = np.array([x1, s]) + d * n2
                p4 = np.array([q[0], q[1], 0.0, 0.0])
                if self.margin(p4) < -0.3 * d:
                    charges.append((q[0], max(q[1], 0.0)))
        for sgn in (1.0, -1.0):
            pole = sgn * (a + R)
            for dk in 0.04 * 1.45 ** np.arange(12):
                if dk < 6.0:
                    charges.append((pole + sgn * dk * R, 0.0))
        charges.append((0.0, 12.0 * R))
        return rows, np.array(sorted(set(charges)))

    def _meridian_normal(self, x1, s):
        if abs(x1) < self.neck_t and s < float(self.neck_profile(x1)) + 1e-9 \
                and s > 0.99 * float(self.neck_profile(x1)) - 1e-9:
            slope = 2.0 * self.neck_c * x1
            n = np.array([-slope, 1.0])
            return n / np.linalg.norm(n)
        c1 = self.a if x1 > 0 else -self.a
        n = np.array([x1 - c1, s])
        nn = np.linalg.norm(n)
        return n / nn if nn > 1e-13 else np.array([1.0, 0.0])

    @staticmethod
    def _meridian_spacing(rows, x1, s, k: int = 2):
        d2 = (rows[:, 0] - x1) ** 2 + (rows[:, 1] - s) ** 2
        return float(np.sqrt(np.partition(d2, k)[k]))


# ---------------------------------------------------------------------------


class PerforatedDomain(Domain):
    """Ball with a strictly interior spherical hole."""

    kind = "perforated"
    is_analytic_ball = False

    def __init__(self, outer_radius=1.0, hole_center=(0.3, 0.0, 0.0, 0.0),
                 hole_radius=0.25, center=(0.0, 0.0, 0.0, 0.0)):
        self.center = np.asarray(center, dtype=float)
        self.outer_radius = float(outer_radius)
        self.hole_center = np.asarray(hole_center, dtype=float)
        self.hole_radius = float(hole_radius)
        gap = outer_radius - np.linalg.norm(self.hole_center - self.center) - hole_radius
        if hole_radius <= 0 or gap <= 0:
            raise ConfigError("hole must sit strictly inside the outer ball")
        self.inradius = min(0.5 * gap, hole_radius)
        self.solver_hints = {"boundary_count": 1280, "charge_count": 352}
        pad = 0.05 * outer_radius
        self.bounding_box = (self.center - outer_radius - pad,
                             self.center + outer_radius + pad)

    def margin(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m_out = self.outer_radius - np.linalg.norm(x - self.center, axis=-1)
        m_hole = np.linalg.norm(x - self.hole_center, axis=-1) - self.hole_radius
        m = np.minimum(m_out, m_hole)
        return m if m.size > 1 else m[0]

    def boundary_samples(self, n: int) -> BoundarySet:
        # the hole needs angular resolution comparable to the outer sphere,
        # not an area-proportional share
        n_hole = max(256, int(0.40 * n))
        n_out = max(32, n - n_hole)
        d_out = sphere3_points(n_out)
        d_hole = sphere3_points(n_hole, rot=0.41)
        pts = np.vstack([self.center + self.outer_radius * d_out,
                         self.hole_center + self.hole_radius * d_hole])
        nrm = np.vstack([d_out, -d_hole])   # outward of Omega points into the hole
        scl = np.concatenate([np.full(n_out, self.outer_radius),
                              np.full(n_hole, self.hole_radius)])
        return BoundarySet(pts, nrm, scl)

    def charge_points(self, n: int, offset: float) -> np.ndarray:
        # outer shells from the generic builder; hole shells capped so they
        # stay inside the hole
        n_hole = max(128, int(0.35 * n))
        n_out = max(32, n - n_hole)
        chunks = []
        for depth_mult, frac in zip(RING_DEPTHS, RING_FRACTIONS):
            dirs = sphere3_points(max(8, int(n_out * frac)), rot=0.07 * depth_mult)
            r = self.outer_radius * (1.0 + offset * depth_mult)
            chunks.append(self.center + r * dirs)
        for rel, frac in ((0.62, 0.6), (0.30, 0.4)):
            dirs = sphere3_points(max(8, int(n_hole * frac)), rot=0.13 * rel)
            chunks.append(self.hole_center + rel * self.hole_radius * dirs)
        chunks.append(self.hole_center[None, :])
        return np.vstack(chunks)

    def boundary_proximities(self, x):
        x = np.asarray(x, dtype=float)
        v_out = x - self.center
        r_out = np.linalg.norm(v_out)
        n_out = v_out / r_out if r_out > 1e-13 else np.array([1.0, 0, 0, 0])
        cand_out = (self.center + self.outer_radius * n_out, n_out,
                    self.outer_radius - r_out, self.outer_radius)
        v_h = x - self.hole_center
        r_h = np.linalg.norm(v_h)
        n_h = v_h / r_h if r_h > 1e-13 else np.array([1.0, 0, 0, 0])
        cand_hole = (self.hole_center + self.hole_radius * n_h, -n_h,
                     r_h - self.hole_radius, self.hole_radius)
        cands = [cand_out, cand_hole]
        cands.sort(key=lambda tt: abs(tt[2]))
        return cands

    def _patch_at(self, bpt, normal, dist, n_per_shell) -> np.ndarray:
        on_hole = abs(np.linalg.norm(bpt - self.hole_center) - self.hole_radius) < \
            abs(np.linalg.norm(bpt - self.center) - self.outer_radius)
        if on_hole:
            c, R = self.hole_center, self.hole_radius
        else:
            c, R = self.center, self.outer_radius
        rel = np.asarray(PATCH_SHELLS) * max(dist, 1e-8) / R
        return c + R * geodesic_cap((bpt - c) / R, rel, n_per_shell)

    def interior_seed(self) -> np.ndarray:
        # a point in the thick region, opposite the hole
        u = self.hole_center - self.center
        nu = np.linalg.norm(u)
        direction = -u / nu if nu > 1e-13 else np.array([1.0, 0, 0, 0])
        return self.center + 0.5 * self.outer_radius * direction


# ---------------------------------------------------------------------------
# domain files: plain-text key=value


def _parse_floats(s: str):
    return tuple(float(t) for t in s.replace(",", " ").split())


def domain_from_dict(cfg: dict) -> Domain:
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind is None:
        raise ConfigError("domain file is missing the key 'kind'")
    force = False
    if kind == "collocation":
        force = True
        kind = cfg.pop("shape", "ball")
    known = {
        "ball": {"center", "radius"},
        "dumbbell": {"lobe_radius", "lobe_center_x", "handle_radius"},
        "perforated": {"outer_radius", "hole_center", "hole_radius", "center"},
    }
    if kind not in known:
        raise ConfigError(f"unknown domain kind '{kind}'")
    extra = {"boundary_count", "charge_count", "charge_offset"}
    bad = set(cfg) - known[kind] - extra
    if bad:
        raise ConfigError(f"unknown domain key '{sorted(bad)[0]}' for kind={kind}")
    vec_keys = {"center", "hole_center"}
    kw = {}
    for key, val in cfg.items():
        if key in extra:
            continue
        kw[key] = _parse_floats(val) if key in vec_keys else float(val)
    if kind == "ball":
        dom = BallDomain(**kw, force_collocation=force)
    elif kind == "dumbbell":
        dom = DumbbellDomain(**kw)
    else:
        dom = PerforatedDomain(**kw)
    dom.solver_hints = {k: int(float(cfg[k])) if k != "charge_offset"
                        else float(cfg[k]) for k in extra if k in cfg}
    return dom


def read_keyvalue_file(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"malformed line (expected key=value): {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def domain_from_file(path) -> Domain:
    return domain_from_dict(read_keyvalue_file(path))
