"""Green function, regular part, and Robin function on bounded 4-d domains.

Two evaluation paths share one interface:

* analytic balls use the image (Kelvin) closed form,
* every other shape (or a ball with ``force_collocation``) approximates the
  regular part by fundamental-solution charges placed outside the domain,
  fitted to the boundary data ``alpha4/|b - x|^2`` in the least-squares
  sense.

The collocation basis has three parts: global charge shells from the
boundary normals (near shell for detail, far shells for the smooth / low
order content, plus an explicit constant), a per-source ladder of charges
along the outward normal ray (it brackets the image point of the source,
which a global basis cannot represent), and, for sources close to the
boundary, extra collocation rows refining the data peak.  Deep sources skip
the row refinement, so they can be solved in batch against one precomputed
factorization of the base matrix.

Derivatives of the Robin function are central finite differences with one
Richardson level, the same code path for both evaluation methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constants import ALPHA4
from .domains import BallDomain, Domain
from .errors import (AccuracyError, ConditioningError, DomainValidityError,
                     NotCertifiableError, PreconditionError, SingularityError)
from .pointsets import box_points

_LADDER = 0.5 * 1.3 ** np.arange(14)   # ray charge offsets in units of source depth
_LADDER_CAP = 14.0                     # drop rungs beyond this many depths out


@dataclass
class SolverConfig:
    boundary_count: int = 768
    charge_count: int = 288
    charge_offset: float = 0.7          # x local scale, base unit for shells
    patch_threshold: float = 0.35       # x local scale: refine rows below this depth
    patch_per_shell: int = 14
    svd_rcond: float = 1e-13
    residual_threshold: float = 0.05    # relative boundary defect to flag unusable
    tau_margin: float = 0.02            # x inradius: minimum margin for robin()
    fd_step_grad: float = 1e-4          # x inradius
    fd_step_hess: float = 1e-3          # x inradius
    cache_quantum: float = 1e-6
    newton_max_iter: int = 30
    newton_gtol: float = 1e-9           # analytic path
    newton_gtol_colloc: float = 7e-4    # collocation noise floor
    dedupe_tol: float = 2e-3            # x inradius
    degenerate_rtol: float = 1e-3
    degree_boundary_samples: int = 16   # per box face
    degree_safety_margin: float = 1e-6  # min |grad tau| on the box boundary


@dataclass
class HarmonicCorrector:
    """Representation of y -> H(x, y) for one source x."""

    source: np.ndarray
    charges: np.ndarray            # (n, 4) locations, all strictly outside
    weights: np.ndarray            # (n,)
    const: float                   # coefficient of the constant harmonic
    residual: float                # max relative boundary defect
    usable: bool = True

    def evaluate(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if len(self.charges):
            d2 = ((pts[:, None, :] - self.charges[None, :, :]) ** 2).sum(-1)
            vals = (ALPHA4 / d2) @ self.weights + self.const
        else:
            vals = np.full(len(pts), self.const)
        return vals if vals.size > 1 else vals


def _kernel(pts, charges) -> np.ndarray:
    d2 = ((pts[:, None, :] - charges[None, :, :]) ** 2).sum(-1)
    return ALPHA4 / d2


class RobinEvaluator:
    """Computable tau, grad tau, Hess tau; houses G and H for a domain."""

    def __init__(self, domain: Domain, config: SolverConfig | None = None):
        self.domain = domain
        self.config = config or SolverConfig()
        hints = getattr(domain, "solver_hints", {})
        if "boundary_count" in hints:
            self.config.boundary_count = hints["boundary_count"]
        if "charge_count" in hints:
            self.config.charge_count = hints["charge_count"]
        if "charge_offset" in hints:
            self.config.charge_offset = hints["charge_offset"]
        if "residual_threshold" in hints:
            self.config.residual_threshold = hints["residual_threshold"]
        self.use_kelvin = getattr(domain, "is_analytic_ball", False)
        self._cache: dict = {}
        self._base = None

    # -- base collocation system (built once) -----------------------------

    def _ensure_base(self):
        if self._base is not None or self.use_kelvin:
            return
        cfg = self.config
        bs = self.domain.boundary_samples(cfg.boundary_count)
        charges = self.domain.charge_points(cfg.charge_count, cfg.charge_offset)
        A0 = np.hstack([_kernel(bs.points, charges),
                        np.ones((len(bs.points), 1))])
        try:
            U, S, Vt = np.linalg.svd(A0, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"base collocation SVD failed: {exc}")
        held = self.domain.boundary_samples(cfg.boundary_count // 3 + 17)
        self._base = {
            "rows": bs, "charges": charges, "A0": A0,
            "U": U, "S": S, "Vt": Vt,
            "held_points": held.points,
        }

    def _proximal(self, x: np.ndarray):
        """Boundary pieces close enough to matter for this source:
        always the nearest, plus any piece within 1.5x its patch range."""
        prox = self.domain.boundary_proximities(x)
        thr = max(1.5 * self.config.patch_threshold, 0.6)
        out = [prox[0]]
        for cand in prox[1:]:
            if 0.0 <= cand[2] < thr * cand[3]:
                out.append(cand)
        return out

    def _ladder(self, x: np.ndarray):
        """Ray charges along the outward normals toward every proximal
        boundary piece (they bracket the image singularities)."""
        prox = self._proximal(x)
        chunks = []
        for bpt, normal, dist, scale in prox:
            dist = max(dist, 1e-9 * self.domain.inradius)
            ts = _LADDER[_LADDER < _LADDER_CAP]
            pts = bpt[None, :] + (dist * ts)[:, None] * normal[None, :]
            keep = self.domain.margin(pts) < -0.05 * dist
            chunks.append(pts[keep])
        bpt, normal, dist, scale = prox[0]
        return np.vstack(chunks), bpt, normal, dist, scale

    def _is_shallow(self, x: np.ndarray) -> bool:
        thr = self.config.patch_threshold
        return any(dist < thr * scale
                   for _, _, dist, scale in self.domain.boundary_proximities(x))

    def _patch_rows(self, x: np.ndarray) -> np.ndarray:
        thr = self.config.patch_threshold
        chunks = [np.zeros((0, 4))]
        for bpt, normal, dist, scale in self._proximal(x):
            if dist < thr * scale:
                chunks.append(self.domain._patch_at(
                    bpt, normal, dist, self.config.patch_per_shell))
        return np.vstack(chunks)

    # -- corrector construction -------------------------------------------

    def build_corrector(self, xi) -> HarmonicCorrector:
        xi = np.asarray(xi, dtype=float)
        self.domain.require_interior(xi, 0.0, "corrector source")
        key = tuple(np.round(xi / self.config.cache_quantum).astype(np.int64))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.use_kelvin:
            corr = self._kelvin_corrector(xi)
        else:
            corr = self._mfs_corrector(xi)
        self._cache[key] = corr
        return corr

    def _kelvin_corrector(self, xi) -> HarmonicCorrector:
        c, R = self.domain.center, self.domain.radius
        v = xi - c
        r2 = float(v @ v)
        if r2 < (1e-9 * R) ** 2:
            return HarmonicCorrector(xi, np.zeros((0, 4)), np.zeros(0),
                                     ALPHA4 / R**2, 0.0)
        image = c + (R * R / r2) * v
        weight = R * R / r2
        return HarmonicCorrector(xi, image[None, :], np.array([weight]), 0.0, 0.0)

    def _mfs_corrector(self, xi) -> HarmonicCorrector:
        self._ensure_base()
        base = self._base
        cfg = self.config
        lad, bpt, normal, dist, scale = self._ladder(xi)
        shallow = self._is_shallow(xi)
        charges = np.vstack([base["charges"], lad])
        n_base = len(base["charges"])
        if shallow:
            # columns layout: [base charges, ladder, const]
            extra_rows = self._patch_rows(xi)
            rows = np.vstack([base["rows"].points, extra_rows])
            A = np.hstack([_kernel(rows, charges), np.ones((len(rows), 1))])
            g = ALPHA4 / ((rows - xi) ** 2).sum(-1)
            sol = sla.lstsq(A, g, cond=cfg.svd_rcond, lapack_driver="gelsy")[0]
            corr = HarmonicCorrector(xi, charges, sol[:-1], float(sol[-1]), 0.0)
        else:
            # columns layout: [base charges, const, ladder]
            rows = base["rows"].points
            g = ALPHA4 / ((rows - xi) ** 2).sum(-1)
            sol = self._bordered_solve(g[:, None], lad[None, :, :])[0]
            w = np.concatenate([sol[:n_base], sol[n_base + 1:]])
            corr = HarmonicCorrector(xi, charges, w, float(sol[n_base]), 0.0)
        corr.residual = self._boundary_defect(corr, g, rows)
        corr.usable = corr.residual <= cfg.residual_threshold
        return corr

    def _boundary_defect(self, corr, g_rows, rows) -> float:
        gscale = float(np.abs(g_rows).max())
        fit = corr.evaluate(rows)
        res_rows = float(np.abs(fit - g_rows).max())
        held = self._base["held_points"]
        g_held = ALPHA4 / ((held - corr.source) ** 2).sum(-1)
        res_held = float(np.abs(corr.evaluate(held) - g_held).max())
        return max(res_rows, res_held) / gscale

    def _bordered_solve(self, G, ladders):
        """Joint least squares over (base columns, per-source ladder).

        G: (n_rows, k) boundary data columns; ladders: (k, L, 4).
        Returns list of k weight vectors laid out as
        [base_charges, const, ladder].
        """
        out = []
        for k in range(G.shape[1]):
            out.append(self._bordered_solve_shared(
                G[:, k:k + 1], ladders[k])[:, 0])
        return out

    def _bordered_solve_shared(self, G, ladder) -> np.ndarray:
        """Bordered solve with one shared ladder for all data columns.

        The ladder block is solved on the projection of the data onto the
        orthogonal complement of the base range.  Directions of the ladder
        that the collocation rows barely see are truncated hard: fitting
        them would trade an invisible residual improvement for huge charge
        strengths (and garbage interior values).

        Returns weights of shape (n_base + 1 + L, k), layout
        [base_charges, const, ladder].
        """
        base = self._base
        cfg = self.config
        U, S, Vt = base["U"], base["S"], base["Vt"]
        rows = base["rows"].points
        s_inv = np.where(S > S[0] * cfg.svd_rcond, 1.0 / S, 0.0)
        UtG = U.T @ G
        E = _kernel(rows, ladder)
        UtE = U.T @ E
        PE = E - U @ UtE
        PG = G - U @ UtG
        Ue, Se, Vte = np.linalg.svd(PE, full_matrices=False)
        UtPG = Ue.T @ PG

        def solve_block(rel):
            se_inv = np.where(Se > rel * Se[0],
                              1.0 / np.where(Se > 0, Se, 1.0), 0.0)
            return Vte.T @ (se_inv[:, None] * UtPG)

        V = solve_block(1e-10)
        # blow-up guard: ladder directions the rows barely see must not be
        # fitted (huge strengths, garbage interior values); refit those
        # columns with hard truncation, drop the ladder if still wild
        scale = np.abs(G).max(axis=0) + 1e-300
        bad = np.abs(V).max(axis=0) > 1e3 * scale
        if np.any(bad):
            V_safe = solve_block(1e-3)
            V[:, bad] = V_safe[:, bad]
            still = np.abs(V).max(axis=0) > 1e3 * scale
            if np.any(still):
                V[:, still] = 0.0
        Y = s_inv[:, None] * (UtG - UtE @ V)
        W_base = Vt.T @ Y
        return np.vstack([W_base, V])

    # -- pointwise fields ---------------------------------------------------

    def regular_part(self, x, y) -> float:
        """H(x, y) via the corrector built at source x."""
        corr = self.build_corrector(x)
        vals = corr.evaluate(y)
        return float(vals) if np.ndim(vals) == 0 or np.size(vals) == 1 else vals

    def green(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for pt, name in ((x, "x"), (y, "y")):
            if self.domain.margin(pt) <= 0:
                raise DomainValidityError(f"green: {name} is not interior")
        d2 = float(((x - y) ** 2).sum())
        if d2 < (1e-9 * self.domain.inradius) ** 2:
            raise SingularityError("green: x == y")
        return ALPHA4 / d2 - self.regular_part(x, y)

    def robin(self, x) -> float:
        x = np.asarray(x, dtype=float)
        m = float(self.domain.margin(x))
        min_m = self.config.tau_margin * self.domain.inradius
        if m < min_m:
            raise AccuracyError(
                f"robin: margin {m:.3g} below safe threshold {min_m:.3g}",
                estimate=m)
        corr = self.build_corrector(x)
        if not corr.usable:
            raise AccuracyError(
                f"robin: corrector residual {corr.residual:.3g} above threshold",
                estimate=corr.residual)
        return float(corr.evaluate(x[None, :])[0])

    def robin_batch(self, pts) -> np.ndarray:
        """Vectorized tau over many interior points (used by FD stencils,
        searches and CSV grids).  Deep points share one batched solve."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(len(pts))
        if self.use_kelvin:
            c, R = self.domain.center, self.domain.radius
            s = ((pts - c) ** 2).sum(-1)
            return ALPHA4 * R * R / (R * R - s) ** 2
        self._ensure_base()
        cfg = self.config
        todo_deep, todo_shallow = [], []
        for i, x in enumerate(pts):
            key = tuple(np.round(x / cfg.cache_quantum).astype(np.int64))
            corr = self._cache.get(key)
            if corr is not None:
                out[i] = float(corr.evaluate(x[None, :])[0])
            else:
                (todo_shallow if self._is_shallow(x)
                 else todo_deep).append(i)
        for i in todo_shallow:
            out[i] = self.robin(pts[i])
        if todo_deep:
            rows = self._base["rows"].points
            idx = np.array(todo_deep)
            lads, G = [], np.empty((len(rows), len(idx)))
            for j, i in enumerate(idx):
                lad = self._ladder(pts[i])[0]
                lads.append(lad)
                G[:, j] = ALPHA4 / ((rows - pts[i]) ** 2).sum(-1)
            L = min(len(l) for l in lads)
            ladders = np.stack([l[:L] for l in lads])
            sols = self._bordered_solve(G, ladders)
            n_base = len(self._base["charges"])
            for j, i in enumerate(idx):
                w = sols[j]
                corr = HarmonicCorrector(
                    pts[i], np.vstack([self._base["charges"], ladders[j]]),
                    np.concatenate([w[:n_base], w[n_base + 1:]]),
                    float(w[n_base]), 0.0)
                key = tuple(np.round(pts[i] / cfg.cache_quantum).astype(np.int64))
                self._cache[key] = corr
                out[i] = float(corr.evaluate(pts[i][None, :])[0])
        return out

    def _tau_cluster(self, pts, fast: bool = False) -> np.ndarray:
        """tau on a tight cluster of points (an FD stencil) sharing the
        center's ladder; falls back to per-point solves near the boundary
        unless ``fast`` (the collocation misfit is a harmonic, hence smooth,
        field, so finite differences of the fast path stay honest)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.use_kelvin:
            return self.robin_batch(pts)
        center = pts.mean(axis=0)
        if not fast and self._is_shallow(center):
            return np.array([self.robin(p) for p in pts])
        self._ensure_base()
        lad = self._ladder(center)[0]
        rows = self._base["rows"].points
        G = ALPHA4 / ((rows[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        W = self._bordered_solve_shared(G, lad)
        n_base = len(self._base["charges"])
        charges = np.vstack([self._base["charges"], lad])
        K = _kernel(pts, charges)
        w_charges = np.vstack([W[:n_base], W[n_base + 1:]])
        return (K * w_charges.T).sum(axis=1) + W[n_base]

    def tau_grad_hess(self, x, need_hess: bool = True):
        """(tau, grad tau, Hess tau) from one fused stencil solve.

        All stencil points share the center's ladder and (near the
        boundary) the center's collocation patch, so the whole Newton step
        costs a single factorization.  This is the search-loop workhorse;
        the public robin_grad/robin_hess stay pointwise-accurate.
        """
        x = np.asarray(x, dtype=float)
        hg = self.config.fd_step_grad * self.domain.inradius
        hh = self.config.fd_step_hess * self.domain.inradius
        self._fd_safe(x, 2 * hh if need_hess else hg)
        eye = np.eye(4)
        pts = [x]
        for h in (hg, 0.5 * hg):
            pts += [x + h * e for e in eye]
            pts += [x - h * e for e in eye]
        if need_hess:
            for h in (hh, 0.5 * hh):
                for j in range(4):
                    pts += [x + h * eye[j], x - h * eye[j]]
                for j in range(4):
                    for k in range(j + 1, 4):
                        pts += [x + h * (eye[j] + eye[k]),
                                x + h * (eye[j] - eye[k]),
                                x - h * (eye[j] - eye[k]),
                                x - h * (eye[j] + eye[k])]
        pts = np.array(pts)
        vals = self._stencil_solve(pts)
        tau0 = float(vals[0])
        g_h = (vals[1:5] - vals[5:9]) / (2 * hg)
        g_h2 = (vals[9:13] - vals[13:17]) / hg
        grad = (4.0 * g_h2 - g_h) / 3.0
        if not need_hess:
            return tau0, grad, None

        def hess_block(off, h):
            H = np.empty((4, 4))
            for j in range(4):
                H[j, j] = (vals[off + 2 * j] - 2 * tau0
                           + vals[off + 2 * j + 1]) / h**2
            p = off + 8
            for j in range(4):
                for k in range(j + 1, 4):
                    H[j, k] = H[k, j] = (vals[p] - vals[p + 1] - vals[p + 2]
                                         + vals[p + 3]) / (4 * h**2)
                    p += 4
            return H

        H1 = hess_block(17, hh)
        H2 = hess_block(17 + 32, 0.5 * hh)
        H = (4.0 * H2 - H1) / 3.0
        return tau0, grad, 0.5 * (H + H.T)

    def _stencil_solve(self, pts) -> np.ndarray:
        """tau on a stencil: shared ladder; shared patch when shallow."""
        if self.use_kelvin:
            return self.robin_batch(pts)
        self._ensure_base()
        center = pts.mean(axis=0)
        base = self._base
        cfg = self.config
        lad = self._ladder(center)[0]
        if not self._is_shallow(center):
            return self._tau_cluster(pts, fast=True)
        rows = np.vstack([base["rows"].points, self._patch_rows(center)])
        charges = np.vstack([base["charges"], lad])
        A = np.hstack([_kernel(rows, charges), np.ones((len(rows), 1))])
        G = ALPHA4 / ((rows[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        W = sla.lstsq(A, G, cond=cfg.svd_rcond, lapack_driver="gelsy")[0]
        K = np.hstack([_kernel(pts, charges), np.ones((len(pts), 1))])
        return np.einsum("ij,ji->i", K, W)

    # -- derivatives ---------------------------------------------------------

    def _fd_safe(self, x, h):
        m = float(self.domain.margin(x))
        need = 2.0 * h + self.config.tau_margin * self.domain.inradius
        if m < need:
            raise AccuracyError(
                f"finite-difference stencil exits safe region "
                f"(margin {m:.3g}, need {need:.3g})", estimate=m)

    def robin_grad(self, x, fast: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.config.fd_step_grad * self.domain.inradius
        self._fd_safe(x, h)
        eye = np.eye(4)
        stencil = []
        for hh in (h, 0.5 * h):
            stencil.extend([x + hh * e for e in eye])
            stencil.extend([x - hh * e for e in eye])
        vals = self._tau_cluster(np.array(stencil), fast=fast)
        d_h = (vals[0:4] - vals[4:8]) / (2 * h)
        d_h2 = (vals[8:12] - vals[12:16]) / h
        return (4.0 * d_h2 - d_h) / 3.0

    def robin_hess(self, x, fast: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.config.fd_step_hess * self.domain.inradius
        self._fd_safe(x, 2 * h)
        eye = np.eye(4)

        def hess_at(hh):
            pts = [x]
            for j in range(4):
                pts += [x + hh * eye[j], x - hh * eye[j]]
            for j in range(4):
                for k in range(j + 1, 4):
                    pts += [x + hh * (eye[j] + eye[k]), x + hh * (eye[j] - eye[k]),
                            x - hh * (eye[j] - eye[k]), x - hh * (eye[j] + eye[k])]
            vals = self._tau_cluster(np.array(pts), fast=fast)
            H = np.empty((4, 4))
            t0 = vals[0]
            for j in range(4):
                H[j, j] = (vals[1 + 2 * j] - 2 * t0 + vals[2 + 2 * j]) / hh**2
            p = 9
            for j in range(4):
                for k in range(j + 1, 4):
                    H[j, k] = H[k, j] = (vals[p] - vals[p + 1]
                                         - vals[p + 2] + vals[p + 3]) / (4 * hh**2)
                    p += 4
            return H

        H1, H2 = hess_at(h), hess_at(0.5 * h)
        H = (4.0 * H2 - H1) / 3.0
        return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# critical points and degree certification


@dataclass
class CriticalPoint:
    point: np.ndarray
    grad_residual: float
    hessian: np.ndarray
    eigenvalues: np.ndarray
    classification: str

    def as_dict(self):
        return {
            "point": [float(c) for c in self.point],
            "grad_residual": self.grad_residual,
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "classification": self.classification,
        }


@dataclass
class DegreeCertificate:
    degree: int
    boundary_min_grad: float
    zeros: list
    grid_level: int
    box: tuple

    def as_dict(self):
        return {
            "degree": self.degree,
            "boundary_min_grad": self.boundary_min_grad,
            "zeros": [z.as_dict() for z in self.zeros],
            "grid_level": self.grid_level,
            "box": [[float(v) for v in side] for side in self.box],
        }


def _classify(eigs, rtol) -> str:
    scale = np.abs(eigs).max()
    if scale == 0 or np.abs(eigs).min() < rtol * scale:
        return "degenerate"
    if np.all(eigs > 0):
        return "min"
    if np.all(eigs < 0):
        return "max"
    return "saddle"


def _in_box(x, lo, hi, slack=0.0) -> bool:
    return bool(np.all(x >= lo - slack) and np.all(x <= hi + slack))


def find_robin_critical_points(ev: RobinEvaluator, boxes, starts_per_box: int = 24,
                               gtol: float | None = None, seed: int = 0):
    """Multistart damped Newton on grad(tau) over interior boxes.

    Returns deduplicated :class:`CriticalPoint` records; an empty list when
    no start converges (that is a result, not an error).
    """
    cfg = ev.config
    if gtol is None:
        gtol = cfg.newton_gtol if ev.use_kelvin else cfg.newton_gtol_colloc
    found: list[CriticalPoint] = []
    dedupe = cfg.dedupe_tol * ev.domain.inradius
    for b_idx, (lo, hi) in enumerate(boxes):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        probes = box_points(starts_per_box, lo, hi, seed=seed + 977 * b_idx)
        margin_req = cfg.tau_margin * ev.domain.inradius * 1.01
        probes = [p for p in probes if ev.domain.margin(p) > margin_req]
        if not ev.use_kelvin and len(probes) > 4:
            # prescreen with the cheap shared-base path; Newton only from
            # the most promising fraction
            gn = [float(np.linalg.norm(ev.robin_grad(p, fast=True)))
                  for p in probes]
            order = np.argsort(gn)
            probes = [probes[i] for i in order[:max(4, len(probes) // 4)]]
        for x0 in probes:
            if ev.domain.margin(x0) <= margin_req:
                continue
            x = x0.copy()
            ok = False
            g = H = None
            for _ in range(cfg.newton_max_iter):
                if any(np.linalg.norm(x - f.point) < 3 * dedupe for f in found):
                    break   # converging to an already recorded zero
                try:
                    _, g, H = ev.tau_grad_hess(x)
                except AccuracyError:
                    break
                gn = float(np.linalg.norm(g))
                if gn < gtol:
                    ok = True
                    break
                try:
                    step = -np.linalg.solve(H, g)
                except np.linalg.LinAlgError:
                    step = -g
                cap = 0.25 * float(np.linalg.norm(hi - lo))
                sn = float(np.linalg.norm(step))
                if sn > cap:
                    step *= cap / sn
                # damped update: accept the first step that reduces |grad|
                t = 1.0
                for _ in range(20):
                    xn = np.clip(x + t * step, lo, hi)
                    if ev.domain.margin(xn) > margin_req:
                        try:
                            gn_new = np.linalg.norm(
                                ev.tau_grad_hess(xn, need_hess=False)[1])
                            if gn_new < gn:
                                break
                        except AccuracyError:
                            pass
                    t *= 0.5
                else:
                    break
                if np.linalg.norm(xn - x) < 1e-14 * ev.domain.inradius:
                    x = xn
                    ok = gn < 10 * gtol
                    break
                x = xn
            if not ok or not _in_box(x, lo, hi, slack=-1e-12):
                continue
            if any(np.linalg.norm(x - f.point) < dedupe for f in found):
                continue
            _, g, H = ev.tau_grad_hess(x)
            eigs = np.linalg.eigvalsh(H)
            found.append(CriticalPoint(
                x, float(np.linalg.norm(g)), H, eigs,
                _classify(eigs, cfg.degenerate_rtol)))
    found.sort(key=lambda cp: tuple(cp.point))
    return found


def brouwer_degree(ev: RobinEvaluator, box, starts_per_level: int = 24,
                   max_levels: int = 3, seed: int = 0) -> DegreeCertificate:
    """Certified-by-enumeration degree of grad(tau) on an interior box.

    The certificate is valid together with its exhaustiveness evidence: the
    multistart grid is refined until the zero set stops changing, and the
    level reached is recorded.  Non-vanishing |grad tau| on the sampled box
    boundary is a precondition; degenerate zeros abort certification.
    """
    cfg = ev.config
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if np.any(ev.domain.margin(_box_corners(lo, hi)) < -1e-12 * ev.domain.inradius):
        raise PreconditionError("degree box must lie inside the domain")
    # boundary margin check on all 8 faces; face points whose stencils do
    # not fit inside the domain are skipped (corners may graze the boundary,
    # where the gradient blows up and cannot vanish anyway)
    min_grad = math.inf
    stencil_room = (2 * cfg.fd_step_grad + cfg.tau_margin) * ev.domain.inradius
    used = total = 0
    for axis in range(4):
        for side, val in ((0, lo[axis]), (1, hi[axis])):
            face = box_points(cfg.degree_boundary_samples, lo, hi,
                              seed=seed + 101 * axis + side)
            face[:, axis] = val
            total += len(face)
            for p in face:
                if ev.domain.margin(p) <= stencil_room:
                    continue
                used += 1
                g = ev.robin_grad(p, fast=True)
                min_grad = min(min_grad, float(np.linalg.norm(g)))
    if used < total // 2:
        raise PreconditionError(
            f"only {used}/{total} boundary samples are evaluable; box "
            "protrudes too far toward the domain boundary")
    if min_grad < cfg.degree_safety_margin:
        raise NotCertifiableError(
            f"|grad tau| reaches {min_grad:.3g} on the box boundary "
            f"(safety margin {cfg.degree_safety_margin:.3g})")

    prev_zeros = None
    level = 0
    for level in range(max_levels):
        n_starts = starts_per_level * 2**level
        zeros = find_robin_critical_points(
            ev, [(lo, hi)], starts_per_box=n_starts, seed=seed + 13 * level)
        sig = tuple(tuple(np.round(z.point, 6)) for z in zeros)
        if prev_zeros is not None and sig == prev_zeros:
            break
        prev_zeros = sig
    degree = 0
    for z in zeros:
        eig_max = float(np.abs(z.eigenvalues).max())
        eig_min = float(np.abs(z.eigenvalues).min())
        if eig_max == 0 or eig_min < cfg.degenerate_rtol * eig_max:
            raise NotCertifiableError(
                f"degenerate zero at {z.point}: eigenvalue ratio "
                f"{eig_min:.3g}/{eig_max:.3g}")
        degree += 1 if float(np.prod(np.sign(z.eigenvalues))) > 0 else -1
    return DegreeCertificate(degree, min_grad, zeros, level, (tuple(lo), tuple(hi)))


def _box_corners(lo, hi):
    corners = []
    for mask in range(16):
        corners.append([hi[j] if mask >> j & 1 else lo[j] for j in range(4)])
    return np.array(corners)


# ---------------------------------------------------------------------------
# axisymmetric path: exact ring charges for surface-of-revolution domains


def ring_kernel(pts2, rings2) -> np.ndarray:
    """Girth-averaged Newtonian kernel.

    ``pts2``: (k, 2) meridian coordinates (x1, s >= 0) of evaluation points;
    ``rings2``: (n, 2) meridian coordinates of ring charges (a ring is a
    2-sphere of radius b around the symmetry axis; b = 0 is a point).
    The average of alpha4/|y - c|^2 over the ring is
    alpha4 * ln((A+B)/(A-B)) / (2B) with A = (x1-c1)^2 + s^2 + b^2,
    B = 2 s b.
    """
    x1 = pts2[:, 0][:, None]
    s = pts2[:, 1][:, None]
    c1 = rings2[None, :, 0]
    b = rings2[None, :, 1]
    A = (x1 - c1) ** 2 + s * s + b * b
    B = 2.0 * s * b
    out = np.empty_like(A)
    small = B < 1e-14 * np.maximum(A, 1e-300)
    np.divide(ALPHA4, A, out=out, where=small)
    big = ~small
    if big.any():
        out[big] = ALPHA4 * np.log((A[big] + B[big]) / (A[big] - B[big])) \
            / (2.0 * B[big])
    return out


class MeridianRobinSolver:
    """High-accuracy Robin values at axis points of an axisymmetric domain.

    For sources on the symmetry axis the regular part is axisymmetric, so
    the collocation unknowns reduce to ring strengths along the meridian;
    the girth direction is integrated exactly and contributes no
    discretization error.  Used where tiny shape-induced shifts of tau must
    be resolved (for example the handle-width trend on dumbbells).
    """

    def __init__(self, domain, n_rows: int = 720, rcond: float = 1e-14):
        self.domain = domain
        rows, charges = domain.meridian_system(n_rows)
        self.rows = rows
        self.charges = charges
        self.A = np.hstack([ring_kernel(rows, charges),
                            np.ones((len(rows), 1))])
        self.rcond = rcond

    def tau_axis(self, x1: float):
        """(tau, boundary residual) at the axis point (x1, 0, 0, 0)."""
        src = np.array([[x1, 0.0]])
        g = ALPHA4 / ((self.rows - src) ** 2).sum(-1)
        w = sla.lstsq(self.A, g, cond=self.rcond, lapack_driver="gelsd")[0]
        fit = self.A @ w
        resid = float(np.abs(fit - g).max() / np.abs(g).max())
        val = float((ring_kernel(src, self.charges) @ w[:-1])[0] + w[-1])
        return val, resid
