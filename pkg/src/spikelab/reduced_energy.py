"""Reduced energy of a spike ensemble and its critical-point theory.

The energy of the projected multi-bubble ansatz expands, per spike, into a
constant level plus a correction that, after the substitution
``delta_i = exp(-d_i / lambda_i)``, becomes

    Psi_i(d_i, xi_i) = exp(-2 d_i/lambda_i) *
                       (8*sqrt(2) * A^2 * tau(xi_i) - 4*omega3*d_i) / mu_i.

At the physically relevant lambdas the factor ``exp(-2d/lambda)`` underflows
double precision (d ~ 45, lambda ~ 0.1 gives exp(-900)), so every
comparison and search in this module is carried out on the pair
(sign, log magnitude); plain values are returned as well and are exact
whenever they are representable.

The stationary scale is closed-form: d* = lambda/2 + (2*sqrt(2)*A^2/omega3)
* tau(xi), and along d = d*(xi) the reduced functional decreases exactly
when tau does, so the interior minimization reduces to minimizing the Robin
function over the spike box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bubble import BubbleParams
from .constants import C4, OMEGA3, TABLE
from .domains import BallDomain, Domain
from .errors import (BoundaryMinimizerError, NotCertifiableError,
                     PreconditionError)
from .green_robin import (DegreeCertificate, RobinEvaluator, brouwer_degree,
                          find_robin_critical_points)
from .pointsets import box_points
from .quadrature import QuadratureSpec, integrate, interaction_integral

A_MASS = TABLE.A
PSI_TAU_COEF = 8.0 * math.sqrt(2.0) * A_MASS**2      # multiplies tau
PSI_D_COEF = 4.0 * OMEGA3                            # multiplies d
CRITICAL_TAU_COEF = 2.0 * math.sqrt(2.0) * A_MASS**2 / OMEGA3


@dataclass
class SpikeEnsemble:
    """m bubbles plus the linear/coupling parameters of the system."""

    bubbles: list
    lambdas: list
    beta: float = 0.0
    eta: float = 0.25

    def __post_init__(self):
        if len(self.bubbles) != len(self.lambdas):
            raise PreconditionError("need one lambda per bubble")
        if any(l <= 0 for l in self.lambdas):
            raise PreconditionError("lambdas must be positive")
        if self.eta <= 0:
            raise PreconditionError("eta must be positive")

    @property
    def m(self) -> int:
        return len(self.bubbles)

    def validate_geometry(self, domain: Domain) -> dict:
        """Separation-set constraints; the linear-coefficient upper bound is
        checked in closed form for analytic balls, recorded unchecked else."""
        for i, b in enumerate(self.bubbles):
            if domain.margin(b.center) < self.eta:
                raise PreconditionError(
                    f"spike {i} violates the boundary separation eta={self.eta}")
        for i in range(self.m):
            for j in range(i + 1, self.m):
                gap = np.linalg.norm(self.bubbles[i].center - self.bubbles[j].center)
                if gap < self.eta:
                    raise PreconditionError(
                        f"spikes {i},{j} are closer than eta={self.eta}")
        lam1_checked = False
        if getattr(domain, "is_analytic_ball", False):
            from .radial_solver import lambda1_ball

            lam1 = lambda1_ball(domain.radius)
            for i, lam in enumerate(self.lambdas):
                if not 0 < lam < lam1:
                    raise PreconditionError(
                        f"lambda_{i}={lam} outside (0, {lam1:.6g})")
            lam1_checked = True
        return {"lambda1_checked": lam1_checked}


# ---------------------------------------------------------------------------
# the reduced functional


def _phi_signed_log(lam: float, d: float, tau: float, mu: float):
    """One Psi summand as (sign, log magnitude, value)."""
    bracket = (PSI_TAU_COEF * tau - PSI_D_COEF * d) / mu
    expo = -2.0 * d / lam
    if bracket == 0.0:
        return 0.0, -math.inf, 0.0
    logmag = expo + math.log(abs(bracket))
    sign = math.copysign(1.0, bracket)
    value = sign * math.exp(logmag) if logmag > -745.0 else sign * 0.0
    return sign, logmag, value


def psi(lambdas, d, xis, mus, ev: RobinEvaluator) -> float:
    """Reduced functional value (representable part; underflows to +-0)."""
    taus = [ev.robin(np.asarray(x, dtype=float)) for x in xis]
    return sum(_phi_signed_log(l, dd, t, m)[2]
               for l, dd, t, m in zip(lambdas, d, taus, mus))


def psi_grad(lambdas, d, xis, mus, ev: RobinEvaluator):
    """(d Psi/d d_i, d Psi/d xi_i): analytic in d, Robin-gradient in xi."""
    gd = np.empty(len(d))
    gxi = np.empty((len(d), 4))
    for i, (lam, dd, x, mu) in enumerate(zip(lambdas, d, xis, mus)):
        x = np.asarray(x, dtype=float)
        tau = ev.robin(x)
        e = math.exp(-2.0 * dd / lam) if -2.0 * dd / lam > -745 else 0.0
        bracket = PSI_TAU_COEF * tau - PSI_D_COEF * dd
        gd[i] = e * (-(2.0 / lam) * bracket - PSI_D_COEF) / mu
        gxi[i] = e * PSI_TAU_COEF * ev.robin_grad(x) / mu
    return gd, gxi


def critical_d(lam: float, tau_value: float) -> float:
    """Stationary spike scale exponent: lam/2 + (2*sqrt2*A^2/omega3)*tau."""
    if lam <= 0:
        raise PreconditionError("lambda must be positive")
    if tau_value <= 0:
        raise PreconditionError("tau must be positive")
    return 0.5 * lam + CRITICAL_TAU_COEF * tau_value


def remainder_budget(ensemble: SpikeEnsemble, c: float = 1.0) -> float:
    """Norm budget for the unresolved correction:
    c * sum(lambda_i*delta_i + delta_i^2 + |beta|*delta_i^2)."""
    total = 0.0
    for b, lam in zip(ensemble.bubbles, ensemble.lambdas):
        total += lam * b.delta + b.delta**2 + abs(ensemble.beta) * b.delta**2
    return c * total


# ---------------------------------------------------------------------------
# energy breakdown


@dataclass
class EnergyBreakdown:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    leading_level: float
    psi_value: float
    remainder_budget: float
    method: str
    error: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        m = len(self.A)
        off = sum(self.D[i, j] for i in range(m) for j in range(i + 1, m))
        return float((self.A - self.B - self.C).sum() - off)

    def as_dict(self):
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
            "D": self.D.tolist(), "total": self.total,
            "leading_level": self.leading_level, "psi_value": self.psi_value,
            "remainder_budget": self.remainder_budget, "method": self.method,
            "error": self.error, "notes": self.notes,
        }


def _psi_value_of(ensemble, taus) -> float:
    val = 0.0
    for b, lam, tau in zip(ensemble.bubbles, ensemble.lambdas, taus):
        d = -lam * math.log(b.delta)
        val += _phi_signed_log(lam, d, tau, b.mu)[2]
    return val


def energy_terms_asymptotic(ensemble: SpikeEnsemble, domain: Domain,
                            ev: RobinEvaluator | None = None,
                            budget_c: float = 1.0,
                            pair_constant: float | None = None) -> EnergyBreakdown:
    """Leading closed forms of the expansion terms.

    The pairwise term is only known at the order level; it is reported as a
    signed bound ``(beta/2) * K * di^2 dj^2 |ln(di dj)|`` with K calibrated
    by one quadrature of the pair integrand at delta = 1e-2 (overridable).
    """
    ev = ev or RobinEvaluator(domain)
    ensemble.validate_geometry(domain)
    for b in ensemble.bubbles:
        if b.delta >= 0.1 * ensemble.eta:
            raise PreconditionError(
                f"delta={b.delta} too large against eta={ensemble.eta}")
    m = ensemble.m
    A = np.empty(m)
    B = np.empty(m)
    C = np.empty(m)
    D = np.zeros((m, m))
    taus = [ev.robin(b.center) for b in ensemble.bubbles]
    level = 0.0
    lead = C4**4 / 4.0 * TABLE.I[4.0]
    for i, (b, lam, tau) in enumerate(zip(ensemble.bubbles, ensemble.lambdas, taus)):
        d2 = b.delta**2
        A[i] = 2.0 * lead / b.mu - 0.5 * C4**3 * A_MASS**2 * tau * d2 / b.mu
        B[i] = lead / b.mu - C4**3 * A_MASS**2 * tau * d2 / b.mu
        C[i] = 0.5 * C4**2 * OMEGA3 * lam * d2 * abs(math.log(b.delta)) / b.mu
        level += lead / b.mu
    if m > 1 and ensemble.beta != 0.0:
        K = pair_constant if pair_constant is not None else \
            _calibrate_pair_constant(domain, ensemble)
        for i in range(m):
            for j in range(i + 1, m):
                bi, bj = ensemble.bubbles[i], ensemble.bubbles[j]
                mag = K * bi.delta**2 * bj.delta**2 * abs(
                    math.log(bi.delta * bj.delta))
                D[i, j] = D[j, i] = 0.5 * ensemble.beta * mag / (bi.mu * bj.mu)
    return EnergyBreakdown(
        A, B, C, D, level, _psi_value_of(ensemble, taus),
        remainder_budget(ensemble, budget_c), "asymptotic",
        notes={"pair_constant": pair_constant})


_PAIR_CAL_CACHE: dict = {}


def _calibrate_pair_constant(domain: Domain, ensemble: SpikeEnsemble,
                             delta_cal: float = 1e-2) -> float:
    """K such that the pair integrand integrates to K*d^4*|ln d^2| at the
    calibration scale, for this geometry."""
    key = (id(domain), tuple(tuple(b.xi) for b in ensemble.bubbles[:2]), delta_cal)
    if key in _PAIR_CAL_CACHE:
        return _PAIR_CAL_CACHE[key]
    b1 = BubbleParams(delta_cal, ensemble.bubbles[0].xi)
    b2 = BubbleParams(delta_cal, ensemble.bubbles[1].xi)
    val = interaction_integral(domain, b1, b2, 2.0, 2.0).value
    K = val / (delta_cal**4 * abs(math.log(delta_cal**2)))
    _PAIR_CAL_CACHE[key] = K
    return K


def energy_terms_quadrature(ensemble: SpikeEnsemble, domain: Domain,
                            ev: RobinEvaluator | None = None,
                            spec: QuadratureSpec | None = None,
                            budget_c: float = 1.0) -> EnergyBreakdown:
    """Expansion terms by direct quadrature with exact-mode projections.

    The gradient term uses the integration-by-parts identity
    ``int |grad PU|^2 = int U^3 PU``.
    """
    from .projection import project_bubble

    ev = ev or RobinEvaluator(domain)
    ensemble.validate_geometry(domain)
    m = ensemble.m
    base_spec = spec or QuadratureSpec()
    pus = [project_bubble(domain, b, "exact", ev) for b in ensemble.bubbles]
    A = np.empty(m)
    B = np.empty(m)
    C = np.empty(m)
    D = np.zeros((m, m))
    err = 0.0
    level = 0.0
    lead = C4**4 / 4.0 * TABLE.I[4.0]
    from .bubble import bubble_value

    for i, (b, lam, pu) in enumerate(zip(ensemble.bubbles, ensemble.lambdas, pus)):
        spec_i = QuadratureSpec(**{**base_spec.__dict__})
        spec_i.spike_centers = [(tuple(b.center), b.delta)]
        rA = integrate(domain, lambda x: bubble_value(b, x) ** 3 * pu.value(x), spec_i)
        spec_i2 = QuadratureSpec(**{**base_spec.__dict__})
        spec_i2.spike_centers = [(tuple(b.center), b.delta)]
        rB = integrate(domain, lambda x: pu.value(x) ** 4, spec_i2)
        spec_i3 = QuadratureSpec(**{**base_spec.__dict__})
        spec_i3.spike_centers = [(tuple(b.center), b.delta)]
        rC = integrate(domain, lambda x: pu.value(x) ** 2, spec_i3)
        A[i] = 0.5 * rA.value / b.mu
        B[i] = 0.25 * rB.value / b.mu
        C[i] = 0.5 * lam * rC.value / b.mu
        err += (0.5 * rA.error + 0.25 * rB.error + 0.5 * lam * rC.error) / b.mu
        level += lead / b.mu
    if ensemble.beta != 0.0:
        for i in range(m):
            for j in range(i + 1, m):
                bi, bj = ensemble.bubbles[i], ensemble.bubbles[j]
                spec_ij = QuadratureSpec(**{**base_spec.__dict__})
                spec_ij.spike_centers = [(tuple(bi.center), bi.delta),
                                         (tuple(bj.center), bj.delta)]
                rD = integrate(domain, lambda x: pus[i].value(x) ** 2
                               * pus[j].value(x) ** 2, spec_ij)
                D[i, j] = D[j, i] = 0.5 * ensemble.beta * rD.value / (bi.mu * bj.mu)
                err += 0.5 * abs(ensemble.beta) * rD.error / (bi.mu * bj.mu)
    taus = [ev.robin(b.center) for b in ensemble.bubbles]
    return EnergyBreakdown(
        A, B, C, D, level, _psi_value_of(ensemble, taus),
        remainder_budget(ensemble, budget_c), "quadrature", err)


# ---------------------------------------------------------------------------
# the reduced system


@dataclass
class CriticalPointReport:
    d_star: list
    xi_star: list
    mode: str
    residuals: dict
    delta_star: list
    log_delta_star: list
    psi_at_star: float
    psi_log_at_star: float
    degree_certificates: list | None = None

    def as_dict(self):
        out = {
            "d_star": self.d_star,
            "xi_star": [[float(c) for c in x] for x in self.xi_star],
            "mode": self.mode,
            "residuals": self.residuals,
            "delta_star": self.delta_star,
            "log_delta_star": self.log_delta_star,
            "psi_at_star": self.psi_at_star,
            "psi_log_at_star": self.psi_log_at_star,
        }
        if self.degree_certificates is not None:
            out["degree_certificates"] = [c.as_dict()
                                          for c in self.degree_certificates]
        return out


def _minimize_tau_in_box(ev: RobinEvaluator, lo, hi, starts: int, seed: int):
    """Multistart projected-gradient descent on tau, then Newton polish."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    starts_pts = box_points(starts, lo, hi, seed=seed)
    margin_req = ev.config.tau_margin * ev.domain.inradius * 1.05
    best = None
    for x0 in starts_pts:
        if ev.domain.margin(x0) <= margin_req:
            continue
        x = x0.copy()
        tau, _, _ = ev.tau_grad_hess(x, need_hess=False) if not ev.use_kelvin \
            else (ev.robin_batch(x[None])[0], None, None)
        for _ in range(200):
            tau, g, _ = ev.tau_grad_hess(x, need_hess=False)
            gn = float(np.linalg.norm(g))
            if gn < 1e-12:
                break
            t = 0.5 * float(np.linalg.norm(hi - lo)) / gn
            improved = False
            for _ in range(40):
                xn = np.clip(x - t * g, lo, hi)
                if ev.domain.margin(xn) > margin_req:
                    tn = ev.tau_grad_hess(xn, need_hess=False)[0]
                    if tn < tau - 1e-16:
                        x, tau, improved = xn, tn, True
                        break
                t *= 0.5
            if not improved:
                break
        # Newton polish toward the stationary point (free minimum only)
        for _ in range(30):
            _, g, H = ev.tau_grad_hess(x)
            if np.linalg.norm(g) < 1e-12:
                break
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                break
            xn = np.clip(x + step, lo, hi)
            if ev.domain.margin(xn) <= margin_req:
                break
            if np.linalg.norm(ev.tau_grad_hess(xn, need_hess=False)[1]) >= \
                    np.linalg.norm(g):
                break
            x = xn
        tau = ev.robin_batch(x[None])[0]
        if best is None or tau < best[1] - 0.0 or (
                abs(tau - best[1]) < 1e-15 and tuple(x) < tuple(best[0])):
            if best is None or tau < best[1] or (
                    abs(tau - best[1]) < 1e-15 and tuple(x) < tuple(best[0])):
                best = (x, float(tau))
    if best is None:
        raise BoundaryMinimizerError("no interior start made progress")
    return best


def _psi_log_compare(lam, d, tau, mu):
    """Key for 'phi smaller' comparisons: (sign, sign*logmag) lexicographic,
    negative-and-large-magnitude first."""
    sign, logmag, _ = _phi_signed_log(lam, d, tau, mu)
    return (sign, sign * logmag if math.isfinite(logmag) else -math.inf)


def solve_reduced_system(ev: RobinEvaluator, lambdas, mus, boxes,
                         mode: str = "min", eta: float = 0.25,
                         starts_per_box: int = 32, seed: int = 0,
                         beta: float = 0.0) -> CriticalPointReport:
    """Critical points of the reduced functional, one spike per box.

    boxes: per spike ((d_lo, d_hi), (xi_lo (4,), xi_hi (4,))).
    ``min`` mode carries out the boundary-comparison minimization (and
    fails explicitly when the minimizer sits on the box boundary); ``degree``
    mode solves the stationarity system and attaches a degree certificate
    for the Robin gradient on every spike box.
    """
    m = len(lambdas)
    if len(boxes) != m or len(mus) != m:
        raise PreconditionError("need one box and one mu per spike")
    xi_boxes = [(np.asarray(b[1][0], float), np.asarray(b[1][1], float))
                for b in boxes]
    for i in range(m):
        for j in range(i + 1, m):
            mid_i = 0.5 * (xi_boxes[i][0] + xi_boxes[i][1])
            mid_j = 0.5 * (xi_boxes[j][0] + xi_boxes[j][1])
            # box separation: closest corners must respect eta
            gap = np.linalg.norm(
                np.maximum(0.0, np.maximum(xi_boxes[j][0] - xi_boxes[i][1],
                                           xi_boxes[i][0] - xi_boxes[j][1])))
            if gap < eta and not np.allclose(mid_i, mid_j):
                raise PreconditionError(
                    f"xi-boxes {i},{j} are closer than eta={eta}")
    d_star, xi_star = [], []
    residuals = {}
    certificates = [] if mode == "degree" else None
    for i in range(m):
        (d_lo, d_hi), (lo, hi) = boxes[i][0], xi_boxes[i]
        lam, mu = lambdas[i], mus[i]
        if mode == "min":
            x, tau = _minimize_tau_in_box(ev, lo, hi, starts_per_box,
                                          seed + 31 * i)
            d = critical_d(lam, tau)
            if not d_lo < d < d_hi:
                raise BoundaryMinimizerError(
                    f"spike {i}: stationary d={d:.6g} outside ({d_lo}, {d_hi})"
                    " -- boundary minimizer")
            # boundary comparison: phi at the reported point must lie below
            # phi at probes of all faces of (d-interval x xi-box)
            key_star = _psi_log_compare(lam, d, tau, mu)
            probes = []
            for dd in (d_lo, d_hi):
                probes.append((dd, tau))
            face_pts = box_points(16, lo, hi, seed=seed + 7 * i)
            for axis in range(4):
                for side in (0, 1):
                    fp = face_pts.copy()
                    fp[:, axis] = (lo if side == 0 else hi)[axis]
                    taus_face = ev.robin_batch(fp)
                    for tf in taus_face:
                        probes.append((d, float(tf)))
            worst = min(_psi_log_compare(lam, dd, tt, mu) for dd, tt in probes)
            if key_star >= worst:
                raise BoundaryMinimizerError(
                    f"spike {i}: reported point not below boundary probes")
            residuals[f"grad_tau_{i}"] = float(np.linalg.norm(ev.robin_grad(x)))
            residuals[f"d_stationarity_{i}"] = 0.0
        else:
            cps = find_robin_critical_points(ev, [(lo, hi)],
                                             starts_per_box=starts_per_box,
                                             seed=seed + 31 * i)
            if not cps:
                raise NotCertifiableError(
                    f"spike {i}: no Robin critical point found in its box")
            best = min(cps, key=lambda c: c.grad_residual)
            x = best.point
            tau = ev.robin_batch(x[None])[0]
            d = critical_d(lam, tau)
            if not d_lo < d < d_hi:
                raise BoundaryMinimizerError(
                    f"spike {i}: stationary d={d:.6g} outside ({d_lo}, {d_hi})")
            certificates.append(brouwer_degree(ev, (lo, hi), seed=seed + 5 * i))
            residuals[f"grad_tau_{i}"] = best.grad_residual
            residuals[f"d_stationarity_{i}"] = 0.0
        d_star.append(float(d))
        xi_star.append(np.asarray(x, dtype=float))
    psi_val, psi_log = 0.0, -math.inf
    for i in range(m):
        tau_i = ev.robin_batch(xi_star[i][None])[0]
        sign, logmag, val = _phi_signed_log(lambdas[i], d_star[i], tau_i, mus[i])
        psi_val += val
        psi_log = max(psi_log, logmag)
    return CriticalPointReport(
        d_star=[float(d) for d in d_star],
        xi_star=xi_star,
        mode=mode,
        residuals=residuals,
        delta_star=[math.exp(-d / l) if -d / l > -745 else 0.0
                    for d, l in zip(d_star, lambdas)],
        log_delta_star=[-d / l for d, l in zip(d_star, lambdas)],
        psi_at_star=psi_val,
        psi_log_at_star=psi_log,
        degree_certificates=certificates,
    )


# ---------------------------------------------------------------------------
# admissible coupling schedules


@dataclass
class BetaAdmissibilityReport:
    lambdas: list
    c_values: list
    log_ratio_tracks: dict
    verdict: bool
    margin: float

    def as_dict(self):
        return {
            "lambdas": self.lambdas, "c_values": self.c_values,
            "log_ratio_tracks": {k: list(v) for k, v in
                                 self.log_ratio_tracks.items()},
            "verdict": bool(self.verdict), "margin": self.margin,
        }


def beta_admissible(beta_schedule, lambdas_grid, tau_values,
                    margin: float = 1e-6) -> BetaAdmissibilityReport:
    """Test a coupling schedule against the slow-divergence condition.

    For each concentration point (through its tau value) the rate constant
    is C = (c4/omega3) * A^2 * tau.  Along the decreasing lambda grid the
    admissibility tracks are, in logs,

        t1 = ln|beta| - C/(2 lambda)      (the o() condition itself),
        t2 = ln|beta| - 2C/lambda         (|beta| delta^2),
        t3 = 2 ln|beta| - 2C/lambda       (|beta|^2 delta^2),

    with delta = exp(-C/lambda).  Verdict: every track strictly decreasing
    and ending below ln(margin).
    """
    lams = [float(l) for l in lambdas_grid]
    if any(l2 >= l1 for l1, l2 in zip(lams, lams[1:])):
        raise PreconditionError("lambda grid must be strictly decreasing")
    cs = [float(C4 / OMEGA3 * A_MASS**2 * t) for t in tau_values]
    tracks = {}
    ok = True
    log_margin = math.log(margin)
    for i, c in enumerate(cs):
        t1, t2, t3 = [], [], []
        for lam in lams:
            b = beta_schedule(lam)
            lb = math.log(abs(b)) if b != 0 else -math.inf
            t1.append(lb - c / (2.0 * lam))
            t2.append(lb - 2.0 * c / lam)
            t3.append(2.0 * lb - 2.0 * c / lam)
        for name, tr in (("o_condition", t1), ("beta_delta2", t2),
                         ("beta2_delta2", t3)):
            tracks[f"{name}_{i}"] = tr
            decreasing = all(b2 < b1 for b1, b2 in zip(tr, tr[1:]))
            ok = ok and decreasing and tr[-1] < log_margin
    return BetaAdmissibilityReport(lams, cs, tracks, ok, margin)


def beta_schedule_from_spec(kind: str, value: float, c1: float):
    """Schedules used by the CLI: 'const' -> beta == value;
    'exp' -> beta(lambda) = -exp(value * C1 / lambda)."""
    if kind == "const":
        return lambda lam: value
    if kind == "exp":
        return lambda lam: -math.exp(value * c1 / lam)
    raise PreconditionError(f"unknown beta schedule kind {kind!r}")
