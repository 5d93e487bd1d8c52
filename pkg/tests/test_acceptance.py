"""Acceptance gate: one test per criterion, each printing PASS/FAIL.

Every tolerance is pinned here, in one place.  Criterion 12 carries a
known-red sub-clause: its fallback demands convexity of ln(1/delta) against
1/lambda, but on every double-precision-reachable lambda grid the measured
curve is concave (the asymptotic concentration regime needs delta below
exp(-45)); the sub-assertion is kept faithful and expected to fail.
"""

import json
import math
import time

import numpy as np
import pytest

import spikelab as sl
from spikelab.cli import main as cli_main
from spikelab.constants import ALPHA4, C4, OMEGA3, TABLE, radial_integral_quadrature
from spikelab.green_robin import MeridianRobinSolver, brouwer_degree
from spikelab.projection import projection_defect
from spikelab.quadrature import (fit_loglog_slope, fit_two_term_log,
                                 integrate_bubble_power, interaction_norms,
                                 taylor_bound_check)
from spikelab.radial_solver import concentration_study
from spikelab.reduced_energy import (SpikeEnsemble, beta_admissible,
                                     beta_schedule_from_spec, critical_d,
                                     energy_terms_asymptotic,
                                     energy_terms_quadrature,
                                     solve_reduced_system)

pytestmark = pytest.mark.acceptance

D_LIMIT = 32.0 * math.sqrt(2.0)


def report(number, label, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number:>2}] {status}: {label}  {detail}")
    return ok


@pytest.fixture(scope="module")
def ball():
    return sl.BallDomain()


@pytest.fixture(scope="module")
def ball_ev(ball):
    return sl.RobinEvaluator(ball)


def test_criterion_01_constants_closure():
    t0 = time.time()
    a1 = C4 / ALPHA4
    a2 = C4**3 * TABLE.I[3.0]
    a3 = C4**3 * radial_integral_quadrature(3.0)
    ok_a = abs(a1 - a2) <= 1e-8 * a1 and abs(a1 - a3) <= 1e-8 * a1
    i4 = radial_integral_quadrature(4.0)
    ok_i4 = abs(TABLE.I[4.0] - i4) <= 1e-8 * i4
    dt = time.time() - t0
    ok = ok_a and ok_i4 and dt < 1.0
    assert report(1, "constants closure (three routes, 1e-8; < 1 s)", ok,
                  f"A={a1:.12g} dt={dt:.2f}s")


def test_criterion_02_ball_collocation_oracle():
    t0 = time.time()
    dom = sl.BallDomain(force_collocation=True)
    ev = sl.RobinEvaluator(dom)
    rng = np.random.default_rng(2024)
    pts = []
    while len(pts) < 500:
        v = rng.normal(size=4)
        v *= rng.uniform(0.0, 0.9) / np.linalg.norm(v)
        pts.append(v)
    pts = np.array(pts)
    taus = ev.robin_batch(pts)
    truth = ALPHA4 / (1.0 - (pts**2).sum(1)) ** 2
    rel = float(np.abs(taus - truth).max() / truth.min())
    rel = float((np.abs(taus - truth) / truth).max())
    dt = time.time() - t0
    ok = rel < 1e-6 and dt < 30.0
    assert report(2, "collocation tau vs closed form on 500 points", ok,
                  f"max rel err={rel:.2e} dt={dt:.1f}s")


def test_criterion_03_dumbbell_robin_limit():
    t0 = time.time()
    diffs = []
    for rho in (0.1, 0.05, 0.025):
        dd = sl.DumbbellDomain(handle_radius=rho)
        ms = MeridianRobinSolver(dd, n_rows=1440)
        gap = 0.0
        for x1 in (dd.a, dd.a - 0.2, dd.a + 0.2):
            tau, _ = ms.tau_axis(x1)
            tau_ball = ALPHA4 / (1.0 - (x1 - dd.a) ** 2) ** 2
            gap = max(gap, abs(tau - tau_ball))
        diffs.append(gap)
    dt = time.time() - t0
    ok = diffs[0] > diffs[1] > diffs[2] and dt < 300.0
    assert report(3, "dumbbell tau -> isolated-lobe tau as the handle halves",
                  ok, f"max diffs={['%.3e' % d for d in diffs]} dt={dt:.1f}s")


def test_criterion_04_projection_expansion(ball, ball_ev):
    t0 = time.time()
    ratios = []
    closed_ok = True
    for delta in (1e-1, 1e-2, 1e-3):
        b = sl.BubbleParams(delta, (0, 0, 0, 0))
        d = projection_defect(ball, b, ball_ev)
        ratios.append(d / delta)
        want = C4 * delta**3 / (1 + delta**2)
        closed_ok = closed_ok and abs(d - want) <= 1e-8
    dt = time.time() - t0
    ok = ratios[0] > ratios[1] > ratios[2] and closed_ok and dt < 60.0
    assert report(4, "projection defect: rate and ball closed form", ok,
                  f"defect/delta={['%.2e' % r for r in ratios]} dt={dt:.1f}s")


def test_criterion_05_single_bubble_rates(ball):
    t0 = time.time()
    deltas = [1e-2, 1e-3, 1e-4, 1e-5]
    vals = [integrate_bubble_power(ball, sl.BubbleParams(d, (0, 0, 0, 0)), 2.0).value
            for d in deltas]
    rep2 = fit_two_term_log(deltas, vals, C4**2 * OMEGA3, 0.02)
    slopes_ok = True
    details = [f"a={rep2.fitted_coefficients['a']:.4f}/{C4**2 * OMEGA3:.4f}"]
    for p, target in ((4.0 / 3.0, 4.0 / 3.0), (3.0, 1.0)):
        ds = [1e-2, 1e-3, 1e-4]
        vs = [integrate_bubble_power(ball, sl.BubbleParams(d, (0, 0, 0, 0)), p).value
              for d in ds]
        rep = fit_loglog_slope(ds, vs, target, 0.05)
        slopes_ok = slopes_ok and rep.verdict
        details.append(f"slope(p={p:.3g})={rep.fitted_coefficients['slope']:.4f}")
    dt = time.time() - t0
    ok = rep2.verdict and slopes_ok and dt < 120.0
    assert report(5, "single-bubble integral rates (2% / 5%)", ok,
                  " ".join(details) + f" dt={dt:.1f}s")


def test_criterion_06_interaction_norm_rates(ball, ball_ev):
    t0 = time.time()
    deltas = [3e-2, 1e-2, 3e-3]
    n1s, n2s = [], []
    for d in deltas:
        b1 = sl.BubbleParams(d, (0.4, 0, 0, 0))
        b2 = sl.BubbleParams(d, (-0.4, 0, 0, 0))
        n1, n2 = interaction_norms(ball, b1, b2, 0, ball_ev)
        n1s.append(n1)
        n2s.append(n2)
    s1 = fit_loglog_slope(deltas, n1s, 2.0, 0.15)
    s2 = fit_loglog_slope(deltas, n2s, 2.0, 0.15)
    dt = time.time() - t0
    ok = (abs(s1.fitted_coefficients["slope"] - 2.0) <= 0.3
          and abs(s2.fitted_coefficients["slope"] - 2.0) <= 0.3 and dt < 300.0)
    assert report(6, "interaction-norm rates 2 +- 0.3", ok,
                  f"slopes={s1.fitted_coefficients['slope']:.3f},"
                  f"{s2.fitted_coefficients['slope']:.3f} dt={dt:.1f}s")


def test_criterion_07_pointwise_bounds():
    t0 = time.time()
    ok = True
    details = []
    for kind in (1, 2, 3, 4):
        cs = [taylor_bound_check(kind, 1_000_000, 10.0, seed=s)[0]
              for s in range(5)]
        spread = (max(cs) - min(cs)) / max(cs)
        ok = ok and math.isfinite(max(cs)) and spread <= 0.05
        details.append(f"c{kind}={np.mean(cs):.4f}+-{spread:.1%}")
    dt = time.time() - t0
    ok = ok and dt < 60.0
    assert report(7, "pointwise bound constants finite, stable +-5%", ok,
                  " ".join(details) + f" dt={dt:.1f}s")


def test_criterion_08_reduced_stationarity(ball_ev):
    t0 = time.time()
    rep = solve_reduced_system(
        ball_ev, [0.1], [1.0],
        [((40.0, 52.0), (np.full(4, -0.5), np.full(4, 0.5)))], mode="min")
    d_err = abs(rep.d_star[0] - (0.05 + D_LIMIT))
    xi_err = float(np.linalg.norm(rep.xi_star[0]))
    limit_err = abs(critical_d(1e-300, ALPHA4) - D_LIMIT)
    dt = time.time() - t0
    ok = d_err < 1e-6 and xi_err < 1e-6 and limit_err < 1e-12 * D_LIMIT \
        and dt < 10.0
    assert report(8, "reduced-system stationarity on the ball", ok,
                  f"|d*-target|={d_err:.1e} |xi*|={xi_err:.1e} dt={dt:.1f}s")


@pytest.mark.slow
def test_criterion_09_degree_certification():
    t0 = time.time()
    ball_ev = sl.RobinEvaluator(sl.BallDomain())
    c_center = brouwer_degree(ball_ev, (np.full(4, -0.5), np.full(4, 0.5)),
                              starts_per_level=8)
    c_empty = brouwer_degree(ball_ev, (np.full(4, 0.25), np.full(4, 0.45)),
                             starts_per_level=8)
    pf_ev = sl.RobinEvaluator(sl.PerforatedDomain())
    scan_boxes = [
        (np.array([-0.55, -0.18, -0.18, -0.18]), np.array([-0.15, 0.18, 0.18, 0.18])),
        (np.array([0.62, -0.12, -0.12, -0.12]), np.array([0.92, 0.12, 0.12, 0.12])),
    ]
    nonzero = 0
    degs = []
    for box in scan_boxes:
        cert = brouwer_degree(pf_ev, box, starts_per_level=12, max_levels=2)
        degs.append(cert.degree)
        nonzero += cert.degree != 0
    dt = time.time() - t0
    ok = (c_center.degree == 1 and c_empty.degree == 0 and nonzero >= 2
          and dt < 300.0)
    assert report(9, "degree certificates: ball 1/0, perforated scan >= 2", ok,
                  f"perforated degrees={degs} dt={dt:.1f}s")


@pytest.mark.slow
def test_criterion_10_energy_cross_validation(ball, ball_ev):
    t0 = time.time()
    ens1 = SpikeEnsemble([sl.BubbleParams(1e-2, (0, 0, 0, 0))], [0.1])
    a1 = energy_terms_asymptotic(ens1, ball, ball_ev)
    q1 = energy_terms_quadrature(ens1, ball, ball_ev)
    gap1 = abs(a1.total - q1.total)
    allow1 = 0.02 * a1.leading_level + q1.error
    ens2 = SpikeEnsemble(
        [sl.BubbleParams(1e-2, (0.4, 0, 0, 0)),
         sl.BubbleParams(1e-2, (-0.4, 0, 0, 0))], [0.1, 0.1],
        beta=-1.0, eta=0.35)
    a2 = energy_terms_asymptotic(ens2, ball, ball_ev)
    q2 = energy_terms_quadrature(ens2, ball, ball_ev)
    gap2 = abs(a2.total - q2.total)
    allow2 = 0.02 * a2.leading_level + q2.error
    dt = time.time() - t0
    ok = gap1 <= allow1 and gap2 <= allow2 and dt < 600.0
    assert report(10, "energy: quadrature vs asymptotic within 2% of level",
                  ok, f"m=1 {gap1:.3f}<={allow1:.3f}; "
                      f"m=2 {gap2:.3f}<={allow2:.3f} dt={dt:.1f}s")


def test_criterion_11_beta_admissibility():
    t0 = time.time()
    c1 = float(C4 / OMEGA3 * TABLE.A**2 * ALPHA4)
    lams = [0.5, 0.4, 0.3, 0.2, 0.1]
    verdicts = [
        beta_admissible(lambda lam: -1.0, lams, [ALPHA4]).verdict,
        beta_admissible(beta_schedule_from_spec("exp", 0.25, c1), lams,
                        [ALPHA4]).verdict,
        beta_admissible(beta_schedule_from_spec("exp", 1.0, c1), lams,
                        [ALPHA4]).verdict,
    ]
    dt = time.time() - t0
    ok = verdicts == [True, True, False] and dt < 1.0
    assert report(11, "coupling schedules classify as +/+/-", ok,
                  f"verdicts={verdicts} dt={dt:.2f}s")


@pytest.mark.slow
def test_criterion_12_radial_concentration():
    t0 = time.time()
    study = concentration_study([8.0, 7.0, 6.0, 5.0, 4.0])
    dt = time.time() - t0
    positive = all(d > 0 for d in study.d_values)
    mono = study.delta_monotone
    energy_ok = abs(study.energy_rel_error) < 0.15
    base_ok = positive and mono and energy_ok and dt < 300.0
    if study.intercept_within_tolerance:
        assert report(12, "radial concentration law", base_ok,
                      f"d0={study.fit_intercept:.2f} dt={dt:.1f}s")
        return
    # fallback path: the quantitative miss must be flagged and the hard
    # property must hold.  The monotone half does; the convexity half is
    # a known red: the reachable lambda window is preasymptotic and the
    # measured curve is concave.  Kept faithful, expected to fail.
    flagged = study.quantitative_miss_flag
    convex = study.log_inv_delta_convex_in_inv_lambda
    report(12, "radial concentration law (fallback path)",
           base_ok and flagged and convex,
           f"d0={study.fit_intercept:.2f} vs {study.d_limit:.2f}, "
           f"flagged={flagged}, monotone={mono}, convex={convex}, "
           f"energy={study.energy_rel_error:+.1%}, dt={dt:.1f}s")
    assert base_ok and flagged, "reporting or trend clauses failed"
    assert convex, (
        "known-red sub-clause: ln(1/delta) vs 1/lambda measures concave on "
        "every double-precision-reachable grid; the asymptotic regime needs "
        "delta ~ exp(-45)")


@pytest.mark.slow
def test_criterion_13_determinism(tmp_path):
    t0 = time.time()
    cfg = tmp_path / "ball.cfg"
    cfg.write_text("kind=ball\ncenter=0,0,0,0\nradius=1\n")
    out1, out2 = tmp_path / "v1.json", tmp_path / "v2.json"
    for out in (out1, out2):
        code = cli_main(["verify-all", "--domain", str(cfg), "--seed", "0",
                         "--out", str(out)])
        assert code == 0
    identical = out1.read_bytes() == out2.read_bytes()
    all_ok = json.loads(out1.read_text())["all_ok"]
    dt = time.time() - t0
    ok = identical and all_ok and dt < 600.0
    assert report(13, "verify-all deterministic and green", ok,
                  f"byte-identical={identical} dt={dt:.1f}s")
