import math

import numpy as np
import pytest
from scipy.integrate import quad

import spikelab as sl
from spikelab.constants import C4, OMEGA3
from spikelab.errors import PreconditionError
from spikelab.pointsets import sphere3_design
from spikelab.quadrature import (QuadratureSpec, fit_loglog_slope,
                                 fit_two_term_log, integrate,
                                 integrate_bubble_power, interaction_integral,
                                 taylor_bound_check)


def sphere_monomial_average(a):
    from math import gamma
    if any(ai % 2 for ai in a):
        return 0.0
    val = 2 * np.prod([gamma((ai + 1) / 2) for ai in a]) / gamma((sum(a) + 4) / 2)
    return val / OMEGA3


class TestSphericalDesign:
    def test_seven_design_exact(self):
        pts, w = sphere3_design(7)
        assert len(pts) == 48
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-14)
        from itertools import product
        for a in product(range(8), repeat=4):
            if sum(a) > 7:
                continue
            approx = float(w @ np.prod(pts ** np.array(a), axis=1))
            assert approx == pytest.approx(sphere_monomial_average(a), abs=1e-13)

    def test_five_design(self):
        pts, w = sphere3_design(5)
        assert len(pts) == 24
        from itertools import product
        for a in product(range(6), repeat=4):
            if sum(a) > 5:
                continue
            approx = float(w @ np.prod(pts ** np.array(a), axis=1))
            assert approx == pytest.approx(sphere_monomial_average(a), abs=1e-13)

    def test_product_rule_higher_degree(self):
        pts, w = sphere3_design(11)
        approx = float(w @ pts[:, 0] ** 10)
        assert approx == pytest.approx(sphere_monomial_average((10, 0, 0, 0)),
                                       rel=1e-12)


class TestEngine:
    def test_engine_matches_radial_oracle(self, ball):
        # purely radial integrand centered at 0: split engine vs 1-D
        # adaptive quadrature, 1e-6 relative
        b = sl.BubbleParams(1e-3, (0, 0, 0, 0))
        r = integrate_bubble_power(ball, b, 2.0)
        oracle = C4**2 * b.delta**2 * OMEGA3 * quad(
            lambda t: t**3 / (1 + t * t) ** 2, 0.0, 1.0 / b.delta, limit=200)[0]
        assert r.value == pytest.approx(oracle, rel=1e-6)

    def test_reproducible_outer_estimates(self, ball):
        b1 = sl.BubbleParams(1e-2, (0.3, 0, 0, 0))
        spec = QuadratureSpec(spike_centers=[((0.3, 0, 0, 0), 1e-2)], seed=7)
        f = lambda x: sl.bubble_value(b1, x) ** 2
        v1 = integrate(ball, f, spec).value
        spec2 = QuadratureSpec(spike_centers=[((0.3, 0, 0, 0), 1e-2)], seed=7)
        v2 = integrate(ball, f, spec2).value
        assert v1 == v2

    def test_error_honesty_battery(self, ball):
        # doubling the sample count moves the estimate by less than the
        # reported error in at least 95 percent of a 100-case battery
        rng = np.random.default_rng(0)
        hits = 0
        for k in range(100):
            c = rng.normal(size=4)
            c *= rng.uniform(0.0, 0.45) / np.linalg.norm(c)
            delta = 10 ** rng.uniform(-3, -2)
            b = sl.BubbleParams(delta, tuple(c))
            f = lambda x: sl.bubble_value(b, x) ** 2
            spec_a = QuadratureSpec(spike_centers=[(tuple(c), delta)],
                                    outer_samples=4096, seed=k)
            spec_b = QuadratureSpec(spike_centers=[(tuple(c), delta)],
                                    outer_samples=8192, seed=k)
            ra = integrate(ball, f, spec_a)
            rb = integrate(ball, f, spec_b)
            if abs(rb.value - ra.value) <= max(ra.error, 1e-300):
                hits += 1
        assert hits >= 95

    def test_split_preconditions(self, ball):
        b = sl.BubbleParams(0.2, (0, 0, 0, 0))
        with pytest.raises(PreconditionError):
            integrate_bubble_power(ball, b, 2.0)       # delta too large
        b1 = sl.BubbleParams(1e-3, (0.1, 0, 0, 0))
        b2 = sl.BubbleParams(1e-3, (0.12, 0, 0, 0))
        with pytest.raises(PreconditionError):
            interaction_integral(ball, b1, b2, 2.0, 2.0)  # centers too close
        with pytest.raises(PreconditionError):
            integrate_bubble_power(ball, b1, 4.5)


class TestRates:
    def test_p2_two_term_coefficient(self, ball):
        deltas = [1e-2, 1e-3, 1e-4, 1e-5]
        vals = [integrate_bubble_power(ball, sl.BubbleParams(d, (0, 0, 0, 0)),
                                       2.0).value for d in deltas]
        rep = fit_two_term_log(deltas, vals, C4**2 * OMEGA3, 0.02)
        assert rep.verdict
        # the subleading coefficient for the centered unit ball is known:
        # value/d^2 = c4^2 omega3 (|ln d| - 1/2) + O(d^2)
        assert rep.fitted_coefficients["b"] == pytest.approx(
            -0.5 * C4**2 * OMEGA3, rel=1e-3)

    def test_small_power_rate(self, ball):
        ds = [1e-2, 1e-3, 1e-4]
        vals = [integrate_bubble_power(ball, sl.BubbleParams(d, (0, 0, 0, 0)),
                                       4.0 / 3.0).value for d in ds]
        scaled = [v / d ** (4.0 / 3.0) for v, d in zip(vals, ds)]
        spread = (max(scaled) - min(scaled)) / max(scaled)
        assert spread < 0.10

    def test_cubic_rate_window(self, ball):
        # for p = 3 the scaled value sits below the whole-space bubble mass
        from spikelab.constants import TABLE
        for d in (1e-3, 1e-4):
            v = integrate_bubble_power(ball, sl.BubbleParams(d, (0, 0, 0, 0)),
                                       3.0).value
            assert 0.5 * TABLE.A <= v / d <= 1.0 * TABLE.A

    def test_pair_decay_in_delta2(self, ball):
        b1 = sl.BubbleParams(1e-2, (0.4, 0, 0, 0))
        vals = []
        for d2 in (1e-2, 3e-3, 1e-3):
            b2 = sl.BubbleParams(d2, (-0.4, 0, 0, 0))
            vals.append(interaction_integral(ball, b1, b2, 2.0, 2.0).value)
        assert vals[0] > vals[1] > vals[2]


class TestPointwiseBounds:
    def test_zero_increment(self):
        c, pair = taylor_bound_check(1, sample_count=10)
        assert math.isfinite(c)

    @pytest.mark.parametrize("kind", [1, 2, 3, 4])
    def test_ratio_finite_and_reseed_stable(self, kind):
        cs = [taylor_bound_check(kind, 200_000, 10.0, seed=s)[0]
              for s in range(5)]
        assert all(math.isfinite(c) for c in cs)
        assert (max(cs) - min(cs)) / max(cs) <= 0.05

    def test_kind1_grid_oracle(self):
        # the ratio is homogeneous of degree zero; a dense angular scan
        # near the sampled maximizer pins the same constant
        c, (a0, b0) = taylor_bound_check(1, 500_000, 10.0, seed=1)
        th0 = math.atan2(b0, a0)
        ths = th0 + np.linspace(-1e-2, 1e-2, 2001)
        a = np.cos(ths)
        b = np.sin(ths)
        fplus = lambda s: np.maximum(s, 0.0) ** 4 / 4.0
        fp1 = lambda s: np.maximum(s, 0.0) ** 3
        lhs = np.abs(fplus(a + b) - fplus(a) - fp1(a) * b)
        rhs = a * a * b * b + b**4
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
        assert ratio.max() == pytest.approx(c, rel=1e-3)

    def test_kind4_cancellation_points(self):
        # a = -b gives LHS |a|^p, RHS (|a|^{p-1} + |a|^{p-1})|a|: finite ratio
        c, _ = taylor_bound_check(4, 100_000, 5.0, seed=0)
        assert math.isfinite(c) and c > 0

    def test_bad_kind(self):
        with pytest.raises(PreconditionError):
            taylor_bound_check(7)


def test_loglog_fit_requires_positive():
    with pytest.raises(PreconditionError):
        fit_loglog_slope([1e-1, 1e-2], [1.0, -1.0], 1.0, 0.1)
