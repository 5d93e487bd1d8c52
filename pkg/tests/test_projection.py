import numpy as np
import pytest

import spikelab as sl
from spikelab.constants import C4
from spikelab.errors import PreconditionError
from spikelab.projection import (derivative_defect, interior_grid,
                                 project_bubble, project_derivative,
                                 projection_defect)


def test_ball_center_exact_harmonic_part_is_constant(ball, ball_ev):
    # boundary trace of a centered bubble is constant, so the harmonic
    # correction is that constant
    delta = 0.05
    b = sl.BubbleParams(delta, (0, 0, 0, 0))
    pb = project_bubble(ball, b, "exact", ball_ev)
    want = C4 * delta / (1 + delta**2)
    grid = interior_grid(ball, 256)
    h = pb.harmonic_value(grid)
    assert np.abs(h - want).max() < 1e-10


def test_expansion_and_exact_agree_at_center(ball, ball_ev):
    # h(0) = c4 d/(1+d^2) = c4 d + O(d^3): modes agree to that order
    for delta in (1e-2, 1e-3):
        b = sl.BubbleParams(delta, (0, 0, 0, 0))
        exact = project_bubble(ball, b, "exact", ball_ev)
        expansion = project_bubble(ball, b, "expansion", ball_ev)
        x0 = np.zeros((1, 4))
        gap = abs(float(exact.value(x0) - expansion.value(x0)))
        assert gap <= 10.0 * C4 * delta**3


def test_exact_below_bubble(ball, ball_ev):
    b = sl.BubbleParams(0.03, (0.2, 0.0, -0.1, 0.1))
    pb = project_bubble(ball, b, "exact", ball_ev)
    grid = interior_grid(ball, 512)
    pu = pb.value(grid)
    u = sl.bubble_value(b, grid)
    assert np.all(pu > 0)
    assert np.all(pu < u)


def test_projection_vanishes_on_boundary(ball, ball_ev):
    b = sl.BubbleParams(0.02, (0.1, -0.2, 0.0, 0.0))
    pb = project_bubble(ball, b, "exact", ball_ev)
    bs = ball.boundary_samples(256)
    assert np.abs(pb.value(bs.points)).max() < 1e-8


def test_exact_projection_satisfies_equation(ball, ball_ev):
    # -Lap PU = U^3 away from the spike; the step is tuned to the local
    # curvature scale (the integrand varies on scale |x - xi|)
    b = sl.BubbleParams(0.01, (0, 0, 0, 0))
    pb = project_bubble(ball, b, "exact", ball_ev)
    rng = np.random.default_rng(5)
    for _ in range(6):
        x = rng.normal(size=4)
        x *= rng.uniform(0.25, 0.45) / np.linalg.norm(x)
        h = 5e-4 * float(np.linalg.norm(x))
        lap = 0.0
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            lap += float(pb.value((x + e)[None])[0] - 2 * pb.value(x[None])[0]
                         + pb.value((x - e)[None])[0])
        lap /= h * h
        rhs = -float(sl.bubble_value(b, x)) ** 3
        assert abs(lap - rhs) <= 1e-3 * max(abs(rhs), 1e-6)


def test_defect_closed_form_on_ball(ball, ball_ev):
    for delta in (1e-1, 1e-2, 1e-3):
        b = sl.BubbleParams(delta, (0, 0, 0, 0))
        d = projection_defect(ball, b, ball_ev)
        want = C4 * delta**3 / (1 + delta**2)
        assert d == pytest.approx(want, rel=1e-8)


def test_defect_over_delta_decreasing(ball, ball_ev):
    # off-center source; deltas capped by the projection precondition
    ratios = [projection_defect(ball, sl.BubbleParams(d, (0.1, 0, 0, 0)),
                                ball_ev) / d
              for d in (8e-2, 8e-3, 8e-4)]
    assert ratios[0] > ratios[1] > ratios[2]


def test_derivative_defect_rates(ball, ball_ev):
    # dilation direction: o(delta); shift directions: o(delta^2)
    for j, power in ((0, 1.0), (1, 2.0)):
        ratios = []
        for d in (1e-1, 1e-2):
            b = sl.BubbleParams(d, (0, 0, 0, 0))
            ratios.append(derivative_defect(ball, b, j, ball_ev) / d**power)
        assert ratios[1] < ratios[0]


def test_derivative_projection_boundary_vanishes(ball, ball_ev):
    b = sl.BubbleParams(0.02, (0, 0, 0, 0))
    for j in (0, 2):
        pd = project_derivative(ball, b, j, "exact", ball_ev)
        bs = ball.boundary_samples(200)
        assert np.abs(pd.value(bs.points)).max() < 1e-6


def test_center_dilation_boundary_data_constant(ball, ball_ev):
    # psi_0 boundary trace for a centered bubble is constant by symmetry,
    # so its exact harmonic part is constant too
    delta = 0.05
    b = sl.BubbleParams(delta, (0, 0, 0, 0))
    pd = project_derivative(ball, b, 0, "exact", ball_ev)
    want = C4 * delta * (1 - delta**2) / (1 + delta**2) ** 2
    grid = interior_grid(ball, 128)
    h = pd.harmonic_part.evaluate(grid)
    assert np.abs(h - want).max() < 1e-9


def test_squared_projection_l2_shrinks(ball, ball_ev):
    # || (PU)^2 - U^2 ||_{L2} shrinks with delta (exact mode)
    from spikelab.quadrature import QuadratureSpec, integrate

    vals = []
    for delta in (1e-2, 1e-3):
        b = sl.BubbleParams(delta, (0, 0, 0, 0))
        pb = project_bubble(ball, b, "exact", ball_ev)
        spec = QuadratureSpec(spike_centers=[((0, 0, 0, 0), delta)])
        r = integrate(ball, lambda x: (pb.value(x) ** 2
                                       - sl.bubble_value(b, x) ** 2) ** 2, spec)
        vals.append(np.sqrt(max(r.value, 0.0)))
    assert vals[1] < vals[0]


def test_projection_preconditions(ball, ball_ev):
    with pytest.raises(PreconditionError):
        project_bubble(ball, sl.BubbleParams(0.2, (0.5, 0, 0, 0)), "exact", ball_ev)
    with pytest.raises(PreconditionError):
        project_bubble(ball, sl.BubbleParams(0.01, (1.5, 0, 0, 0)), "exact", ball_ev)
    with pytest.raises(PreconditionError):
        project_bubble(ball, sl.BubbleParams(0.01, (0, 0, 0, 0)), "magic", ball_ev)
