import numpy as np
import pytest

import spikelab as sl


@pytest.fixture(scope="session")
def ball():
    return sl.BallDomain()


@pytest.fixture(scope="session")
def ball_ev(ball):
    return sl.RobinEvaluator(ball)


@pytest.fixture(scope="session")
def colloc_ball():
    return sl.BallDomain(force_collocation=True)


@pytest.fixture(scope="session")
def colloc_ev(colloc_ball):
    ev = sl.RobinEvaluator(colloc_ball)
    ev._ensure_base()
    return ev


@pytest.fixture(scope="session")
def perforated():
    return sl.PerforatedDomain()


@pytest.fixture(scope="session")
def perforated_ev(perforated):
    ev = sl.RobinEvaluator(perforated)
    ev._ensure_base()
    return ev


@pytest.fixture(scope="session")
def interior_points():
    """Deterministic interior battery for the unit ball, |x| <= 0.9."""
    rng = np.random.default_rng(42)
    pts = []
    while len(pts) < 60:
        v = rng.normal(size=4)
        v *= rng.uniform(0.0, 0.9) / np.linalg.norm(v)
        pts.append(v)
    return np.array(pts)
