import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


def random_cone_point(rng, t_range=(2.0, 12.0), beta_max=0.95):
    """Random point strictly inside the forward light cone (d=2)."""
    t = rng.uniform(*t_range)
    beta = rng.uniform(0.0, beta_max)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    r = beta * t
    return t, np.array([r * np.cos(ang), r * np.sin(ang)])
