import numpy as np
import pytest

from crossview.geometry import Homography


def make_random_homography(rng, projective=1e-3):
    """Well-conditioned random projective map keeping test points off the horizon."""
    while True:
        m = np.eye(3) + rng.uniform(-0.3, 0.3, (3, 3))
        m[2, :2] = rng.uniform(-projective, projective, 2)
        m[2, 2] = 1.0
        if abs(np.linalg.det(m / np.linalg.norm(m))) > 1e-6:
            return Homography(m), m


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
