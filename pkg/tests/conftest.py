import numpy as np
import pytest

from pointkit import PointCloud, normalize_unit_sphere


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def unit_cloud(rng):
    """200 points, normalized to the unit sphere."""
    return normalize_unit_sphere(PointCloud(rng.normal(size=(200, 3))))


def random_rotation(rng) -> np.ndarray:
    """Haar-ish rotation via QR, determinant fixed to +1."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
