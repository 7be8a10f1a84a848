import numpy as np
import pytest

from smokeforge.asset import AssetFrame, SmokeAsset
from smokeforge.grids import ScalarGrid, StaggeredVectorGrid
from smokeforge.solver import SimState


def build_asset(n_vis=20, n_phy=15, n_frames=1, seed=0, fps=30.0):
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n_frames):
        q = rng.normal(size=(n_vis, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        frames.append(AssetFrame(
            vis_positions=rng.uniform(-1, 1, (n_vis, 3)),
            vis_colors=rng.uniform(0, 1, n_vis),
            vis_scales=rng.uniform(0.2, 0.6, (n_vis, 3)),
            vis_opacities=rng.uniform(0.1, 1.0, n_vis),
            vis_rotations=q,
            phy_positions=rng.uniform(-1, 1, (n_phy, 3)),
            phy_velocities=rng.normal(0, 0.2, (n_phy, 3))))
    return SmokeAsset(frames=frames, fps=fps)


def gaussian_blob(res, bmin, bmax, center, sigma, peak=1.0):
    grid = ScalarGrid.zeros(res, bmin, bmax)
    pts = grid.center_points()
    d2 = ((pts - np.asarray(center, dtype=np.float64)) ** 2).sum(axis=1)
    grid.values[...] = (peak * np.exp(-0.5 * d2 / sigma ** 2)).reshape(res)
    return grid


def blob_state(res, bmin, bmax, center, sigma, peak=1.0):
    return SimState(density=gaussian_blob(res, bmin, bmax, center, sigma, peak),
                    velocity=StaggeredVectorGrid.zeros(res, bmin, bmax))


def rotation_from_axis_angle(axis, angle):
    """Rodrigues formula; the tests' independent rotation oracle."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


@pytest.fixture
def make_asset():
    return build_asset


@pytest.fixture
def make_blob():
    return gaussian_blob


@pytest.fixture
def make_blob_state():
    return blob_state


@pytest.fixture
def axis_angle():
    return rotation_from_axis_angle
