import math

import numpy as np
import pytest

from smokeforge.camera import (CONVENTION_SOURCE, CONVENTION_SPLAT, CameraPose,
                               Intrinsics, MULTIVIEW_YAW_OFFSETS_DEG, PoseError,
                               TrajectorySpec, convert_convention, load_poses,
                               multiview_pose_set, offset_pose_about_pivot,
                               perturbation_delta, perturbation_pair,
                               relative_rotation_angle, save_poses,
                               synthetic_trajectory, trajectory_azimuth)
from conftest import rotation_from_axis_angle


def random_pose(rng, convention=CONVENTION_SPLAT):
    axis = rng.normal(size=3)
    R = rotation_from_axis_angle(axis, rng.uniform(0, np.pi))
    return CameraPose(R, rng.normal(0, 5, 3), convention)


# -- convention conversion ------------------------------------------------------


def test_convert_identity_pose():
    pose = CameraPose(np.eye(3), [1.0, 2.0, 3.0], CONVENTION_SOURCE)
    out = convert_convention(pose)
    assert np.array_equal(out.rotation, np.diag([1.0, -1.0, -1.0]))
    assert np.array_equal(out.translation, [1.0, -2.0, -3.0])
    assert out.convention == CONVENTION_SPLAT


def test_convert_is_involution():
    rng = np.random.default_rng(0)
    pose = random_pose(rng, CONVENTION_SOURCE)
    back = convert_convention(convert_convention(pose))
    assert np.allclose(back.rotation, pose.rotation, atol=1e-15)
    assert np.allclose(back.translation, pose.translation, atol=1e-15)
    assert back.convention == CONVENTION_SOURCE


def test_convert_preserves_rigidity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        out = convert_convention(random_pose(rng, CONVENTION_SOURCE))
        assert abs(np.linalg.det(out.rotation) - 1.0) < 1e-9
        assert np.abs(out.rotation @ out.rotation.T - np.eye(3)).max() < 1e-9


def test_bad_convention_tag_rejected():
    with pytest.raises(PoseError, match="unknown convention"):
        CameraPose(np.eye(3), np.zeros(3), "blender")


def test_non_rotation_rejected():
    with pytest.raises(PoseError):
        CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


# -- relative rotation angle -------------------------------------------------------


def test_angle_of_identical_poses_is_zero():
    rng = np.random.default_rng(2)
    pose = random_pose(rng)
    assert relative_rotation_angle(pose, pose) < 1e-9


def test_angle_recovers_constructed_rotation():
    rng = np.random.default_rng(3)
    base = random_pose(rng)
    # the trajectory span reported for the synthetic capture: 53 degrees
    for theta in (math.radians(53.0), 0.3, 1.2, 2.9):
        axis = rng.normal(size=3)
        rotated = CameraPose(rotation_from_axis_angle(axis, theta) @ base.rotation,
                             base.translation)
        assert abs(relative_rotation_angle(base, rotated) - theta) < 1e-9


def test_half_turn_gives_pi():
    base = CameraPose.identity()
    flipped = CameraPose(rotation_from_axis_angle([0, 1, 0], math.pi), np.zeros(3))
    assert abs(relative_rotation_angle(base, flipped) - math.pi) < 1e-9


def test_angle_symmetric_and_triangle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        assert abs(relative_rotation_angle(a, b) - relative_rotation_angle(b, a)) < 1e-12
        assert relative_rotation_angle(a, c) <= (relative_rotation_angle(a, b)
                                                 + relative_rotation_angle(b, c) + 1e-9)


def test_angle_requires_matching_conventions():
    a = CameraPose.identity(CONVENTION_SPLAT)
    b = CameraPose.identity(CONVENTION_SOURCE)
    with pytest.raises(PoseError, match="different conventions"):
        relative_rotation_angle(a, b)


# -- synthetic trajectory ------------------------------------------------------------


def test_trajectory_endpoints_exact():
    spec = TrajectorySpec()
    assert trajectory_azimuth(spec, 0) == -105.0
    assert trajectory_azimuth(spec, 270) == -45.0


def test_trajectory_midpoint():
    spec = TrajectorySpec()
    assert abs(trajectory_azimuth(spec, 135) - (-75.0)) < 1e-12


def test_trajectory_azimuth_affine():
    spec = TrajectorySpec()
    rng = np.random.default_rng(5)
    for _ in range(20):
        t1, t2 = rng.uniform(0, 270, 2)
        lhs = trajectory_azimuth(spec, t1) + trajectory_azimuth(spec, t2)
        rhs = 2.0 * trajectory_azimuth(spec, (t1 + t2) / 2.0)
        assert abs(lhs - rhs) < 1e-9


def test_trajectory_pose_geometry():
    spec = TrajectorySpec(radius=5.0)
    for t in (0, 100, 270):
        pose = synthetic_trajectory(spec, t)
        assert abs(np.linalg.norm(pose.translation) - 5.0) < 1e-9
        # looking at the origin: -z camera axis points at the target
        view_dir = -pose.rotation[:, 2]
        to_target = -pose.translation / np.linalg.norm(pose.translation)
        assert np.abs(view_dir - to_target).max() < 1e-9


def test_trajectory_relative_angle_matches_azimuth_sweep():
    spec = TrajectorySpec()
    a = synthetic_trajectory(spec, 0)
    b = synthetic_trajectory(spec, 270)
    swept = math.radians(abs(trajectory_azimuth(spec, 270) - trajectory_azimuth(spec, 0)))
    assert abs(relative_rotation_angle(a, b) - swept) < 1e-9


def test_trajectory_rejects_out_of_range():
    with pytest.raises(PoseError, match="outside"):
        trajectory_azimuth(TrajectorySpec(), 271)


# -- pivot offsets ----------------------------------------------------------------------


def test_zero_offset_is_identity():
    rng = np.random.default_rng(6)
    base = random_pose(rng)
    out = offset_pose_about_pivot(base, 0.0, 0.0, [1, 2, 3])
    assert np.allclose(out.rotation, base.rotation, atol=1e-15)
    assert np.allclose(out.translation, base.translation, atol=1e-12)


def test_camera_at_pivot_stays_put():
    rng = np.random.default_rng(7)
    base = random_pose(rng)
    out = offset_pose_about_pivot(base, 0.7, -0.3, base.translation)
    assert np.allclose(out.translation, base.translation, atol=1e-12)


def test_offset_preserves_distance_to_pivot():
    rng = np.random.default_rng(8)
    pivot = np.array([2.0, -1.0, 4.0])
    for _ in range(50):
        base = random_pose(rng)
        out = offset_pose_about_pivot(base, math.radians(10), 0.0, pivot)
        assert abs(np.linalg.norm(out.translation - pivot)
                   - np.linalg.norm(base.translation - pivot)) < 1e-9


def test_yaw_offsets_compose():
    rng = np.random.default_rng(9)
    base = random_pose(rng)
    pivot = [0.5, 0.5, 0.5]
    once = offset_pose_about_pivot(
        offset_pose_about_pivot(base, 0.2, 0.0, pivot), 0.3, 0.0, pivot)
    direct = offset_pose_about_pivot(base, 0.5, 0.0, pivot)
    assert np.abs(once.rotation - direct.rotation).max() < 1e-9
    assert np.abs(once.translation - direct.translation).max() < 1e-9


# -- multiview set -----------------------------------------------------------------------


def test_multiview_offsets_are_the_published_set():
    assert MULTIVIEW_YAW_OFFSETS_DEG == (-10.0, 10.0, 20.0, 30.0)
    rng = np.random.default_rng(10)
    base = random_pose(rng)
    poses = multiview_pose_set(base, [0, 0, 0])
    assert len(poses) == 4
    for pose, deg in zip(poses, MULTIVIEW_YAW_OFFSETS_DEG):
        assert abs(relative_rotation_angle(base, pose)
                   - math.radians(abs(deg))) < 1e-9


def test_zero_offset_sanity():
    rng = np.random.default_rng(11)
    base = random_pose(rng)
    out = offset_pose_about_pivot(base, math.radians(0.0), 0.0, [0, 0, 0])
    assert np.allclose(out.rotation, base.rotation, atol=1e-15)


# -- perturbation pairing -----------------------------------------------------------------


def test_perturbation_basic():
    assert perturbation_pair(5, 2, 240) == 7


def test_perturbation_wraps():
    assert perturbation_pair(239, 4, 240) == 3


def test_perturbation_zero_delta_degenerate():
    assert perturbation_pair(17, 0, 240) == 17


def test_perturbation_validation():
    with pytest.raises(ValueError):
        perturbation_pair(0, 1, 0)
    with pytest.raises(ValueError):
        perturbation_pair(240, 1, 240)


def test_perturbation_schedule():
    assert perturbation_delta(0.0) == 2
    assert perturbation_delta(0.49) == 2
    assert perturbation_delta(0.5) == 4
    assert perturbation_delta(1.0) == 4


# -- intrinsics and files -----------------------------------------------------------------


def test_intrinsics_validation():
    Intrinsics(focal=500.0, cx=320, cy=240, width=640, height=480)
    with pytest.raises(PoseError):
        Intrinsics(focal=0.0, cx=320, cy=240, width=640, height=480)
    with pytest.raises(PoseError):
        Intrinsics(focal=500.0, cx=700, cy=240, width=640, height=480)


def test_pose_json_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    poses = [random_pose(rng) for _ in range(4)]
    path = tmp_path / "poses.json"
    save_poses(path, poses)
    loaded = load_poses(path)
    for a, b in zip(poses, loaded):
        assert np.allclose(a.rotation, b.rotation, atol=1e-15)
        assert np.allclose(a.translation, b.translation, atol=1e-15)
        assert a.convention == b.convention
