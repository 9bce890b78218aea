import numpy as np
import pytest

from safeland.geometry import CameraIntrinsics, PointCloud, RigidTransform


@pytest.fixture
def intrinsics_vga():
    return CameraIntrinsics(100.0, 100.0, 320.0, 240.0, 640, 480)


def down_pose(x, y, z):
    """Camera-to-world pose of a straight-down camera at (x, y, z)."""
    rot = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return RigidTransform(rot, np.array([x, y, z], dtype=float))


def rot_x(deg):
    r = np.radians(deg)
    return np.array(
        [[1, 0, 0], [0, np.cos(r), -np.sin(r)], [0, np.sin(r), np.cos(r)]]
    )


def rot_z(deg):
    r = np.radians(deg)
    return np.array(
        [[np.cos(r), -np.sin(r), 0], [np.sin(r), np.cos(r), 0], [0, 0, 1]]
    )


def plane_grid(n_side=20, spread=2.0, z=0.0, tilt_deg=0.0, frame="world"):
    """Regular grid on a plane through the origin, optionally tilted about x."""
    axis = np.linspace(-spread / 2, spread / 2, n_side)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel(), np.full(xx.size, float(z))])
    if tilt_deg:
        pts = pts @ rot_x(tilt_deg).T
    return PointCloud(pts, frame)
