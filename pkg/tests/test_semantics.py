import numpy as np
import pytest

from safeland.geometry import (
    CameraIntrinsics,
    FRAME_STEREO_LEFT,
    PointCloud,
    RigidTransform,
    project_point,
)
from safeland.semantics import (
    ClassTable,
    DEFAULT_CLASS_TABLE,
    LabelImage,
    NUM_CLASSES,
    corrupt_labels,
    filter_cloud_by_semantics,
    is_safe_class,
)


@pytest.fixture
def intr():
    return CameraIntrinsics(50.0, 50.0, 32.0, 24.0, 64, 48)


def uniform_labels(intr, class_id):
    return LabelImage(np.full((intr.height, intr.width), class_id, dtype=np.uint8))


def frustum_cloud(intr, n=300, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.uniform(1.0, 4.0, n)
    u = rng.uniform(1, intr.width - 2, n)
    v = rng.uniform(1, intr.height - 2, n)
    x = (u - intr.cx) * z / intr.fx
    y = (v - intr.cy) * z / intr.fy
    return PointCloud(np.column_stack([x, y, z]), FRAME_STEREO_LEFT)


class TestClassTable:
    def test_default_has_eleven_entries(self):
        assert len(DEFAULT_CLASS_TABLE.entries) == NUM_CLASSES
        assert DEFAULT_CLASS_TABLE.entries[0] == "safe landing site"
        assert DEFAULT_CLASS_TABLE.safe_set == {0}

    def test_rejects_wrong_cardinality(self):
        with pytest.raises(ValueError):
            ClassTable({0: "a", 1: "b"}, frozenset({0}))

    def test_rejects_empty_safe_set(self):
        with pytest.raises(ValueError):
            ClassTable(safe_set=frozenset())


class TestIsSafeClass:
    def test_safe_landing_site(self):
        assert is_safe_class(0, DEFAULT_CLASS_TABLE) is True

    def test_people_not_safe(self):
        assert is_safe_class(1, DEFAULT_CLASS_TABLE) is False

    def test_out_of_range_raises(self):
        with pytest.raises(ValueError):
            is_safe_class(11, DEFAULT_CLASS_TABLE)


class TestLabelImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            LabelImage(np.full((2, 2), 11, dtype=np.uint8))


class TestFilter:
    def test_uniform_safe_keeps_whole_cloud(self, intr):
        cloud = frustum_cloud(intr)
        safe, unsafe = filter_cloud_by_semantics(
            cloud, uniform_labels(intr, 0), intr, RigidTransform.identity(), DEFAULT_CLASS_TABLE
        )
        assert len(safe) == len(cloud)
        assert len(unsafe) == 0

    def test_uniform_obstacle_rejects_whole_cloud(self, intr):
        cloud = frustum_cloud(intr)
        safe, unsafe = filter_cloud_by_semantics(
            cloud, uniform_labels(intr, 2), intr, RigidTransform.identity(), DEFAULT_CLASS_TABLE
        )
        assert len(safe) == 0
        assert len(unsafe) == len(cloud)

    def test_half_split_matches_per_point_oracle(self, intr):
        cloud = frustum_cloud(intr, n=500, seed=4)
        labels = np.full((intr.height, intr.width), 2, dtype=np.uint8)
        labels[:, : intr.width // 2] = 0  # left half safe
        limg = LabelImage(labels)
        xform = RigidTransform.identity()
        safe, unsafe = filter_cloud_by_semantics(cloud, limg, intr, xform, DEFAULT_CLASS_TABLE)

        # independent oracle: project each point individually
        expect_safe = []
        expect_unsafe = []
        for p in cloud.xyz:
            uv = project_point(p, intr, xform)
            if uv is None:
                continue
            ui, vi = int(np.floor(uv[0] + 0.5)), int(np.floor(uv[1] + 0.5))
            if not (0 <= ui < intr.width and 0 <= vi < intr.height):
                continue
            (expect_safe if labels[vi, ui] == 0 else expect_unsafe).append(p)
        np.testing.assert_allclose(safe.xyz, np.array(expect_safe))
        np.testing.assert_allclose(unsafe.xyz, np.array(expect_unsafe))

    def test_partition_property(self, intr):
        cloud = frustum_cloud(intr, n=400, seed=9)
        labels = LabelImage(
            np.random.default_rng(1).integers(0, NUM_CLASSES, (intr.height, intr.width)).astype(np.uint8)
        )
        safe, unsafe = filter_cloud_by_semantics(
            cloud, labels, intr, RigidTransform.identity(), DEFAULT_CLASS_TABLE
        )
        assert len(safe) + len(unsafe) <= len(cloud)
        combined = np.vstack([safe.xyz, unsafe.xyz])
        assert len(np.unique(combined, axis=0)) == len(combined)

    def test_monotone_in_safe_set(self, intr):
        cloud = frustum_cloud(intr, n=400, seed=2)
        labels = LabelImage(
            np.random.default_rng(5).integers(0, NUM_CLASSES, (intr.height, intr.width)).astype(np.uint8)
        )
        small = ClassTable(safe_set=frozenset({0}))
        big = ClassTable(safe_set=frozenset({0, 2, 6}))
        safe_small, _ = filter_cloud_by_semantics(
            cloud, labels, intr, RigidTransform.identity(), small
        )
        safe_big, _ = filter_cloud_by_semantics(
            cloud, labels, intr, RigidTransform.identity(), big
        )
        assert len(safe_big) >= len(safe_small)

    def test_behind_camera_discarded(self, intr):
        cloud = PointCloud(np.array([[0.0, 0.0, -2.0], [0.0, 0.0, 2.0]]), FRAME_STEREO_LEFT)
        safe, unsafe = filter_cloud_by_semantics(
            cloud, uniform_labels(intr, 0), intr, RigidTransform.identity(), DEFAULT_CLASS_TABLE
        )
        assert len(safe) + len(unsafe) == 1

    def test_dimension_mismatch_raises(self, intr):
        labels = LabelImage(np.zeros((10, 10), dtype=np.uint8))
        with pytest.raises(ValueError):
            filter_cloud_by_semantics(
                frustum_cloud(intr), labels, intr, RigidTransform.identity(), DEFAULT_CLASS_TABLE
            )


class TestCorruptLabels:
    def test_rate_zero_is_identity(self):
        labels = LabelImage(np.zeros((20, 20), dtype=np.uint8))
        out = corrupt_labels(labels, 0.0, np.random.default_rng(0))
        assert out is labels

    def test_flips_expected_fraction_to_other_classes(self):
        labels = LabelImage(np.zeros((50, 50), dtype=np.uint8))
        out = corrupt_labels(labels, 0.2, np.random.default_rng(3))
        changed = (out.labels != labels.labels).sum()
        assert changed == round(0.2 * 2500)
        assert out.labels.max() < NUM_CLASSES

    def test_deterministic_per_seed(self):
        labels = LabelImage(np.full((30, 30), 4, dtype=np.uint8))
        a = corrupt_labels(labels, 0.1, np.random.default_rng(8))
        b = corrupt_labels(labels, 0.1, np.random.default_rng(8))
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_rejects_bad_rate(self):
        labels = LabelImage(np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            corrupt_labels(labels, 1.5, np.random.default_rng(0))
