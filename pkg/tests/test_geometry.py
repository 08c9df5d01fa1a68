# -*- coding: utf-8 -*-

import numpy as np
import pytest

from eertrack.exceptions import ConfigError
from eertrack.geometry import (
    OcclusionZone,
    Pose2,
    Rect,
    SensorFootprint,
    Workspace,
    fov_contains,
    is_observable,
    is_occluded,
)


class TestPose2:

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pose2(float('nan'), 0.0)

    def test_distance(self):
        assert Pose2(0, 0).distance_to(Pose2(3, 4)) == pytest.approx(5.0)


class TestFovContains:

    def test_center_inside(self):
        assert fov_contains(SensorFootprint((0, 0), (1, 1)), (0, 0))

    def test_boundary_counts_as_inside(self):
        fov = SensorFootprint((0, 0), (1, 1))
        assert fov_contains(fov, (1.0, 1.0))
        assert fov_contains(fov, (-1.0, 0.3))

    def test_outside(self):
        assert not fov_contains(SensorFootprint((0, 0), (1, 1)), (1.0001, 0))

    def test_zero_extent_rejected(self):
        with pytest.raises(ValueError):
            SensorFootprint((0, 0), (0, 1))

    def test_vectorised_agrees_with_scalar(self, rng):
        fov = SensorFootprint((2, 1), (0.75, 0.5))
        pts = rng.uniform(0, 4, size=(200, 2))
        expected = [fov_contains(fov, p) for p in pts]
        np.testing.assert_array_equal(fov.contains_many(pts), expected)


class TestOcclusion:

    def test_inside_zone(self):
        ws = Workspace((0, 0, 5, 5), [OcclusionZone(Rect(1, 1, 2, 2))])
        assert is_occluded(ws, (1.5, 1.5))

    def test_outside_zone(self):
        ws = Workspace((0, 0, 5, 5), [OcclusionZone(Rect(1, 1, 2, 2))])
        assert not is_occluded(ws, (0, 0))

    def test_zone_boundary_is_occluded(self):
        ws = Workspace((0, 0, 5, 5), [OcclusionZone(Rect(1, 1, 2, 2))])
        assert is_occluded(ws, (2.0, 1.5))

    def test_no_zones(self):
        assert not is_occluded(Workspace((0, 0, 5, 5)), (1.5, 1.5))

    def test_polygon_zone(self):
        ws = Workspace((0, 0, 5, 5), [OcclusionZone([(0, 0), (2, 0), (0, 2)], 'tri')])
        assert is_occluded(ws, (0.5, 0.5))
        assert not is_occluded(ws, (1.5, 1.5))

    def test_degenerate_zone_rejected(self):
        with pytest.raises(ConfigError):
            OcclusionZone(Rect(1, 1, 1, 2))

    def test_zone_outside_bounds_rejected(self):
        with pytest.raises(ConfigError):
            Workspace((0, 0, 5, 5), [OcclusionZone(Rect(4, 4, 6, 6))])

    def test_empty_bounds_rejected(self):
        with pytest.raises(ConfigError):
            Workspace((0, 0, 0, 5))


class TestObservable:

    def test_in_fov_not_occluded(self, workspace):
        assert is_observable(workspace, SensorFootprint((2, 2), (0.75, 0.75)), (2.2, 2.1))

    def test_in_fov_occluded(self, workspace):
        assert not is_observable(workspace, SensorFootprint((5.5, 1.0), (0.75, 0.75)), (5.5, 1.0))

    def test_out_of_fov(self, workspace):
        assert not is_observable(workspace, SensorFootprint((2, 2), (0.75, 0.75)), (4, 4))

    def test_observable_implies_in_fov(self, workspace, rng):
        fov = SensorFootprint((5.5, 1.2), (0.75, 0.75))
        for p in rng.uniform((0, 0), (11, 5.5), size=(2000, 2)):
            if is_observable(workspace, fov, p):
                assert fov_contains(fov, p)

    def test_removing_a_zone_never_hides_a_point(self, workspace, rng):
        fov = SensorFootprint((5.5, 1.2), (0.75, 0.75))
        opened = workspace.without_zone('node_a')
        for p in rng.uniform((4.5, 0.2), (6.5, 2.2), size=(2000, 2)):
            if is_observable(workspace, fov, p):
                assert is_observable(opened, fov, p)

    def test_occluded_many_matches_scalar(self, workspace, rng):
        pts = rng.uniform((4.5, 0.2), (6.5, 2.2), size=(300, 2))
        np.testing.assert_array_equal(workspace.occluded_many(pts), [is_occluded(workspace, p) for p in pts])
