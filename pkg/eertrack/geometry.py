# -*- coding: utf-8 -*-
"""Workspace geometry.

Planar poses, the projected sensor footprint of the agent's downward camera,
occlusion zones and the observability predicate. Everything in this module is
immutable once constructed.

"""

import math
from collections import namedtuple

import numpy as np
import shapely
from shapely.geometry import Point, Polygon, box

from .exceptions import ConfigError


class Pose2(namedtuple('Pose2', ['x', 'y'])):
    """Planar position in the inertial frame (meters)."""

    __slots__ = ()

    def __new__(cls, x, y):
        x = float(x)
        y = float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError('Pose2 components must be finite, got ({}, {})'.format(x, y))
        return super().__new__(cls, x, y)

    @classmethod
    def from_array(cls, a):
        return cls(a[0], a[1])

    def as_array(self):
        return np.array([self.x, self.y])

    def distance_to(self, other):
        return math.hypot(self.x - other[0], self.y - other[1])


class Rect(namedtuple('Rect', ['xmin', 'ymin', 'xmax', 'ymax'])):
    """Axis-aligned rectangle of the ground plane."""

    __slots__ = ()

    @classmethod
    def around(cls, center, half_x, half_y):
        return cls(center[0] - half_x, center[1] - half_y, center[0] + half_x, center[1] + half_y)

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def area(self):
        return max(self.width, 0.0) * max(self.height, 0.0)

    @property
    def center(self):
        return Pose2(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def is_empty(self):
        return not (self.width > 0 and self.height > 0)

    def contains(self, p):
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def contains_many(self, xy):
        xy = np.asarray(xy)
        return ((xy[..., 0] >= self.xmin) & (xy[..., 0] <= self.xmax) &
                (xy[..., 1] >= self.ymin) & (xy[..., 1] <= self.ymax))

    def clip(self, p):
        return Pose2(min(max(p[0], self.xmin), self.xmax), min(max(p[1], self.ymin), self.ymax))

    def intersect(self, other):
        return Rect(max(self.xmin, other.xmin), max(self.ymin, other.ymin),
                    min(self.xmax, other.xmax), min(self.ymax, other.ymax))

    def sample(self, rng, n):
        """Draw n points uniformly from the rectangle."""
        xs = rng.uniform(self.xmin, self.xmax, size=n)
        ys = rng.uniform(self.ymin, self.ymax, size=n)
        return np.stack([xs, ys], axis=-1)


class SensorFootprint(object):

    def __init__(self, center, half_extents):
        """Projected camera field of view on the ground plane.

        Parameters:
            center (Pose2): Agent position, which is also the footprint center.
            half_extents (tuple): Half side lengths (x, y) of the footprint rectangle, meters.

        """
        hx, hy = float(half_extents[0]), float(half_extents[1])
        if not (hx > 0 and hy > 0):
            raise ValueError('footprint half extents must be strictly positive')
        self.center = Pose2(center[0], center[1])
        self.half_extents = (hx, hy)

    def __repr__(self):
        return 'SensorFootprint(center={}, half_extents={})'.format(tuple(self.center), self.half_extents)

    @property
    def rect(self):
        return Rect.around(self.center, *self.half_extents)

    def moved_to(self, center):
        return SensorFootprint(center, self.half_extents)

    def contains_many(self, xy):
        xy = np.asarray(xy)
        return ((np.abs(xy[..., 0] - self.center.x) <= self.half_extents[0]) &
                (np.abs(xy[..., 1] - self.center.y) <= self.half_extents[1]))


class OcclusionZone(object):

    def __init__(self, vertices, zone_id=''):
        """Ground region in which the target cannot be seen.

        Parameters:
            vertices: Either a Rect or a sequence of (x, y) polygon vertices (meters).
            zone_id (str): Label used in logs.

        """
        if isinstance(vertices, Rect):
            polygon = box(*vertices)
        else:
            polygon = Polygon([(float(x), float(y)) for x, y in vertices])
        if not polygon.is_valid or polygon.area <= 0:
            raise ConfigError('occlusion zone {!r} is degenerate'.format(zone_id))
        self.id = zone_id
        self.polygon = polygon
        shapely.prepare(self.polygon)

    def __repr__(self):
        return 'OcclusionZone({!r}, bounds={})'.format(self.id, self.polygon.bounds)

    def contains(self, p):
        return self.polygon.covers(Point(p[0], p[1]))

    def contains_many(self, xy):
        xy = np.asarray(xy, dtype=float)
        flat = xy.reshape(-1, 2)
        return shapely.covers(self.polygon, shapely.points(flat)).reshape(xy.shape[:-1])


class Workspace(object):

    def __init__(self, bounds, zones=()):
        self.bounds = Rect(*[float(v) for v in bounds])
        if self.bounds.is_empty():
            raise ConfigError('workspace bounds {} are empty'.format(tuple(self.bounds)))
        self.zones = tuple(zones)
        outer = box(*self.bounds)
        for zone in self.zones:
            if not outer.covers(zone.polygon):
                raise ConfigError('occlusion zone {!r} lies outside the workspace bounds'.format(zone.id))

    def __repr__(self):
        return 'Workspace(bounds={}, zones={})'.format(tuple(self.bounds), list(self.zones))

    def without_zone(self, zone_id):
        return Workspace(self.bounds, [z for z in self.zones if z.id != zone_id])

    def occluded_many(self, xy):
        xy = np.asarray(xy, dtype=float)
        mask = np.zeros(xy.shape[:-1], dtype=bool)
        for zone in self.zones:
            mask |= zone.contains_many(xy)
        return mask


def fov_contains(fov, p):
    """Return True if p lies in the footprint, boundary included."""
    return (abs(p[0] - fov.center.x) <= fov.half_extents[0] and
            abs(p[1] - fov.center.y) <= fov.half_extents[1])


def is_occluded(ws, p):
    return any(zone.contains(p) for zone in ws.zones)


def is_observable(ws, fov, p):
    return fov_contains(fov, p) and not is_occluded(ws, p)
