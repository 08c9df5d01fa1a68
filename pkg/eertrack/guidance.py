# -*- coding: utf-8 -*-
"""Waypoint guidance policies.

Every policy reads the filter state from a GuidanceContext and returns a
GuidanceDecision without touching the filter. Policies are looked up by their
config name in GUIDANCE_TYPE.

"""

import logging
import math
from collections import OrderedDict, namedtuple
from enum import Enum

import numpy as np

from .entropy import best_waypoint
from .geometry import Pose2
from .particle_filter import weighted_mean


logger = logging.getLogger('eertrack')


class GuidanceMode(Enum):

    EER = 'EER'
    TRACK = 'TRACK'
    LAWN_SWEEP = 'LAWN_SWEEP'
    PFWM = 'PFWM'
    TRUTH = 'TRUTH'


class LawnPhase(Enum):

    SWEEPING = 'sweeping'
    TRACKING = 'tracking'


class GuidanceDecision(object):

    def __init__(self, waypoint, mode, diagnostics=None):
        self.waypoint = waypoint
        self.mode = mode
        self.diagnostics = diagnostics

    def __repr__(self):
        return 'GuidanceDecision({}, {})'.format(tuple(self.waypoint), self.mode.value)


class GuidanceContext(object):
    """Everything a policy may look at in one guidance cycle."""

    def __init__(self, ps, agent, ws, rng, last_z=None, truth=None, current=None, step=0):
        self.ps = ps
        self.agent = agent
        self.ws = ws
        self.rng = rng
        self.last_z = last_z
        self.truth = truth
        self.current = current
        self.step = step


def lawn_path(ws, half_extents, spacing_factor=0.9):
    """Boustrophedon vertices covering the workspace bounds.

    Rows run east-west at y spaced at most spacing_factor * FOV height apart,
    inset by the footprint half extents so the footprint stays in bounds.

    Returns:
        (list of Pose2 vertices, row spacing)

    """
    if not 0 < spacing_factor <= 1:
        raise ValueError('spacing_factor must be in (0, 1]')
    hx, hy = half_extents
    b = ws.bounds
    x_left, x_right = b.xmin + hx, b.xmax - hx
    if x_left > x_right:
        x_left = x_right = b.center.x
    y_low, y_high = b.ymin + hy, b.ymax - hy
    if y_low > y_high:
        y_low = y_high = b.center.y
    max_spacing = spacing_factor * 2 * hy
    rows = 1 if y_high == y_low else int(math.ceil((y_high - y_low) / max_spacing - 1e-12)) + 1
    ys = np.linspace(y_low, y_high, rows)
    spacing = float(ys[1] - ys[0]) if rows > 1 else 0.0
    path = []
    for row, y in enumerate(ys):
        xs = (x_left, x_right) if row % 2 == 0 else (x_right, x_left)
        path.extend(Pose2(x, y) for x in xs)
    return path, spacing


class LawnState(namedtuple('LawnState', ['index', 'increment', 'spacing', 'phase', 'path', 'arrive_tolerance'])):
    """Progress along the boustrophedon path; row and direction follow from the vertex index."""

    __slots__ = ()

    @classmethod
    def initial(cls, ws, half_extents, spacing_factor=0.9, arrive_tolerance=0.05):
        path, spacing = lawn_path(ws, half_extents, spacing_factor)
        return cls(0, 1, spacing, LawnPhase.SWEEPING, tuple(path), arrive_tolerance)

    @property
    def row(self):
        return self.index // 2

    @property
    def direction(self):
        """+1 while heading east, -1 while heading west."""
        east = 1 if self.row % 2 == 0 else -1
        return east if self.increment > 0 else -east

    @property
    def target(self):
        return self.path[self.index]

    def advanced(self):
        nxt = self.index + self.increment
        if 0 <= nxt < len(self.path):
            return self._replace(index=nxt)
        if len(self.path) == 1:
            return self
        return self._replace(index=self.index - self.increment, increment=-self.increment)


def policy_dmmn_eer(ps, agent, model, cfg, ws, rng, current=None):
    result = best_waypoint(ps, agent, model, cfg, ws, rng, current=current)
    return GuidanceDecision(ws.bounds.clip(result.chosen.position), GuidanceMode.EER, result)


def policy_lawn(state, last_z, ws, agent=None):
    """Track the last measurement, otherwise continue the sweep.

    The sweep advances to the next vertex once the agent is within the
    arrival tolerance of the current one (or on every call when agent is None)
    and bounces back at either end of the path.

    """
    if last_z is not None:
        return (GuidanceDecision(ws.bounds.clip(last_z), GuidanceMode.TRACK),
                state._replace(phase=LawnPhase.TRACKING))
    state = state._replace(phase=LawnPhase.SWEEPING)
    if agent is None or Pose2(*agent).distance_to(state.target) <= state.arrive_tolerance:
        state = state.advanced()
        logger.debug('lawn sweep heading to vertex {} (row {})'.format(state.index, state.row))
    return GuidanceDecision(ws.bounds.clip(state.target), GuidanceMode.LAWN_SWEEP), state


def policy_pfwm(ps, ws=None):
    wp = weighted_mean(ps)
    if ws is not None:
        wp = ws.bounds.clip(wp)
    return GuidanceDecision(wp, GuidanceMode.PFWM)


class BaseGuidance(object):

    name = None

    def __init__(self, ws, *args, **kwargs):
        """Base guidance policy.

        Parameters:
            ws (Workspace): Workspace every waypoint is clipped to.

        """
        self.ws = ws

    def decide(self, context):
        """Return the GuidanceDecision for this cycle.

        Every policy subclass must implement this method.

        """
        raise NotImplementedError


class EerGuidance(BaseGuidance):

    name = 'dmmn_eer'

    def __init__(self, ws, model=None, eer=None, **kwargs):
        super().__init__(ws)
        self.model = model
        self.eer = eer

    def decide(self, context):
        return policy_dmmn_eer(context.ps, context.agent, self.model, self.eer, self.ws, context.rng,
                               current=context.current)


class LawnGuidance(BaseGuidance):

    name = 'lawn'

    def __init__(self, ws, half_extents=(0.75, 0.75), spacing_factor=0.9, arrive_tolerance=0.05, **kwargs):
        super().__init__(ws)
        self.state = LawnState.initial(ws, half_extents, spacing_factor, arrive_tolerance)

    def decide(self, context):
        decision, self.state = policy_lawn(self.state, context.last_z, self.ws, context.agent)
        return decision


class PfwmGuidance(BaseGuidance):

    name = 'pfwm'

    def decide(self, context):
        return policy_pfwm(context.ps, self.ws)


class TruthGuidance(BaseGuidance):
    """Flies to the true target position."""

    name = 'truth'

    def decide(self, context):
        return GuidanceDecision(self.ws.bounds.clip(context.truth), GuidanceMode.TRUTH)


GUIDANCE_TYPE = OrderedDict([
    ('dmmn_eer', EerGuidance),
    ('lawn', LawnGuidance),
    ('pfwm', PfwmGuidance),
    ('truth', TruthGuidance),
])
