# -*- coding: utf-8 -*-
"""Road network ground-truth simulator.

The target drives along the straight edges of a Markov-chain node graph at a
constant speed. At every node the next node is drawn from that node's
transition distribution, and any distance left over from the step is carried
onto the new edge.

"""

import logging
import math
from collections import OrderedDict

import numpy as np
import pandas as pd

from .exceptions import ConfigError
from .geometry import Pose2, Rect


logger = logging.getLogger('eertrack')

# Upper bound of the target velocity range, m/s.
MAX_TARGET_SPEED = 0.7

TRAJECTORY_CSV_HEADER = '# eertrack trajectory v1'


class RoadNetwork(object):

    def __init__(self, nodes, transitions, target_speed, start_node=None):
        """Markov-chain road network.

        Parameters:
            nodes (dict): node id -> (x, y) in meters.
            transitions (dict): node id -> list of (successor id, probability) or dict successor -> probability.
            target_speed (float): Constant target speed, m/s.
            start_node: Node the target starts at (defaults to the first node).

        """
        self.nodes = OrderedDict((str(k), Pose2(*v)) for k, v in nodes.items())
        self.transitions = OrderedDict()
        for k, succ in transitions.items():
            if isinstance(succ, dict):
                succ = list(succ.items())
            self.transitions[str(k)] = [(str(n), float(p)) for n, p in succ]
        self.target_speed = float(target_speed)
        self.start_node = str(start_node) if start_node is not None else next(iter(self.nodes), None)
        problems = self.validate()
        if problems:
            raise ConfigError(problems)
        self._successors = {}
        for k, succ in self.transitions.items():
            ids = [n for n, _ in succ]
            probs = np.array([p for _, p in succ])
            self._successors[k] = (ids, probs / probs.sum())

    def validate(self):
        problems = []
        if not self.nodes:
            problems.append('road network has no nodes')
        if not (0 < self.target_speed <= MAX_TARGET_SPEED):
            problems.append('target_speed {} outside (0, {}]'.format(self.target_speed, MAX_TARGET_SPEED))
        if self.start_node not in self.nodes:
            problems.append('start node {!r} does not exist'.format(self.start_node))
        for k, succ in self.transitions.items():
            if k not in self.nodes:
                problems.append('transitions reference unknown node {!r}'.format(k))
                continue
            total = 0.0
            for n, p in succ:
                if n not in self.nodes:
                    problems.append('edge {}->{} references unknown node'.format(k, n))
                elif self.nodes[n] == self.nodes[k]:
                    problems.append('edge {}->{} has zero length'.format(k, n))
                if not p >= 0:
                    problems.append('edge {}->{} has negative probability {}'.format(k, n, p))
                total += p
            if succ and abs(total - 1.0) > 1e-9:
                problems.append('transition probabilities of node {!r} sum to {}'.format(k, total))
        return problems

    def successors(self, node):
        return self._successors.get(node, ([], np.array([])))

    def edge_length(self, edge):
        a, b = edge
        return self.nodes[a].distance_to(self.nodes[b])

    def position_on_edge(self, edge, progress):
        a = self.nodes[edge[0]]
        b = self.nodes[edge[1]]
        return Pose2(a.x + progress * (b.x - a.x), a.y + progress * (b.y - a.y))

    @property
    def bounding_box(self):
        xs = [p.x for p in self.nodes.values()]
        ys = [p.y for p in self.nodes.values()]
        return Rect(min(xs), min(ys), max(xs), max(ys))

    def segments(self):
        """Return every directed edge as a pair of endpoint arrays."""
        for a, succ in self.transitions.items():
            for b, _ in succ:
                yield self.nodes[a].as_array(), self.nodes[b].as_array()

    def distance_to_network(self, p):
        """Distance from p to the nearest edge segment."""
        p = np.asarray(p, dtype=float)
        best = math.inf
        for a, b in self.segments():
            ab = b - a
            t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
            best = min(best, float(np.linalg.norm(p - (a + t * ab))))
        return best


class TargetTruth(object):

    __slots__ = ('pose', 'current_edge', 'edge_progress')

    def __init__(self, pose, current_edge, edge_progress):
        self.pose = pose
        self.current_edge = tuple(current_edge)
        self.edge_progress = float(edge_progress)

    def __repr__(self):
        return 'TargetTruth(pose={}, edge={}, progress={:.4f})'.format(
            tuple(self.pose), self.current_edge, self.edge_progress)

    @classmethod
    def at_node(cls, net, node, rng):
        """Place the target on node with its first edge already drawn."""
        nxt = sample_next_node(net, node, rng)
        return cls(net.nodes[node], (node, nxt), 0.0)


def sample_next_node(net, at, rng):
    ids, probs = net.successors(at)
    if not ids:
        raise ConfigError('node {!r} is a dead end (no outgoing transitions)'.format(at))
    return ids[rng.choice(len(ids), p=probs)]


def step_target(net, s, dt, rng):
    """Advance the target by target_speed * dt along the network."""
    if not dt > 0:
        raise ValueError('dt must be positive')
    remaining = net.target_speed * dt
    edge = s.current_edge
    progress = s.edge_progress
    while remaining > 0:
        length = net.edge_length(edge)
        left = (1.0 - progress) * length
        if remaining < left:
            progress += remaining / length
            remaining = 0.0
        else:
            remaining -= left
            node = edge[1]
            edge = (node, sample_next_node(net, node, rng))
            progress = 0.0
            logger.debug('target reached node {}, next edge {}'.format(node, edge))
    return TargetTruth(net.position_on_edge(edge, progress), edge, progress)


def generate_trajectory(net, duration, dt, rng, start=None):
    """Simulate floor(duration / dt) + 1 poses starting at the network's start node."""
    if not duration >= dt:
        raise ValueError('duration must be at least one step')
    steps = int(math.floor(duration / dt + 1e-9))
    truth = start if start is not None else TargetTruth.at_node(net, net.start_node, rng)
    poses = [truth.pose]
    for _ in range(steps):
        truth = step_target(net, truth, dt, rng)
        poses.append(truth.pose)
    return poses


def write_trajectory_csv(path, poses, dt):
    df = pd.DataFrame({
        't': np.arange(len(poses)) * dt,
        'x': [p.x for p in poses],
        'y': [p.y for p in poses],
    })
    with open(path, 'w', newline='') as f:
        f.write(TRAJECTORY_CSV_HEADER + '\n')
        df.to_csv(f, index=False)


def read_trajectory_csv(path):
    df = pd.read_csv(path, comment='#')
    return [Pose2(x, y) for x, y in zip(df['x'], df['y'])], df['t'].to_numpy()
