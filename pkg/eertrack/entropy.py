# -*- coding: utf-8 -*-
"""Particle-based entropy estimates and the expected entropy reduction (EER).

The low-level forms work on log-likelihood vectors and log transition-kernel
matrices (kernel[i, j] = log p(x_i | x_j)); every sum over densities is
taken with logsumexp.

"""

import logging
import math
import time
from collections import namedtuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import norm

from .dmmn.model import rollout_means
from .geometry import Pose2, SensorFootprint
from .particle_filter import MeasurementModel, subsample_indices


logger = logging.getLogger('eertrack')

EER_CSV_HEADER = '# eertrack eer v1'

# 11 m x 5.5 m workspace
DEFAULT_SUPPORT_AREA = 60.5

MEASUREMENT_SAMPLING = ('stratified', 'random')


EntropyResult = namedtuple('EntropyResult', ['nats', 'uninformative'])

Waypoint = namedtuple('Waypoint', ['position', 'horizon'])


def _log(w):
    with np.errstate(divide='ignore'):
        return np.log(np.asarray(w, dtype=float))


def _sentinel(support_area):
    logger.warning('entropy kernels underflowed; using the uninformative entropy')
    return EntropyResult(math.log(support_area), True)


def prior_entropy(log_kernel, prev_w, w=None, support_area=DEFAULT_SUPPORT_AREA):
    """-sum_i w_i log(sum_j p(x_i | x_j) prev_w_j)."""
    prev_w = np.asarray(prev_w, dtype=float)
    w = prev_w if w is None else np.asarray(w, dtype=float)
    inner = logsumexp(log_kernel + _log(prev_w)[None, :], axis=1)
    m = w > 0
    if not np.all(np.isfinite(inner[m])):
        return _sentinel(support_area)
    return EntropyResult(float(-np.sum(inner[m] * w[m])), False)


def posterior_entropy(log_lik, log_kernel, prev_w, post_w, support_area=DEFAULT_SUPPORT_AREA):
    """log(sum_i p(z | x_i) prev_w_i) - sum_i post_w_i log(p(z | x_i) sum_j p(x_i | x_j) prev_w_j)."""
    log_lik = np.asarray(log_lik, dtype=float)
    log_prev = _log(prev_w)
    post_w = np.asarray(post_w, dtype=float)
    first = logsumexp(log_lik + log_prev)
    inner = log_lik + logsumexp(log_kernel + log_prev[None, :], axis=1)
    m = post_w > 0
    if not (np.isfinite(first) and np.any(m) and np.all(np.isfinite(inner[m]))):
        return _sentinel(support_area)
    return EntropyResult(float(first - np.sum(inner[m] * post_w[m])), False)


def log_kernel_matrix(xs, means, sd):
    """log N(xs_i; means_j, sd^2 I) for every pair, shape (len(xs), len(means))."""
    diff = np.asarray(xs, dtype=float)[:, None, :] - np.asarray(means, dtype=float)[None, :, :]
    return norm.logpdf(diff, scale=sd).sum(-1)


def _prev_means(prev, model, horizon):
    return rollout_means(model, prev.histories, prev.times, horizon, prev.seeded)


def entropy_posterior(sub, prev, z, model, mm, sigma_p, horizon=1, support_area=DEFAULT_SUPPORT_AREA):
    """Entropy after a measurement z.

    Parameters:
        sub (ParticleSet): Current particles carrying the posterior weights.
        prev (ParticleSet): Their predecessors (index aligned) carrying the prior weights.
        horizon (int): Steps between prev and sub; the kernel variance grows with it.

    """
    if len(sub) != len(prev):
        raise ValueError('sub and prev must be index aligned')
    sd = sigma_p * math.sqrt(horizon)
    log_kernel = log_kernel_matrix(sub.positions, _prev_means(prev, model, horizon), sd)
    log_lik = mm.logpdf(np.asarray(tuple(z), dtype=float), sub.positions)
    return posterior_entropy(log_lik, log_kernel, prev.weights, sub.weights, support_area)


def entropy_prior(sub, prev, model, sigma_p, horizon=1, support_area=DEFAULT_SUPPORT_AREA):
    """Entropy of the predicted particles when no measurement is available."""
    if len(sub) != len(prev):
        raise ValueError('sub and prev must be index aligned')
    sd = sigma_p * math.sqrt(horizon)
    log_kernel = log_kernel_matrix(sub.positions, _prev_means(prev, model, horizon), sd)
    return prior_entropy(log_kernel, prev.weights, prev.weights, support_area)


def current_entropy(prev, ps, z, model, mm, sigma_p, n_h, rng, support_area=DEFAULT_SUPPORT_AREA):
    """Entropy of the current posterior from an N_H subsample.

    prev is the set before prediction and ps the set after prediction and
    update, index aligned. The subsample is drawn from the prior weights.

    """
    idx = subsample_indices(prev, n_h, rng)
    sub_prev = prev.take(idx)
    sub = ps.take(idx)
    if z is None:
        return entropy_prior(sub, sub_prev, model, sigma_p, support_area=support_area)
    log_lik = mm.logpdf(np.asarray(tuple(z), dtype=float), sub.positions)
    total = logsumexp(log_lik)
    post_w = np.exp(log_lik - total) if np.isfinite(total) else sub.weights
    return entropy_posterior(sub.with_weights(post_w), sub_prev, z, model, mm, sigma_p, support_area=support_area)


class EerConfig(object):

    FIELDS = (
        ('n_h', 25),
        ('n_m', 1),
        ('K', 5),
        ('sigma_p', 0.05),
        ('measurement_cov', ((0.0025, 0.0), (0.0, 0.0025))),
        ('grid', 5),
        ('v_max', 1.0),
        ('dt', 1.0 / 3.0),
        ('fov_half_extents', (0.75, 0.75)),
        ('known_occlusion', False),
        ('measurement_sampling', 'stratified'),
        ('support_area', DEFAULT_SUPPORT_AREA),
    )

    def __init__(self, **kwargs):
        names = [name for name, _ in self.FIELDS]
        unknown = set(kwargs) - set(names)
        if unknown:
            raise TypeError('unknown EER options: {}'.format(', '.join(sorted(unknown))))
        for name, default in self.FIELDS:
            setattr(self, name, kwargs.get(name, default))
        problems = self.validate()
        if problems:
            raise ValueError('; '.join(problems))
        self.mm = MeasurementModel(self.measurement_cov)

    def validate(self, n=None):
        problems = []
        if not self.n_h >= 1:
            problems.append('eer.n_h must be >= 1')
        if n is not None and self.n_h > n:
            problems.append('eer.n_h ({}) exceeds the particle count ({})'.format(self.n_h, n))
        if not self.n_m >= 1:
            problems.append('eer.n_m must be >= 1')
        if not self.K >= 1:
            problems.append('eer.K must be >= 1')
        if not self.sigma_p > 0:
            problems.append('sigma_p must be > 0')
        if not self.grid >= 1:
            problems.append('eer.grid must be >= 1')
        if not (self.v_max > 0 and self.dt > 0):
            problems.append('agent speed and filter step must be > 0')
        if self.measurement_sampling not in MEASUREMENT_SAMPLING:
            problems.append('eer.measurement_sampling must be one of {}'.format(', '.join(MEASUREMENT_SAMPLING)))
        return problems


class PlanningDraw(object):

    def __init__(self, ps, model, cfg, rng, current=None):
        """The random draw of one planning cycle, shared by every candidate waypoint.

        Subsamples N_H particles, rolls their means K steps ahead, adds the
        accumulated process noise and draws hypothetical measurements from the
        rolled particles. The entropy with and without each measurement is
        evaluated once here.

        Parameters:
            current (EntropyResult): Entropy of the current posterior; when
                None the prior entropy of the subsample is used.

        """
        self.cfg = cfg
        idx = subsample_indices(ps, cfg.n_h, rng)
        self.sub = ps.take(idx)
        self.means = rollout_means(model, self.sub.histories, self.sub.times, cfg.K, self.sub.seeded)
        sd = cfg.sigma_p * math.sqrt(cfg.K)
        self.rolled = self.means + rng.normal(0.0, sd, size=self.means.shape)
        log_kernel = log_kernel_matrix(self.rolled, self.means, sd)
        w = self.sub.weights

        n_h = len(self.sub)
        if cfg.measurement_sampling == 'stratified':
            source = np.repeat(np.arange(n_h), cfg.n_m)
        else:
            source = rng.integers(0, n_h, size=cfg.n_m)
        self.z_hat = cfg.mm.sample(self.rolled[source], rng)
        log_lik = cfg.mm.logpdf(self.z_hat[:, None, :], self.rolled[None, :, :])

        self.prior = prior_entropy(log_kernel, w, w, cfg.support_area)
        posts = []
        for row in log_lik:
            post_w = np.exp(row + _log(w) - logsumexp(row + _log(w)))
            posts.append(posterior_entropy(row, log_kernel, w, post_w, cfg.support_area))
        self.h_post = np.array([r.nats for r in posts])
        log_mix = logsumexp(log_lik + _log(w)[None, :], axis=1)
        self.omega = np.exp(log_mix - logsumexp(log_mix))
        if current is None:
            current = self.prior
        self.current = current
        self.uninformative = current.uninformative or self.prior.uninformative or any(r.uninformative for r in posts)

    @property
    def cloud_mean(self):
        return Pose2.from_array(self.sub.weights @ self.rolled)

    def eer(self, wp, ws=None):
        """EER of waypoint wp; occlusion zones of ws are honored when known_occlusion is set."""
        fov = SensorFootprint(tuple(wp.position if isinstance(wp, Waypoint) else wp), self.cfg.fov_half_extents)
        seen = fov.contains_many(self.z_hat)
        if ws is not None and self.cfg.known_occlusion:
            seen &= ~ws.occluded_many(self.z_hat)
        expected = np.sum(self.omega * np.where(seen, self.h_post, self.prior.nats))
        return float(self.current.nats - expected)


def expected_entropy_reduction(ps, wp, model, cfg, ws, rng, current=None):
    return PlanningDraw(ps, model, cfg, rng, current).eer(wp, ws)


def candidate_waypoints(agent, v_max, dt, cfg, bounds=None):
    """Agent position (hover) plus an n x n grid over the reachable disc.

    The disc radius is v_max * K * dt; grid points are clipped to bounds.

    """
    if not v_max > 0:
        raise ValueError('v_max must be positive')
    radius = v_max * cfg.K * dt
    agent = Pose2(agent[0], agent[1])
    if bounds is not None:
        agent = bounds.clip(agent)
    offsets = np.linspace(-radius, radius, cfg.grid) if cfg.grid > 1 else np.zeros(1)
    out = [Waypoint(agent, cfg.K)]
    seen = {(round(agent.x, 9), round(agent.y, 9))}
    for dy in offsets:
        for dx in offsets:
            if math.hypot(dx, dy) > radius * (1 + 1e-12):
                continue
            p = Pose2(agent.x + dx, agent.y + dy)
            if bounds is not None:
                p = bounds.clip(p)
            key = (round(p.x, 9), round(p.y, 9))
            if key not in seen:
                seen.add(key)
                out.append(Waypoint(p, cfg.K))
    return out


class EerResult(object):

    def __init__(self, candidates, values, prior_entropy, wall_time, uninformative=False):
        self.candidates = list(candidates)
        self.values = np.asarray(values, dtype=float)
        self.chosen_index = int(np.argmax(self.values))
        self.prior_entropy = prior_entropy
        self.wall_time = wall_time
        self.uninformative = uninformative

    def __repr__(self):
        return 'EerResult(chosen={}, eer={:.4f}, candidates={})'.format(
            tuple(self.chosen.position), self.values[self.chosen_index], len(self.candidates))

    @property
    def chosen(self):
        return self.candidates[self.chosen_index]

    def table(self):
        return pd.DataFrame({
            'candidate_x': [c.position.x for c in self.candidates],
            'candidate_y': [c.position.y for c in self.candidates],
            'eer': self.values,
        })


def best_waypoint(ps, agent, model, cfg, ws, rng, current=None, candidates=None):
    """Argmax of the EER over the candidate waypoints (ties go to the lowest index).

    Without explicit candidates the grid of `candidate_waypoints` is used,
    ordered by distance to the rolled-out particle cloud.

    """
    start = time.perf_counter()
    draw = PlanningDraw(ps, model, cfg, rng, current)
    if candidates is None:
        candidates = candidate_waypoints(agent, cfg.v_max, cfg.dt, cfg, ws.bounds)
        center = draw.cloud_mean
        candidates = sorted(candidates, key=lambda c: c.position.distance_to(center))
    values = [draw.eer(c, ws) for c in candidates]
    result = EerResult(candidates, values, draw.current.nats, time.perf_counter() - start, draw.uninformative)
    logger.debug('eer chose {} ({:.4f} nats) from {} candidates in {:.1f} ms'.format(
        tuple(result.chosen.position), result.values[result.chosen_index], len(candidates),
        1000 * result.wall_time))
    return result


class EerTableDump(object):
    """Writes every planning cycle's EER table as `k,candidate_x,candidate_y,eer` rows."""

    def __init__(self, path):
        self.path = path
        self._f = open(path, 'w', newline='')
        self._f.write(EER_CSV_HEADER + '\n')
        self._f.write('k,candidate_x,candidate_y,eer\n')

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()

    def write(self, k, result):
        df = result.table()
        df.insert(0, 'k', k)
        df.to_csv(self._f, header=False, index=False)

    def close(self):
        if not self._f.closed:
            self._f.close()
