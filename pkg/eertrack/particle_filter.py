# -*- coding: utf-8 -*-
"""Particle filter estimator of the target position.

Every particle carries its own K_in history window so the motion model can be
evaluated per hypothesis. Operations return new sets and leave their inputs
untouched.

"""

import logging
from collections import namedtuple
from enum import Enum

import numpy as np
import pandas as pd
from scipy.stats import multivariate_normal

from .dmmn.model import DEFAULT_DT, HistoryWindow, as_motion_model
from .exceptions import ConfigError, RegionError
from .geometry import Pose2, Rect, Workspace
from .road import RoadNetwork


logger = logging.getLogger('eertrack')

PARTICLE_CSV_HEADER = '# eertrack particles v1'


Particle = namedtuple('Particle', ['history', 'weight'])


class ResampleBranch(Enum):

    NONE = 'none'
    MULTINOMIAL = 'multinomial'
    UNIFORM = 'uniform'


class MeasurementModel(object):

    def __init__(self, cov):
        """Gaussian position measurement z ~ N(x, cov)."""
        cov = np.array(cov, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(cov)) or np.abs(cov - cov.T).max() > 1e-12:
            raise ConfigError('measurement covariance must be finite and symmetric')
        if not np.all(np.linalg.eigvalsh(cov) > 0):
            raise ConfigError('measurement covariance must be positive definite')
        self.cov = cov
        self._chol = np.linalg.cholesky(cov)
        self._dist = multivariate_normal(mean=np.zeros(2), cov=cov)

    def __repr__(self):
        return 'MeasurementModel(cov={})'.format(self.cov.tolist())

    @property
    def sigma(self):
        return np.sqrt(np.diag(self.cov))

    def logpdf(self, z, xs):
        """log p(z | x) for every row of xs; z may also be a stack of measurements."""
        diff = np.asarray(z, dtype=float) - np.asarray(xs, dtype=float)
        return np.reshape(self._dist.logpdf(diff.reshape(-1, 2)), diff.shape[:-1])

    def pdf(self, z, xs):
        return np.exp(self.logpdf(z, xs))

    def sample(self, xs, rng):
        """Noisy measurements of the positions xs, same shape as xs."""
        xs = np.asarray(xs, dtype=float)
        return xs + rng.standard_normal(xs.shape) @ self._chol.T


class ParticleSet(object):

    def __init__(self, histories, weights, times=None, step=0, seeded=None, dt=DEFAULT_DT, degenerate=False):
        """N weighted hypotheses of the target position.

        Parameters:
            histories (ndarray): (N, K_in, 2) position windows, newest last.
            weights (ndarray): (N,) normalized weights.
            times: (K_in,) timestamps shared by every window, newest at 0.
            step (int): Filter time index k.
            seeded: (N,) True where the window was filled by replication.
            degenerate (bool): Set when the last update left no supported particle.

        """
        self.histories = np.asarray(histories, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        n, k_in = self.histories.shape[:2]
        if self.weights.shape != (n,):
            raise ValueError('need one weight per particle')
        if times is None:
            times = (np.arange(k_in) - (k_in - 1)) * dt
        self.times = np.asarray(times, dtype=float)
        self.step = int(step)
        self.seeded = np.zeros(n, dtype=bool) if seeded is None else np.asarray(seeded, dtype=bool)
        self.dt = float(dt)
        self.degenerate = bool(degenerate)

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return 'ParticleSet(n={}, k={}, ess={:.1f})'.format(len(self), self.step, self.ess)

    @property
    def k_in(self):
        return self.histories.shape[1]

    @property
    def positions(self):
        return self.histories[:, -1, :]

    @property
    def ess(self):
        return 1.0 / float(np.sum(self.weights ** 2))

    @property
    def particles(self):
        return [Particle(self.window(i), self.weights[i]) for i in range(len(self))]

    def window(self, i):
        return HistoryWindow(self.histories[i], self.times, self.dt, self.seeded[i])

    def take(self, idx, weights=None):
        """New set made of the particles at idx (histories are copied)."""
        idx = np.asarray(idx)
        if weights is None:
            weights = np.full(len(idx), 1.0 / len(idx))
        return ParticleSet(self.histories[idx].copy(), weights, self.times, self.step, self.seeded[idx], self.dt)

    def with_weights(self, weights, degenerate=False):
        return ParticleSet(self.histories, weights, self.times, self.step, self.seeded, self.dt, degenerate)


def _region_rect(region):
    if isinstance(region, Workspace):
        return region.bounds
    if isinstance(region, RoadNetwork):
        return region.bounding_box
    return Rect(*region)


def init(region, n, k_in, rng, dt=DEFAULT_DT, step=0):
    """Uniform prior over region (a Workspace, a RoadNetwork's extent or a Rect)."""
    if n < 1:
        raise ValueError('need at least one particle')
    rect = _region_rect(region)
    if rect.is_empty():
        raise RegionError('cannot initialize particles over empty region {}'.format(tuple(rect)))
    xy = rect.sample(rng, n)
    histories = np.repeat(xy[:, None, :], k_in, axis=1)
    return ParticleSet(histories, np.full(n, 1.0 / n), step=step, seeded=np.ones(n, dtype=bool), dt=dt)


def predict(ps, model, sigma_p, rng):
    if not sigma_p >= 0:
        raise ValueError('sigma_p must be non-negative')
    model = as_motion_model(model, ps.dt)
    means = model.predict(ps.histories, ps.times, ps.seeded, rng)
    new = means + rng.normal(0.0, sigma_p, size=means.shape)
    histories = np.concatenate([ps.histories[:, 1:], new[:, None, :]], axis=1)
    return ParticleSet(histories, ps.weights.copy(), ps.times, ps.step + 1, None, ps.dt)


def _normalized(ps, w, reason):
    total = float(w.sum())
    if not (total > 0 and np.isfinite(total)):
        logger.warning('particle weights degenerate at step {} ({}); resetting to uniform'.format(ps.step, reason))
        return ps.with_weights(np.full(len(ps), 1.0 / len(ps)), degenerate=True)
    return ps.with_weights(w / total)


def update(ps, z, mm):
    """Bayes update of the weights with the measurement z."""
    z = np.asarray(tuple(z), dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError('measurement must be finite')
    lik = np.exp(mm.logpdf(z, ps.positions))
    return _normalized(ps, ps.weights * lik, 'all likelihoods underflowed')


def update_negative(ps, fov, miss_likelihood, ws=None):
    """Down-weight particles the sensor would have seen after a step without a measurement.

    Parameters:
        miss_likelihood (float): Probability of no detection for a target inside the footprint.
        ws (Workspace): If given, particles inside its occlusion zones are not down-weighted.

    """
    if not 0 <= miss_likelihood <= 1:
        raise ValueError('miss_likelihood must be in [0, 1]')
    seen = fov.contains_many(ps.positions)
    if ws is not None:
        seen &= ~ws.occluded_many(ps.positions)
    w = ps.weights * np.where(seen, miss_likelihood, 1.0)
    return _normalized(ps, w, 'every particle inside the footprint')


def resample_branch(ps, a, b):
    r = ps.ess / len(ps)
    if ps.degenerate or r < b:
        return ResampleBranch.UNIFORM
    if r < a:
        return ResampleBranch.MULTINOMIAL
    return ResampleBranch.NONE


def resample(ps, a, b, ws, rng, region=None):
    """Resample on the effective sample size ratio r = N_eff / N.

    r < b (or a degenerate set) reinitializes every particle uniformly; b <= r < a
    draws N indices proportional to the weights; otherwise the set is returned
    unchanged.

    Without a region the reinitialization covers the workspace bounds with
    fresh seeded windows. With a region (the measurement gate) the positions
    are drawn over it and every particle keeps the window shape of a
    weight-drawn predecessor, translated onto its new position.

    """
    if not 0 <= b <= a <= 1:
        raise ValueError('resampling thresholds must satisfy 0 <= b <= a <= 1')
    branch = resample_branch(ps, a, b)
    if branch is ResampleBranch.UNIFORM:
        rect = None if region is None else _region_rect(region)
        if rect is None or rect.is_empty():
            logger.debug('step {}: ess ratio {:.3f}, reinitializing over the workspace'.format(
                ps.step, ps.ess / len(ps)))
            return init(ws.bounds, len(ps), ps.k_in, rng, ps.dt, ps.step)
        logger.debug('step {}: ess ratio {:.3f}, reinitializing over {}'.format(
            ps.step, ps.ess / len(ps), tuple(rect)))
        n = len(ps)
        xy = rect.sample(rng, n)
        idx = rng.choice(n, size=n, p=ps.weights)
        histories = ps.histories[idx] - ps.histories[idx, -1:, :] + xy[:, None, :]
        return ParticleSet(histories, np.full(n, 1.0 / n), ps.times, ps.step, ps.seeded[idx], ps.dt)
    if branch is ResampleBranch.MULTINOMIAL:
        idx = rng.choice(len(ps), size=len(ps), p=ps.weights)
        return ps.take(idx)
    return ps


def weighted_mean(ps):
    return Pose2.from_array(ps.weights @ ps.positions)


def covariance(ps):
    d = ps.positions - ps.weights @ ps.positions
    cov = (ps.weights[:, None] * d).T @ d
    return 0.5 * (cov + cov.T)


def subsample_indices(ps, n_h, rng):
    """Systematic (low-variance) draw of n_h indices proportional to the weights."""
    if not 1 <= n_h <= len(ps):
        raise ValueError('subsample size must be in [1, {}]'.format(len(ps)))
    cdf = np.cumsum(ps.weights)
    cdf[-1] = 1.0
    u = (rng.random() + np.arange(n_h)) / n_h
    return np.minimum(np.searchsorted(cdf, u, side='right'), len(ps) - 1)


def subsample(ps, n_h, rng):
    return ps.take(subsample_indices(ps, n_h, rng))


class ParticleDump(object):
    """Writes the particle cloud of every filter step as `k,i,x,y,w` rows."""

    def __init__(self, path):
        self.path = path
        self._f = open(path, 'w', newline='')
        self._f.write(PARTICLE_CSV_HEADER + '\n')
        self._f.write('k,i,x,y,w\n')

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()

    def write(self, ps):
        df = pd.DataFrame({
            'k': ps.step,
            'i': np.arange(len(ps)),
            'x': ps.positions[:, 0],
            'y': ps.positions[:, 1],
            'w': ps.weights,
        })
        df.to_csv(self._f, header=False, index=False)

    def close(self):
        if not self._f.closed:
            self._f.close()
