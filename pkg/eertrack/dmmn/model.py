# -*- coding: utf-8 -*-
"""Learned target motion model.

A small transformer maps a window of K_in past target positions to the
position one step ahead: a linear position embedding plus a sinusoidal
encoding of each sample's relative timestamp, a stack of pre-norm encoder
layers (multi-head self-attention and a ReLU feed-forward block), a final
layer norm on the newest token and a linear decoder.

Windows are centered on their newest pose before they enter the network and
the decoder output is a displacement that is added back to that pose, so the
model is exactly translation equivariant. The forward pass keeps the
intermediate values the hand-written backward pass in `dmmn.train` needs.

"""

import logging
import math
from collections import OrderedDict

import numpy as np
from scipy.special import softmax
from scipy.stats import multivariate_normal

from ..exceptions import NumericError
from ..geometry import Pose2


logger = logging.getLogger('eertrack')

DEFAULT_DT = 1.0 / 3.0
LN_EPS = 1e-5

# Period range (seconds) spanned by the sinusoidal timestamp encoding.
PE_MIN_PERIOD = 1.0
PE_MAX_PERIOD = 60.0
# Centered positions are multiplied by this before the embedding.
DEFAULT_INPUT_SCALE = 4.0

# Baseline velocity range for windows without an observed change, m/s.
CV_MAX_SPEED = 0.7

# Weights that are part of the parameter file but are not trained.
FIXED_WEIGHTS = ('pe_freq', 'input_scale')

LAYER_WEIGHTS = ('ln1_g', 'ln1_b', 'wq', 'bq', 'wk', 'bk', 'wv', 'bv', 'wo', 'bo',
                 'ln2_g', 'ln2_b', 'w1', 'b1', 'w2', 'b2')


class HistoryWindow(object):

    def __init__(self, poses, timestamps=None, dt=DEFAULT_DT, seeded=False):
        """K_in consecutive target positions, oldest first.

        Parameters:
            poses: Sequence of Pose2 or an array of shape (K, 2).
            timestamps: Relative times of each pose in seconds, strictly increasing.
                Defaults to a regular grid ending at 0 with spacing dt.
            dt (float): Nominal step between samples, seconds.
            seeded (bool): True if the window was filled by replicating one position
                (it carries no information about the target's velocity).

        """
        poses = np.array([tuple(p) for p in poses], dtype=float).reshape(-1, 2)
        if timestamps is None:
            timestamps = (np.arange(len(poses)) - (len(poses) - 1)) * dt
        timestamps = np.array(timestamps, dtype=float)
        if timestamps.shape != (len(poses),):
            raise ValueError('need one timestamp per pose')
        if not (np.all(np.isfinite(poses)) and np.all(np.isfinite(timestamps))):
            raise ValueError('history window must be finite')
        if np.any(np.diff(timestamps) <= 0):
            raise ValueError('history timestamps must be strictly increasing')
        self.poses = poses
        self.timestamps = timestamps
        self.dt = float(dt)
        self.seeded = bool(seeded)

    def __len__(self):
        return len(self.poses)

    def __repr__(self):
        return 'HistoryWindow(k={}, last={}, seeded={})'.format(len(self), tuple(self.last), self.seeded)

    @classmethod
    def replicate(cls, pose, k_in, dt=DEFAULT_DT):
        return cls(np.tile(np.asarray(tuple(pose), dtype=float), (k_in, 1)), dt=dt, seeded=True)

    @property
    def last(self):
        return Pose2.from_array(self.poses[-1])

    def shifted(self, c):
        return HistoryWindow(self.poses + np.asarray(tuple(c), dtype=float), self.timestamps, self.dt, self.seeded)

    def appended(self, pose):
        """Drop the oldest pose and append pose one nominal step after the newest."""
        poses = np.vstack([self.poses[1:], np.asarray(tuple(pose), dtype=float)])
        times = np.append(self.timestamps[1:], self.timestamps[-1] + self.dt)
        return HistoryWindow(poses, times, self.dt)


class DmmnParams(object):

    def __init__(self, d_model, heads, layers, d_ff, k_in, weights, train_loss=math.nan, val_loss=math.nan):
        """All weights of the motion model plus its hyperparameters.

        Parameters:
            weights (OrderedDict): name -> array, in the order of `weight_shapes`.

        """
        if d_model % heads:
            raise ValueError('d_model ({}) must be divisible by the number of heads ({})'.format(d_model, heads))
        self.d_model = int(d_model)
        self.heads = int(heads)
        self.layers = int(layers)
        self.d_ff = int(d_ff)
        self.k_in = int(k_in)
        shapes = self.weight_shapes(self.d_model, self.layers, self.d_ff)
        if list(weights.keys()) != list(shapes.keys()):
            raise ValueError('weights do not match the architecture')
        self.weights = OrderedDict()
        for name, shape in shapes.items():
            w = np.array(weights[name], dtype=float).reshape(shape)
            if not np.all(np.isfinite(w)):
                raise NumericError(name, 'non-finite weight')
            self.weights[name] = w
        self.train_loss = float(train_loss)
        self.val_loss = float(val_loss)

    def __repr__(self):
        return 'DmmnParams(d_model={}, heads={}, layers={}, d_ff={}, k_in={})'.format(
            self.d_model, self.heads, self.layers, self.d_ff, self.k_in)

    @property
    def hyper(self):
        return dict(d_model=self.d_model, heads=self.heads, layers=self.layers, d_ff=self.d_ff, k_in=self.k_in)

    @staticmethod
    def weight_shapes(d_model, layers, d_ff):
        d = d_model
        shapes = OrderedDict([
            ('pe_freq', (d // 2,)),
            ('input_scale', (1,)),
            ('embed_w', (2, d)),
            ('embed_b', (d,)),
        ])
        for l in range(layers):
            p = 'l{}.'.format(l)
            shapes[p + 'ln1_g'] = (d,)
            shapes[p + 'ln1_b'] = (d,)
            for m in ('q', 'k', 'v', 'o'):
                shapes[p + 'w' + m] = (d, d)
                shapes[p + 'b' + m] = (d,)
            shapes[p + 'ln2_g'] = (d,)
            shapes[p + 'ln2_b'] = (d,)
            shapes[p + 'w1'] = (d, d_ff)
            shapes[p + 'b1'] = (d_ff,)
            shapes[p + 'w2'] = (d_ff, d)
            shapes[p + 'b2'] = (d,)
        shapes['lnf_g'] = (d,)
        shapes['lnf_b'] = (d,)
        shapes['dec_w'] = (d, 2)
        shapes['dec_b'] = (2,)
        return shapes

    @classmethod
    def initialize(cls, rng, d_model=32, heads=4, layers=2, d_ff=64, k_in=10, zero_decoder=True,
                   input_scale=DEFAULT_INPUT_SCALE):
        """Random initial weights.

        The decoder starts at zero unless zero_decoder is False, so an untrained
        model predicts that the target stays where it was last seen.

        """
        if d_model % 2:
            raise ValueError('d_model must be even for the timestamp encoding')
        weights = OrderedDict()
        for name, shape in cls.weight_shapes(d_model, layers, d_ff).items():
            short = name.split('.')[-1]
            if name == 'pe_freq':
                w = 2 * np.pi / np.geomspace(PE_MIN_PERIOD, PE_MAX_PERIOD, shape[0])
            elif name == 'input_scale':
                w = np.array([input_scale])
            elif short.endswith('_g'):
                w = np.ones(shape)
            elif short.startswith('b') or short.endswith('_b'):
                w = np.zeros(shape)
            elif name == 'dec_w' and zero_decoder:
                w = np.zeros(shape)
            else:
                w = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), size=shape)
            weights[name] = w
        return cls(d_model, heads, layers, d_ff, k_in, weights)

    def with_weights(self, weights, train_loss=None, val_loss=None):
        return DmmnParams(self.d_model, self.heads, self.layers, self.d_ff, self.k_in, weights,
                          self.train_loss if train_loss is None else train_loss,
                          self.val_loss if val_loss is None else val_loss)

    def trainable_names(self):
        return [n for n in self.weights if n not in FIXED_WEIGHTS]


def time_encoding(times, freq):
    """Sinusoidal encoding of relative timestamps, shape times.shape + (2 * len(freq),)."""
    phase = times[..., None] * freq
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)


def _check(x, layer):
    if not np.all(np.isfinite(x)):
        raise NumericError(layer)


def _layer_norm(x, g, b):
    xc = x - x.mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _split_heads(x, heads):
    B, S, D = x.shape
    return x.reshape(B, S, heads, D // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, S, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, S, H * dh)


def _attention(a, w, p, heads):
    qh = _split_heads(a @ w[p + 'wq'] + w[p + 'bq'], heads)
    kh = _split_heads(a @ w[p + 'wk'] + w[p + 'bk'], heads)
    vh = _split_heads(a @ w[p + 'wv'] + w[p + 'bv'], heads)
    scale = 1.0 / math.sqrt(qh.shape[-1])
    att = softmax((qh @ kh.transpose(0, 1, 3, 2)) * scale, axis=-1)
    ctx = _merge_heads(att @ vh)
    return ctx @ w[p + 'wo'] + w[p + 'bo'], (a, qh, kh, vh, att, ctx, scale)


def _feed_forward(a, w, p):
    h1 = a @ w[p + 'w1'] + w[p + 'b1']
    r = np.maximum(h1, 0.0)
    return r @ w[p + 'w2'] + w[p + 'b2'], (a, h1, r)


def encode(params, centered, times, keep_cache=False):
    """Run the network on centered windows.

    Parameters:
        centered (ndarray): (B, K_in, 2) positions relative to each window's newest pose.
        times (ndarray): (B, K_in) or (K_in,) timestamps relative to the newest pose.

    Returns:
        The predicted displacement (B, 2), and the cache for the backward pass if keep_cache is set.

    """
    w = params.weights
    scale = w['input_scale'][0]
    inp = centered * scale
    times = np.broadcast_to(times, centered.shape[:2])
    x = inp @ w['embed_w'] + w['embed_b'] + time_encoding(times, w['pe_freq'])
    _check(x, 'embedding')
    layer_caches = []
    for l in range(params.layers):
        p = 'l{}.'.format(l)
        a1, ln1 = _layer_norm(x, w[p + 'ln1_g'], w[p + 'ln1_b'])
        att, att_cache = _attention(a1, w, p, params.heads)
        x1 = x + att
        a2, ln2 = _layer_norm(x1, w[p + 'ln2_g'], w[p + 'ln2_b'])
        ff, ff_cache = _feed_forward(a2, w, p)
        x = x1 + ff
        _check(x, 'encoder {}'.format(l))
        if keep_cache:
            layer_caches.append((ln1, att_cache, ln2, ff_cache))
    f, lnf = _layer_norm(x[:, -1, :], w['lnf_g'], w['lnf_b'])
    y = f @ w['dec_w'] + w['dec_b']
    _check(y, 'decoder')
    disp = y / scale
    if not keep_cache:
        return disp
    return disp, (inp, x.shape, layer_caches, f, lnf)


def center_window(w):
    """Center a window on its newest pose.

    Returns:
        (centered HistoryWindow, offset Pose2)

    """
    offset = w.poses[-1].copy()
    centered = HistoryWindow(w.poses - offset, w.timestamps, w.dt, w.seeded)
    return centered, Pose2.from_array(offset)


def _relative_times(times):
    times = np.asarray(times, dtype=float)
    return times - times[..., -1:]


def forward_batch(params, poses, times):
    """Predict the next absolute position of every window in a batch.

    Parameters:
        poses (ndarray): (B, K_in, 2) absolute positions.
        times (ndarray): (B, K_in) or (K_in,) timestamps.

    """
    poses = np.asarray(poses, dtype=float)
    if poses.shape[1] != params.k_in:
        raise ValueError('window length {} does not match K_in={}'.format(poses.shape[1], params.k_in))
    offset = poses[:, -1, :]
    disp = encode(params, poses - offset[:, None, :], _relative_times(times))
    return offset + disp


def forward(params, w):
    """Predicted pose one step after the window."""
    if len(w) != params.k_in:
        raise ValueError('window length {} does not match K_in={}'.format(len(w), params.k_in))
    centered, offset = center_window(w)
    disp = encode(params, centered.poses[None], _relative_times(centered.timestamps))[0]
    return Pose2(offset.x + disp[0], offset.y + disp[1])


def rollout_batch(params, poses, times, K, dt):
    """Feed predictions back in K times and return the K-th prediction (B, 2)."""
    if K < 1:
        raise ValueError('rollout horizon must be at least 1')
    poses = np.asarray(poses, dtype=float)
    times = np.broadcast_to(_relative_times(times), poses.shape[:2])
    for _ in range(K):
        pred = forward_batch(params, poses, times)
        poses = np.concatenate([poses[:, 1:], pred[:, None, :]], axis=1)
        times = np.concatenate([times[:, 1:] - dt, np.zeros((len(times), 1))], axis=1)
    return pred


def rollout(params, w, K):
    pred = rollout_batch(params, w.poses[None], w.timestamps[None], K, w.dt)[0]
    return Pose2.from_array(pred)


def cv_predict(w, rng, max_speed=CV_MAX_SPEED):
    """Constant-velocity baseline prediction for one window.

    The velocity is the change between the two newest poses. A seeded window
    has no observed change; its velocity is drawn with a speed uniform in
    [0, max_speed] and a uniform heading.

    """
    if len(w) < 2:
        raise ValueError('constant velocity prediction needs at least two poses')
    last = w.poses[-1]
    if w.seeded:
        speed = rng.uniform(0.0, max_speed)
        heading = rng.uniform(0.0, 2 * np.pi)
        step = speed * w.dt * np.array([np.cos(heading), np.sin(heading)])
    else:
        velocity = (w.poses[-1] - w.poses[-2]) / (w.timestamps[-1] - w.timestamps[-2])
        step = velocity * w.dt
    return Pose2.from_array(last + step)


class DmmnMotionModel(object):
    """Batched motion model interface around trained DMMN weights."""

    name = 'dmmn'

    def __init__(self, params, dt=DEFAULT_DT):
        self.params = params
        self.dt = float(dt)

    @property
    def k_in(self):
        return self.params.k_in

    def mean(self, histories, times, seeded=None):
        """One-step means; a seeded window carries no motion and stays put."""
        out = forward_batch(self.params, histories, times)
        if seeded is not None:
            seeded = np.asarray(seeded, dtype=bool)
            out[seeded] = np.asarray(histories, dtype=float)[seeded, -1]
        return out

    def predict(self, histories, times, seeded, rng):
        return self.mean(histories, times, seeded)


class ConstantVelocityModel(object):
    """Batched constant-velocity baseline."""

    name = 'cv'

    def __init__(self, k_in=10, dt=DEFAULT_DT, max_speed=CV_MAX_SPEED):
        self.k_in = int(k_in)
        self.dt = float(dt)
        self.max_speed = float(max_speed)

    def _velocity(self, histories, times):
        times = np.broadcast_to(np.asarray(times, dtype=float), histories.shape[:2])
        gap = (times[:, -1] - times[:, -2])[:, None]
        return (histories[:, -1] - histories[:, -2]) / gap

    def mean(self, histories, times, seeded=None):
        histories = np.asarray(histories, dtype=float)
        step = self._velocity(histories, times) * self.dt
        if seeded is not None:
            step[np.asarray(seeded, dtype=bool)] = 0.0
        return histories[:, -1] + step

    def predict(self, histories, times, seeded, rng):
        histories = np.asarray(histories, dtype=float)
        step = self._velocity(histories, times) * self.dt
        if seeded is not None:
            seeded = np.asarray(seeded, dtype=bool)
            n = int(seeded.sum())
            if n:
                speed = rng.uniform(0.0, self.max_speed, size=n)
                heading = rng.uniform(0.0, 2 * np.pi, size=n)
                step[seeded] = (speed * self.dt)[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=-1)
        return histories[:, -1] + step


MOTION_MODEL_TYPE = {
    'dmmn': DmmnMotionModel,
    'cv': ConstantVelocityModel,
}


def as_motion_model(model, dt=DEFAULT_DT):
    if isinstance(model, DmmnParams):
        return DmmnMotionModel(model, dt)
    return model


def rollout_means(model, histories, times, K, seeded=None):
    """Deterministic K-step mean rollout of any motion model, (B, 2)."""
    if K < 1:
        raise ValueError('rollout horizon must be at least 1')
    model = as_motion_model(model)
    histories = np.asarray(histories, dtype=float)
    times = np.broadcast_to(_relative_times(times), histories.shape[:2])
    for _ in range(K):
        pred = model.mean(histories, times, seeded)
        histories = np.concatenate([histories[:, 1:], pred[:, None, :]], axis=1)
        times = np.concatenate([times[:, 1:] - model.dt, np.zeros((len(times), 1))], axis=1)
    return pred


def transition_density(model, history_j, x_i, sigma_p):
    """Gaussian transition density p(x_i | history_j) around the one-step prediction.

    A seeded (replicated) window carries no velocity, so the kernel is centred
    on its last pose rather than on a forward prediction.

    """
    if not sigma_p > 0:
        raise ValueError('sigma_p must be positive')
    model = as_motion_model(model, history_j.dt)
    mean = model.mean(history_j.poses[None], history_j.timestamps[None], [history_j.seeded])[0]
    return float(multivariate_normal.pdf(np.asarray(tuple(x_i), dtype=float), mean=mean,
                                         cov=sigma_p ** 2 * np.eye(2)))
