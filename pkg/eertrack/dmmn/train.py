# -*- coding: utf-8 -*-
"""Offline training of the motion model.

Gradients of the mean squared displacement loss are propagated by hand
through every layer of `dmmn.model.encode` and applied with Adam.

"""

import logging
import math
from collections import OrderedDict

import numpy as np

from ..exceptions import DivergenceError, InsufficientDataError, NumericError
from .model import DEFAULT_DT, DmmnParams, encode


logger = logging.getLogger('eertrack')


class TrainConfig(object):

    FIELDS = OrderedDict([
        ('learning_rate', 3e-3),
        ('batch_size', 64),
        ('epochs', 30),
        ('validation_fraction', 0.1),
        ('seed', 0),
        ('beta1', 0.9),
        ('beta2', 0.999),
        ('eps', 1e-8),
        ('drop_prob', 0.0),
        ('d_model', 32),
        ('heads', 4),
        ('layers', 2),
        ('d_ff', 64),
        ('k_in', 10),
        ('dt', DEFAULT_DT),
    ])

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.FIELDS)
        if unknown:
            raise TypeError('unknown training options: {}'.format(', '.join(sorted(unknown))))
        for name, default in self.FIELDS.items():
            setattr(self, name, kwargs.get(name, default))
        problems = self.validate()
        if problems:
            raise ValueError('; '.join(problems))

    def __repr__(self):
        return 'TrainConfig({})'.format(', '.join('{}={!r}'.format(k, getattr(self, k)) for k in self.FIELDS))

    def validate(self):
        problems = []
        if not self.learning_rate > 0:
            problems.append('learning_rate must be > 0')
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            problems.append('batch_size must be an integer >= 1')
        if not self.epochs >= 1:
            problems.append('epochs must be >= 1')
        if not 0 <= self.validation_fraction < 1:
            problems.append('validation_fraction must be in [0, 1)')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            problems.append('optimizer moment coefficients must be in [0, 1)')
        if not 0 <= self.drop_prob < 1:
            problems.append('drop_prob must be in [0, 1)')
        if self.d_model % self.heads:
            problems.append('d_model must be divisible by heads')
        if self.k_in < 2:
            problems.append('k_in must be >= 2')
        if not self.dt > 0:
            problems.append('dt must be > 0')
        return problems

    def hyper(self):
        return dict(d_model=self.d_model, heads=self.heads, layers=self.layers, d_ff=self.d_ff, k_in=self.k_in)


def build_training_windows(trajectory, dt, k_in, drop_prob=0.0, rng=None):
    """Slice a trajectory into centered training samples.

    Each sample ends at pose e; its target is the displacement to pose e + 1.
    With drop_prob > 0 every older pose is skipped with that probability, so
    the window reaches further back and its timestamps show the gaps.

    Returns:
        windows (M, k_in, 2), times (M, k_in), targets (M, 2)

    """
    poses = np.array([tuple(p) for p in trajectory], dtype=float).reshape(-1, 2)
    if len(poses) <= k_in + 1:
        raise InsufficientDataError('trajectory has {} poses, need more than {}'.format(len(poses), k_in + 1))
    if drop_prob > 0 and rng is None:
        raise ValueError('drop_prob needs a random stream')
    windows, times, targets = [], [], []
    for e in range(k_in - 1, len(poses) - 1):
        if drop_prob > 0:
            keep = [e]
            for i in range(e - 1, -1, -1):
                if len(keep) == k_in:
                    break
                if rng.random() >= drop_prob:
                    keep.append(i)
            if len(keep) < k_in:
                continue
            idx = np.array(keep[::-1])
        else:
            idx = np.arange(e - k_in + 1, e + 1)
        windows.append(poses[idx] - poses[e])
        times.append((idx - e) * dt)
        targets.append(poses[e + 1] - poses[e])
    if not windows:
        raise InsufficientDataError('no complete training window could be built')
    return np.array(windows), np.array(times), np.array(targets)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    d = xhat.shape[-1]
    dg = (dy * xhat).reshape(-1, d).sum(0)
    db = dy.reshape(-1, d).sum(0)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dg, db


def _split(x, heads):
    B, S, D = x.shape
    return x.reshape(B, S, heads, D // heads).transpose(0, 2, 1, 3)


def _merge(x):
    B, H, S, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, S, H * dh)


def _attention_backward(dout, w, p, heads, cache, grads):
    a, qh, kh, vh, att, ctx, scale = cache
    d = a.shape[-1]
    grads[p + 'wo'] = ctx.reshape(-1, d).T @ dout.reshape(-1, d)
    grads[p + 'bo'] = dout.reshape(-1, d).sum(0)
    dctx = _split(dout @ w[p + 'wo'].T, heads)
    datt = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = att.transpose(0, 1, 3, 2) @ dctx
    dscores = att * (datt - (datt * att).sum(-1, keepdims=True)) * scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh
    flat_a = a.reshape(-1, d)
    da = np.zeros_like(a)
    for m, dh in (('q', dqh), ('k', dkh), ('v', dvh)):
        dm = _merge(dh)
        grads[p + 'w' + m] = flat_a.T @ dm.reshape(-1, d)
        grads[p + 'b' + m] = dm.reshape(-1, d).sum(0)
        da += dm @ w[p + 'w' + m].T
    return da


def _feed_forward_backward(dout, w, p, cache, grads):
    a, h1, r = cache
    d = a.shape[-1]
    grads[p + 'w2'] = r.reshape(-1, r.shape[-1]).T @ dout.reshape(-1, d)
    grads[p + 'b2'] = dout.reshape(-1, d).sum(0)
    dh1 = (dout @ w[p + 'w2'].T) * (h1 > 0)
    grads[p + 'w1'] = a.reshape(-1, d).T @ dh1.reshape(-1, dh1.shape[-1])
    grads[p + 'b1'] = dh1.reshape(-1, dh1.shape[-1]).sum(0)
    return dh1 @ w[p + 'w1'].T


def backward(params, d_disp, cache):
    """Parameter gradients given the loss gradient w.r.t. the predicted displacement."""
    inp, x_shape, layer_caches, f, lnf = cache
    w = params.weights
    grads = {}
    dy = d_disp / w['input_scale'][0]
    grads['dec_w'] = f.T @ dy
    grads['dec_b'] = dy.sum(0)
    dlast, grads['lnf_g'], grads['lnf_b'] = _layer_norm_backward(dy @ w['dec_w'].T, w['lnf_g'], lnf)
    dx = np.zeros(x_shape)
    dx[:, -1, :] = dlast
    for l in reversed(range(params.layers)):
        p = 'l{}.'.format(l)
        ln1, att_cache, ln2, ff_cache = layer_caches[l]
        da2 = _feed_forward_backward(dx, w, p, ff_cache, grads)
        dx1, grads[p + 'ln2_g'], grads[p + 'ln2_b'] = _layer_norm_backward(da2, w[p + 'ln2_g'], ln2)
        dx1 += dx
        da1 = _attention_backward(dx1, w, p, params.heads, att_cache, grads)
        dx0, grads[p + 'ln1_g'], grads[p + 'ln1_b'] = _layer_norm_backward(da1, w[p + 'ln1_g'], ln1)
        dx = dx1 + dx0
    d = x_shape[-1]
    grads['embed_w'] = inp.reshape(-1, 2).T @ dx.reshape(-1, d)
    grads['embed_b'] = dx.reshape(-1, d).sum(0)
    return OrderedDict((name, grads[name]) for name in params.trainable_names())


def batch_loss(params, windows, times, targets):
    err = encode(params, windows, times) - targets
    return float((err * err).sum() / len(targets))


def loss_and_gradients(params, windows, times, targets):
    """Mean over the batch of the squared displacement error, and its gradients.

    Parameters:
        windows (ndarray): (B, K_in, 2) centered windows.
        times (ndarray): (B, K_in) timestamps relative to the newest pose.
        targets (ndarray): (B, 2) true displacements.

    """
    disp, cache = encode(params, windows, times, keep_cache=True)
    err = disp - targets
    loss = float((err * err).sum() / len(targets))
    return loss, backward(params, 2.0 * err / len(targets), cache)


def train(trajectory, cfg):
    """Fit a motion model to one trajectory.

    The last validation_fraction of the samples (in time order) is held out.
    Deterministic for a given cfg.seed.

    """
    rng = np.random.default_rng(cfg.seed)
    windows, times, targets = build_training_windows(trajectory, cfg.dt, cfg.k_in, cfg.drop_prob, rng)
    n = len(windows)
    n_val = int(round(n * cfg.validation_fraction))
    if cfg.validation_fraction > 0:
        n_val = max(n_val, 1)
    n_train = n - n_val
    if n_train < 1:
        raise InsufficientDataError('{} samples leave nothing to train on'.format(n))
    train_set = (windows[:n_train], times[:n_train], targets[:n_train])
    val_set = (windows[n_train:], times[n_train:], targets[n_train:])
    logger.info('training motion model on {} samples ({} held out)'.format(n_train, n_val))

    params = DmmnParams.initialize(rng, **cfg.hyper())
    names = params.trainable_names()
    m = {name: np.zeros_like(params.weights[name]) for name in names}
    v = {name: np.zeros_like(params.weights[name]) for name in names}
    step = 0
    train_loss = val_loss = math.nan
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                loss, grads = loss_and_gradients(params, *(a[idx] for a in train_set))
            except NumericError:
                raise DivergenceError(epoch, math.nan)
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            step += 1
            lr = cfg.learning_rate * math.sqrt(1 - cfg.beta2 ** step) / (1 - cfg.beta1 ** step)
            for name in names:
                g = grads[name]
                m[name] = cfg.beta1 * m[name] + (1 - cfg.beta1) * g
                v[name] = cfg.beta2 * v[name] + (1 - cfg.beta2) * g * g
                params.weights[name] -= lr * m[name] / (np.sqrt(v[name]) + cfg.eps)
            total += loss * len(idx)
        train_loss = total / n_train
        if n_val:
            try:
                val_loss = batch_loss(params, *val_set)
            except NumericError:
                raise DivergenceError(epoch, math.nan)
        if not math.isfinite(train_loss):
            raise DivergenceError(epoch, train_loss)
        logger.info('epoch {}/{}: train loss {:.6g}, validation loss {:.6g}'.format(
            epoch, cfg.epochs, train_loss, val_loss))
    return params.with_weights(params.weights, train_loss, val_loss)
