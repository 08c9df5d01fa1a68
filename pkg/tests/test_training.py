# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from eertrack.dmmn.model import HistoryWindow, forward, rollout
from eertrack.dmmn.train import TrainConfig, build_training_windows, train
from eertrack.exceptions import DivergenceError, InsufficientDataError
from eertrack.geometry import Pose2


SMALL = dict(d_model=8, heads=2, layers=1, d_ff=16, k_in=4)


def _line(n, step=(0.1, 0.0)):
    return [Pose2(i * step[0], i * step[1]) for i in range(n)]


class TestTrainConfig:

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == pytest.approx(3e-3)
        assert cfg.batch_size == 64
        assert cfg.k_in == 10

    def test_unknown_option(self):
        with pytest.raises(TypeError):
            TrainConfig(momentum=0.5)

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(d_model=10, heads=4)


class TestBuildTrainingWindows:

    def test_counts_and_targets(self):
        windows, times, targets = build_training_windows(_line(20), 1 / 3.0, 4)
        assert windows.shape == (16, 4, 2)
        assert times.shape == (16, 4)
        np.testing.assert_allclose(windows[:, -1], 0.0)
        np.testing.assert_allclose(targets, np.tile([0.1, 0.0], (16, 1)), atol=1e-12)
        np.testing.assert_allclose(times[0], [-1.0, -2 / 3.0, -1 / 3.0, 0.0])

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            build_training_windows(_line(5), 1 / 3.0, 4)

    def test_drop_keeps_newest_pose_and_orders_times(self, rng):
        windows, times, _ = build_training_windows(_line(200), 1 / 3.0, 4, drop_prob=0.4, rng=rng)
        np.testing.assert_allclose(windows[:, -1], 0.0)
        np.testing.assert_allclose(times[:, -1], 0.0)
        assert np.all(np.diff(times, axis=1) > 0)
        assert np.any(times[:, 0] < -1.0 - 1e-9)

    def test_drop_needs_random_stream(self):
        with pytest.raises(ValueError):
            build_training_windows(_line(20), 1 / 3.0, 4, drop_prob=0.2)


@pytest.fixture(scope='module')
def line_model():
    cfg = TrainConfig(epochs=400, validation_fraction=0.0, learning_rate=1e-3, **SMALL)
    return train(_line(60), cfg)


class TestTrain:

    def test_stationary_target_keeps_zero_loss(self):
        cfg = TrainConfig(epochs=2, validation_fraction=0.2, **SMALL)
        params = train([Pose2(1.0, 1.0)] * 30, cfg)
        assert params.train_loss == 0.0
        assert params.val_loss == 0.0

    def test_learns_constant_velocity(self, line_model):
        assert line_model.train_loss < 1e-4
        assert math.isnan(line_model.val_loss)
        w = HistoryWindow([Pose2(5 + 0.1 * i, 2) for i in range(4)])
        np.testing.assert_allclose(forward(line_model, w).as_array(), [5.4, 2.0], atol=0.02)

    def test_rollout_continues_the_line(self, line_model):
        w = HistoryWindow([Pose2(5 + 0.1 * i, 2) for i in range(4)])
        np.testing.assert_allclose(rollout(line_model, w, 5).as_array(), [5.8, 2.0], atol=0.1)

    def test_deterministic(self):
        cfg = TrainConfig(epochs=2, seed=11, **SMALL)
        a = train(_line(40, (0.05, 0.02)), cfg)
        b = train(_line(40, (0.05, 0.02)), cfg)
        for name in a.weights:
            np.testing.assert_array_equal(a.weights[name], b.weights[name])
        assert a.train_loss == b.train_loss

    def test_divergence(self):
        cfg = TrainConfig(epochs=3, learning_rate=1e300, **SMALL)
        with pytest.raises(DivergenceError) as exc:
            train(_line(60), cfg)
        assert exc.value.epoch >= 1

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            train(_line(4), TrainConfig(**SMALL))
