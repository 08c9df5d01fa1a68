# -*- coding: utf-8 -*-
"""Transformer motion model and the constant-velocity baseline."""

from .model import (  # noqa: F401
    MOTION_MODEL_TYPE,
    ConstantVelocityModel,
    DmmnMotionModel,
    DmmnParams,
    HistoryWindow,
    center_window,
    cv_predict,
    forward,
    forward_batch,
    rollout,
    rollout_batch,
    rollout_means,
    transition_density,
)
from .train import TrainConfig, build_training_windows, loss_and_gradients, train  # noqa: F401
from .weights import load_weights, save_weights  # noqa: F401
