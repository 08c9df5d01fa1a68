# -*- coding: utf-8 -*-
"""Plots of episode logs and policy comparisons."""

import logging
import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .exceptions import PlotError  # noqa: E402


logger = logging.getLogger('eertrack')

EPISODE_COLUMNS = ('t', 'e', 'e_est', 'occluded', 'in_fov')
SUMMARY_COLUMNS = ('policy', 'seed', 'mean_e', 'mean_e_est', 'mean_det_cov')
SUMMARY_METRICS = (
    ('mean_e', 'tracking error e (m)'),
    ('mean_e_est', 'estimation error (m)'),
    ('mean_det_cov', 'det of covariance (m^4)'),
)


def _require(df, columns, what):
    if df is None or len(df) == 0:
        raise PlotError('{} is empty'.format(what))
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise PlotError('{} is missing columns: {}'.format(what, ', '.join(missing)))


def intervals(mask, t):
    """(start, end) times of the contiguous runs where mask is set."""
    mask = np.asarray(mask, dtype=bool)
    t = np.asarray(t, dtype=float)
    out = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            out.append((t[start], t[i]))
            start = None
    if start is not None:
        out.append((t[start], t[-1]))
    return out


def plot_episode(records, out_dir, name='episode'):
    """Estimation and tracking error over time with occluded and out-of-FOV intervals shaded."""
    _require(records, EPISODE_COLUMNS, 'episode log')
    os.makedirs(out_dir, exist_ok=True)
    occluded = records['occluded'].astype(bool).to_numpy()
    out_of_fov = ~records['in_fov'].astype(bool).to_numpy() & ~occluded
    t = records['t'].to_numpy()

    fig, ax = plt.subplots(figsize=(10, 4))
    for i, (a, b) in enumerate(intervals(occluded, t)):
        ax.axvspan(a, b, color='tab:red', alpha=0.25, label='occluded' if i == 0 else None)
    for i, (a, b) in enumerate(intervals(out_of_fov, t)):
        ax.axvspan(a, b, color='tab:gray', alpha=0.2, label='out of FOV' if i == 0 else None)
    ax.plot(t, records['e_est'], 'b-', label='estimation error')
    ax.plot(t, records['e'], 'g--', linewidth=1, label='tracking error')
    ax.set_xlabel('time (s)')
    ax.set_ylabel('error (m)')
    ax.legend(loc='upper right')
    ax.grid(True)
    fig.tight_layout()
    path = os.path.join(out_dir, '{}_error.png'.format(name))
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def plot_summary(table, out_dir, name='compare'):
    """Grouped bars of the aggregate metrics, one group per policy."""
    _require(table, SUMMARY_COLUMNS, 'comparison table')
    os.makedirs(out_dir, exist_ok=True)
    agg = table[table['seed'].astype(str) == 'mean']
    if len(agg) == 0:
        agg = table.groupby('policy', sort=False)[[m for m, _ in SUMMARY_METRICS]].mean().reset_index()
    policies = list(agg['policy'])

    fig, axes = plt.subplots(1, len(SUMMARY_METRICS), figsize=(4 * len(SUMMARY_METRICS), 4))
    x = np.arange(len(policies))
    for ax, (metric, label) in zip(axes, SUMMARY_METRICS):
        ax.bar(x, agg[metric].to_numpy(dtype=float), color=plt.cm.tab10(x % 10))
        ax.set_xticks(x)
        ax.set_xticklabels(policies)
        ax.set_title(label)
        ax.grid(True, axis='y')
    fig.tight_layout()
    path = os.path.join(out_dir, '{}_metrics.png'.format(name))
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def plot_file(path, out_dir):
    """Plot an episode or comparison CSV, telling them apart by their header line."""
    with open(path) as f:
        header = f.readline().strip()
    try:
        df = pd.read_csv(path, comment='#')
    except pd.errors.EmptyDataError:
        raise PlotError('{} is empty'.format(path))
    name = os.path.splitext(os.path.basename(path))[0]
    logger.debug('plotting {} ({} rows)'.format(path, len(df)))
    if header.startswith('# eertrack compare'):
        return plot_summary(df, out_dir, name)
    if header.startswith('# eertrack episode'):
        return plot_episode(df, out_dir, name)
    raise PlotError('{} is not an eertrack episode or comparison CSV'.format(path))


def plot(data, out_dir, name=None):
    """Plot an EpisodeLog, an episode records frame or a comparison table."""
    records = getattr(data, 'records', data)
    if isinstance(records, pd.DataFrame) and 'policy' in records.columns:
        return plot_summary(records, out_dir, name or 'compare')
    return plot_episode(records, out_dir, name or 'episode')
