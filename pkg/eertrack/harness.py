# -*- coding: utf-8 -*-
"""eertrack simulation harness.

Runs closed-loop tracking episodes (target, sensor, particle filter, guidance
and agent on one clock), benchmarks guidance policies over matched seeds and
provides the command line interface.

"""

import copy
import logging
import logging.config
import math
import os
from collections import OrderedDict
from fractions import Fraction
from io import IOBase

import numpy as np
import pandas as pd
from ruamel.yaml import YAML

from . import particle_filter as pf
from .dmmn.model import MOTION_MODEL_TYPE, DmmnMotionModel
from .dmmn.train import TrainConfig, train
from .dmmn.weights import load_weights, save_weights
from .entropy import EerConfig, EerTableDump, current_entropy
from .exceptions import ConfigError, EertrackError
from .geometry import OcclusionZone, Pose2, Rect, SensorFootprint, Workspace, fov_contains, is_observable
from .guidance import GUIDANCE_TYPE, EerGuidance, GuidanceContext
from .road import RoadNetwork, TargetTruth, generate_trajectory, step_target, write_trajectory_csv


logger = logging.getLogger('eertrack')

EPISODE_CSV_HEADER = '# eertrack episode v1'
COMPARE_CSV_HEADER = '# eertrack compare v1'

POLICIES = ('dmmn_eer', 'lawn', 'pfwm')

DEFAULT_LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'default': {'format': '%(asctime)s %(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'console': {'class': 'logging.StreamHandler', 'formatter': 'default', 'level': 'INFO'},
    },
    'loggers': {
        'eertrack': {'handlers': ['console'], 'level': 'INFO'},
    },
}

# Assumed values are marked in config/default.yml.
DEFAULTS = OrderedDict([
    ('workspace', OrderedDict([
        ('bounds', [0.0, 0.0, 11.0, 5.5]),
        ('fov_half_extents', [0.75, 0.75]),
        ('occlusion_zones', [{'id': 'node_a', 'rect': [5.0, 0.5, 6.0, 1.5]}]),
    ])),
    ('road_network', OrderedDict([
        ('nodes', OrderedDict([('A', [5.5, 1.0]), ('B', [2.0, 2.75]), ('C', [9.0, 2.75]), ('D', [5.5, 4.5])])),
        ('transitions', OrderedDict([
            ('A', OrderedDict([('B', 0.5), ('C', 0.5)])),
            ('B', OrderedDict([('D', 1.0)])),
            ('C', OrderedDict([('D', 1.0)])),
            ('D', OrderedDict([('A', 1.0)])),
        ])),
        ('target_speed', 0.35),
        ('start_node', 'A'),
    ])),
    ('measurement_cov', [[0.0025, 0.0], [0.0, 0.0025]]),
    ('sigma_p', 0.05),
    ('filter', OrderedDict([
        ('n', 500),
        ('k_in', 10),
        ('a', 0.9),
        ('b', 0.3),
        ('miss_likelihood', 0.3),
        ('gate', 3.0),
    ])),
    ('eer', OrderedDict([
        ('n_h', 25),
        ('n_m', 1),
        ('K', 5),
        ('grid', 5),
        ('known_occlusion', False),
        ('measurement_sampling', 'stratified'),
    ])),
    ('rates', OrderedDict([
        ('filter_hz', 3.0),
        ('guidance_hz', 2.5),
    ])),
    ('duration', 90.0),
    ('agent', OrderedDict([
        ('max_speed', 1.0),
        ('start', [5.5, 2.75]),
    ])),
    ('guidance', 'dmmn_eer'),
    ('lawn', OrderedDict([
        ('spacing_factor', 0.9),
        ('arrive_tolerance', 0.05),
    ])),
    ('motion_model', 'dmmn'),
    ('seed', 0),
    ('model_weights', 'dmmn.weights'),
    ('train', OrderedDict([
        ('duration', 3600.0),
        ('seed', 0),
        ('learning_rate', 3e-3),
        ('batch_size', 64),
        ('epochs', 30),
        ('validation_fraction', 0.1),
        ('beta1', 0.9),
        ('beta2', 0.999),
        ('eps', 1e-8),
        ('drop_prob', 0.0),
        ('d_model', 32),
        ('heads', 4),
        ('layers', 2),
        ('d_ff', 64),
    ])),
    ('debug', OrderedDict([
        ('particles', False),
        ('eer', False),
    ])),
    ('logging', None),
])

# Sections whose keys are user data rather than options.
FREE_FORM = {'road_network.nodes', 'road_network.transitions', 'logging', 'workspace.occlusion_zones'}


def _merge(defaults, overrides, prefix, problems):
    out = OrderedDict()
    for key, value in defaults.items():
        out[key] = copy.deepcopy(value)
    for key, value in overrides.items():
        path = prefix + key
        if key not in defaults:
            problems.append('unknown configuration key {!r}'.format(path))
            continue
        if isinstance(defaults[key], dict) and path not in FREE_FORM:
            if not isinstance(value, dict):
                problems.append('configuration key {!r} must be a mapping'.format(path))
                continue
            out[key] = _merge(defaults[key], value, path + '.', problems)
        else:
            out[key] = value
    return out


def build_workspace(section):
    zones = []
    for i, z in enumerate(section['occlusion_zones'] or []):
        zone_id = str(z.get('id', 'zone{}'.format(i)))
        if 'rect' in z:
            zones.append(OcclusionZone(Rect(*[float(v) for v in z['rect']]), zone_id))
        elif 'polygon' in z:
            zones.append(OcclusionZone(z['polygon'], zone_id))
        else:
            raise ConfigError('occlusion zone {!r} needs a rect or a polygon'.format(zone_id))
    return Workspace(section['bounds'], zones)


def build_network(section):
    return RoadNetwork(section['nodes'], section['transitions'], section['target_speed'], section['start_node'])


class SimConfig(object):

    def __init__(self, raw):
        """Validated simulation configuration.

        Every problem found is collected and raised together as one ConfigError.

        Parameters:
            raw (dict): Configuration merged over DEFAULTS.

        """
        self.raw = raw
        problems = []

        def attempt(label, fn, *args):
            try:
                return fn(*args)
            except ConfigError as e:
                problems.extend(e.problems)
            except (TypeError, ValueError, KeyError) as e:
                problems.append('{}: {}'.format(label, e))

        self.ws = attempt('workspace', build_workspace, raw['workspace'])
        self.fov_half_extents = tuple(float(v) for v in raw['workspace']['fov_half_extents'])
        if not all(v > 0 for v in self.fov_half_extents):
            problems.append('workspace.fov_half_extents must be > 0')
        self.network = attempt('road_network', build_network, raw['road_network'])
        if self.ws is not None and self.network is not None and not self.ws.bounds.contains_many(
                np.array([p.as_array() for p in self.network.nodes.values()])).all():
            problems.append('road network nodes must lie inside the workspace bounds')
        self.mm = attempt('measurement_cov', pf.MeasurementModel, raw['measurement_cov'])
        self.sigma_p = float(raw['sigma_p'])
        if not self.sigma_p > 0:
            problems.append('sigma_p must be > 0')

        f = raw['filter']
        self.n = int(f['n'])
        self.k_in = int(f['k_in'])
        self.a = float(f['a'])
        self.b = float(f['b'])
        self.miss_likelihood = float(f['miss_likelihood'])
        self.gate = float(f['gate'])
        if self.n < 1:
            problems.append('filter.n must be >= 1')
        if self.k_in < 2:
            problems.append('filter.k_in must be >= 2')
        if not 0 <= self.b <= self.a <= 1:
            problems.append('filter thresholds must satisfy 0 <= b <= a <= 1')
        if not 0 <= self.miss_likelihood <= 1:
            problems.append('filter.miss_likelihood must be in [0, 1]')
        if not self.gate > 0:
            problems.append('filter.gate must be > 0')

        rates = raw['rates']
        self.filter_hz = float(rates['filter_hz'])
        self.guidance_hz = float(rates['guidance_hz'])
        if not (self.filter_hz > 0 and self.guidance_hz > 0):
            problems.append('rates must be > 0')
        self.duration = float(raw['duration'])
        if not self.duration > 0:
            problems.append('duration must be > 0')

        self.agent_max_speed = float(raw['agent']['max_speed'])
        self.agent_start = Pose2(*raw['agent']['start'])
        if not self.agent_max_speed > 0:
            problems.append('agent.max_speed must be > 0')
        if self.ws is not None and not self.ws.bounds.contains(self.agent_start):
            problems.append('agent.start lies outside the workspace')

        self.guidance = raw['guidance']
        if self.guidance not in GUIDANCE_TYPE:
            problems.append('guidance must be one of {}'.format(', '.join(GUIDANCE_TYPE)))
        self.lawn_spacing_factor = float(raw['lawn']['spacing_factor'])
        self.lawn_arrive_tolerance = float(raw['lawn']['arrive_tolerance'])
        if not 0 < self.lawn_spacing_factor <= 1:
            problems.append('lawn.spacing_factor must be in (0, 1]')
        self.motion_model = raw['motion_model']
        if self.motion_model not in MOTION_MODEL_TYPE:
            problems.append('motion_model must be one of {}'.format(', '.join(MOTION_MODEL_TYPE)))
        self.seed = int(raw['seed'])
        self.model_weights = raw['model_weights']

        e = raw['eer']
        self.eer = None
        if self.mm is not None and self.sigma_p > 0 and self.filter_hz > 0 and self.agent_max_speed > 0:
            self.eer = attempt('eer', lambda: EerConfig(
                n_h=int(e['n_h']), n_m=int(e['n_m']), K=int(e['K']), sigma_p=self.sigma_p,
                measurement_cov=self.mm.cov, grid=int(e['grid']), v_max=self.agent_max_speed,
                dt=1.0 / self.filter_hz, fov_half_extents=self.fov_half_extents,
                known_occlusion=bool(e['known_occlusion']), measurement_sampling=e['measurement_sampling'],
                support_area=self.ws.bounds.area if self.ws is not None else 60.5))
        if self.eer is not None:
            problems.extend(self.eer.validate(self.n))

        t = dict(raw['train'])
        self.train_duration = float(t.pop('duration'))
        t.update(k_in=self.k_in, dt=1.0 / self.filter_hz if self.filter_hz > 0 else 1.0)
        self.train = attempt('train', lambda: TrainConfig(**t))

        self.debug_particles = bool(raw['debug']['particles'])
        self.debug_eer = bool(raw['debug']['eer'])
        self.logging = raw['logging'] or DEFAULT_LOGGING

        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_dict(cls, d=None):
        if d is not None and not isinstance(d, dict):
            raise ConfigError('configuration must be a mapping')
        problems = []
        raw = _merge(DEFAULTS, d or {}, '', problems)
        if problems:
            raise ConfigError(problems)
        return cls(raw)

    @classmethod
    def load(cls, config_file):
        """Load a YAML config from a path or an open file."""
        yaml = YAML(typ='safe')
        if isinstance(config_file, IOBase):
            config = yaml.load(config_file)
        else:
            with open(config_file) as f:
                config = yaml.load(f)
        return cls.from_dict(config or {})

    def replace(self, **kwargs):
        """Copy of this config with top-level keys overridden."""
        raw = copy.deepcopy(self.raw)
        for key, value in kwargs.items():
            if key not in raw:
                raise ConfigError('unknown configuration key {!r}'.format(key))
            raw[key] = value
        return SimConfig(raw)

    @property
    def filter_dt(self):
        return 1.0 / self.filter_hz

    def clock(self):
        """Base tick rate (LCM of the loop rates) and the tick strides of filter and guidance."""
        fr = Fraction(self.filter_hz).limit_denominator(1000)
        gr = Fraction(self.guidance_hz).limit_denominator(1000)
        base = Fraction(int(np.lcm(fr.numerator, gr.numerator)), math.gcd(fr.denominator, gr.denominator))
        return base, int(base / fr), int(base / gr)


def configure_logging(cfg):
    logging.config.dictConfig(cfg.logging if cfg is not None else DEFAULT_LOGGING)


def load_motion_model(cfg, weights=None):
    """Motion model named by cfg.motion_model; DMMN weights come from weights or cfg.model_weights."""
    if cfg.motion_model == 'cv':
        return MOTION_MODEL_TYPE['cv'](cfg.k_in, cfg.filter_dt)
    path = weights or cfg.model_weights
    if not path:
        raise ConfigError('model_weights is required for the dmmn motion model')
    if not os.path.exists(path):
        raise ConfigError('model weights {!r} not found (run `eertrack train` first)'.format(path))
    params = load_weights(path)
    if params.k_in != cfg.k_in:
        raise ConfigError('weights were trained with K_in={}, config has {}'.format(params.k_in, cfg.k_in))
    return DmmnMotionModel(params, cfg.filter_dt)


class AgentState(object):

    __slots__ = ('position', 'max_speed', 'half_extents')

    def __init__(self, position, max_speed, half_extents):
        if max_speed < 0:
            raise ValueError('agent speed must be >= 0')
        self.position = Pose2(*position)
        self.max_speed = float(max_speed)
        self.half_extents = tuple(half_extents)

    def __repr__(self):
        return 'AgentState(position={}, max_speed={})'.format(tuple(self.position), self.max_speed)

    @property
    def fov(self):
        return SensorFootprint(self.position, self.half_extents)


def synth_measurement(truth, agent, ws, mm, rng):
    """Noisy position measurement, or None when the target is not observable."""
    if not is_observable(ws, agent.fov, truth):
        return None
    return Pose2.from_array(mm.sample(np.asarray(tuple(truth), dtype=float), rng))


def step_agent(agent, wp, dt, bounds=None):
    """Move at most max_speed * dt straight toward wp."""
    if not dt > 0:
        raise ValueError('dt must be positive')
    delta = np.asarray(tuple(wp), dtype=float) - agent.position.as_array()
    dist = float(np.hypot(*delta))
    reach = agent.max_speed * dt
    if dist <= reach:
        pos = Pose2(*wp)
    else:
        pos = Pose2.from_array(agent.position.as_array() + delta * (reach / dist))
    if bounds is not None:
        pos = bounds.clip(pos)
    return AgentState(pos, agent.max_speed, agent.half_extents)


def tracking_error(agent, truth):
    position = agent.position if isinstance(agent, AgentState) else agent
    return Pose2(*position).distance_to(truth)


def estimation_error(ps, truth):
    return pf.weighted_mean(ps).distance_to(truth)


class Tracker(object):

    def __init__(self, cfg, model, rng, dump=None):
        """Estimator state of one episode.

        Parameters:
            model: Motion model used for prediction and entropy kernels.
            rng: Filter random stream.
            dump (ParticleDump): Optional writer for the posterior of every step.

        """
        self.cfg = cfg
        self.model = model
        self.rng = rng
        self.dump = dump
        self.ps = pf.init(cfg.ws, cfg.n, cfg.k_in, rng, cfg.filter_dt)
        self.last_z = None
        self.current = None
        self.branch = None
        self.degenerate = False
        self.degeneracies = 0

    def step(self, z, fov, predict=True):
        """Run one filter cycle and return the posterior (mean, covariance) before resampling."""
        cfg = self.cfg
        prev = self.ps
        ps = pf.predict(prev, self.model, cfg.sigma_p, self.rng) if predict else prev
        if z is not None:
            ps = pf.update(ps, z, cfg.mm)
        elif cfg.miss_likelihood < 1:
            known = cfg.ws if cfg.eer is not None and cfg.eer.known_occlusion else None
            ps = pf.update_negative(ps, fov, cfg.miss_likelihood, known)
        self.degenerate = ps.degenerate
        if ps.degenerate:
            self.degeneracies += 1
        self.current = current_entropy(prev, ps, z, self.model, cfg.mm, cfg.sigma_p, cfg.eer.n_h, self.rng,
                                       cfg.eer.support_area)
        mean = pf.weighted_mean(ps)
        cov = pf.covariance(ps)
        if self.dump is not None:
            self.dump.write(ps)
        region = None
        if z is not None:
            sx, sy = cfg.gate * cfg.mm.sigma
            region = Rect.around(z, sx, sy).intersect(cfg.ws.bounds)
        self.branch = pf.resample_branch(ps, cfg.a, cfg.b)
        self.ps = pf.resample(ps, cfg.a, cfg.b, cfg.ws, self.rng, region)
        self.last_z = z
        return mean, cov


class EpisodeLog(object):

    COLUMNS = ('k', 't', 'truth_x', 'truth_y', 'agent_x', 'agent_y', 'measured', 'z_x', 'z_y', 'occluded',
               'in_fov', 'mean_x', 'mean_y', 'det_cov', 'e', 'e_est', 'wp_x', 'wp_y', 'mode', 'entropy',
               'resample', 'degenerate')

    def __init__(self, records, degeneracies=0):
        self.records = records if isinstance(records, pd.DataFrame) else pd.DataFrame(records, columns=self.COLUMNS)
        self.degeneracies = int(degeneracies)

    def __len__(self):
        return len(self.records)

    @property
    def summary(self):
        r = self.records
        n = max(len(r), 1)
        occluded = r['occluded'].astype(bool)
        measured = r['measured'].astype(bool)
        out_of_fov = ~r['in_fov'].astype(bool) & ~occluded
        return OrderedDict([
            ('mean_e', float(r['e'].mean())),
            ('max_e', float(r['e'].max())),
            ('mean_e_est', float(r['e_est'].mean())),
            ('max_e_est', float(r['e_est'].max())),
            ('mean_det_cov', float(r['det_cov'].mean())),
            ('max_det_cov', float(r['det_cov'].max())),
            ('pct_observed', 100.0 * measured.sum() / n),
            ('pct_occluded', 100.0 * occluded.sum() / n),
            ('pct_out_of_fov', 100.0 * out_of_fov.sum() / n),
            ('recovery_steps', recovery_steps(self)),
            ('degeneracies', self.degeneracies),
        ])

    def write_csv(self, path):
        with open(path, 'w', newline='') as f:
            f.write(EPISODE_CSV_HEADER + '\n')
            self.records.to_csv(f, index=False)

    @classmethod
    def read_csv(cls, path):
        return cls(pd.read_csv(path, comment='#'))


def recovery_steps(log, threshold=0.2):
    """Mean number of filter steps until e_est < threshold after the target leaves an occlusion zone."""
    r = log.records if isinstance(log, EpisodeLog) else log
    occluded = r['occluded'].astype(bool).to_numpy()
    e_est = r['e_est'].to_numpy()
    steps = []
    for i in range(1, len(r)):
        if occluded[i - 1] and not occluded[i]:
            below = np.nonzero(e_est[i:] < threshold)[0]
            steps.append(int(below[0]) if len(below) else len(r) - i)
    return float(np.mean(steps)) if steps else math.nan


def run_episode(cfg, model=None, seed=None, policy=None, particle_dump=None, eer_dump=None):
    """Run one closed-loop episode.

    Parameters:
        model: Motion model; loaded with load_motion_model(cfg) when None.
        seed (int): Overrides cfg.seed.
        policy (str): Overrides cfg.guidance.
        particle_dump, eer_dump: Optional debug writers.

    """
    seed = cfg.seed if seed is None else seed
    policy_name = cfg.guidance if policy is None else policy
    if policy_name not in GUIDANCE_TYPE:
        raise ConfigError('unknown guidance policy {!r}'.format(policy_name))
    if model is None:
        model = load_motion_model(cfg)

    rng_target, rng_meas, rng_filter, rng_plan = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    base, filter_every, guidance_every = cfg.clock()
    tick_dt = float(1 / base)
    n_ticks = int(math.floor(cfg.duration * base + 1e-9))

    truth = TargetTruth.at_node(cfg.network, cfg.network.start_node, rng_target)
    agent = AgentState(cfg.agent_start, cfg.agent_max_speed, cfg.fov_half_extents)
    tracker = Tracker(cfg, model, rng_filter, particle_dump)
    guidance = GUIDANCE_TYPE[policy_name](
        cfg.ws, model=model, eer=cfg.eer, half_extents=cfg.fov_half_extents,
        spacing_factor=cfg.lawn_spacing_factor, arrive_tolerance=cfg.lawn_arrive_tolerance)
    waypoint = agent.position
    mode = ''
    records = []
    logger.info('episode start: policy {}, motion model {}, seed {}, {} s'.format(
        policy_name, getattr(model, 'name', type(model).__name__), seed, cfg.duration))

    for tick in range(n_ticks + 1):
        if tick:
            truth = step_target(cfg.network, truth, tick_dt, rng_target)
            agent = step_agent(agent, waypoint, tick_dt, cfg.ws.bounds)
        filter_tick = tick % filter_every == 0
        if filter_tick:
            z = synth_measurement(truth.pose, agent, cfg.ws, cfg.mm, rng_meas)
            mean, cov = tracker.step(z, agent.fov, predict=tick > 0)
        if tick % guidance_every == 0:
            context = GuidanceContext(tracker.ps, agent.position, cfg.ws, rng_plan, last_z=tracker.last_z,
                                      truth=truth.pose, current=tracker.current, step=tracker.ps.step)
            decision = guidance.decide(context)
            waypoint = decision.waypoint
            mode = decision.mode.value
            if eer_dump is not None and isinstance(guidance, EerGuidance):
                eer_dump.write(tracker.ps.step, decision.diagnostics)
        if filter_tick:
            occluded = any(zone.contains(truth.pose) for zone in cfg.ws.zones)
            records.append((
                tick // filter_every, tick * tick_dt, truth.pose.x, truth.pose.y, agent.position.x,
                agent.position.y, z is not None, z.x if z is not None else math.nan,
                z.y if z is not None else math.nan, occluded, fov_contains(agent.fov, truth.pose),
                mean.x, mean.y, float(np.linalg.det(cov)), tracking_error(agent, truth.pose),
                mean.distance_to(truth.pose), waypoint.x, waypoint.y, mode, tracker.current.nats,
                tracker.branch.value, tracker.degenerate,
            ))

    log = EpisodeLog(records, tracker.degeneracies)
    s = log.summary
    logger.info('episode end: mean e {:.3f} m, mean e_est {:.3f} m, observed {:.1f}%'.format(
        s['mean_e'], s['mean_e_est'], s['pct_observed']))
    return log


def compare(cfg, seeds, policies=POLICIES, model=None):
    """Run every policy on every seed; per-run rows followed by one aggregate row per policy."""
    if model is None:
        model = load_motion_model(cfg)
    rows = []
    for policy in policies:
        for seed in seeds:
            s = run_episode(cfg, model=model, seed=seed, policy=policy).summary
            rows.append(OrderedDict([
                ('policy', policy),
                ('seed', str(seed)),
                ('mean_e', s['mean_e']),
                ('mean_e_est', s['mean_e_est']),
                ('mean_det_cov', s['mean_det_cov']),
                ('pct_observed', s['pct_observed']),
                ('recovery_steps', s['recovery_steps']),
            ]))
    runs = pd.DataFrame(rows)
    metrics = ['mean_e', 'mean_e_est', 'mean_det_cov', 'pct_observed', 'recovery_steps']
    agg = runs.groupby('policy', sort=False)[metrics].mean().reset_index()
    agg.insert(1, 'seed', 'mean')
    return pd.concat([runs, agg], ignore_index=True)


def write_compare_csv(path, table):
    with open(path, 'w', newline='') as f:
        f.write(COMPARE_CSV_HEADER + '\n')
        table.to_csv(f, index=False)


def parse_seeds(text):
    """'3' -> [3], '0..9' -> [0, ..., 9], '1,4,7' -> [1, 4, 7]."""
    text = str(text).strip()
    if '..' in text:
        lo, hi = text.split('..', 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigError('empty seed range {!r}'.format(text))
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(',') if s.strip()]


def _cmd_train(args, cfg):
    rng = np.random.default_rng(cfg.train.seed)
    trajectory = generate_trajectory(cfg.network, cfg.train_duration, cfg.filter_dt, rng)
    if args.trajectory:
        write_trajectory_csv(args.trajectory, trajectory, cfg.filter_dt)
    params = train(trajectory, cfg.train)
    save_weights(args.out, params)


def _cmd_simulate(args, cfg):
    if args.policy:
        cfg = cfg.replace(guidance=args.policy)
    model = load_motion_model(cfg, args.weights)
    particle_dump = pf.ParticleDump(args.log + '.particles.csv') if args.debug_particles or cfg.debug_particles else None
    eer_dump = EerTableDump(args.log + '.eer.csv') if args.debug_eer or cfg.debug_eer else None
    try:
        log = run_episode(cfg, model=model, seed=args.seed, particle_dump=particle_dump, eer_dump=eer_dump)
    finally:
        for dump in (particle_dump, eer_dump):
            if dump is not None:
                dump.close()
    log.write_csv(args.log)
    for key, value in log.summary.items():
        logger.info('{}: {}'.format(key, value))


def _cmd_compare(args, cfg):
    policies = args.policies.split(',') if args.policies else POLICIES
    table = compare(cfg, parse_seeds(args.seeds), policies, model=load_motion_model(cfg, args.weights))
    write_compare_csv(args.out, table)
    logger.info('wrote {} rows to {}'.format(len(table), args.out))


def _cmd_plot(args, cfg):
    from .plot import plot_file

    for path in plot_file(args.input, args.out):
        logger.info('wrote {}'.format(path))


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Particle filter target tracking with EER guidance.")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='Train the motion model on a simulated trajectory.')
    p.add_argument('--config', required=True, help='YAML configuration file.')
    p.add_argument('--out', required=True, help='Output weights file.')
    p.add_argument('--trajectory', help='Also write the training trajectory to this CSV file.')

    p = sub.add_parser('simulate', help='Run one episode.')
    p.add_argument('--config', required=True, help='YAML configuration file.')
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--log', required=True, help='Output episode CSV.')
    p.add_argument('--weights', help='Motion model weights (overrides model_weights).')
    p.add_argument('--policy', choices=list(GUIDANCE_TYPE))
    p.add_argument('--debug-particles', action='store_true')
    p.add_argument('--debug-eer', action='store_true')

    p = sub.add_parser('compare', help='Benchmark guidance policies over seeds.')
    p.add_argument('--config', required=True, help='YAML configuration file.')
    p.add_argument('--seeds', required=True, help="Seeds as 'n..m' or a comma separated list.")
    p.add_argument('--out', required=True, help='Output comparison CSV.')
    p.add_argument('--weights', help='Motion model weights (overrides model_weights).')
    p.add_argument('--policies', help='Comma separated policies (default: dmmn_eer,lawn,pfwm).')

    p = sub.add_parser('plot', help='Plot an episode or comparison CSV.')
    p.add_argument('--in', dest='input', required=True, help='Episode or comparison CSV.')
    p.add_argument('--out', required=True, help='Output directory.')

    args = parser.parse_args(argv)
    commands = {
        'train': _cmd_train,
        'simulate': _cmd_simulate,
        'compare': _cmd_compare,
        'plot': _cmd_plot,
    }

    cfg = None
    try:
        if args.command != 'plot':
            cfg = SimConfig.load(args.config)
        configure_logging(cfg)
        commands[args.command](args, cfg)
    except EertrackError as e:
        logger.error(str(e))
        return 1
    except Exception as e:
        logger.exception(e)
        return 1
    return 0


if __name__ == '__main__':
    raise SystemExit(main())
