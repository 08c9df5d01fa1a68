# -*- coding: utf-8 -*-

import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import multivariate_normal

from eertrack import particle_filter as pf
from eertrack.dmmn.model import ConstantVelocityModel, DmmnParams, transition_density
from eertrack.entropy import (
    EerConfig,
    EerResult,
    EerTableDump,
    PlanningDraw,
    Waypoint,
    best_waypoint,
    candidate_waypoints,
    current_entropy,
    entropy_posterior,
    entropy_prior,
    expected_entropy_reduction,
    log_kernel_matrix,
    posterior_entropy,
    prior_entropy,
)
from eertrack.geometry import OcclusionZone, Pose2, Rect, Workspace


SIGMA_P = 0.05
MEAS_COV = np.eye(2) * 0.0025


def _moving_set(rng, n=6, k_in=3):
    """Particles with distinct velocities so the motion model matters."""
    start = rng.uniform(1, 2, size=(n, 2))
    vel = rng.normal(0, 0.05, size=(n, 2))
    histories = start[:, None, :] + np.arange(k_in)[None, :, None] * vel[:, None, :]
    return pf.ParticleSet(histories, rng.dirichlet(np.ones(n)))


def _brute_kernel(model, prev, sub, sigma):
    n = len(sub)
    k = np.zeros((n, len(prev)))
    for i in range(n):
        for j in range(len(prev)):
            k[i, j] = transition_density(model, prev.window(j), sub.positions[i], sigma)
    return k


@pytest.fixture
def model():
    return ConstantVelocityModel(k_in=3)


@pytest.fixture
def open_workspace():
    return Workspace((0, 0, 11, 5.5))


class TestLowLevelEntropy:

    def test_prior_matches_direct_sum(self, rng):
        kernel = rng.uniform(0.1, 5.0, size=(5, 5))
        prev_w = rng.dirichlet(np.ones(5))
        w = rng.dirichlet(np.ones(5))
        expected = -sum(w[i] * math.log(sum(kernel[i, j] * prev_w[j] for j in range(5))) for i in range(5))
        result = prior_entropy(np.log(kernel), prev_w, w)
        assert result.nats == pytest.approx(expected)
        assert not result.uninformative

    def test_posterior_matches_direct_sum(self, rng):
        kernel = rng.uniform(0.1, 5.0, size=(4, 4))
        lik = rng.uniform(0.01, 3.0, size=4)
        prev_w = rng.dirichlet(np.ones(4))
        post_w = prev_w * lik / np.sum(prev_w * lik)
        first = math.log(sum(lik[i] * prev_w[i] for i in range(4)))
        second = sum(post_w[i] * math.log(lik[i] * sum(kernel[i, j] * prev_w[j] for j in range(4)))
                     for i in range(4))
        result = posterior_entropy(np.log(lik), np.log(kernel), prev_w, post_w)
        assert result.nats == pytest.approx(first - second)

    def test_posterior_ignores_likelihood_scale(self, rng):
        log_kernel = np.log(rng.uniform(0.1, 5.0, size=(4, 4)))
        log_lik = np.log(rng.uniform(0.01, 3.0, size=4))
        prev_w = rng.dirichlet(np.ones(4))
        post_w = rng.dirichlet(np.ones(4))
        a = posterior_entropy(log_lik, log_kernel, prev_w, post_w).nats
        b = posterior_entropy(log_lik - 700.0, log_kernel, prev_w, post_w).nats
        assert b == pytest.approx(a)

    def test_survives_tiny_densities(self):
        # every density below the float range, but the logs are fine
        log_kernel = np.full((3, 3), -800.0)
        result = prior_entropy(log_kernel, np.full(3, 1 / 3.0))
        assert result.nats == pytest.approx(800.0)
        assert not result.uninformative

    def test_sentinel_on_underflow(self):
        result = prior_entropy(np.full((3, 3), -np.inf), np.full(3, 1 / 3.0), support_area=60.5)
        assert result.uninformative
        assert result.nats == pytest.approx(math.log(60.5))

    def test_posterior_sentinel(self):
        result = posterior_entropy(np.full(3, -np.inf), np.zeros((3, 3)), np.full(3, 1 / 3.0), np.full(3, 1 / 3.0),
                                   support_area=2.0)
        assert result.uninformative
        assert result.nats == pytest.approx(math.log(2.0))

    def test_zero_weights_skip_their_terms(self):
        log_kernel = np.array([[0.0, -np.inf], [-np.inf, 0.0]])
        result = prior_entropy(log_kernel, np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        assert result.nats == pytest.approx(0.0)
        assert not result.uninformative

    def test_log_kernel_matrix(self, rng):
        xs = rng.normal(size=(3, 2))
        means = rng.normal(size=(4, 2))
        k = log_kernel_matrix(xs, means, 0.3)
        assert k.shape == (3, 4)
        assert k[1, 2] == pytest.approx(multivariate_normal(means[2], 0.09 * np.eye(2)).logpdf(xs[1]))


class TestSetLevelEntropy:

    def test_prior_matches_transition_density(self, rng, model):
        prev = _moving_set(rng)
        sub = pf.predict(prev, model, SIGMA_P, rng)
        kernel = _brute_kernel(model, prev, sub, SIGMA_P)
        w = prev.weights
        expected = -np.sum(w * np.log(kernel @ w))
        assert entropy_prior(sub, prev, model, SIGMA_P).nats == pytest.approx(expected)

    def test_posterior_matches_transition_density(self, rng, model):
        prev = _moving_set(rng)
        sub = pf.predict(prev, model, SIGMA_P, rng)
        mm = pf.MeasurementModel(MEAS_COV)
        z = sub.positions[0] + 0.02
        lik = multivariate_normal(z, MEAS_COV).pdf(sub.positions)
        post = sub.with_weights(prev.weights * lik / np.sum(prev.weights * lik))
        kernel = _brute_kernel(model, prev, sub, SIGMA_P)
        w = prev.weights
        expected = np.log(np.sum(lik * w)) - np.sum(post.weights * np.log(lik * (kernel @ w)))
        result = entropy_posterior(post, prev, z, model, mm, SIGMA_P)
        assert result.nats == pytest.approx(expected, rel=1e-9)

    def test_dmmn_params_accepted(self, rng):
        params = DmmnParams.initialize(np.random.default_rng(0), d_model=8, heads=2, layers=1, d_ff=16, k_in=3)
        prev = _moving_set(rng)
        sub = pf.predict(prev, params, SIGMA_P, rng)
        assert math.isfinite(entropy_prior(sub, prev, params, SIGMA_P).nats)

    def test_measurement_lowers_entropy(self, rng, model):
        prev = pf.init(Rect(1, 1, 2, 2), 200, 3, rng)
        ps = pf.predict(prev, model, SIGMA_P, rng)
        mm = pf.MeasurementModel(MEAS_COV)
        z = ps.positions[0]
        updated = pf.update(ps, z, mm)
        without = current_entropy(prev, ps, None, model, mm, SIGMA_P, 200, np.random.default_rng(1))
        with_z = current_entropy(prev, updated, z, model, mm, SIGMA_P, 200, np.random.default_rng(1))
        assert with_z.nats < without.nats

    def test_misaligned_sets(self, rng, model):
        prev = _moving_set(rng)
        with pytest.raises(ValueError):
            entropy_prior(prev.take([0, 1]), prev, model, SIGMA_P)


class TestEerConfig:

    def test_defaults(self):
        cfg = EerConfig()
        assert (cfg.n_h, cfg.n_m, cfg.K) == (25, 1, 5)
        assert cfg.measurement_sampling == 'stratified'

    def test_unknown_option(self):
        with pytest.raises(TypeError):
            EerConfig(horizon=3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            EerConfig(measurement_sampling='grid')

    def test_subsample_larger_than_cloud(self):
        assert EerConfig(n_h=30).validate(n=20)


class TestPlanningDraw:

    def _cloud(self, rng):
        return pf.init(Rect(4, 2, 5, 3), 300, 3, rng)

    def test_blind_waypoint_has_no_reduction(self, rng, model, open_workspace):
        draw = PlanningDraw(self._cloud(rng), model, EerConfig(n_h=25), rng)
        assert draw.omega.sum() == pytest.approx(1.0)
        assert draw.eer((9.5, 4.5), open_workspace) == pytest.approx(0.0, abs=1e-9)

    def test_full_view_uses_posteriors(self, rng, model, open_workspace):
        cfg = EerConfig(n_h=25, fov_half_extents=(5.0, 5.0))
        draw = PlanningDraw(self._cloud(rng), model, cfg, rng)
        expected = draw.prior.nats - np.sum(draw.omega * draw.h_post)
        assert draw.eer((4.5, 2.5), open_workspace) == pytest.approx(expected)

    def test_centered_beats_displaced(self, rng, model, open_workspace):
        draw = PlanningDraw(self._cloud(rng), model, EerConfig(n_h=25), rng)
        centered = draw.eer((4.5, 2.5), open_workspace)
        displaced = draw.eer((8.0, 2.5), open_workspace)
        assert centered > displaced
        assert centered > 0

    def test_stratified_measurement_count(self, rng, model):
        draw = PlanningDraw(self._cloud(rng), model, EerConfig(n_h=10, n_m=3), rng)
        assert draw.z_hat.shape == (30, 2)
        assert draw.h_post.shape == (30,)

    def test_random_measurement_count(self, rng, model):
        draw = PlanningDraw(self._cloud(rng), model, EerConfig(n_h=10, n_m=4, measurement_sampling='random'), rng)
        assert draw.z_hat.shape == (4, 2)

    def test_known_occlusion_hides_measurements(self, rng, model):
        ws = Workspace((0, 0, 11, 5.5), [OcclusionZone(Rect(3.5, 1.5, 5.5, 3.5), 'cover')])
        blind = EerConfig(n_h=25, known_occlusion=True)
        draw = PlanningDraw(self._cloud(rng), model, blind, rng)
        assert draw.eer((4.5, 2.5), ws) == pytest.approx(0.0, abs=1e-9)
        draw.cfg = EerConfig(n_h=25, known_occlusion=False)
        assert draw.eer((4.5, 2.5), ws) > 0

    def test_reduction_is_relative_to_current(self, rng, model, open_workspace):
        ps = self._cloud(rng)
        current = PlanningDraw(ps, model, EerConfig(), np.random.default_rng(2)).prior
        shifted = current._replace(nats=current.nats + 1.0)
        a = expected_entropy_reduction(ps, (9.5, 4.5), model, EerConfig(), open_workspace,
                                       np.random.default_rng(3), current)
        b = expected_entropy_reduction(ps, (9.5, 4.5), model, EerConfig(), open_workspace,
                                       np.random.default_rng(3), shifted)
        assert b - a == pytest.approx(1.0)


class TestCandidates:

    def test_grid_inside_disc(self):
        cfg = EerConfig(grid=5, K=5)
        cands = candidate_waypoints((5.5, 2.75), 1.0, 1 / 3.0, cfg)
        assert cands[0].position == Pose2(5.5, 2.75)
        assert len(cands) == 13
        radius = 5 / 3.0
        for c in cands:
            assert c.position.distance_to((5.5, 2.75)) <= radius + 1e-9
            assert c.horizon == 5
        assert len({tuple(c.position) for c in cands}) == len(cands)

    def test_clipped_to_bounds(self):
        bounds = Rect(0, 0, 11, 5.5)
        cands = candidate_waypoints((0.2, 0.2), 1.0, 1 / 3.0, EerConfig(), bounds)
        for c in cands:
            assert bounds.contains(c.position)
        assert len({tuple(c.position) for c in cands}) == len(cands)

    def test_single_point_grid(self):
        cands = candidate_waypoints((1, 1), 1.0, 1 / 3.0, EerConfig(grid=1))
        assert cands == [Waypoint(Pose2(1, 1), 5)]


class TestBestWaypoint:

    def test_first_maximum_wins(self):
        cands = [Waypoint(Pose2(i, 0), 5) for i in range(3)]
        result = EerResult(cands, [1.0, 3.0, 3.0], 0.0, 0.0)
        assert result.chosen_index == 1
        assert result.chosen.position == Pose2(1, 0)

    def test_picks_the_cloud(self, rng, model, open_workspace):
        ps = pf.init(Rect(4, 2, 5, 3), 300, 3, rng)
        cands = [Waypoint(Pose2(9.5, 4.5), 5), Waypoint(Pose2(4.5, 2.5), 5), Waypoint(Pose2(1, 1), 5)]
        result = best_waypoint(ps, (5.5, 2.75), model, EerConfig(), open_workspace, rng, candidates=cands)
        assert result.chosen_index == 1
        assert result.wall_time >= 0

    def test_default_candidates_sorted_by_cloud_distance(self, rng, model, open_workspace):
        ps = pf.init(Rect(4, 2, 5, 3), 300, 3, rng)
        result = best_waypoint(ps, (5.5, 2.75), model, EerConfig(), open_workspace, rng)
        table = result.table()
        assert list(table.columns) == ['candidate_x', 'candidate_y', 'eer']
        assert len(table) == len(result.candidates)
        assert result.values[result.chosen_index] == table['eer'].max()

    def test_table_dump(self, tmp_path):
        cands = [Waypoint(Pose2(i, 0), 5) for i in range(2)]
        path = str(tmp_path / 'eer.csv')
        with EerTableDump(path) as dump:
            dump.write(3, EerResult(cands, [0.5, 0.25], 0.0, 0.0))
        df = pd.read_csv(path, comment='#')
        assert list(df.columns) == ['k', 'candidate_x', 'candidate_y', 'eer']
        assert list(df['k']) == [3, 3]
        np.testing.assert_allclose(df['eer'], [0.5, 0.25])


class TestEntropyProperties:

    def test_random_instances_match_direct_sums(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            kernel = rng.uniform(0.05, 10.0, size=(n, n))
            lik = rng.uniform(0.05, 10.0, size=n)
            prev_w = rng.dirichlet(np.ones(n))
            post_w = prev_w * lik / np.sum(prev_w * lik)
            mix = [sum(kernel[i, j] * prev_w[j] for j in range(n)) for i in range(n)]
            prior = -sum(prev_w[i] * math.log(mix[i]) for i in range(n))
            post = math.log(sum(lik[i] * prev_w[i] for i in range(n))) - sum(
                post_w[i] * math.log(lik[i] * mix[i]) for i in range(n))
            assert prior_entropy(np.log(kernel), prev_w).nats == pytest.approx(prior, rel=1e-10, abs=1e-12)
            assert posterior_entropy(np.log(lik), np.log(kernel), prev_w, post_w).nats == pytest.approx(
                post, rel=1e-10, abs=1e-12)

    def test_single_particle_collapse(self):
        result = posterior_entropy(np.array([1.7]), np.array([[-0.4]]), np.ones(1), np.ones(1))
        assert result.nats == pytest.approx(0.4)

    def test_constant_kernel(self):
        c = 2.5
        assert prior_entropy(np.full((4, 4), math.log(c)), np.full(4, 0.25)).nats == pytest.approx(-math.log(c))

    def test_unit_kernel_single_particle(self):
        assert prior_entropy(np.zeros((1, 1)), np.ones(1)).nats == pytest.approx(0.0)

    def test_dispersed_cloud_has_higher_entropy(self, rng, model):
        tight = _moving_set(rng, n=20)
        tight.histories[:] = 1.5 + rng.normal(0, 0.02, size=(20, 1, 2))
        wide = _moving_set(rng, n=20)
        wide.histories[:] = rng.uniform(0, 3, size=(20, 1, 2))
        h_tight = entropy_prior(tight, tight, model, SIGMA_P).nats
        h_wide = entropy_prior(wide, wide, model, SIGMA_P).nats
        assert h_tight < h_wide

    def test_tight_likelihood_lowers_entropy(self, model):
        positions = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [2, 2]], dtype=float)
        prev = pf.ParticleSet(np.repeat(positions[:, None, :], 3, axis=1), np.full(5, 0.2))
        z = positions[0]
        out = []
        for sd in (0.01, 1.0):
            mm = pf.MeasurementModel(np.eye(2) * sd ** 2)
            post = pf.update(prev, z, mm)
            out.append(entropy_posterior(post, prev, z, model, mm, SIGMA_P).nats)
        assert out[0] < out[1]

    def test_kernel_scale_shifts_prior(self, rng):
        log_kernel = np.log(rng.uniform(0.1, 5.0, size=(5, 5)))
        w = rng.dirichlet(np.ones(5))
        base = prior_entropy(log_kernel, w).nats
        assert prior_entropy(log_kernel + math.log(1e3), w).nats == pytest.approx(base - math.log(1e3), abs=1e-12)

    def test_argmax_ignores_constant_offset(self):
        cands = [Waypoint(Pose2(i, 0), 5) for i in range(4)]
        values = np.array([0.1, 0.7, 0.3, 0.7])
        assert EerResult(cands, values + 12.5, 0.0, 0.0).chosen == EerResult(cands, values, 0.0, 0.0).chosen
