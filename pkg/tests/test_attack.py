"""
Gradient-inversion attack: models, objective, regularity checks and descent.
"""
import math

import numpy as np
import pytest

from api.schemas import AttackSpec, DPSpec, SketchKind, SketchSpec
from attack.conditions import (
    check_non_critical,
    check_semi_lipschitz,
    check_semi_smooth,
    check_semi_strong_convex,
)
from attack.descent import (
    attack_gd,
    last_finite_x,
    reconstruction_study,
    relative_error,
    unique_minimum_probe,
)
from attack.fixtures import (
    NEGATIVE_FIXTURES,
    POSITIVE_FIXTURES,
    PROBE_CONSTANTS,
    build_attack,
    logcosh_linear,
)
from attack.models import AttackModel, make_model
from attack.problem import (
    AttackProblem,
    ball_samples,
    estimate_thetas,
    estimates,
    grad_L,
    loss_L,
    pseudo_kernel,
    sketched_constants,
    solution_step_rule,
    step_size_rule,
)
from base.errors import (
    DimensionMismatch,
    HypothesisViolated,
    InvalidParam,
    NonFinite,
    RankDeficient,
    SingularKernel,
)
from sketching.operators import build_sketch
from storage.models import ConditionEstimates


def run_check(prop, fixture, constants, rng, n=200):
    if prop == "non_critical":
        return check_non_critical(fixture, *constants, fixture.points(n, rng))
    checker = {
        "semi_smooth": check_semi_smooth,
        "semi_lipschitz": check_semi_lipschitz,
        "semi_strong_convex": check_semi_strong_convex,
    }[prop]
    return checker(fixture, *constants, fixture.pairs(n, rng))


def fd_jacobian(model, x, h=1e-6):
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((model.grad_w(x + e) - model.grad_w(x - e)) / (2 * h))
    return np.column_stack(cols)


class TestModels:
    @pytest.mark.parametrize("kind", ["linreg", "logistic"])
    def test_jacobian_matches_finite_differences(self, kind, rng):
        model = make_model(AttackSpec(model=kind, d=3, m=5, feature_map="random", seed=4))
        x = rng.standard_normal(5)
        np.testing.assert_allclose(model.jacobian(x), fd_jacobian(model, x), atol=1e-6)

    def test_more_weights_than_inputs_rejected(self):
        with pytest.raises(InvalidParam):
            make_model(AttackSpec(d=5, m=3))

    def test_logistic_label_must_be_a_sign(self):
        with pytest.raises(InvalidParam):
            AttackModel("logistic", np.ones(2), np.eye(2), 0.5)


class TestProblem:
    def build(self, **kw):
        return build_attack(AttackSpec(d=4, m=4, **kw), noised=False)

    def test_true_point_is_a_zero_of_the_loss(self):
        setup = self.build()
        assert setup.problem.loss(setup.x_true) == 0.0
        assert np.linalg.norm(setup.model.grad_w(setup.x_true)) > 0.1

    def test_gradient_matches_finite_differences(self, rng):
        problem = self.build(feature_map="random",
                             sketch=SketchSpec(kind=SketchKind.GAUSSIAN, d=4, b_sketch=3)).problem
        x = rng.standard_normal(4)
        h = 1e-6
        fd = [(problem.loss(x + h * e) - problem.loss(x - h * e)) / (2 * h) for e in np.eye(4)]
        np.testing.assert_allclose(problem.grad(x), fd, rtol=1e-5, atol=1e-6)

    def test_identity_sketch_is_the_plain_objective(self, rng):
        setup = self.build(feature_map="random")
        sketched = AttackProblem.from_data(
            setup.model, setup.x_true,
            sketch=build_sketch(SketchSpec(kind=SketchKind.IDENTITY, d=4, b_sketch=4), 0),
        )
        for x in rng.standard_normal((5, 4)):
            assert sketched.loss(x) == setup.problem.loss(x)
            assert np.array_equal(sketched.grad(x), setup.problem.grad(x))

    def test_observation_shape_checked(self):
        setup = self.build()
        with pytest.raises(DimensionMismatch):
            AttackProblem.from_gradient(setup.model, np.ones(3))

    def test_noised_observation_needs_an_rng(self):
        setup = self.build()
        with pytest.raises(InvalidParam):
            AttackProblem.from_data(setup.model, setup.x_true, noise_sigma=1.0)

    def test_functional_entry_points(self, rng):
        setup = self.build(feature_map="random")
        x = rng.standard_normal(4)
        assert loss_L(setup.problem, x) == setup.problem.loss(x)
        assert np.array_equal(grad_L(setup.problem, x), setup.problem.grad(x))

    def test_pseudo_kernel_is_psd(self, rng):
        setup = self.build(feature_map="random")
        K = pseudo_kernel(setup.problem, rng.standard_normal(4))
        assert K.shape == (4, 4) and np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K)[0] >= -1e-10

    def test_thetas_bracket_the_kernel(self):
        setup = self.build(seed=3)
        theta1, theta2 = estimate_thetas(setup.problem, 32, rng=np.random.default_rng(2))
        eig = np.linalg.eigvalsh(pseudo_kernel(setup.problem, setup.x_true))
        assert 0.0 < theta1 <= np.sqrt(eig[0]) + 1e-12
        assert np.sqrt(eig[-1]) - 1e-12 <= theta2

    def test_ball_samples_stay_in_the_ball(self, rng):
        pts = ball_samples(np.ones(3), 0.5, 50, rng)
        assert np.array_equal(pts[0], np.ones(3))
        assert np.all(np.linalg.norm(pts - 1.0, axis=1) <= 0.5 + 1e-12)


class TestConditionCheckers:
    @pytest.mark.parametrize("factory", POSITIVE_FIXTURES)
    def test_declared_constants_hold(self, factory, rng):
        fixture = factory()
        for prop, constants in fixture.constants.items():
            assert run_check(prop, fixture, constants, rng) == [], prop

    @pytest.mark.parametrize("factory", NEGATIVE_FIXTURES)
    def test_broken_functions_are_caught(self, factory, rng):
        fixture = factory()
        violations = [v for prop, constants in PROBE_CONSTANTS.items()
                      for v in run_check(prop, fixture, constants, rng)]
        assert violations
        assert all(v.residual > 0 for v in violations)

    def test_lipschitz_gradient_gives_semi_smoothness(self, rng):
        fixture = logcosh_linear()
        alpha, beta, p = fixture.constants["semi_lipschitz"]
        assert run_check("semi_lipschitz", fixture, (alpha, beta, p), rng) == []
        assert run_check("semi_smooth", fixture, (0.0, beta / 2, p), rng) == []


class TestStepRules:
    def test_step_size_rule(self):
        est = ConditionEstimates(beta=1.0, theta1=1.0, theta2=2.0, a=0.0, b=2.0)
        eta, gamma = step_size_rule(est)
        assert math.isclose(eta, 1.0 / 16.0) and math.isclose(gamma, 1.0 / 32.0)

    def test_step_size_rule_hypotheses(self):
        with pytest.raises(HypothesisViolated):
            step_size_rule(ConditionEstimates(beta=1.0, theta1=0.1, theta2=1.0, a=1.0, b=1.0))
        with pytest.raises(InvalidParam):
            step_size_rule(ConditionEstimates(beta=1.0, theta1=1.0, theta2=1.0, a=0.0, b=0.0))

    def test_solution_step_rule(self):
        est = ConditionEstimates(beta=1.0, theta1=1.0, theta2=1.0, a=0.0, b=1.0,
                                 d_sc=1.0, beta_sl=2.0)
        eta, gamma = solution_step_rule(est)
        assert math.isclose(eta, 2.0 / 8.0) and math.isclose(gamma, 2.0 * eta / 2)
        with pytest.raises(InvalidParam):
            solution_step_rule(ConditionEstimates(beta=1.0, theta1=1.0, theta2=1.0, a=0.0,
                                                  b=1.0, p=1.0))

    def test_sketched_constants(self):
        est = ConditionEstimates(beta=1.0, theta1=0.5, theta2=2.0, a=0.0, b=1.0)
        A, B, t1, t2 = sketched_constants(est, (3.0, 0.5, 3.0))
        assert (A, B, t1, t2) == (2 * 3.0 + 2 * 2.0 * 3.0, 9.0, 0.5, 12.0)
        with pytest.raises(RankDeficient):
            sketched_constants(est, (1.0, 0.0, 1.0))


class TestDescent:
    def test_certified_rate_on_regression(self):
        spec = AttackSpec(d=4, m=4, seed=3)
        setup = build_attack(spec, noised=False)
        rng = np.random.default_rng(1)
        est = estimates(setup.problem, center=setup.x_true, radius=0.1, rng=rng)
        eta, gamma = step_size_rule(est.objective_view())
        x0 = ball_samples(setup.x_true, 0.1, 2, rng)[1]
        traj = attack_gd(setup.problem, x0, eta, 5000)
        active = traj.losses[:-1] >= 1e-14
        assert np.all(traj.ratios()[active] <= 1.0 - gamma + 1e-9)
        assert relative_error(traj.final_x, setup.x_true) <= 1e-5

    def test_divergence_raises(self):
        setup = build_attack(AttackSpec(d=4, m=4), noised=False)
        with pytest.raises(NonFinite) as info:
            attack_gd(setup.problem, setup.x_true + 1.0, 1e6, 100)
        assert info.value.partial.steps >= 1

    def test_invalid_step(self):
        setup = build_attack(AttackSpec(d=4, m=4), noised=False)
        with pytest.raises(InvalidParam):
            attack_gd(setup.problem, setup.x_true, 0.0, 10)

    def test_zero_loss_start_stops_immediately(self):
        setup = build_attack(AttackSpec(d=4, m=4), noised=False)
        traj = attack_gd(setup.problem, setup.x_true, 0.1, 10)
        assert traj.steps == 0 and traj.stopped_early

    def test_relative_error(self):
        assert relative_error(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == 1.0

    def test_multi_start_agrees_on_a_full_rank_model(self):
        setup = build_attack(AttackSpec(d=4, m=4, seed=3), noised=False)
        est = estimates(setup.problem, center=setup.x_true, radius=0.1)
        report = unique_minimum_probe(setup.problem, est, 3, T_attack=5000)
        assert report.endpoints.shape == (3, 4) and len(report.final_losses) == 3
        assert report.hypotheses_hold
        assert report.unique, report.spread

    def test_multi_start_flags_a_rank_deficient_feature_map(self):
        setup = build_attack(AttackSpec(d=4, m=4, seed=3, feature_map="rank_deficient"),
                             noised=False)
        with pytest.warns(SingularKernel):
            est = estimates(setup.problem, center=setup.x_true, radius=0.1)
        report = unique_minimum_probe(setup.problem, est, 3, T_attack=500)
        assert not report.hypotheses_hold
        assert not report.unique and report.spread > 1e-6

    @pytest.mark.slow
    def test_privacy_noise_defeats_reconstruction(self):
        spec = AttackSpec(d=4, m=4, seed=3, n_seeds=20, T_attack=5000,
                          dp=DPSpec(eps_hat=0.5, delta_hat=1e-5))
        clean = build_attack(spec, noised=False)
        est = estimates(clean.problem, center=clean.x_true, radius=0.1)
        eta, _ = step_size_rule(est.objective_view())
        study = reconstruction_study(spec, eta)
        assert study.sigma > 1.0
        assert len(study.noised_errors) == 20
        assert all(math.isfinite(e) for e in study.noised_errors)
        assert study.ratio >= 10.0

    def test_diverged_run_is_scored_at_its_last_finite_iterate(self):
        setup = build_attack(AttackSpec(d=4, m=4), noised=False)
        with pytest.raises(NonFinite) as info:
            attack_gd(setup.problem, setup.x_true + 1.0, 1e6, 100)
        x = last_finite_x(info.value.partial)
        assert np.all(np.isfinite(x))
        assert math.isfinite(setup.problem.loss(x))
