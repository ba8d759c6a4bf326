"""
Sketched federated simulation: client steps, aggregation and recorded traces.
"""
import numpy as np
import pytest

from api.schemas import DPSpec, ObjectiveSpec, SketchKind
from base.errors import EmptyClientList, InvalidParam, NonFinite
from config import settings
from federated.bounds import BoundParams, bound_convex, bound_nonconvex, bound_strongly_convex
from federated.objectives import from_spec
from federated.simulation import (
    FederatedSimulator,
    client_drift,
    local_steps,
    mean_curves,
    run_fl,
    run_many,
    run_private_fl,
    server_aggregate,
    sketch_alpha,
)
from tests.conftest import make_run


class TestClientStep:
    def test_single_step_is_a_gradient_step(self, heterogeneous, rng):
        w = rng.standard_normal(heterogeneous.d)
        delta = local_steps(heterogeneous, 2, w, 1, 0.1)
        assert np.array_equal(delta, -(0.1 * heterogeneous.grad_client(2, w)))

    def test_k_steps_follow_the_client_path(self, heterogeneous, rng):
        w = rng.standard_normal(heterogeneous.d)
        u = w.copy()
        for _ in range(3):
            u = u - 0.05 * heterogeneous.grad_client(1, u)
        np.testing.assert_allclose(local_steps(heterogeneous, 1, w, 3, 0.05), u - w, atol=1e-14)

    def test_zero_steps_rejected(self, quadratic):
        with pytest.raises(InvalidParam):
            local_steps(quadratic, 0, np.zeros(quadratic.d), 0, 0.1)


class TestAggregation:
    def test_mean_times_global_step(self):
        out = server_aggregate([np.array([1.0, 2.0]), np.array([3.0, 4.0])], 0.5)
        np.testing.assert_allclose(out, [1.0, 1.5])

    def test_empty_round_rejected(self):
        with pytest.raises(EmptyClientList):
            server_aggregate([], 1.0)

    def test_ragged_uploads_rejected(self):
        with pytest.raises(InvalidParam):
            server_aggregate([np.zeros(2), np.zeros(3)], 1.0)


class TestTrace:
    def test_identity_single_client_is_gradient_descent(self):
        obj = from_spec(ObjectiveSpec(kind="quadratic", N=1, d=6, n_per_client=12,
                                      spectrum=(0.5, 2.0), seed=3))
        trace = run_fl(obj, make_run(6, T=25, eta_local=0.25))
        w = np.zeros(6)
        for t in range(25):
            w = w - 0.25 * obj.grad(w)
            assert np.array_equal(trace.iterates[t + 1], w)

    def test_zero_step_keeps_the_start(self, heterogeneous):
        w0 = [0.5] * heterogeneous.d
        trace = run_fl(heterogeneous, make_run(heterogeneous.d, kind=SketchKind.GAUSSIAN, b=4,
                                               eta_local=0.0, K=3, w0=w0))
        assert np.all(trace.iterates == 0.5)

    def test_drift_starts_at_zero(self, heterogeneous):
        trace = run_fl(heterogeneous, make_run(heterogeneous.d, kind=SketchKind.SRHT, b=4,
                                               K=3, eta_local=0.01))
        assert np.all(trace.V[:, 0] == 0.0)
        assert np.all(trace.V[:, 1:] > 0.0)

    def test_drift_detects_clients_starting_apart(self):
        shared = np.zeros((3, 2, 4))
        V, ubar = client_drift(shared)
        assert np.array_equal(V, np.zeros(2)) and np.array_equal(ubar, np.zeros((2, 4)))
        apart = shared.copy()
        apart[1, :, 0] = 3.0
        V, ubar = client_drift(apart)
        assert V[0] == V[1] == (2.0**2 + 2 * 1.0**2) / 3
        assert ubar[0, 0] == 1.0

    def test_bits_grow_linearly(self, quadratic):
        trace = run_fl(quadratic, make_run(quadratic.d, kind=SketchKind.COUNT_SKETCH, b=4, T=10,
                                           eta_local=0.01))
        per_round = 64 * 4 * (quadratic.N + 1)
        assert list(trace.bits) == [per_round * t for t in range(11)]

    def test_trace_rows_cover_every_local_step(self, quadratic):
        trace = run_fl(quadratic, make_run(quadratic.d, T=3, K=2, eta_local=0.01))
        rows = list(trace.rows())
        assert len(rows) == 3 * 2 + 1
        assert rows[-1].t == 3 and rows[-1].f_gap == trace.f_gap[3]

    def test_average_iterate_is_recorded(self, quadratic):
        trace = run_fl(quadratic, make_run(quadratic.d, T=5, eta_local=0.1))
        assert np.isnan(trace.avg_gap[0])
        assert np.all(np.isfinite(trace.avg_gap[1:]))
        assert trace.avg_iterate.shape == (quadratic.d,)

    def test_dimension_mismatch_rejected(self, quadratic):
        with pytest.raises(InvalidParam):
            FederatedSimulator(quadratic, make_run(quadratic.d + 1))

    def test_divergence_raises_with_partial_trace(self, quadratic):
        with pytest.raises(NonFinite) as info:
            run_fl(quadratic, make_run(quadratic.d, T=400, eta_local=1e3))
        assert info.value.partial.aborted
        assert info.value.partial.rounds_completed < 400

    def test_guard_violation_is_recorded(self, quadratic):
        trace = run_fl(quadratic, make_run(quadratic.d, kind=SketchKind.GAUSSIAN, b=4, T=2, K=4,
                                           eta_local=0.2))
        assert trace.warnings and "eta_local" in trace.warnings[0]


class TestPrivateRuns:
    def test_zero_noise_matches_the_plain_run(self, heterogeneous):
        config = make_run(heterogeneous.d, T=8, K=2, eta_local=0.01,
                          dp=DPSpec(eps_hat=0.1, delta_hat=1e-5, sigma_override=0.0))
        private, budget = run_private_fl(heterogeneous, config)
        plain = run_fl(heterogeneous, config)
        assert budget.sigma == [0.0] * heterogeneous.N
        assert np.array_equal(private.iterates, plain.iterates)

    def test_noise_uses_the_client_lipschitz_bounds(self, heterogeneous):
        config = make_run(heterogeneous.d, T=3, K=2, eta_local=1e-4,
                          dp=DPSpec(eps_hat=0.1, delta_hat=1e-5))
        trace, budget = run_private_fl(heterogeneous, config)
        assert len(budget.sigma) == heterogeneous.N and min(budget.sigma) > 0
        assert not np.array_equal(trace.iterates, run_fl(heterogeneous, config).iterates)

    def test_missing_dp_section(self, quadratic):
        with pytest.raises(InvalidParam):
            run_private_fl(quadratic, make_run(quadratic.d))


class TestSeeds:
    async def test_seeds_are_reproducible_and_independent(self, heterogeneous):
        config = make_run(heterogeneous.d, kind=SketchKind.SRHT, b=4, T=5, n_seeds=3,
                          eta_local=0.01)
        first = await run_many(heterogeneous, config)
        second = await run_many(heterogeneous, config, max_concurrency=1)
        for a, b in zip(first, second):
            assert np.array_equal(a.iterates, b.iterates)
        assert not np.array_equal(first[0].iterates, first[1].iterates)

    def test_mean_curves(self, quadratic):
        traces = [run_fl(quadratic, make_run(quadratic.d, T=4, eta_local=0.1), seed_index=i)
                  for i in range(2)]
        curves = mean_curves(traces)
        np.testing.assert_allclose(curves["f_gap"], traces[0].f_gap)
        with pytest.raises(EmptyClientList):
            mean_curves([])


@pytest.mark.slow
class TestConvergence:
    async def test_strongly_convex_gap_stays_under_the_bound(self):
        obj = from_spec(ObjectiveSpec(kind="quadratic", N=4, d=16, n_per_client=32,
                                      spectrum=(0.5, 2.0), seed=21))
        config = make_run(16, kind=SketchKind.SRHT, b=8, T=60, K=2, eta_local=0.006, n_seeds=5)
        traces = await run_many(obj, config)
        w_star = obj.w_star
        p = BoundParams(L=obj.L, K=2, eta_local=0.006, alpha=sketch_alpha(config), mu=obj.mu,
                        sigma_sq=obj.sigma_sq, D0=float(w_star @ w_star))
        bound = bound_strongly_convex(p, np.arange(61))
        assert np.all(mean_curves(traces)["f_gap"] <= bound)

    async def test_convex_average_iterate_stays_under_the_bound(self):
        obj = from_spec(ObjectiveSpec(kind="quadratic", N=8, d=64, n_per_client=128,
                                      heterogeneity=0.5, spectrum=(0.0, 2.0), rank=32))
        config = make_run(64, kind=SketchKind.SRHT, b=16, T=200, K=4, eta_local=0.0017,
                          n_seeds=20, regime="convex")
        traces = await run_many(obj, config)
        w_star = obj.w_star
        p = BoundParams(L=obj.L, K=4, eta_local=0.0017, alpha=sketch_alpha(config), mu=obj.mu,
                        sigma_sq=obj.sigma_sq, D0=float(w_star @ w_star))
        bound = bound_convex(p, np.arange(1, 201))
        avg_gap = mean_curves(traces)["avg_gap"][1:]
        assert np.all(np.isfinite(avg_gap))
        assert np.all(avg_gap <= settings.BOUND_SLACK * bound)

    async def test_nonconvex_min_gradient_stays_under_the_bound(self):
        obj = from_spec(ObjectiveSpec(kind="logcosh", N=8, d=32, n_per_client=64,
                                      heterogeneity=0.5, spectrum=(0.5, 2.0)))
        config = make_run(32, kind=SketchKind.COUNT_SKETCH, b=16, T=200, K=4, eta_local=0.1,
                          n_seeds=20)
        traces = await run_many(obj, config)
        w0 = np.zeros(obj.d)
        p = BoundParams(L=obj.L, K=4, eta_local=0.1, alpha=sketch_alpha(config), mu=obj.mu,
                        sigma_sq=obj.sigma_sq, D0=float(obj.w_star @ obj.w_star),
                        gap0=obj.value(w0) - obj.f_star, G=obj.G)
        bound = bound_nonconvex(p, np.arange(201))
        grad_sq = mean_curves(traces)["grad_sq"]
        assert np.all(np.isfinite(grad_sq))
        assert np.all(np.minimum.accumulate(grad_sq) <= settings.BOUND_SLACK * bound)
