"""
Synthetic objectives: derivatives, optimum and cached constants.
"""
import math

import numpy as np
import pytest

from api.schemas import ObjectiveSpec
from base.errors import IndexOutOfRange, InvalidParam, NoLipschitzBound, SingularSystem
from federated.objectives import FederatedObjective, from_spec, gen_synthetic
from privacy.accountant import l2_sensitivity


def numeric_grad(f, w, h=1e-6):
    g = np.zeros_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


class TestDerivatives:
    @pytest.mark.parametrize("kind", ["quadratic", "logcosh"])
    def test_gradient_matches_finite_differences(self, kind, rng):
        obj = from_spec(ObjectiveSpec(kind=kind, N=3, d=6, n_per_client=12,
                                      heterogeneity=0.3, seed=2))
        w = rng.standard_normal(6)
        np.testing.assert_allclose(obj.grad(w), numeric_grad(obj.value, w), atol=1e-5)

    def test_logcosh_hessian_matches_gradient_differences(self, rng):
        obj = from_spec(ObjectiveSpec(kind="logcosh", N=2, d=4, n_per_client=10, seed=5))
        w = rng.standard_normal(4)
        H = np.column_stack([
            numeric_grad(lambda x, i=i: obj.grad(x)[i], w) for i in range(4)
        ])
        np.testing.assert_allclose(obj.hessian(w), H, atol=1e-5)

    def test_per_sample_gradients_average_to_the_client_gradient(self, rng):
        obj = from_spec(ObjectiveSpec(kind="logcosh", N=1, d=4, n_per_client=10, seed=5))
        client = obj.client(0)
        w = rng.standard_normal(4)
        np.testing.assert_allclose(client.batch_grad(w, np.arange(client.n)), client.grad(w),
                                   atol=1e-12)


class TestOptimum:
    def test_gradient_vanishes_at_optimum(self, quadratic, heterogeneous):
        for obj in (quadratic, heterogeneous):
            assert np.linalg.norm(obj.grad(obj.w_star)) < 1e-9

    def test_logcosh_optimum(self):
        obj = from_spec(ObjectiveSpec(kind="logcosh", N=4, d=6, n_per_client=20,
                                      heterogeneity=0.5, seed=9))
        assert np.linalg.norm(obj.grad(obj.w_star)) < 1e-8
        assert not obj.degenerate

    def test_optimum_is_read_only(self, quadratic):
        with pytest.raises(ValueError):
            quadratic.w_star[0] = 1.0


class TestConstants:
    def test_spectrum_is_pinned(self, quadratic):
        assert math.isclose(quadratic.mu, 0.5, rel_tol=1e-9)
        assert math.isclose(quadratic.L, 2.0, rel_tol=1e-9)

    def test_homogeneous_clients_have_no_dissimilarity(self, quadratic, heterogeneous):
        assert quadratic.sigma_sq < 1e-20
        assert heterogeneous.sigma_sq > 1e-3

    def test_logcosh_constants(self):
        obj = from_spec(ObjectiveSpec(kind="logcosh", N=2, d=4, n_per_client=10, seed=3))
        A = obj.client(0).A
        assert obj.mu == 0.0
        assert math.isclose(obj.L, np.linalg.eigvalsh(A.T @ A / 10)[-1], rel_tol=1e-12)
        assert math.isclose(obj.G, np.linalg.norm(A, axis=1).max(), rel_tol=1e-12)

    def test_quadratic_lipschitz_needs_a_ball(self, quadratic, heterogeneous):
        assert all(ell is None for ell in quadratic.ell)
        assert all(ell > 0 for ell in heterogeneous.ell)
        with pytest.raises(NoLipschitzBound):
            l2_sensitivity(quadratic.client(0))


class TestDegenerate:
    def spec(self):
        return ObjectiveSpec(kind="quadratic", N=2, d=8, n_per_client=16,
                             spectrum=(0.0, 2.0), rank=4, seed=4)

    def test_rank_deficient_system_is_flagged(self):
        obj = from_spec(self.spec())
        obj.w_star
        assert obj.degenerate
        assert obj.mu < 1e-10
        assert np.linalg.norm(obj.grad(obj.w_star)) < 1e-9

    def test_strict_mode_raises(self):
        clients = from_spec(self.spec()).clients
        with pytest.raises(SingularSystem):
            FederatedObjective(clients, strict=True).w_star

    def test_strict_mode_survives_json(self):
        clients = from_spec(self.spec()).clients
        back = FederatedObjective.from_json(FederatedObjective(clients, strict=True).to_json())
        assert back.strict
        with pytest.raises(SingularSystem):
            back.w_star
        assert not FederatedObjective.from_json(FederatedObjective(clients).to_json()).strict


class TestShape:
    def test_json_round_trip(self, heterogeneous, rng):
        back = FederatedObjective.from_json(heterogeneous.to_json())
        w = rng.standard_normal(heterogeneous.d)
        assert back.N == heterogeneous.N and back.kind == heterogeneous.kind
        assert back.value(w) == heterogeneous.value(w)
        assert back.ell == heterogeneous.ell

    def test_client_index_checked(self, quadratic):
        with pytest.raises(IndexOutOfRange):
            quadratic.client(quadratic.N)
        with pytest.raises(IndexOutOfRange):
            quadratic.per_sample_grad(0, np.zeros(quadratic.d), 10_000)

    def test_generation_validates_inputs(self):
        with pytest.raises(InvalidParam):
            gen_synthetic("quadratic", 2, 4, 8, -1.0, 0)
        with pytest.raises(InvalidParam):
            gen_synthetic("cubic", 2, 4, 8, 0.0, 0)

    def test_same_seed_same_objective(self):
        spec = ObjectiveSpec(kind="quadratic", N=2, d=4, n_per_client=8, heterogeneity=1.0, seed=1)
        a, b = from_spec(spec), from_spec(spec)
        assert all(np.array_equal(x.b, y.b) for x, y in zip(a.clients, b.clients))
