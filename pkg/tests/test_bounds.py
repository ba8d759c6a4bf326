"""
Closed-form convergence bounds and their step-size guards.
"""
import math

import numpy as np
import pytest

from base.errors import GuardViolated, InvalidParam, StepSizeWarning
from federated.bounds import (
    BoundParams,
    bound_convex,
    bound_nonconvex,
    bound_strongly_convex,
    bounds_single_step,
    noise_floor_strongly_convex,
    step_size_warnings,
)

SAFE = BoundParams(L=2.0, K=4, eta_local=1e-3, alpha=3.0, mu=0.5, sigma_sq=0.2, D0=4.0,
                   gap0=1.5, G=3.0)


class TestKStep:
    def test_strongly_convex_at_zero(self):
        floor = 4 * 1e-6 * 4 * 64 * 0.2 / 0.5
        assert math.isclose(bound_strongly_convex(SAFE, 0), 0.5 * 2 * 4 + floor)
        assert math.isclose(noise_floor_strongly_convex(SAFE), floor)

    def test_strongly_convex_decays_to_the_floor(self):
        values = bound_strongly_convex(SAFE, np.array([0, 10, 10_000_000]))
        assert values[0] > values[1] > values[2]
        assert math.isclose(values[2], noise_floor_strongly_convex(SAFE), rel_tol=1e-9)

    def test_strongly_convex_needs_curvature(self):
        with pytest.raises(GuardViolated):
            bound_strongly_convex(BoundParams(L=1.0, eta_local=0.01), 3)

    def test_convex(self):
        expected = 4 * 4.0 / (1e-3 * 4 * 10) + 32 * 1e-6 * 2 * 16 * 0.2
        assert math.isclose(bound_convex(SAFE, 10), expected)
        with pytest.raises(InvalidParam):
            bound_convex(SAFE, 0)

    def test_nonconvex(self):
        floor = 1e-3 * 2 * 16 * 9 * (1e-3 + 0.5 * 1e-3 * 4)
        assert math.isclose(bound_nonconvex(SAFE, 9), 1.5 / 10 + floor)
        with pytest.raises(InvalidParam):
            bound_nonconvex(BoundParams(L=1.0, G=math.inf), 3)


class TestGuards:
    def big_step(self):
        return BoundParams(L=2.0, K=4, eta_local=0.5, alpha=3.0, mu=0.5, D0=1.0)

    def test_strict_mode_raises_with_value(self):
        with pytest.raises(GuardViolated) as info:
            bound_strongly_convex(self.big_step(), 0, strict=True)
        assert math.isclose(info.value.value, 1.0)

    def test_lenient_mode_warns_and_evaluates(self):
        with pytest.warns(StepSizeWarning):
            assert math.isclose(bound_strongly_convex(self.big_step(), 0), 1.0)

    def test_step_size_messages(self):
        assert step_size_warnings(SAFE) is None
        assert "eta_local" in step_size_warnings(self.big_step())
        single = BoundParams(L=2.0, K=1, eta_local=0.3, alpha=1.0)
        assert "eta_global*eta_local" in step_size_warnings(single)


class TestSingleStep:
    p = BoundParams(L=2.0, eta_local=0.1, eta_global=1.0, mu=0.5, D0=2.0, gap0=1.0, alpha=1.0)

    def test_strongly_convex_is_geometric(self):
        values = bounds_single_step("strongly_convex", self.p, np.arange(3))
        np.testing.assert_allclose(values, [1.0, 0.95, 0.95**2])

    def test_convex_and_nonconvex_decay_as_one_over_t(self):
        assert math.isclose(bounds_single_step("convex", self.p, 9), 2.0 / (0.1 * 10))
        assert math.isclose(bounds_single_step("nonconvex", self.p, 9), 2.0 / (0.1 * 10))

    def test_convex_guard_is_tighter(self):
        p = BoundParams(L=2.0, eta_local=0.2, mu=0.5, D0=1.0, gap0=1.0, alpha=1.0)
        bounds_single_step("strongly_convex", p, 1, strict=True)
        with pytest.raises(GuardViolated):
            bounds_single_step("convex", p, 1, strict=True)

    def test_unknown_regime(self):
        with pytest.raises(InvalidParam):
            bounds_single_step("concave", self.p, 1)
