"""
Monte-Carlo embedding certification.
"""
import math

import numpy as np
import pytest

from api.schemas import SketchKind, SketchSpec
from base.errors import DimensionMismatch, InvalidParam, Unsupported
from sketching.embedding import (
    embedding_battery,
    estimate_first_moment,
    estimate_second_moment,
    estimate_tail,
    moment_report,
    second_moment_bound,
    tail_threshold,
    verify_embedding,
    verify_kinds,
)


class TestHelpers:
    def test_battery_vectors_are_unit(self):
        V, names, pairs = embedding_battery(16, 3)
        np.testing.assert_allclose(np.linalg.norm(V, axis=0), np.ones(6))
        assert len(names) == 6 and all(max(i, j) < 6 for i, j, _ in pairs)
        assert abs(V[:, 4] @ V[:, 5]) < 1e-12

    def test_second_moment_bound(self):
        g, h = np.array([1.0, 0.0]), np.array([1.0, 1.0])
        assert second_moment_bound(SketchKind.SRHT, 2, 1, g, h) == 1.0 + 2.0 * 2.0

    def test_tail_thresholds(self):
        assert math.isclose(tail_threshold(SketchKind.COUNT_SKETCH, 64, 16, 0.01), 1 / math.sqrt(0.16))
        assert tail_threshold(SketchKind.UNIFORM_SAMPLING, 64, 16, 0.01) == 5.0
        with pytest.raises(Unsupported):
            tail_threshold(SketchKind.IDENTITY, 8, 8, 0.01)
        with pytest.raises(InvalidParam):
            tail_threshold(SketchKind.SRHT, 8, 4, 1.5)

    def test_sample_floors(self):
        spec = SketchSpec(kind=SketchKind.GAUSSIAN, d=8, b_sketch=4)
        e = np.eye(8)[0]
        with pytest.raises(InvalidParam):
            estimate_first_moment(spec, e, e, 99)
        with pytest.raises(InvalidParam):
            estimate_second_moment(spec, e, e, 999)
        with pytest.raises(DimensionMismatch):
            estimate_first_moment(spec, np.ones(7), e, 100)


class TestCertification:
    def test_identity_is_exact(self):
        report = verify_embedding(SketchSpec(kind=SketchKind.IDENTITY, d=8, b_sketch=8), 1000, 1)
        assert report.passed
        assert all(m.stderr == 0.0 and m.empirical_mean == m.target for m in report.moments)
        assert report.tails == [] and report.alpha == 0.0

    def test_gaussian_passes(self):
        report = verify_embedding(SketchSpec(kind=SketchKind.GAUSSIAN, d=16, b_sketch=8,
                                             master_seed=5), 2000, 5)
        assert report.passed, [m for m in report.moments if not m.passed]
        assert report.certified and report.alpha == 6.0

    def test_countsketch_reports_both_tail_forms(self):
        report = verify_embedding(SketchSpec(kind=SketchKind.COUNT_SKETCH, d=16, b_sketch=8,
                                             master_seed=2), 1000, 2)
        assert any(t.label.endswith("/log-form") for t in report.tails)

    def test_uniform_sampling_breaks_the_gaussian_constant(self):
        spec = SketchSpec(kind=SketchKind.UNIFORM_SAMPLING, d=16, b_sketch=4, master_seed=7)
        with pytest.warns(UserWarning):
            honest = verify_embedding(spec, 2000, 7)
            tight = verify_embedding(spec, 2000, 7, a=3.0)
        axis = lambda r: next(m for m in r.moments if m.label.startswith("axis-parallel"))  # noqa: E731
        assert axis(honest).passed
        assert not axis(tight).passed
        assert math.isclose(axis(tight).empirical_second_moment, 4.0, rel_tol=0.25)

    def test_estimators_agree_with_the_battery(self):
        spec = SketchSpec(kind=SketchKind.SRHT, d=16, b_sketch=8, master_seed=3)
        g, h = np.eye(16)[0], np.eye(16)[8]
        mean, stderr = estimate_first_moment(spec, g, h, 1000)
        assert abs(mean) <= 5 * stderr
        second, _, bound = estimate_second_moment(spec, g, h, 1000)
        assert bound == 2.0 / 8 and second <= bound

    @pytest.mark.slow
    def test_every_certified_kind_passes(self):
        kinds = [SketchKind.GAUSSIAN, SketchKind.SRHT, SketchKind.AMS,
                 SketchKind.COUNT_SKETCH, SketchKind.SPARSE_EMBEDDING]
        reports = verify_kinds(kinds, 32, 8, s=2, trials=4000, master_seed=11)
        assert [r.kind for r in reports] == [k.value for k in kinds]
        assert all(r.passed for r in reports)


class TestSingleEstimates:
    def test_tail_probability_extremes(self):
        spec = SketchSpec(kind=SketchKind.GAUSSIAN, d=8, b_sketch=4, master_seed=1)
        g, h = np.eye(8)[0], np.eye(8)[1]
        assert estimate_tail(spec, g, h, 1e-12, 200).empirical_exceed_prob == 1.0
        assert estimate_tail(spec, g, h, 1e6, 200).empirical_exceed_prob == 0.0
        with pytest.raises(InvalidParam):
            estimate_tail(spec, g, h, 0.0, 200)

    def test_identity_never_deviates(self):
        spec = SketchSpec(kind=SketchKind.IDENTITY, d=4, b_sketch=4)
        report = estimate_tail(spec, np.ones(4), np.eye(4)[2], 1e-12, 100)
        assert report.empirical_exceed_prob == 0.0 and report.n_samples == 100

    def test_moment_report(self):
        spec = SketchSpec(kind=SketchKind.GAUSSIAN, d=16, b_sketch=8, master_seed=5)
        e = np.eye(16)[3]
        report = moment_report(spec, e, e, 2000, label="e3")
        assert report.passed and report.label == "e3"
        assert report.target == 1.0 and report.second_moment_bound == 1.0 + 3.0 / 8
        with pytest.raises(InvalidParam):
            moment_report(spec, e, e, 500)


class TestRounding:
    def test_constant_samples_off_by_one_ulp_pass(self):
        from sketching.embedding import _moment_from_samples

        spec = SketchSpec(kind=SketchKind.SPARSE_EMBEDDING, d=256, b_sketch=64, s=2)
        x = np.full(1000, 2.0 * (1.0 / math.sqrt(2.0)) ** 2)
        report = _moment_from_samples(spec, x, 1.0, 1.0, 1.0, a=None, z=5.0, label="e0")
        assert report.stderr == 0.0
        assert report.passed

    def test_blocked_sparse_axis_vector_is_exact_up_to_rounding(self):
        spec = SketchSpec(kind=SketchKind.SPARSE_EMBEDDING, d=256, b_sketch=64, s=2, master_seed=1)
        report = verify_embedding(spec, 1000, 1)
        axis = next(m for m in report.moments if m.label.startswith("axis-parallel(e0,e0)"))
        assert axis.passed
        e0 = next(c for c in report.coordinates if c.label == "e0")
        assert math.isfinite(e0.max_abs_z)

    @pytest.mark.slow
    def test_sparse_passes_at_full_size(self):
        spec = SketchSpec(kind=SketchKind.SPARSE_EMBEDDING, d=256, b_sketch=64, s=2)
        report = verify_embedding(spec, 2000, 1)
        assert report.passed, (
            [m.label for m in report.moments if not m.passed],
            [c.label for c in report.coordinates if not c.passed],
        )
