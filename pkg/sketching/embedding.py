"""
Monte-Carlo certification of the coordinate-wise embedding property
~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

For fixed g, h and fresh operators R (rounds 0, 1, … of the SketchSpec seed
schedule) the estimators check

    E[gᵀRᵀRh]     = gᵀh
    E[(gᵀRᵀRh)²] ≤ (gᵀh)² + (a/b)‖g‖²‖h‖²
    P[|gᵀRᵀRh − gᵀh| ≥ threshold] ≤ 10·δ

with z-score bands for the Monte-Carlo error. Sample means are taken as
``target + mean(x − target)``: deterministic kinds (Identity) reproduce the
target exactly with zero standard error.
"""
from __future__ import annotations

import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from api.schemas import SketchKind, SketchSpec
from base.errors import DimensionMismatch, InvalidParam, Unsupported
from base.utils.logging import ColoredLogger
from base.utils.seeding import rng_for
from config import settings
from sketching.operators import alpha_param, build_sketch, is_certified, lemma_constant
from storage.models import (
    CoordinateReport,
    EmbeddingReport,
    MomentReport,
    NormReport,
    TailReport,
)

MIN_FIRST_MOMENT_SAMPLES = 100
MIN_SECOND_MOMENT_SAMPLES = 1_000
TAIL_SLACK = 10.0
# relative deviation below which a difference is rounding, not sampling noise
ROUNDING_FLOOR = 1e-12


# ──────────────────────────────────────────────────────────────────────
# Sampling core
# ──────────────────────────────────────────────────────────────────────
def _trials(n: int, label: str) -> Iterable[int]:
    if settings.PROGRESS:
        return tqdm(range(n), desc=label, leave=False)
    return range(n)


def _stack(spec: SketchSpec, *vectors: np.ndarray) -> np.ndarray:
    cols = []
    for v in vectors:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != spec.d:
            raise DimensionMismatch(spec.d, v.shape[0] if v.ndim else 0, "test vector")
        cols.append(v)
    return np.ascontiguousarray(np.stack(cols, axis=1))


def _gram_samples(spec: SketchSpec, V: np.ndarray, n_samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """(target Gram VᵀV, samples of (RV)ᵀ(RV) with shape (n, k, k))."""
    target = V.T @ V
    out = np.empty((n_samples,) + target.shape)
    for r in _trials(n_samples, f"{spec.kind.value} draws"):
        Y = build_sketch(spec, r).sk(V)
        out[r] = Y.T @ Y
    return target, out


def _shifted_mean(samples: np.ndarray, target: float) -> Tuple[float, float]:
    dev = samples - target
    n = dev.shape[0]
    mean = target + float(np.mean(dev))
    stderr = float(np.std(dev, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, stderr


def _second_moment(samples: np.ndarray, target: float) -> Tuple[float, float]:
    return _shifted_mean(samples * samples, target * target)


def _rounding(scale: float) -> float:
    return ROUNDING_FLOOR * max(1.0, abs(float(scale)))


def _check_samples(n: int, minimum: int, what: str) -> None:
    if n < minimum:
        raise InvalidParam(f"{what} needs at least {minimum} samples, got {n}")


# ──────────────────────────────────────────────────────────────────────
# Single-pair estimators
# ──────────────────────────────────────────────────────────────────────
def estimate_first_moment(
    spec: SketchSpec, g: np.ndarray, h: np.ndarray, n_samples: int
) -> Tuple[float, float]:
    """(mean, stderr) of gᵀRᵀRh over ``n_samples`` independent operators."""
    _check_samples(n_samples, MIN_FIRST_MOMENT_SAMPLES, "first moment")
    target, gram = _gram_samples(spec, _stack(spec, g, h), n_samples)
    return _shifted_mean(gram[:, 0, 1], float(target[0, 1]))


def second_moment_bound(kind: SketchKind, d: int, b: int, g: np.ndarray, h: np.ndarray,
                        a: Optional[float] = None) -> float:
    a = lemma_constant(kind, d) if a is None else float(a)
    gh = float(np.dot(g, h))
    return gh * gh + (a / b) * float(np.dot(g, g)) * float(np.dot(h, h))


def estimate_second_moment(
    spec: SketchSpec,
    g: np.ndarray,
    h: np.ndarray,
    n_samples: int,
    *,
    a: Optional[float] = None,
) -> Tuple[float, float, float]:
    """(sample mean of (gᵀRᵀRh)², its stderr, lemma bound)."""
    _check_samples(n_samples, MIN_SECOND_MOMENT_SAMPLES, "second moment")
    target, gram = _gram_samples(spec, _stack(spec, g, h), n_samples)
    second, stderr = _second_moment(gram[:, 0, 1], float(target[0, 1]))
    bound = float(target[0, 1]) ** 2 + (
        (lemma_constant(spec.kind, spec.d) if a is None else float(a)) / spec.b_sketch
    ) * float(target[0, 0]) * float(target[1, 1])
    return second, stderr, bound


def tail_threshold(kind: SketchKind, d: int, b: int, delta: float, s: int = 1) -> float:
    """Tail-lemma deviation for unit g, h at failure probability ``delta``."""
    kind = SketchKind(kind)
    if not 0.0 < delta < 1.0:
        raise InvalidParam(f"delta must lie in (0, 1), got {delta}")
    if kind in (SketchKind.GAUSSIAN, SketchKind.SRHT, SketchKind.AMS):
        return math.log(d / delta) ** 1.5 / math.sqrt(b)
    if kind is SketchKind.COUNT_SKETCH:
        return 1.0 / math.sqrt(b * delta)
    if kind is SketchKind.SPARSE_EMBEDDING:
        return math.log(d / delta) ** 1.5 / math.sqrt(s)
    if kind is SketchKind.UNIFORM_SAMPLING:
        return 1.0 + d / b
    raise Unsupported("identity sketch has no tail lemma")


def countsketch_log_threshold(delta: float) -> float:
    """The alternative log(1/δ) form of the CountSketch tail (unit constant)."""
    return math.log(1.0 / delta)


def _tail_report(kind, samples, target, threshold, delta, label) -> TailReport:
    exceed = float(np.mean(np.abs(samples - target) >= threshold))
    return TailReport(
        kind=SketchKind(kind).value,
        threshold=threshold,
        empirical_exceed_prob=exceed,
        claimed_delta=delta,
        n_samples=int(samples.shape[0]),
        label=label,
    )


def estimate_tail(
    spec: SketchSpec,
    g: np.ndarray,
    h: np.ndarray,
    threshold: float,
    n_samples: int,
    *,
    claimed_delta: float = float("nan"),
) -> TailReport:
    if threshold <= 0:
        raise InvalidParam(f"threshold must be positive, got {threshold}")
    target, gram = _gram_samples(spec, _stack(spec, g, h), n_samples)
    return _tail_report(spec.kind, gram[:, 0, 1], float(target[0, 1]),
                        float(threshold), claimed_delta, "")


def moment_report(
    spec: SketchSpec,
    g: np.ndarray,
    h: np.ndarray,
    n_samples: int,
    *,
    a: Optional[float] = None,
    z: Optional[float] = None,
    label: str = "",
) -> MomentReport:
    _check_samples(n_samples, MIN_SECOND_MOMENT_SAMPLES, "moment report")
    target, gram = _gram_samples(spec, _stack(spec, g, h), n_samples)
    return _moment_from_samples(spec, gram[:, 0, 1], target[0, 1], target[0, 0],
                                target[1, 1], a=a, z=z, label=label)


def _moment_from_samples(spec, x, gh, gg, hh, *, a, z, label) -> MomentReport:
    z = settings.Z_SCORE if z is None else z
    a = lemma_constant(spec.kind, spec.d) if a is None else float(a)
    gh, gg, hh = float(gh), float(gg), float(hh)
    mean, stderr = _shifted_mean(x, gh)
    second, stderr2 = _second_moment(x, gh)
    bound = gh * gh + (a / spec.b_sketch) * gg * hh
    passed = (
        abs(mean - gh) <= z * stderr + _rounding(gh)
        and second <= bound + z * stderr2 + _rounding(bound)
    )
    return MomentReport(
        kind=spec.kind.value,
        d=spec.d,
        b=spec.b_sketch,
        n_samples=int(x.shape[0]),
        empirical_mean=mean,
        target=gh,
        stderr=stderr,
        empirical_second_moment=second,
        second_moment_bound=bound,
        stderr_second=stderr2,
        passed=bool(passed),
        label=label,
    )


# ──────────────────────────────────────────────────────────────────────
# Full battery
# ──────────────────────────────────────────────────────────────────────
def embedding_battery(d: int, rng_seed: int) -> Tuple[np.ndarray, List[str], List[Tuple[int, int, str]]]:
    """
    Columns: two axis vectors, two dense unit vectors, an orthonormal pair.
    Pairs cover axis/axis, dense/dense, orthogonal and parallel cases.
    """
    if d < 2:
        raise InvalidParam(f"the battery needs d >= 2, got {d}")
    rng = rng_for(rng_seed, 0)
    mid = d // 2
    e0 = np.zeros(d)
    e0[0] = 1.0
    e_mid = np.zeros(d)
    e_mid[mid] = 1.0
    r1, r2 = (v / np.linalg.norm(v) for v in rng.standard_normal((2, d)))
    q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    names = ["e0", f"e{mid}", "dense1", "dense2", "orth1", "orth2"]
    V = np.ascontiguousarray(np.stack([e0, e_mid, r1, r2, q[:, 0], q[:, 1]], axis=1))
    pairs = [
        (0, 0, "axis-parallel"),
        (0, 1, "axis-orthogonal"),
        (2, 3, "dense"),
        (2, 2, "dense-parallel"),
        (4, 5, "orthogonal"),
    ]
    return V, names, pairs


def verify_embedding(
    spec: SketchSpec,
    trials: int,
    rng_seed: int,
    *,
    a: Optional[float] = None,
    delta: float = 0.01,
    z: Optional[float] = None,
) -> EmbeddingReport:
    """
    Run the battery over ``trials`` operators and aggregate every check.

    ``a`` overrides the lemma constant (e.g. ``a=3`` to show that uniform
    sampling fails the Gaussian bound).
    """
    z = settings.Z_SCORE if z is None else z
    _check_samples(trials, MIN_SECOND_MOMENT_SAMPLES, "embedding verification")
    kind = SketchKind(spec.kind)
    spec.check()

    # ------------------ 0. Battery ------------------------------------
    V, names, pairs = embedding_battery(spec.d, rng_seed)
    k = V.shape[1]
    target = V.T @ V
    norm_target = np.einsum("ij,ij->j", V, V)

    # ------------------ 1. Draw operators -----------------------------
    gram = np.empty((trials, k, k))
    norms = np.empty((trials, k))
    coord_sum = np.zeros_like(V)
    coord_sq = np.zeros_like(V)
    for r in _trials(trials, f"verify {kind.value}"):
        op = build_sketch(spec, r)
        Y = op.sk(V)
        Z = op.desk(Y)
        gram[r] = Y.T @ Y
        norms[r] = np.einsum("ij,ij->j", Z, Z)
        dev = Z - V
        coord_sum += dev
        coord_sq += dev * dev

    # ------------------ 2. Constants ----------------------------------
    a_used = lemma_constant(kind, spec.d) if a is None else float(a)
    alpha = 0.0 if kind is SketchKind.IDENTITY else alpha_param(kind, spec.d, spec.b_sketch)
    report = EmbeddingReport(
        kind=kind.value,
        d=spec.d,
        b=spec.b_sketch,
        trials=trials,
        lemma_constant=a_used,
        alpha=alpha,
        certified=is_certified(kind),
    )

    # ------------------ 3. Pairwise moments and tails -----------------
    for i, j, label in pairs:
        tag = f"{label}({names[i]},{names[j]})"
        report.moments.append(
            _moment_from_samples(spec, gram[:, i, j], target[i, j], target[i, i],
                                 target[j, j], a=a_used, z=z, label=tag)
        )
        if kind is SketchKind.IDENTITY:
            continue
        scale = math.sqrt(float(target[i, i]) * float(target[j, j]))
        thr = tail_threshold(kind, spec.d, spec.b_sketch, delta, spec.s) * scale
        report.tails.append(_tail_report(kind, gram[:, i, j], float(target[i, j]),
                                         thr, delta, tag))
        if kind is SketchKind.COUNT_SKETCH:
            report.tails.append(_tail_report(
                kind, gram[:, i, j], float(target[i, j]),
                countsketch_log_threshold(delta) * scale, float("nan"), tag + "/log-form",
            ))

    # ------------------ 4. Coordinate-wise unbiasedness ---------------
    mean_dev = coord_sum / trials
    var = np.maximum(coord_sq - trials * mean_dev * mean_dev, 0.0) / (trials - 1)
    stderr = np.sqrt(var / trials)
    floor = ROUNDING_FLOOR * np.maximum(1.0, norm_target)
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(np.abs(mean_dev) <= floor, 0.0,
                      np.where(stderr > 0, np.abs(mean_dev) / stderr, np.inf))
    for c, name in enumerate(names):
        max_z = float(np.max(zs[:, c]))
        report.coordinates.append(CoordinateReport(label=name, max_abs_z=max_z, passed=max_z <= z))

    # ------------------ 5. Norm inflation -----------------------------
    for c, name in enumerate(names):
        mean, err = _shifted_mean(norms[:, c], float(norm_target[c]))
        bound = (1.0 + alpha) * float(norm_target[c])
        passed = mean <= bound + z * err + _rounding(bound)
        report.norms.append(NormReport(label=name, mean_norm_sq=mean, bound=bound,
                                       stderr=err, passed=passed))

    _log_report(report)
    return report


def _log_report(report: EmbeddingReport) -> None:
    worst_tail = max((t.empirical_exceed_prob / t.claimed_delta for t in report.tails
                      if not math.isnan(t.claimed_delta)), default=0.0)
    msg = (
        f"[SketchOps] {report.kind} d={report.d} b={report.b} trials={report.trials} "
        f"a={report.lemma_constant:g} alpha={report.alpha:g} "
        f"tail/delta={worst_tail:.3g} → {'PASS' if report.passed else 'FAIL'}"
    )
    if report.passed:
        ColoredLogger.success(msg)
    else:
        ColoredLogger.warning(msg)


def verify_kinds(
    kinds: Sequence[SketchKind], d: int, b: int, *, s: int, trials: int,
    master_seed: int, delta: float = 0.01,
) -> List[EmbeddingReport]:
    """Certify several kinds on one shared battery."""
    reports = []
    for kind in kinds:
        spec = SketchSpec(kind=kind, d=d, b_sketch=(d if kind is SketchKind.IDENTITY else b),
                          master_seed=master_seed, s=s)
        reports.append(verify_embedding(spec, trials, master_seed, delta=delta))
    return reports
