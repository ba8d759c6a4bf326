"""
The six subcommands.

Every experiment reads the sections it needs from one ``ExperimentConfig``,
writes its CSV / JSON artifacts under ``<out>/<command>/`` and records the
outcome of each property it can check with ``self.check``. The CLI turns
``summary.passed`` into the exit code.
"""
from __future__ import annotations

import asyncio
import dataclasses
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from api.schemas import SketchKind, VerifySpec
from attack.conditions import (
    check_non_critical,
    check_semi_lipschitz,
    check_semi_smooth,
    check_semi_strong_convex,
)
from attack.descent import attack_gd, reconstruction_study, relative_error, unique_minimum_probe
from attack.fixtures import build_attack
from attack.problem import ball_samples, estimates, sketch_stats, sketched_constants, step_size_rule
from base.errors import HypothesisViolated, InvalidParam, NonFinite, RankDeficient
from base.experiment import BaseExperiment
from base.utils.config import add_verify_args
from base.utils.logging import ColoredLogger
from base.utils.seeding import rng_for
from config import settings
from federated.bounds import (
    BoundParams,
    bound_convex,
    bound_nonconvex,
    bound_strongly_convex,
    bounds_single_step,
)
from federated.communication import communication_bits, communication_budget
from federated.objectives import FederatedObjective, from_spec
from federated.simulation import dp_for_run, mean_curves, run_many, sketch_alpha
from harness.sweep import sweep_b_values, sweep_communication
from privacy.accountant import amplify_subsample, gaussian_sigma, sigmas_for, total_budget
from sketching.embedding import verify_kinds
from storage.models import EmbeddingReport, MomentReport, RoundTrace
from storage.writers import (
    read_csv,
    write_bound_overlay,
    write_csv,
    write_embedding_reports,
    write_json,
    write_traces,
    write_trajectory,
)

DEGENERATE_MU = 1e-10  # μ below this fraction of L counts as merely convex
CERTIFICATE_SLACK = 1e-9
CERTIFICATE_FLOOR = 1e-14
RECONSTRUCTION_TOL = 1e-5
NOISE_RATIO = 10.0
BITS_BAND = 4.0
ALPHA_SCALING = 1.5
_ESTIMATE_STREAM = 0xE57
_CHECK_STREAM = 0xC4EC
_START_STREAM = 0x57A7


# ──────────────────────────────────────────────────────────────────────
# Embedding certification
# ──────────────────────────────────────────────────────────────────────
def rebound(moment: MomentReport, a_new: float) -> MomentReport:
    """The same samples judged against the second-moment bound with constant ``a_new``."""
    gh2 = moment.target**2
    scale = a_new / moment.d if moment.d else 0.0
    # the stored bound used a = d
    bound = gh2 + scale * (moment.second_moment_bound - gh2)
    z = settings.Z_SCORE
    passed = (abs(moment.empirical_mean - moment.target) <= z * moment.stderr
              and moment.empirical_second_moment <= bound + z * moment.stderr_second)
    return dataclasses.replace(moment, second_moment_bound=bound, passed=bool(passed),
                               label=f"{moment.label}/a={a_new:g}")


class VerifySketchExperiment(BaseExperiment):
    """Monte-Carlo certificate of every sketch family on one shared battery."""

    command = "verify-sketch"

    @classmethod
    def add_args(cls, parser):
        super().add_args(parser)
        add_verify_args(cls, parser)

    def __init__(self, cfg, *, kinds: Optional[List[SketchKind]] = None) -> None:
        super().__init__(cfg)
        self.spec = cfg.verify or VerifySpec()
        self.kinds = kinds or list(self.spec.kinds)

    def run(self) -> None:
        spec = self.spec
        if spec.b_sketch > spec.d:
            raise InvalidParam(f"verify.b_sketch={spec.b_sketch} exceeds verify.d={spec.d}")

        # ------------------ 0. Certify every kind ------------------------
        reports: List[EmbeddingReport] = verify_kinds(
            self.kinds, spec.d, spec.b_sketch, s=spec.s, trials=spec.trials,
            master_seed=spec.master_seed, delta=spec.delta,
        )

        # ------------------ 1. Assertions --------------------------------
        for rep in reports:
            kind = SketchKind(rep.kind)
            if kind is SketchKind.UNIFORM_SAMPLING:
                gaussian_a = [rebound(m, 3.0) for m in rep.moments]
                self.check("uniform_passes_a_d", all(m.passed for m in rep.moments))
                self.check("uniform_fails_a3", not all(m.passed for m in gaussian_a))
                rep.moments.extend(gaussian_a)
                self.warn([f"{kind.value} is not certified: alpha = d^2/b = {rep.alpha:g}"])
            else:
                self.check(f"cwe_{kind.value}", rep.passed)
            self.summary.metrics[f"{kind.value}.alpha"] = rep.alpha
            self.summary.metrics[f"{kind.value}.a"] = rep.lemma_constant

        self.artifact(write_embedding_reports(self.out_dir / "embedding.csv", reports))


# ──────────────────────────────────────────────────────────────────────
# Federated runs
# ──────────────────────────────────────────────────────────────────────
def infer_regime(obj: FederatedObjective, declared: Optional[str] = None) -> str:
    if declared is not None:
        return declared
    if obj.kind == "logcosh":
        return "nonconvex"
    return "strongly_convex" if obj.mu > DEGENERATE_MU * obj.L else "convex"


def _running_min(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    finite = np.isfinite(out)
    out[finite] = np.minimum.accumulate(out[finite])
    return out


def _average_iterate_gap(obj: FederatedObjective, traces: List[RoundTrace]) -> np.ndarray:
    """Seed average of f(mean of w⁰..wᵗ) − f*."""
    gaps = []
    for trace in traces:
        counts = np.arange(1, trace.T + 2)[:, None]
        means = np.cumsum(trace.iterates, axis=0) / counts
        gaps.append([obj.value(w) - obj.f_star if np.all(np.isfinite(w)) else np.nan
                     for w in means])
    return np.mean(np.array(gaps), axis=0)


def bound_margin(empirical: np.ndarray, bound: np.ndarray, slack: float) -> float:
    """min over finite indices of slack·bound − empirical."""
    mask = np.isfinite(empirical) & np.isfinite(bound)
    if not mask.any():
        return math.nan
    return float(np.min(slack * bound[mask] - empirical[mask]))


class RunFLExperiment(BaseExperiment):
    """
    Multi-seed simulation checked against the convergence bounds that apply.

    These are the K-step bound of the regime, the single-step bound when
    K = 1 and the exact gradient-descent oracle for the unsketched baseline.
    """

    command = "run-fl"
    requires = ("objective", "run")

    def params(self, obj: FederatedObjective, w0: np.ndarray) -> BoundParams:
        run = self.cfg.run
        return BoundParams(
            L=obj.L,
            K=run.K,
            eta_local=run.eta_local,
            eta_global=run.eta_global,
            alpha=sketch_alpha(run),
            mu=obj.mu,
            sigma_sq=obj.sigma_sq,
            D0=float((w0 - obj.w_star) @ (w0 - obj.w_star)),
            gap0=obj.value(w0) - obj.f_star,
            G=obj.G,
        )

    def simulate(self, obj: FederatedObjective, *, private: bool = False) -> List[RoundTrace]:
        traces = asyncio.run(run_many(obj, self.cfg.run, private=private))
        for trace in traces:
            self.warn(trace.warnings)
        diverged = [t.seed for t in traces if t.aborted]
        if diverged:
            self.warn([f"seed(s) {diverged} diverged; their curves end at the last finite round"])
        return traces

    def kstep_bound(self, regime: str, p: BoundParams, curves: Dict[str, np.ndarray],
                    T: int) -> Tuple[np.ndarray, np.ndarray, str]:
        t = np.arange(T + 1, dtype=np.float64)
        if regime == "strongly_convex":
            return curves["f_gap"], bound_strongly_convex(p, t), "f_gap"
        if regime == "convex":
            bound = np.full(T + 1, np.nan)
            bound[1:] = bound_convex(p, t[1:])
            return curves["avg_gap"], bound, "avg_gap"
        return _running_min(curves["grad_sq"]), bound_nonconvex(p, t), "min_grad_sq"

    def single_step_bound(self, regime: str, p: BoundParams, obj, traces, curves, T: int):
        t = np.arange(T + 1, dtype=np.float64)
        bound = bounds_single_step(regime, p, t)
        if regime == "strongly_convex":
            return curves["f_gap"], bound
        if regime == "convex":
            return _average_iterate_gap(obj, traces), bound
        return _running_min(curves["grad_sq"]), bound

    def check_gd_equivalence(self, obj: FederatedObjective, trace: RoundTrace, w0: np.ndarray) -> None:
        run = self.cfg.run
        w = w0.copy()
        same = np.array_equal(trace.iterates[0], w)
        for t in range(1, trace.rounds_completed + 1):
            g = obj.grad(w)
            step = run.eta_local * g
            w = w - step
            same = same and np.array_equal(trace.iterates[t], w)
        self.check("gd_equivalence", same)

    def run(self) -> None:
        run = self.cfg.run
        obj = from_spec(self.cfg.objective)
        w0 = np.zeros(obj.d) if run.w0 is None else np.asarray(run.w0, dtype=np.float64)
        slack = settings.BOUND_SLACK

        # ------------------ 0. Simulate ----------------------------------
        traces = self.simulate(obj)
        curves = mean_curves(traces)
        regime = infer_regime(obj, run.regime)
        p = self.params(obj, w0)
        ColoredLogger.info(f"[Harness] {regime}: mu={obj.mu:.4g} L={obj.L:.4g} alpha={p.alpha:g}")
        per_round, total = communication_bits(run, obj.N)
        self.summary.metrics.update({
            "regime": regime, "mu": obj.mu, "L": obj.L, "sigma_sq": obj.sigma_sq,
            "alpha": p.alpha, "per_round_bits": per_round, "total_bits": total,
            "final_gap": float(curves["f_gap"][-1]),
        })

        # ------------------ 1. Baseline oracle ---------------------------
        if (run.sketch.kind is SketchKind.IDENTITY and run.K == 1 and obj.N == 1
                and run.eta_global == 1.0):
            self.check_gd_equivalence(obj, traces[0], w0)
        self.check("synchronized_v0", all(np.all(t.V[: t.rounds_completed, 0] == 0.0) for t in traces))

        # ------------------ 2. K-step bound ------------------------------
        bound_col = None
        if run.K > 1 and run.eta_global != 1.0:
            self.warn(["K-step bounds assume eta_global = 1; bound checks skipped"])
        else:
            empirical, bound, label = self.kstep_bound(regime, p, curves, run.T)
            margin = bound_margin(empirical, bound, slack)
            self.summary.metrics["bound_margin"] = margin
            self.check(f"bound_{regime}", not margin < 0.0)
            self.artifact(write_bound_overlay(self.out_dir / "bound_overlay.csv",
                                              empirical, bound, label))
            bound_col = bound

        # ------------------ 3. Single-step bound -------------------------
        if run.K == 1:
            empirical, bound = self.single_step_bound(regime, p, obj, traces, curves, run.T)
            margin = bound_margin(empirical, bound, slack)
            self.summary.metrics["single_step_margin"] = margin
            self.check(f"single_step_{regime}", not margin < 0.0)
            self.artifact(write_bound_overlay(self.out_dir / "single_step_overlay.csv",
                                              empirical, bound, "empirical"))

        # ------------------ 4. Predicted budget --------------------------
        if regime != "nonconvex" and run.sketch.kind is not SketchKind.IDENTITY:
            eps = float(curves["f_gap"][-1])
            if math.isfinite(eps) and eps > 0:
                plan = communication_budget(
                    regime, eps=eps, L=obj.L, N=obj.N, d=obj.d, D0=p.D0,
                    sigma_sq=obj.sigma_sq, mu=obj.mu, kind=run.sketch.kind,
                    b_sketch=run.sketch.b_sketch, K=run.K,
                )
                self.artifact(write_json(self.out_dir / "budget_plan.json", plan))

        self.artifact(write_traces(self.out_dir / "traces.csv", traces, bound_col))


class RunDPFLExperiment(RunFLExperiment):
    """Noised run next to the noiseless one with the same seeds, plus its privacy budget."""

    command = "run-dp-fl"

    def run(self) -> None:
        run = self.cfg.run
        if run.dp is None:
            raise InvalidParam("run-dp-fl needs a run.dp section")
        obj = from_spec(self.cfg.objective)

        # ------------------ 0. Budget ------------------------------------
        dp = dp_for_run(run, obj.N)
        budget = total_budget(dp, strict=False)
        budget.sigma = sigmas_for(obj.clients, dp)
        if dp.eps_hat >= 1.0 / math.sqrt(dp.K):
            self.warn([f"eps_hat={dp.eps_hat:g} violates eps_hat < 1/sqrt(K)"])

        # ------------------ 1. Paired runs -------------------------------
        private = self.simulate(obj, private=True)
        clean = self.simulate(obj)
        noisy_gap = float(mean_curves(private)["f_gap"][-1])
        clean_gap = float(mean_curves(clean)["f_gap"][-1])
        self.summary.metrics.update({
            "eps_dp": budget.eps_dp, "delta_dp": budget.delta_dp,
            "eps_exact": budget.eps_exact, "delta_exact": budget.delta_exact,
            "sigma_max": max(budget.sigma), "final_gap": noisy_gap,
            "final_gap_noiseless": clean_gap,
        })
        self.check("simplified_budget",
                   math.isclose(budget.eps_dp, math.sqrt(dp.T * dp.K) * dp.eps_hat, rel_tol=1e-12))
        if max(budget.sigma) > 0:
            self.check("noise_raises_gap", noisy_gap > clean_gap)
        elif dp.batch_size is None:
            self.check("zero_noise_matches",
                       all(np.array_equal(a.iterates, b.iterates) for a, b in zip(private, clean)))

        self.artifact(write_json(self.out_dir / "budget.json", budget))
        self.artifact(write_traces(self.out_dir / "traces.csv", private))


# ──────────────────────────────────────────────────────────────────────
# Privacy accounting
# ──────────────────────────────────────────────────────────────────────
class AccountPrivacyExperiment(BaseExperiment):
    """Per-client noise scales and the composed (ε, δ) budget, simplified and exact."""

    command = "account-privacy"
    requires = ("privacy",)

    def run(self) -> None:
        dp = self.cfg.privacy
        budget = total_budget(dp, strict=False)
        if dp.eps_hat >= 1.0 / math.sqrt(dp.K):
            self.warn([f"eps_hat={dp.eps_hat:g} violates eps_hat < 1/sqrt(K)={1 / math.sqrt(dp.K):.4g}"])

        if dp.sigma_override is not None:
            budget.sigma = [float(dp.sigma_override)]
        elif dp.lipschitz:
            budget.sigma = [gaussian_sigma(ell, dp.eps_hat, dp.delta_hat) for ell in dp.lipschitz]

        # ------------------ Subsampled per-step guarantee ----------------
        amplified = []
        if dp.batch_size is not None and dp.dataset_sizes:
            for n in dp.dataset_sizes:
                try:
                    amplified.append(amplify_subsample(dp.eps_hat, dp.delta_hat, dp.batch_size, n))
                except InvalidParam as exc:
                    self.warn([f"no amplification for n={n}: {exc}"])

        later = total_budget(dp.model_copy(update={"T": dp.T + 1}), strict=False)
        self.check("simplified_form",
                   math.isclose(budget.eps_dp, math.sqrt(dp.T * dp.K) * dp.eps_hat, rel_tol=1e-12)
                   and math.isclose(budget.delta_dp, dp.T * dp.K * dp.delta_hat, rel_tol=1e-12))
        self.check("monotone_in_T", later.eps_dp > budget.eps_dp and later.eps_exact > budget.eps_exact)

        self.summary.metrics.update({
            "eps_dp": budget.eps_dp, "delta_dp": budget.delta_dp,
            "eps_exact": budget.eps_exact, "delta_exact": budget.delta_exact,
        })
        self.artifact(write_json(self.out_dir / "budget.json", {
            "budget": budget,
            "amplified_per_step": [{"eps": e, "delta": d} for e, d in amplified],
        }))


# ──────────────────────────────────────────────────────────────────────
# Gradient-leakage attack
# ──────────────────────────────────────────────────────────────────────
def read_gradient(path: str) -> np.ndarray:
    """One coordinate per row under a ``g`` column."""
    rows = read_csv(path)
    if not rows or "g" not in rows[0]:
        raise InvalidParam(f"{path} needs a 'g' column with one coordinate per row")
    return np.array([float(r["g"]) for r in rows])


class AttackExperiment(BaseExperiment):
    """
    Gradient inversion from one observed gradient, with its rate certificate.

    Estimates the regularity constants around the true data point, runs
    gradient descent with the certified step and checks the per-step
    contraction certificate. A sketched observation is also judged against
    the step and rate its lemma constants (A, B) and (θ₁_R, θ₂_R) give, when
    they give one. A noised observation adds the paired reconstruction study.
    """

    command = "attack"
    requires = ("attack",)

    def conditions_report(self, problem, est, center) -> Dict[str, int]:
        spec = self.cfg.attack
        rng = rng_for(spec.seed, _CHECK_STREAM)
        samples = ball_samples(center, spec.ball_radius, 64, rng)
        pairs = np.stack([samples[:-1], samples[1:]], axis=1)
        view = est.objective_view()
        found = {
            "semi_smooth": check_semi_smooth(problem, est.a, est.b, est.p, pairs),
            "non_critical": check_non_critical(problem, view.theta1, view.theta2, samples),
            "semi_lipschitz": check_semi_lipschitz(problem, est.alpha_sl, est.beta_sl, est.p, pairs),
            "semi_strong_convex": check_semi_strong_convex(problem, est.c, est.d_sc, est.p, pairs),
        }
        self.artifact(write_json(self.out_dir / "conditions.json", {
            "estimates": est,
            "violations": found,
        }))
        return {k: len(v) for k, v in found.items()}

    def sketched_certificate(self, est, sketched) -> Optional[Tuple[float, float]]:
        """Step and rate from the lemma constants (A, B) and (θ₁_R, θ₂_R), or None when they certify nothing."""
        A, B, th1, th2 = sketched
        lemma = dataclasses.replace(est, a=A, b=B, theta1=th1, theta2=th2, p=0.5)
        try:
            eta, gamma = step_size_rule(lemma)
        except (HypothesisViolated, InvalidParam) as exc:
            self.warn([f"sketched lemma constants certify no rate: {exc}"])
            self.summary.metrics["sketched_certificate_applies"] = False
            return None
        self.summary.metrics.update({"sketched_certificate_applies": True,
                                     "eta_R": eta, "gamma_R": gamma})
        return eta, gamma

    @staticmethod
    def worst_ratio(traj) -> float:
        live = traj.losses[:-1] >= CERTIFICATE_FLOOR
        ratios = traj.ratios()[live]
        return float(ratios.max()) if ratios.size else 0.0

    def run(self) -> None:
        spec = self.cfg.attack
        gradient = read_gradient(spec.gradient_csv) if spec.gradient_csv else None
        setup = build_attack(spec, gradient=gradient, noised=False)
        problem, x_true = setup.problem, setup.x_true

        # ------------------ 0. Constants ---------------------------------
        est = estimates(problem, center=x_true, radius=spec.ball_radius,
                        rng=rng_for(spec.seed, _ESTIMATE_STREAM))
        self.summary.metrics.update({"theta1": est.theta1, "theta2": est.theta2, "b": est.b,
                                     "d_sc": est.d_sc})
        sketched: Optional[Tuple[float, float, float, float]] = None
        if problem.sketch is not None:
            try:
                sketched = sketched_constants(est, sketch_stats(problem))
                A, B, th1, th2 = sketched
                self.summary.metrics.update({"A": A, "B": B, "theta1_R": th1, "theta2_R": th2})
                self.check("sketch_full_rank", True)
            except RankDeficient as exc:
                self.warn([str(exc)])
                self.check("sketch_full_rank", False)

        # ------------------ 1. Step size ---------------------------------
        gamma: Optional[float] = None
        try:
            eta, gamma = step_size_rule(est.objective_view())
        except HypothesisViolated as exc:
            eta = 1.0 / (2.0 * est.b)
            self.warn([f"{exc}; using eta = 1/(2b) without a rate certificate"])
        self.summary.metrics.update({"eta": eta, "gamma": gamma if gamma is not None else math.nan})
        if gamma is not None and gamma * spec.T_attack < 1.0:
            self.warn([f"rate certificate is weak: gamma*T = {gamma * spec.T_attack:.3g} < 1"])
        lemma = self.sketched_certificate(est, sketched) if sketched is not None else None

        # ------------------ 2. Descent from the ball ---------------------
        x0 = ball_samples(x_true, spec.ball_radius, 2, rng_for(spec.seed, _START_STREAM))[1]
        try:
            traj = attack_gd(problem, x0, eta, spec.T_attack)
            self.check("attack_finite", True)
        except NonFinite as exc:
            traj = exc.partial
            self.check("attack_finite", False)
        error = relative_error(traj.final_x, x_true)
        self.summary.metrics.update({"steps": traj.steps, "final_loss": traj.final_loss,
                                     "relative_error": error})
        if gamma is not None:
            worst = self.worst_ratio(traj)
            self.summary.metrics["worst_ratio"] = worst
            self.check("rate_certificate", worst <= 1.0 - gamma + CERTIFICATE_SLACK)
        if lemma is not None:
            eta_R, gamma_R = lemma
            try:
                worst_R = self.worst_ratio(attack_gd(problem, x0, eta_R, spec.T_attack))
            except NonFinite as exc:
                worst_R = self.worst_ratio(exc.partial)
            self.summary.metrics["worst_ratio_R"] = worst_R
            self.check("sketched_certificate", worst_R <= 1.0 - gamma_R + CERTIFICATE_SLACK)
        if problem.sketch is None and gradient is None:
            self.check("reconstruction", error <= RECONSTRUCTION_TOL)
        self.artifact(write_trajectory(self.out_dir / "trajectory.csv", [traj]))

        # ------------------ 3. Regularity report -------------------------
        counts = self.conditions_report(problem, est, x_true)
        self.summary.metrics.update({f"violations.{k}": v for k, v in counts.items()})
        uniqueness = unique_minimum_probe(problem, est, spec.multi_start, center=x_true,
                                          radius=spec.ball_radius, eta=eta, T_attack=spec.T_attack,
                                          seed=spec.seed)
        self.summary.metrics.update({"multi_start_spread": uniqueness.spread,
                                     "hypotheses_hold": uniqueness.hypotheses_hold})
        if not uniqueness.hypotheses_hold:
            self.warn([f"regularity hypotheses do not hold on the ball "
                       f"(multi-start spread {uniqueness.spread:.3g})"])

        # ------------------ 4. Noise against the attack ------------------
        if spec.noise_sigma > 0 or spec.dp is not None:
            study = reconstruction_study(spec, eta, radius=spec.ball_radius)
            self.summary.metrics.update({"noise_sigma": study.sigma,
                                         "median_error_noiseless": study.median_noiseless,
                                         "median_error_noised": study.median_noised,
                                         "diverged_runs": study.diverged})
            self.check("noise_defeats_attack", study.ratio >= NOISE_RATIO)
            self.artifact(write_csv(
                self.out_dir / "reconstruction.csv", ["seed", "noiseless_error", "noised_error"],
                ([i, a, b] for i, (a, b) in enumerate(zip(study.noiseless_errors,
                                                           study.noised_errors))),
            ))


# ──────────────────────────────────────────────────────────────────────
# Communication sweep
# ──────────────────────────────────────────────────────────────────────
class SweepExperiment(BaseExperiment):
    """Rounds and bits to reach a target gap for each sketch size."""

    command = "sweep"
    requires = ("objective", "run", "sweep")

    def run(self) -> None:
        sweep = self.cfg.sweep
        obj = from_spec(self.cfg.objective)
        base = self.cfg.run.model_copy(update={
            "sketch": self.cfg.run.sketch.model_copy(update={"kind": sweep.kind}),
        })
        b_values = sweep_b_values(obj.d, sweep.b_divisors)
        result = sweep_communication(obj, base, b_values, target_eps=sweep.target_eps,
                                     T_max=sweep.T_max, n_seeds=sweep.n_seeds)
        if result.unreachable:
            self.warn([f"target {sweep.target_eps:g} unreachable for b in {result.unreachable}"])

        reached = [p for p in result.points if p.reached]
        if len(reached) >= 2:
            band = result.bits_band()
            self.summary.metrics["bits_band"] = band
            self.check("bits_within_band", band <= BITS_BAND)
            per_alpha = [p.T_to_target / (1.0 + p.alpha) for p in reached]
            if min(per_alpha) > 0:
                spread = max(per_alpha) / min(per_alpha)
                self.summary.metrics["rounds_per_alpha_spread"] = spread
                self.check("rounds_scale_with_alpha", spread <= ALPHA_SCALING)

        rows = [[p.b_sketch, p.alpha, p.eta_local, p.per_round_bits, p.T_to_target,
                 p.total_bits, p.final_gap] for p in result.points]
        rows += [[b, math.nan, math.nan, math.nan, "", "", math.nan] for b in result.unreachable]
        self.artifact(write_csv(
            self.out_dir / "sweep.csv",
            ["b_sketch", "alpha", "eta_local", "per_round_bits", "T_to_target", "total_bits",
             "final_gap"],
            rows,
        ))
        self.artifact(write_json(self.out_dir / "sweep.json", result))


EXPERIMENTS = {
    cls.command: cls
    for cls in (
        VerifySketchExperiment,
        RunFLExperiment,
        RunDPFLExperiment,
        AccountPrivacyExperiment,
        AttackExperiment,
        SweepExperiment,
    )
}
