"""Numerical validation suite for the convergence theory.

Every check audits one identity, bound, or rate statement and reports a
:class:`CheckResult` carrying a stable anchor string, a verdict, and
the worst margin observed (positive margins mean slack, negative mean
violation). Library-level checks draw their own random instances from
the master seed; problem-level checks run Monte Carlo experiments on
the configured problem and distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    expected_mean_error,
    fit_rate,
    iterate_recurrence,
    monte_carlo_moments,
    rho_basic,
    solve_recurrence,
    theoretical_rates,
    xi_factor,
)
from .linalg import Problem, SpdMatrix, b_pseudoinverse
from .oracles import (
    psd_sandwich_residual,
    random_smw_instance,
    range_restricted_eigen_bound,
    smw_inverse,
)
from .reformulation import (
    Reformulation,
    build_reformulation,
    sketched_projection,
    sketched_system,
    stochastic_gradient,
    stochastic_value,
)
from .sketching import kaczmarz_distribution, stream
from .solvers import (
    SolverConfig,
    acceleration_parameters,
    pathwise_residuals,
    prox_step,
    run_basic,
)

__all__ = ["CheckResult", "ValidationOptions", "run_validation", "LIBRARY_CHECKS", "PROBLEM_CHECKS"]

VALIDATION_STREAM = 303


@dataclass
class CheckResult:
    """Outcome of one validation check."""

    anchor: str
    passed: bool
    margin: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "details": self.details,
        }


@dataclass(frozen=True)
class ValidationOptions:
    """Sizes for the validation runs; defaults keep a full pass fast."""

    seed: int = 0
    replications: int = 400
    iterations: int = 25
    instances: int = 120
    oracle_instances: int = 300
    omega: float = 1.0
    tau: int = 2
    threads: int = 1


def _random_instance(rng, m=None, n=None, q=None, metric_spread=2.0):
    """Random (problem, sketch sample) pair of small dimensions."""
    m = int(m if m is not None else rng.integers(2, 7))
    n = int(n if n is not None else rng.integers(2, 7))
    q = int(q if q is not None else rng.integers(1, 4))
    a = rng.standard_normal((m, n))
    x_planted = rng.standard_normal(n)
    base = rng.standard_normal((n, n))
    metric = SpdMatrix(base @ base.T + metric_spread * np.eye(n))
    problem = Problem(a, a @ x_planted, metric)
    s = rng.standard_normal((m, q))
    return problem, s


# ---------------------------------------------------------------------------
# Library-level checks (problem independent)
# ---------------------------------------------------------------------------


def check_sketch_identities(options: ValidationOptions) -> CheckResult:
    """Gradient, Hessian-fixed-point, projection and value identities.

    For random (A, b, B, S, x): the sketch gradient equals the sketch
    Hessian applied to itself, equals its own weighted-pseudoinverse
    image, and equals x minus the compressed projection; additionally
    f_S(x) = ||grad f_S(x)||_B^2 / 2 and one full step lands on the
    compressed solution set (f_S drops to zero).
    """
    rng = stream(options.seed, VALIDATION_STREAM, 1)
    worst = 0.0
    tol = 1e-8
    for _ in range(options.instances):
        problem, s = _random_instance(rng)
        sys = sketched_system(problem.A, problem.b, problem.metric, _sample_of(s))
        x = rng.standard_normal(problem.n)
        grad = stochastic_gradient(sys, x)
        scale = max(1.0, float(np.linalg.norm(grad)))
        hessian = problem.metric.inv @ sys.Z
        hess_grad = hessian @ grad
        pinv_grad = b_pseudoinverse(hessian, problem.metric) @ grad
        proj_diff = x - sketched_projection(sys, x)
        worst = max(
            worst,
            float(np.linalg.norm(hess_grad - grad)) / scale,
            float(np.linalg.norm(pinv_grad - grad)) / scale,
            float(np.linalg.norm(proj_diff - grad)) / scale,
        )
        value = stochastic_value(sys, x)
        half_grad_sq = 0.5 * problem.metric.norm_sq(grad)
        worst = max(worst, abs(value - half_grad_sq) / max(1.0, value))
        worst = max(worst, stochastic_value(sys, x - grad) / max(1.0, value))
    return CheckResult(
        anchor="lemma:sketch-identities",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": options.instances, "worst_residual": worst},
    )


def _sample_of(matrix):
    from .sketching import SketchSample

    return SketchSample(np.array(matrix))


def check_kaczmarz_expected_operator(options: ValidationOptions) -> CheckResult:
    """Row sampling by squared norms averages Z to A'A normalized by ||A||_F^2."""
    rng = stream(options.seed, VALIDATION_STREAM, 2)
    tol = 1e-12
    worst = 0.0
    trials = max(20, options.instances // 4)
    for _ in range(trials):
        m, n = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        a = rng.standard_normal((m, n))
        problem = Problem(a, a @ rng.standard_normal(n))
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        target = a.T @ a / float(np.sum(a * a))
        scale = max(1.0, float(np.abs(target).max()))
        worst = max(worst, float(np.abs(reform.expected_Z - target).max()) / scale)
    return CheckResult(
        anchor="identity:kaczmarz-expected-operator",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": trials, "worst_residual": worst},
    )


def check_prox_equivalence(options: ValidationOptions) -> CheckResult:
    """The sketched step solves the sketch-regularized proximal problem."""
    rng = stream(options.seed, VALIDATION_STREAM, 3)
    tol = 1e-8
    worst = 0.0
    trials = max(20, options.instances // 2)
    from .solvers import basic_step

    for _ in range(trials):
        problem, s = _random_instance(rng)
        sample = _sample_of(s)
        x = rng.standard_normal(problem.n)
        for omega in (0.1, 0.5, 0.9, 1.0):
            direct = basic_step(problem, x, sample, omega)
            prox = prox_step(problem, x, sample, omega)
            scale = max(1.0, float(np.linalg.norm(direct)))
            worst = max(worst, float(np.linalg.norm(direct - prox)) / scale)
    return CheckResult(
        anchor="theorem:proximal-equivalence",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": trials, "worst_residual": worst},
    )


def check_woodbury(options: ValidationOptions) -> CheckResult:
    """Low-rank update inverse identity against direct inversion (relative)."""
    rng = stream(options.seed, VALIDATION_STREAM, 4)
    tol = 1e-9
    worst = 0.0
    for _ in range(options.oracle_instances):
        inst = random_smw_instance(rng)
        direct = np.linalg.inv(inst.M + inst.C @ inst.N @ inst.D)
        gap = float(np.abs(smw_inverse(inst) - direct).max())
        worst = max(worst, gap / max(1.0, float(np.abs(direct).max())))
    return CheckResult(
        anchor="lemma:woodbury-identity",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": options.oracle_instances, "worst_residual": worst},
    )


def check_psd_sandwich(options: ValidationOptions) -> CheckResult:
    """Pseudoinverse sandwich identity on rank-deficient PSD matrices.

    Instances are well-scaled by construction: nonzero eigenvalues stay
    in [0.1, 10], the regime where the absolute residual is meaningful.
    """
    rng = stream(options.seed, VALIDATION_STREAM, 5)
    tol = 1e-9
    worst = 0.0
    for _ in range(options.oracle_instances):
        n = int(rng.integers(2, 7))
        rank = int(rng.integers(1, n + 1))
        mat = _well_scaled_psd(rng, n, rank)
        mu = float(rng.uniform(0.05, 5.0))
        worst = max(worst, psd_sandwich_residual(mat, mu))
    return CheckResult(
        anchor="lemma:psd-sandwich-identity",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": options.oracle_instances, "worst_residual": worst},
    )


def _well_scaled_psd(rng, n: int, rank: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.zeros(n)
    lam[:rank] = rng.uniform(0.1, 10.0, size=rank)
    return (q * lam) @ q.T


def check_range_eigen_bound(options: ValidationOptions) -> CheckResult:
    """Smallest-nonzero-eigenvalue bound on the compressed range."""
    rng = stream(options.seed, VALIDATION_STREAM, 6)
    failures = 0
    trials = options.oracle_instances
    for _ in range(trials):
        m, n = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        a = rng.standard_normal((m, n))
        problem = Problem(a, a @ rng.standard_normal(n))
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        w_vec = rng.standard_normal(m)
        x = problem.metric.inv_sqrt @ (a.T @ w_vec)
        ok = range_restricted_eigen_bound(
            reform.expected_Z, problem.metric, x, reform.spectrum.lambda_min_plus
        )
        failures += 0 if ok else 1
    return CheckResult(
        anchor="lemma:range-restricted-eigenvalue",
        passed=failures == 0,
        margin=-float(failures),
        details={"instances": trials, "failures": failures},
    )


def check_recurrence_closed_form(options: ValidationOptions) -> CheckResult:
    """Closed trigonometric recurrence solution against direct iteration."""
    rng = stream(options.seed, VALIDATION_STREAM, 7)
    tol = 1e-9
    worst = 0.0
    for _ in range(options.oracle_instances):
        e_coef = float(rng.uniform(-1.8, 1.8))
        upper = -e_coef * e_coef / 4.0
        f_coef = float(rng.uniform(-0.999, upper - 1e-3)) if upper - 1e-3 > -0.999 else -0.999
        xi0, xi1 = (float(v) for v in rng.standard_normal(2))
        k = int(rng.integers(2, 201))
        direct = iterate_recurrence(e_coef, f_coef, xi0, xi1, k)
        closed = solve_recurrence(e_coef, f_coef, xi0, xi1, k)
        worst = max(worst, abs(direct - closed) / max(1.0, abs(direct)))
    return CheckResult(
        anchor="lemma:two-term-recurrence-closed-form",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": options.oracle_instances, "worst_residual": worst},
    )


def check_quadratic_bounds(options: ValidationOptions) -> CheckResult:
    """Gradient-value sandwich and the two norm bounds on f."""
    rng = stream(options.seed, VALIDATION_STREAM, 8)
    tol = 1e-9
    worst = -np.inf
    trials = max(20, options.instances // 4)
    for _ in range(trials):
        m, n = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        a = rng.standard_normal((m, n))
        base = rng.standard_normal((n, n))
        metric = SpdMatrix(base @ base.T + 2.0 * np.eye(n))
        problem = Problem(a, a @ rng.standard_normal(n), metric)
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        lmin, lmax = reform.spectrum.lambda_min_plus, reform.spectrum.lambda_max
        for _ in range(4):
            x = rng.standard_normal(problem.n)
            f_val = reform.f_value(x)
            half_grad = 0.5 * metric.norm_sq(reform.grad_f(x))
            scale = max(1.0, f_val)
            worst = max(
                worst,
                (lmin * f_val - half_grad) / scale,
                (half_grad - lmax * f_val) / scale,
            )
            x_star_any = reform.x_star
            worst = max(
                worst, (f_val - 0.5 * lmax * metric.norm_sq(x - x_star_any)) / scale
            )
            if reform.exactness() == "exact":
                proj = problem.project(x)
                worst = max(
                    worst, (0.5 * lmin * metric.norm_sq(x - proj) - f_val) / scale
                )
    return CheckResult(
        anchor="lemma:quadratic-bounds",
        passed=worst <= tol,
        margin=tol - worst,
        details={"instances": trials, "worst_violation": worst},
    )


def check_equivalent_solution_sets(options: ValidationOptions) -> CheckResult:
    """For finite supports, grad f vanishes iff every atom's loss vanishes."""
    rng = stream(options.seed, VALIDATION_STREAM, 9)
    trials = max(20, options.instances // 6)
    failures = 0
    for _ in range(trials):
        m, n = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        a = rng.standard_normal((m, n))
        a[:, -1] = 0.0  # force a nontrivial null space
        problem = Problem(a[:, :], a @ np.append(rng.standard_normal(n - 1), 0.0))
        dist = kaczmarz_distribution(a)
        reform = build_reformulation(problem, dist)
        support = dist.support()
        in_set = reform.x_star + np.append(np.zeros(n - 1), rng.standard_normal())
        out_set = reform.x_star + rng.standard_normal(n) + np.append(np.ones(n - 1), 0.0)
        for x, expected_zero in ((in_set, True), (out_set, None)):
            grad_zero = float(np.linalg.norm(reform.grad_f(x))) <= 1e-9
            losses = [
                stochastic_value(sketched_system(problem.A, problem.b, problem.metric, s), x)
                for s, _ in support
            ]
            atoms_zero = max(losses) <= 1e-18
            if grad_zero != atoms_zero:
                failures += 1
            if expected_zero is True and not grad_zero:
                failures += 1
    return CheckResult(
        anchor="theorem:equivalent-solution-sets",
        passed=failures == 0,
        margin=-float(failures),
        details={"instances": trials, "failures": failures},
    )


# ---------------------------------------------------------------------------
# Problem-level checks (use the configured problem and distribution)
# ---------------------------------------------------------------------------


def check_spectrum_range(reform: Reformulation, options: ValidationOptions) -> CheckResult:
    """Eigenvalues lie in [0, 1]; single-column exact supports sum to 1."""
    lam = reform.spectrum.lambdas_raw
    worst = max(float(lam[0] - 1.0), float(-lam[-1]))
    tol = 1e-8 if reform.estimation.kind == "exact" else 1e-8 + 3.0 * (reform.estimation.se_norm or 0.0)
    details = {"lambda_max_raw": float(lam[0]), "lambda_min_raw": float(lam[-1])}
    passed = worst <= tol
    support = reform.dist.support()
    if support is not None and all(s.q == 1 for s, _ in support):
        trace_gap = abs(float(lam.sum()) - 1.0)
        details["trace_gap"] = trace_gap
        passed = passed and trace_gap <= 1e-9
        worst = max(worst, trace_gap - 1e-9 + tol)
    return CheckResult(
        anchor="lemma:spectrum-in-unit-interval",
        passed=passed,
        margin=tol - worst,
        details=details,
    )


def check_exactness_verdict(reform: Reformulation, options: ValidationOptions) -> CheckResult:
    """Exactness verdict, cross-checked against the sufficient condition.

    When E[H] is available and positive definite, the verdict must be
    "exact"; a Monte Carlo expectation must yield "undecidable".
    """
    verdict = reform.exactness()
    details = {"verdict": verdict, "estimation": reform.estimation.kind}
    if reform.estimation.kind != "exact":
        return CheckResult(
            anchor="theorem:exactness-characterization",
            passed=verdict == "undecidable",
            margin=0.0,
            details=details,
        )
    eh = reform.expected_H()
    passed = verdict in ("exact", "not-exact")
    if eh is not None:
        eig_min = float(np.linalg.eigvalsh(eh)[0])
        details["expected_H_min_eigenvalue"] = eig_min
        if eig_min > 1e-12:
            passed = passed and verdict == "exact"
    return CheckResult(
        anchor="theorem:exactness-characterization",
        passed=passed,
        margin=0.0,
        details=details,
    )


def check_pathwise_identities(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Per-step energy identities of the basic method at several stepsizes."""
    tol = 1e-9
    worst = 0.0
    rng = stream(options.seed, VALIDATION_STREAM, 10)
    x0 = rng.standard_normal(problem.n)
    for omega in (0.5, options.omega, 1.6):
        cfg = SolverConfig(omega=omega, max_iters=options.iterations, master_seed=options.seed)
        trace = run_basic(problem, reform.dist, cfg, x0=x0)
        dec, step = pathwise_residuals(trace)
        worst = max(worst, dec, step)
    return CheckResult(
        anchor="lemma:pathwise-step-identities",
        passed=worst <= tol,
        margin=tol - worst,
        details={"worst_residual": worst},
    )


def _lambda_uncertainty(reform: Reformulation) -> float:
    """Eigenvalue error bound for Monte Carlo estimated spectra.

    By eigenvalue perturbation, |lambda_i(West) - lambda_i(W)| is at most
    the spectral-norm error of W, bounded by the standard error of the
    estimated operator amplified through the inverse weighting.
    """
    if reform.estimation.kind == "exact":
        return 0.0
    b_min = float(reform.problem.metric.eigenvalues[-1])
    return 3.0 * (reform.estimation.se_norm or 0.0) / b_min


def _skipped(anchor: str, reason: str) -> CheckResult:
    return CheckResult(anchor=anchor, passed=True, margin=0.0, details={"skipped": reason})


_MC_SKIP_REASON = "needs an exactly known expected operator; estimation is Monte Carlo"


def check_expected_iterates(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Transformed mean errors follow (1 - w lambda_i)^k componentwise (4 SE)."""
    cfg = SolverConfig(omega=options.omega, max_iters=options.iterations, master_seed=options.seed)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        options.iterations,
        reform=reform,
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    lam = reform.spectrum.lambdas_raw
    k = np.arange(options.iterations + 1)[:, None]
    predicted = (1.0 - options.omega * lam[None, :]) ** k * moments.initial_transformed[None, :]
    # means below the per-component Monte Carlo resolution (trajectories are
    # pathwise bounded by the initial weighted norm for 0 <= w <= 2) cannot
    # be distinguished from zero, so the tolerance is floored there
    floor = 5.0 * np.sqrt(moments.l2_error[0]) / options.replications
    # an estimated spectrum shifts each factor by at most w * delta
    delta = _lambda_uncertainty(reform)
    if delta > 0.0:
        base = np.abs(1.0 - options.omega * lam[None, :])
        widen = ((base + options.omega * delta) ** k - base**k) * np.abs(
            moments.initial_transformed[None, :]
        )
    else:
        widen = 0.0
    gap = (
        np.abs(moments.transformed_mean - predicted)
        - 4.0 * moments.transformed_se
        - floor
        - widen
        - 1e-12
    )
    worst = float(gap.max())
    return CheckResult(
        anchor="theorem:expected-iterate-recursion",
        passed=worst <= 0.0,
        margin=-worst,
        details={"replications": options.replications, "worst_gap": worst},
    )


def check_null_component_anchoring(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Zero-eigenvalue components stay at zero when anchored at proj(x_0)."""
    lam = reform.spectrum.lambdas_raw
    null_idx = np.where(lam <= reform.spectrum.rank_threshold)[0]
    if null_idx.size == 0:
        return CheckResult(
            anchor="lemma:null-component-anchoring",
            passed=True,
            margin=0.0,
            details={"note": "spectrum has no zero eigenvalues"},
        )
    cfg = SolverConfig(omega=options.omega, max_iters=options.iterations, master_seed=options.seed)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        options.iterations,
        reform=reform,
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    gap = (
        np.abs(moments.transformed_mean[:, null_idx])
        - 4.0 * moments.transformed_se[:, null_idx]
        - 1e-12
    )
    worst = float(gap.max())
    return CheckResult(
        anchor="lemma:null-component-anchoring",
        passed=worst <= 0.0,
        margin=-worst,
        details={"null_components": int(null_idx.size), "worst_gap": worst},
    )


def check_l2_band(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """E||x_k - x*||_B^2 sits inside the two-sided geometric band (3 SE).

    For Monte Carlo estimated spectra the band is widened by the
    eigenvalue uncertainty (optimistic lambda_min_plus for the upper
    side, pessimistic lambda_max for the lower side).
    """
    delta = _lambda_uncertainty(reform)
    lmin = max(reform.spectrum.lambda_min_plus - delta, 0.0)
    lmax = min(reform.spectrum.lambda_max + delta, 1.0)
    worst = -np.inf
    for omega in (0.5, options.omega, 1.5):
        cfg = SolverConfig(omega=omega, max_iters=options.iterations, master_seed=options.seed)
        moments = monte_carlo_moments(
            problem,
            reform.dist,
            cfg,
            options.replications,
            options.iterations,
            threads=options.threads,
            x0=_validation_start(problem, options),
        )
        k = np.arange(options.iterations + 1)
        r0 = moments.l2_error[0]
        upper = (1.0 - omega * (2.0 - omega) * lmin) ** k * r0
        lower = (1.0 - omega * (2.0 - omega) * lmax) ** k * r0
        worst = max(
            worst,
            float(np.max(moments.l2_error - upper - 3.0 * moments.l2_se)),
            float(np.max(lower - moments.l2_error - 3.0 * moments.l2_se)),
        )
    return CheckResult(
        anchor="theorem:l2-two-sided-band",
        passed=worst <= 1e-12,
        margin=-worst,
        details={"replications": options.replications, "worst_gap": worst},
    )


def check_cesaro_bounds(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """O(1/k) bounds for the running-average iterate (norm and value)."""
    if reform.estimation.kind != "exact":
        return _skipped("theorem:cesaro-average-bounds", _MC_SKIP_REASON)
    omega = options.omega
    cfg = SolverConfig(omega=omega, max_iters=options.iterations, master_seed=options.seed)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        options.iterations,
        reform=reform,
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    lmin = reform.spectrum.lambda_min_plus
    r0 = moments.l2_error[0]
    k = np.arange(1, options.iterations + 1)
    bound_norm = r0 / (2.0 * omega * (2.0 - omega) * lmin * k)
    bound_value = r0 / (2.0 * omega * (2.0 - omega) * k)
    worst = float(
        np.max(moments.cesaro_error[1:] - bound_norm - 3.0 * moments.cesaro_error_se[1:])
    )
    worst = max(
        worst,
        float(np.max(moments.cesaro_f[1:] - bound_value - 3.0 * moments.cesaro_f_se[1:])),
    )
    return CheckResult(
        anchor="theorem:cesaro-average-bounds",
        passed=worst <= 1e-12,
        margin=-worst,
        details={"replications": options.replications, "worst_gap": worst},
    )


def check_value_decay(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Both geometric bounds on E f(x_k), each in its own stepsize regime."""
    if reform.estimation.kind != "exact":
        return _skipped("theorem:value-decay", _MC_SKIP_REASON)
    worst = -np.inf
    details = {}
    spectrum = reform.spectrum
    omega_general = min(options.omega, 1.9 / spectrum.zeta)
    for tag, omega in (("general", omega_general), ("exactness", options.omega)):
        cfg = SolverConfig(omega=omega, max_iters=options.iterations, master_seed=options.seed)
        moments = monte_carlo_moments(
            problem,
            reform.dist,
            cfg,
            options.replications,
            options.iterations,
            reform=reform,
            threads=options.threads,
            x0=_validation_start(problem, options),
        )
        rates = theoretical_rates(spectrum, omega)
        k = np.arange(options.iterations + 1)
        if tag == "general":
            bound = rates.f_factor_general**k * moments.f_mean[0]
        else:
            bound = (
                rates.f_factor_under_exactness**k
                * 0.5
                * spectrum.lambda_max
                * moments.l2_error[0]
            )
        gap = float(np.max(moments.f_mean - bound - 3.0 * moments.f_se))
        details[f"worst_gap_{tag}"] = gap
        worst = max(worst, gap)
    return CheckResult(
        anchor="theorem:value-decay",
        passed=worst <= 1e-12,
        margin=-worst,
        details=details,
    )


def check_convergence_window(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Stepsizes beyond 2/lambda_max leave the mean error non-decaying."""
    omega = 1.3 * 2.0 / reform.spectrum.lambda_max
    cfg = SolverConfig(omega=omega, max_iters=options.iterations, master_seed=options.seed)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        max(options.replications // 2, 2),
        options.iterations,
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    fitted = fit_rate(np.sqrt(np.maximum(moments.mean_error_norm_sq, 1e-300)))
    return CheckResult(
        anchor="corollary:convergence-window",
        passed=fitted.rate >= 1.0,
        margin=fitted.rate - 1.0,
        details={"omega": omega, "fitted_rate": fitted.rate},
    )


def check_optimal_relaxation(reform: Reformulation, options: ValidationOptions) -> CheckResult:
    """The contraction factor is minimized at 2/(lambda_min_plus + lambda_max)."""
    spectrum = reform.spectrum
    omega_star = 2.0 / (spectrum.lambda_min_plus + spectrum.lambda_max)
    grid = np.linspace(1e-6, 2.0 / spectrum.lambda_max - 1e-6, 1000)
    values = np.array([rho_basic(spectrum, w) for w in grid])
    best = float(grid[int(np.argmin(values))])
    spacing = float(grid[1] - grid[0])
    gap = abs(best - omega_star)
    rho_star = rho_basic(spectrum, omega_star)
    all_above = bool(np.all(values >= rho_star - 1e-12))
    return CheckResult(
        anchor="theorem:optimal-relaxation-argmin",
        passed=gap <= spacing and all_above,
        margin=spacing - gap,
        details={"omega_star": omega_star, "grid_argmin": best},
    )


def check_parallel_rate_bound(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Per-step L2 contraction of the parallel method obeys its factor."""
    if reform.estimation.kind != "exact":
        return _skipped("theorem:parallel-rate-bound", _MC_SKIP_REASON)
    tau = options.tau
    xi = xi_factor(reform.spectrum, tau)
    omega = 1.0 / xi
    cfg = SolverConfig(
        omega=omega, tau=tau, max_iters=options.iterations, master_seed=options.seed
    )
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        options.iterations,
        method="parallel",
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    rho = 1.0 - omega * (2.0 - omega * xi) * reform.spectrum.lambda_min_plus
    l2 = moments.l2_error
    se = moments.l2_se
    gaps = l2[1:] - rho * l2[:-1] - 3.0 * (se[1:] + rho * se[:-1]) - 1e-12
    worst = float(gaps.max())
    return CheckResult(
        anchor="theorem:parallel-rate-bound",
        passed=worst <= 0.0,
        margin=-worst,
        details={"tau": tau, "omega": omega, "rho": rho, "worst_gap": worst},
    )


def check_accelerated_mean(
    problem: Problem, reform: Reformulation, options: ValidationOptions
) -> CheckResult:
    """Accelerated mean errors track the two-term recursion and its envelope.

    Three parts: (a) the Monte Carlo mean error norm matches the exact
    mean recursion within sampling error; (b) for every positive
    eigenvalue the recursion's characteristic roots are complex with
    modulus sqrt((gamma-1)(1 - w lambda_i)) <= 1 - sqrt(mu); (c) each
    transformed mean component stays under its closed-form envelope
    2 (1-sqrt(mu))^k (|C0| + |C1|).
    """
    if reform.estimation.kind != "exact":
        return _skipped("theorem:accelerated-mean-decay", _MC_SKIP_REASON)
    spectrum = reform.spectrum
    omega = 1.0 / spectrum.lambda_max
    gamma, mu = acceleration_parameters(spectrum, omega)
    iters = max(options.iterations, 12)
    cfg = SolverConfig(
        omega=omega, gamma=gamma, mu=mu, max_iters=iters, master_seed=options.seed
    )
    x0 = _validation_start(problem, options)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        iters,
        reform=reform,
        method="accelerated",
        threads=options.threads,
        x0=x0,
    )
    exact = expected_mean_error(reform, omega, iters, x0=x0, method="accelerated", gamma=gamma)
    mc_norm = np.sqrt(np.maximum(moments.mean_error_norm_sq, 0.0))
    noise = np.sqrt(np.maximum(moments.l2_error, 0.0)) / np.sqrt(moments.replications)
    worst_track = float(np.max(np.abs(mc_norm - exact) - 4.0 * noise - 1e-12))

    factor = 1.0 - np.sqrt(mu)
    anchor_x = problem.project(x0)
    w0 = spectrum.U.T @ problem.metric.sqrt @ (x0 - anchor_x)
    worst_root = -np.inf
    worst_envelope = -np.inf
    for lam_i, w0_i in zip(spectrum.lambdas_raw, w0):
        if lam_i <= spectrum.rank_threshold:
            continue
        e_coef = gamma * (1.0 - omega * lam_i)
        f_coef = (1.0 - gamma) * (1.0 - omega * lam_i)
        if e_coef == 0.0 and f_coef == 0.0:
            continue  # component is annihilated after two steps
        disc = e_coef * e_coef + 4.0 * f_coef
        worst_root = max(worst_root, disc)  # must be negative (complex roots)
        modulus = np.sqrt(max(-f_coef, 0.0))
        worst_root = max(worst_root, modulus - factor * (1.0 + 1e-12))
        bound = 2.0 * abs(_recurrence_constants(e_coef, f_coef, w0_i))
        for k in range(iters + 1):
            value = abs(iterate_recurrence(e_coef, f_coef, w0_i, w0_i, k))
            worst_envelope = max(worst_envelope, value - bound * factor**k * (1.0 + 1e-9))
    worst = max(worst_track, worst_root, worst_envelope)
    return CheckResult(
        anchor="theorem:accelerated-mean-decay",
        passed=worst <= 0.0,
        margin=-worst,
        details={
            "omega": omega,
            "gamma": gamma,
            "mu": mu,
            "tracking_gap": worst_track,
            "root_gap": worst_root,
            "envelope_gap": worst_envelope,
        },
    )


def _recurrence_constants(e_coef: float, f_coef: float, w0: float) -> float:
    """|C0| + |C1| of the closed-form recurrence solution started at (w0, w0)."""
    from .analysis import _closed_form

    sol = _closed_form(e_coef, f_coef, w0, w0)
    return abs(sol.c0) + abs(sol.c1)


def check_jensen(problem: Problem, reform: Reformulation, options: ValidationOptions) -> CheckResult:
    """||E e_k||_B^2 never exceeds E||e_k||_B^2 beyond sampling noise."""
    cfg = SolverConfig(omega=options.omega, max_iters=options.iterations, master_seed=options.seed)
    moments = monte_carlo_moments(
        problem,
        reform.dist,
        cfg,
        options.replications,
        options.iterations,
        threads=options.threads,
        x0=_validation_start(problem, options),
    )
    gap = moments.jensen_gap()
    return CheckResult(
        anchor="identity:mean-vs-mean-square",
        passed=gap <= 1e-12,
        margin=-gap,
        details={"worst_gap": gap},
    )


def _validation_start(problem: Problem, options: ValidationOptions) -> np.ndarray:
    rng = stream(options.seed, VALIDATION_STREAM, 99)
    return problem.min_norm_solution + rng.standard_normal(problem.n)


LIBRARY_CHECKS = {
    "lemma:sketch-identities": check_sketch_identities,
    "identity:kaczmarz-expected-operator": check_kaczmarz_expected_operator,
    "theorem:proximal-equivalence": check_prox_equivalence,
    "lemma:woodbury-identity": check_woodbury,
    "lemma:psd-sandwich-identity": check_psd_sandwich,
    "lemma:range-restricted-eigenvalue": check_range_eigen_bound,
    "lemma:two-term-recurrence-closed-form": check_recurrence_closed_form,
    "lemma:quadratic-bounds": check_quadratic_bounds,
    "theorem:equivalent-solution-sets": check_equivalent_solution_sets,
}

PROBLEM_CHECKS = {
    "lemma:spectrum-in-unit-interval": lambda p, r, o: check_spectrum_range(r, o),
    "theorem:exactness-characterization": lambda p, r, o: check_exactness_verdict(r, o),
    "lemma:pathwise-step-identities": check_pathwise_identities,
    "theorem:expected-iterate-recursion": check_expected_iterates,
    "lemma:null-component-anchoring": check_null_component_anchoring,
    "theorem:l2-two-sided-band": check_l2_band,
    "theorem:cesaro-average-bounds": check_cesaro_bounds,
    "theorem:value-decay": check_value_decay,
    "corollary:convergence-window": check_convergence_window,
    "theorem:optimal-relaxation-argmin": lambda p, r, o: check_optimal_relaxation(r, o),
    "theorem:parallel-rate-bound": check_parallel_rate_bound,
    "theorem:accelerated-mean-decay": check_accelerated_mean,
    "identity:mean-vs-mean-square": check_jensen,
}


def run_validation(
    problem: Problem,
    reform: Reformulation,
    options: ValidationOptions,
    checks: list[str] | None = None,
) -> list[CheckResult]:
    """Run the selected checks (all by default) in a fixed order."""
    selected = list(LIBRARY_CHECKS) + list(PROBLEM_CHECKS) if checks is None else list(checks)
    results = []
    for name in selected:
        if name in LIBRARY_CHECKS:
            results.append(LIBRARY_CHECKS[name](options))
        elif name in PROBLEM_CHECKS:
            results.append(PROBLEM_CHECKS[name](problem, reform, options))
        else:
            raise ValueError(f"unknown check {name!r}")
    return results
