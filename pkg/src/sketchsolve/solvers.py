"""Randomized projection solvers for consistent weighted linear systems.

Three iterative methods built on the same sketched step

    phi(x, S) = x - omega * B^{-1} A'S (S'A B^{-1} A'S)^+ S'(Ax - b),

which relaxes the B-projection of x onto the compressed set
{x : S'Ax = S'b}:

* the basic method draws one fresh sketch per iteration,
* the parallel method averages tau independent steps from the same
  point (a minibatch), and
* the accelerated method combines steps from the last two iterates
  with an affine weight gamma, giving square-root dependence on the
  condition number for the right (gamma, omega).

A proximal step is included as an equivalence oracle: for
0 < omega <= 1 the sketched step equals the minimizer of
f_S(z) + (1-omega)/(2 omega) ||z - x||_B^2.

All trajectories are reproducible: each (replication, worker) pair owns
a keyed counter-based stream, and results do not depend on how many
threads execute the replications.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .linalg import Problem, _as_vector, _readonly, _symmetrize, pseudoinverse
from .reformulation import Spectrum
from .sketching import Coordinate, SketchDistribution, SketchSample, stream

__all__ = [
    "TRAJECTORY_STREAM",
    "SolverConfig",
    "IterationTrace",
    "Workspace",
    "basic_step",
    "parallel_step",
    "prox_step",
    "run_basic",
    "run_parallel",
    "run_accelerated",
    "stepsize_policy",
    "acceleration_parameters",
    "pathwise_residuals",
]

TRAJECTORY_STREAM = 202


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by the three solvers.

    ``omega`` is the relaxation parameter (stepsize), ``tau`` the number
    of averaged sketches per iteration (parallel method only), and
    ``gamma``/``mu`` the acceleration parameters (``gamma`` wins if both
    are given, otherwise gamma = 2/(1+sqrt(mu))). ``master_seed`` is
    mandatory; no wall-clock seeding happens anywhere.
    """

    omega: float
    max_iters: int
    master_seed: int
    tau: int = 1
    gamma: float | None = None
    mu: float | None = None
    record: tuple[str, ...] = ("error_sq",)
    tol: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.omega):
            raise ValueError("omega must be finite")
        if int(self.tau) < 1:
            raise ValueError("tau must be at least 1")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be at least 1")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "max_iters", int(self.max_iters))
        object.__setattr__(self, "master_seed", int(self.master_seed))


@dataclass(eq=False)
class IterationTrace:
    """Recorded error sequences of one solver trajectory.

    ``error_sq[k]`` is ||x_k - x*||_B^2 against the anchor
    x* = proj(x_0), the B-projection of the start onto the solution
    set. For the basic method, ``sketch_loss[k]`` is f_{S_k}(x_k) and
    ``step_sq[k]`` is ||x_{k+1} - x_k||_B^2, both computed from
    independent quantities so the per-step identities can be audited.
    """

    method: str
    omega: float
    anchor: np.ndarray
    error_sq: np.ndarray
    tau: int = 1
    gamma: float | None = None
    sketch_loss: np.ndarray | None = None
    step_sq: np.ndarray | None = None
    iterates: np.ndarray | None = None
    seed_key: tuple | None = None
    elapsed: float = 0.0
    converged: bool | None = None

    @property
    def final_error(self) -> float:
        return float(np.sqrt(max(self.error_sq[-1], 0.0)))


class Workspace:
    """Per-problem caches shared by all steps of a run.

    Stores B^{-1}A' and the diagonal of A B^{-1} A' so coordinate
    (single-row) sketches take a closed-form O(m + n) step.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self.A = problem.A
        self.b = problem.b
        self.metric = problem.metric
        self.binv_at = _readonly(problem.metric.inv @ problem.A.T)
        self.row_gram = _readonly(np.einsum("ij,ji->i", problem.A, self.binv_at))

    def coordinate_step(self, x: np.ndarray, row: int, omega: float):
        """One sketched step for S = e_row. Returns (x_next, sketch_loss)."""
        g = self.row_gram[row]
        y = float(self.A[row] @ x - self.b[row])
        if g <= 0.0:
            return x.copy(), 0.0
        coef = y / g
        return x - (omega * coef) * self.binv_at[:, row], 0.5 * y * coef

    def general_step(self, x: np.ndarray, sketch: SketchSample, omega: float):
        """One sketched step for an arbitrary sketch. Returns (x_next, loss)."""
        s = sketch.matrix
        v = self.binv_at @ s
        gram = _symmetrize(s.T @ (self.A @ v))
        gram_pinv = pseudoinverse(gram)
        y = s.T @ (self.A @ x - self.b)
        u = gram_pinv @ y
        return x - omega * (v @ u), 0.5 * float(y @ u)

    def step(self, x: np.ndarray, sketch: SketchSample, omega: float):
        if sketch.cols is not None and sketch.q == 1 and (sketch.signs in (None, (1,))):
            return self.coordinate_step(x, sketch.cols[0], omega)
        return self.general_step(x, sketch, omega)


def basic_step(problem: Problem, x, sketch: SketchSample, omega: float) -> np.ndarray:
    """One step of the basic method from x with the given sketch."""
    ws = Workspace(problem)
    x_next, _ = ws.step(_as_vector(x, problem.n), sketch, float(omega))
    return x_next


def parallel_step(problem: Problem, x, sketches, omega: float) -> np.ndarray:
    """Average of independent sketched steps taken from the same x."""
    if len(sketches) < 1:
        raise ValueError("need at least one sketch")
    ws = Workspace(problem)
    v = _as_vector(x, problem.n)
    acc = np.zeros(problem.n)
    for sketch in sketches:
        x_i, _ = ws.step(v, sketch, float(omega))
        acc += x_i
    return acc / len(sketches)


def prox_step(problem: Problem, x, sketch: SketchSample, omega: float) -> np.ndarray:
    """Proximal form of the sketched step, valid for 0 < omega <= 1.

    Solves the regularized normal equations
    (mu B + A'HA) z = A'H b + mu B x with mu = (1 - omega)/omega by a
    dense factorization; at omega = 1 the regularization vanishes and
    the step returns the projection onto the compressed solution set.
    """
    omega = float(omega)
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"prox step requires 0 < omega <= 1, got {omega}")
    v = _as_vector(x, problem.n)
    ws = Workspace(problem)
    if omega == 1.0:
        x_next, _ = ws.step(v, sketch, 1.0)
        return x_next
    s = sketch.matrix
    c = problem.A.T @ s
    gram = _symmetrize(s.T @ (problem.A @ (problem.metric.inv @ c)))
    gram_pinv = pseudoinverse(gram)
    z_op = c @ gram_pinv @ c.T
    mu = (1.0 - omega) / omega
    lhs = z_op + mu * problem.metric.mat
    rhs = c @ (gram_pinv @ (s.T @ problem.b)) + mu * (problem.metric.mat @ v)
    return np.linalg.solve(lhs, rhs)


def _trajectory_generators(config: SolverConfig, replication: int, workers: int):
    return [
        stream(config.master_seed, TRAJECTORY_STREAM, replication, i) for i in range(workers)
    ]


def _start_arrays(problem: Problem, x0):
    x = np.zeros(problem.n) if x0 is None else _as_vector(x0, problem.n).copy()
    anchor = problem.project(x)
    return x, anchor


def run_basic(
    problem: Problem,
    dist: SketchDistribution,
    config: SolverConfig,
    x0=None,
    replication: int = 0,
    samples: list[SketchSample] | None = None,
) -> IterationTrace:
    """Run the basic method for ``config.max_iters`` iterations.

    Draws one fresh sketch per iteration from the stream keyed by
    (master_seed, replication, worker 0), or consumes ``samples`` when
    given. Exhausting the budget without reaching ``config.tol`` flags
    the trace as not converged; it is not an error.
    """
    t0 = time.perf_counter()
    ws = Workspace(problem)
    x, anchor = _start_arrays(problem, x0)
    k_max = config.max_iters
    keep_iterates = "iterates" in config.record

    rows = None
    if samples is None:
        gen = _trajectory_generators(config, replication, 1)[0]
        if isinstance(dist, Coordinate):
            rows = dist.sample_indices(gen, k_max)
    elif len(samples) < k_max:
        raise ValueError(f"need {k_max} samples, got {len(samples)}")

    error_sq = np.empty(k_max + 1)
    sketch_loss = np.empty(k_max)
    step_sq = np.empty(k_max)
    iterates = np.empty((k_max + 1, problem.n)) if keep_iterates else None

    error_sq[0] = ws.metric.norm_sq(x - anchor)
    if keep_iterates:
        iterates[0] = x
    converged = None if config.tol is None else False
    steps_done = 0
    for k in range(k_max):
        if config.tol is not None and np.sqrt(max(error_sq[k], 0.0)) <= config.tol:
            converged = True
            break
        if samples is not None:
            x_next, loss = ws.step(x, samples[k], config.omega)
        elif rows is not None:
            x_next, loss = ws.coordinate_step(x, int(rows[k]), config.omega)
        else:
            x_next, loss = ws.step(x, dist.sample(gen), config.omega)
        sketch_loss[k] = loss
        step_sq[k] = ws.metric.norm_sq(x_next - x)
        x = x_next
        error_sq[k + 1] = ws.metric.norm_sq(x - anchor)
        if keep_iterates:
            iterates[k + 1] = x
        steps_done = k + 1
    if config.tol is not None and not converged:
        converged = bool(np.sqrt(max(error_sq[steps_done], 0.0)) <= config.tol)

    n_pts = steps_done + 1
    return IterationTrace(
        method="basic",
        omega=config.omega,
        anchor=anchor,
        error_sq=error_sq[:n_pts],
        sketch_loss=sketch_loss[:steps_done],
        step_sq=step_sq[:steps_done],
        iterates=iterates[:n_pts] if keep_iterates else None,
        seed_key=(config.master_seed, TRAJECTORY_STREAM, replication, 0),
        elapsed=time.perf_counter() - t0,
        converged=converged,
    )


def run_parallel(
    problem: Problem,
    dist: SketchDistribution,
    config: SolverConfig,
    x0=None,
    replication: int = 0,
    samples: list[list[SketchSample]] | None = None,
) -> IterationTrace:
    """Run the parallel (minibatch) method with ``config.tau`` workers.

    Worker i draws from its own stream keyed by (master_seed,
    replication, i), so the trace is bitwise identical for a fixed
    (seed, tau) no matter how the workers are scheduled. With tau = 1
    the trajectory coincides with the basic method under the same seed.
    """
    t0 = time.perf_counter()
    ws = Workspace(problem)
    x, anchor = _start_arrays(problem, x0)
    k_max = config.max_iters
    tau = config.tau
    keep_iterates = "iterates" in config.record

    rows = None
    gens = None
    if samples is None:
        gens = _trajectory_generators(config, replication, tau)
        if isinstance(dist, Coordinate):
            rows = np.stack([dist.sample_indices(g, k_max) for g in gens])
    elif len(samples) < k_max:
        raise ValueError(f"need {k_max} sample groups, got {len(samples)}")

    error_sq = np.empty(k_max + 1)
    iterates = np.empty((k_max + 1, problem.n)) if keep_iterates else None
    error_sq[0] = ws.metric.norm_sq(x - anchor)
    if keep_iterates:
        iterates[0] = x
    converged = None if config.tol is None else False
    steps_done = 0
    for k in range(k_max):
        if config.tol is not None and np.sqrt(max(error_sq[k], 0.0)) <= config.tol:
            converged = True
            break
        if rows is not None:
            cols = rows[:, k]
            y = problem.A[cols] @ x - problem.b[cols]
            g = ws.row_gram[cols]
            coef = np.where(g > 0.0, y / np.where(g > 0.0, g, 1.0), 0.0)
            x = x - ws.binv_at[:, cols] @ (coef * (config.omega / tau))
        else:
            group = samples[k] if samples is not None else [dist.sample(g) for g in gens]
            if len(group) != tau:
                raise ValueError(f"iteration {k}: expected {tau} sketches, got {len(group)}")
            acc = np.zeros(problem.n)
            for sketch in group:
                x_i, _ = ws.step(x, sketch, config.omega)
                acc += x_i
            x = acc / tau
        error_sq[k + 1] = ws.metric.norm_sq(x - anchor)
        if keep_iterates:
            iterates[k + 1] = x
        steps_done = k + 1
    if config.tol is not None and not converged:
        converged = bool(np.sqrt(max(error_sq[steps_done], 0.0)) <= config.tol)

    n_pts = steps_done + 1
    return IterationTrace(
        method="parallel",
        omega=config.omega,
        tau=tau,
        anchor=anchor,
        error_sq=error_sq[:n_pts],
        iterates=iterates[:n_pts] if keep_iterates else None,
        seed_key=(config.master_seed, TRAJECTORY_STREAM, replication),
        elapsed=time.perf_counter() - t0,
        converged=converged,
    )


def run_accelerated(
    problem: Problem,
    dist: SketchDistribution,
    config: SolverConfig,
    x0=None,
    x1=None,
    replication: int = 0,
    samples: list[SketchSample] | None = None,
) -> IterationTrace:
    """Run the accelerated method.

    Keeps the previous sketched step and forms
    x_{k+1} = gamma * phi(x_k, S_k) + (1 - gamma) * phi(x_{k-1}, S_{k-1}).
    The starts must satisfy x_0 - x_1 in range(B^{-1}A'); by default
    x_1 = x_0, which satisfies it trivially. ``config.gamma`` is used
    directly when set, otherwise gamma = 2/(1 + sqrt(config.mu)).
    """
    t0 = time.perf_counter()
    ws = Workspace(problem)
    x_prev, anchor = _start_arrays(problem, x0)
    x_cur = x_prev.copy() if x1 is None else _as_vector(x1, problem.n).copy()

    d = x_prev - x_cur
    d_norm = ws.metric.norm(d)
    if d_norm > 0.0:
        residual = ws.metric.norm(d - problem.range_projector_apply(d))
        if residual > 1e-9 * (1.0 + d_norm):
            raise ValueError(
                "x0 - x1 must lie in range(B^{-1}A'); projection residual "
                f"{residual:.3e}"
            )

    if config.gamma is not None:
        gamma = float(config.gamma)
    elif config.mu is not None:
        mu = float(config.mu)
        if not 0.0 < mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {mu}")
        gamma = 2.0 / (1.0 + np.sqrt(mu))
    else:
        raise ValueError("accelerated method needs gamma or mu")

    k_max = config.max_iters
    keep_iterates = "iterates" in config.record
    rows = None
    gen = None
    if samples is None:
        gen = _trajectory_generators(config, replication, 1)[0]
        if isinstance(dist, Coordinate):
            rows = dist.sample_indices(gen, k_max)
    elif len(samples) < k_max:
        raise ValueError(f"need {k_max} samples, got {len(samples)}")

    def draw_step(x, k):
        if samples is not None:
            return ws.step(x, samples[k], config.omega)[0]
        if rows is not None:
            return ws.coordinate_step(x, int(rows[k]), config.omega)[0]
        return ws.step(x, dist.sample(gen), config.omega)[0]

    error_sq = np.empty(k_max + 1)
    iterates = np.empty((k_max + 1, problem.n)) if keep_iterates else None
    error_sq[0] = ws.metric.norm_sq(x_prev - anchor)
    error_sq[1] = ws.metric.norm_sq(x_cur - anchor)
    if keep_iterates:
        iterates[0] = x_prev
        iterates[1] = x_cur

    z_prev = draw_step(x_prev, 0)
    for k in range(1, k_max):
        z_cur = draw_step(x_cur, k)
        x_next = gamma * z_cur + (1.0 - gamma) * z_prev
        z_prev = z_cur
        x_cur = x_next
        error_sq[k + 1] = ws.metric.norm_sq(x_cur - anchor)
        if keep_iterates:
            iterates[k + 1] = x_cur

    return IterationTrace(
        method="accelerated",
        omega=config.omega,
        gamma=gamma,
        anchor=anchor,
        error_sq=error_sq,
        iterates=iterates,
        seed_key=(config.master_seed, TRAJECTORY_STREAM, replication, 0),
        elapsed=time.perf_counter() - t0,
        converged=None,
    )


def stepsize_policy(spectrum: Spectrum, kind: str) -> float:
    """Relaxation parameter for a named policy.

    "unit" gives 1, "inverse-lambda-max" gives 1/lambda_max, and
    "optimal" gives 2/(lambda_min_plus + lambda_max), the minimizer of
    the mean-error contraction factor.
    """
    if kind == "unit":
        return 1.0
    if kind == "inverse-lambda-max":
        return 1.0 / spectrum.lambda_max
    if kind == "optimal":
        return 2.0 / (spectrum.lambda_min_plus + spectrum.lambda_max)
    raise ValueError(f"unknown stepsize policy {kind!r}")


def acceleration_parameters(spectrum: Spectrum, omega: float, safety: float = 0.99):
    """Theory-backed (gamma, mu) for the accelerated method.

    mu = safety * omega * lambda_min_plus keeps mu strictly inside the
    admissible interval (0, omega * lambda_min_plus).
    """
    if not 0.0 < safety < 1.0:
        raise ValueError("safety must lie in (0, 1)")
    mu = safety * float(omega) * spectrum.lambda_min_plus
    gamma = 2.0 / (1.0 + np.sqrt(mu))
    return gamma, mu


def pathwise_residuals(trace: IterationTrace) -> tuple[float, float]:
    """Worst relative residuals of the two per-step identities.

    For every recorded basic-method step,
    ||x_{k+1}-x*||_B^2 = ||x_k-x*||_B^2 - 2 w(2-w) f_{S_k}(x_k) and
    ||x_{k+1}-x_k||_B^2 = 2 w^2 f_{S_k}(x_k) must hold exactly up to
    roundoff. Returns (decrement residual, step-length residual).
    """
    if trace.sketch_loss is None or trace.step_sq is None:
        raise ValueError("trace does not carry per-step sketch losses")
    w = trace.omega
    n_steps = len(trace.sketch_loss)
    worst_decrement = 0.0
    worst_step = 0.0
    # once the error has fallen ~8 orders below its running peak, the
    # residual A x - b is pure cancellation dust; floor the comparison
    # scale there so the check measures algebra, not roundoff
    floor = np.sqrt(np.finfo(float).eps) * max(float(trace.error_sq.max()), 1e-300)
    for k in range(n_steps):
        err_scale = max(trace.error_sq[k], abs(trace.error_sq[k + 1]), floor)
        predicted = trace.error_sq[k] - 2.0 * w * (2.0 - w) * trace.sketch_loss[k]
        worst_decrement = max(worst_decrement, abs(trace.error_sq[k + 1] - predicted) / err_scale)
        predicted_step = 2.0 * w * w * trace.sketch_loss[k]
        scale = max(trace.step_sq[k], predicted_step, floor)
        worst_step = max(worst_step, abs(trace.step_sq[k] - predicted_step) / scale)
    return worst_decrement, worst_step
