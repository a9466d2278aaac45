"""Per-sketch operators, their expectations, and spectral diagnostics.

A sketch S turns the system Ax = b into the compressed system
S'Ax = S'b. Two operators summarize what one sketch sees:

    H = S (S' A B^{-1} A' S)^+ S'        (m by m, symmetric PSD)
    Z = A' H A                           (n by n, symmetric PSD)

B^{-1}Z is the B-orthogonal projector onto range(B^{-1}A'S), which is
why Z B^{-1} Z = Z. The sketch loss

    f_S(x) = (Ax - b)' H (Ax - b) / 2

measures (half) the squared B-distance from x to the compressed
solution set, and its average over sketches drives every solver here.
The spectrum of W = B^{-1/2} E[Z] B^{-1/2} controls all convergence
rates; eigenvalues always lie in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    Problem,
    SpdMatrix,
    _as_matrix,
    _as_vector,
    _readonly,
    _symmetrize,
    pseudoinverse,
    sym_eigendecomposition,
)
from .sketching import DEFAULT_SUPPORT_CAP, SketchDistribution, SketchSample, stream

__all__ = [
    "DegenerateSpectrumError",
    "SketchedSystem",
    "sketched_system",
    "stochastic_value",
    "stochastic_gradient",
    "sketched_projection",
    "EstimationInfo",
    "expected_Z",
    "Spectrum",
    "spectrum_of",
    "Reformulation",
    "build_reformulation",
    "check_exactness",
]

EXPECTATION_STREAM = 101


class DegenerateSpectrumError(ValueError):
    """All eigenvalues of W are numerically zero (the matrix sees nothing)."""


@dataclass(frozen=True, eq=False)
class SketchedSystem:
    """Operators induced by one sketch of a weighted linear system."""

    A: np.ndarray
    b: np.ndarray
    metric: SpdMatrix
    sketch: SketchSample
    H: np.ndarray
    Z: np.ndarray
    compressed_map: np.ndarray  # A'S, cached for gradient evaluations
    gram_pinv: np.ndarray  # (S'A B^{-1} A'S)^+


def sketched_system(A, b, metric: SpdMatrix, sketch: SketchSample) -> SketchedSystem:
    """Assemble H and Z for one sketch.

    ``A`` is m by n, ``metric`` is the n by n SPD weighting, and the
    sketch matrix must have m rows. A sketch with S'A = 0 is legal and
    yields H = 0, Z = 0.
    """
    a = _as_matrix(A, "A")
    rhs = _as_vector(b, a.shape[0], "b")
    s = sketch.matrix
    if s.shape[0] != a.shape[0]:
        raise ValueError(f"sketch has {s.shape[0]} rows, system has {a.shape[0]}")
    if metric.dim != a.shape[1]:
        raise ValueError(f"metric dimension {metric.dim} does not match {a.shape[1]} unknowns")
    compressed = a.T @ s
    gram = _symmetrize(compressed.T @ metric.inv @ compressed)
    gram_pinv = _symmetrize(pseudoinverse(gram))
    h = _symmetrize(s @ gram_pinv @ s.T)
    z = _symmetrize(compressed @ gram_pinv @ compressed.T)
    return SketchedSystem(
        A=a,
        b=rhs,
        metric=metric,
        sketch=sketch,
        H=_readonly(h),
        Z=_readonly(z),
        compressed_map=_readonly(compressed),
        gram_pinv=_readonly(gram_pinv),
    )


def stochastic_value(sys: SketchedSystem, x) -> float:
    """Sketch loss f_S(x) = (Ax - b)' H (Ax - b) / 2, always >= 0."""
    v = _as_vector(x, sys.A.shape[1])
    y = sys.sketch.matrix.T @ (sys.A @ v - sys.b)
    return 0.5 * float(y @ sys.gram_pinv @ y)


def stochastic_gradient(sys: SketchedSystem, x) -> np.ndarray:
    """Gradient of f_S at x in the B-geometry: B^{-1} A' H (Ax - b).

    Equals x minus the B-projection of x onto the compressed solution
    set, and is a fixed point of the sketch Hessian B^{-1}Z.
    """
    v = _as_vector(x, sys.A.shape[1])
    y = sys.sketch.matrix.T @ (sys.A @ v - sys.b)
    return sys.metric.inv @ (sys.compressed_map @ (sys.gram_pinv @ y))


def sketched_projection(sys: SketchedSystem, x) -> np.ndarray:
    """B-norm projection of x onto {x : S'Ax = S'b}."""
    return _as_vector(x, sys.A.shape[1]) - stochastic_gradient(sys, x)


@dataclass(frozen=True)
class EstimationInfo:
    """How an expectation was obtained: exactly or by Monte Carlo."""

    kind: str  # "exact" or "monte-carlo"
    n_samples: int | None = None
    se_norm: float | None = None  # spectral norm of the standard-error matrix

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.n_samples is not None:
            out["n_samples"] = int(self.n_samples)
        if self.se_norm is not None:
            out["se_norm"] = float(self.se_norm)
        return out


def expected_Z(
    A,
    metric: SpdMatrix,
    dist: SketchDistribution,
    *,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    support_cap: int = DEFAULT_SUPPORT_CAP,
):
    """Expectation of Z over the sketch distribution.

    Uses the enumerated support (exact weighted sum) when available,
    otherwise a Monte Carlo mean of ``n_samples`` draws with a reported
    standard error. The result is symmetrized either way.

    Returns
    -------
    (ndarray, EstimationInfo)
    """
    a = _as_matrix(A, "A")
    zeros_rhs = np.zeros(a.shape[0])
    support = dist.support(support_cap)
    if support is not None:
        ez = np.zeros((a.shape[1], a.shape[1]))
        for sample, prob in support:
            ez += prob * sketched_system(a, zeros_rhs, metric, sample).Z
        return _symmetrize(ez), EstimationInfo(kind="exact")
    if n_samples < 2:
        raise ValueError("Monte Carlo estimation needs at least 2 samples")
    if rng is None:
        rng = stream(seed, EXPECTATION_STREAM)
    mean = np.zeros((a.shape[1], a.shape[1]))
    m2 = np.zeros_like(mean)
    for k in range(1, n_samples + 1):
        z = sketched_system(a, zeros_rhs, metric, dist.sample(rng)).Z
        delta = z - mean
        mean += delta / k
        m2 += delta * (z - mean)
    se_matrix = np.sqrt(m2 / (n_samples * (n_samples - 1)))
    se_norm = float(np.linalg.norm(se_matrix, 2))
    return _symmetrize(mean), EstimationInfo(kind="monte-carlo", n_samples=n_samples, se_norm=se_norm)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenstructure of W = B^{-1/2} E[Z] B^{-1/2}.

    ``lambdas`` are clamped to [0, 1] for reporting; the raw values are
    retained. ``lambda_min_plus`` is the smallest eigenvalue above
    ``rank_threshold`` and ``zeta = lambda_max / lambda_min_plus`` is the
    condition number governing every convergence rate.
    """

    W: np.ndarray
    U: np.ndarray
    lambdas: np.ndarray
    lambdas_raw: np.ndarray
    lambda_max: float
    lambda_min_plus: float
    zeta: float
    rank_threshold: float
    estimation: EstimationInfo

    def to_dict(self) -> dict:
        return {
            "lambdas": [float(v) for v in self.lambdas],
            "lambda_max": float(self.lambda_max),
            "lambda_min_plus": float(self.lambda_min_plus),
            "zeta": float(self.zeta),
            "rank_threshold": float(self.rank_threshold),
            "estimation": self.estimation.to_dict(),
        }


def spectrum_of(
    ez,
    metric: SpdMatrix,
    estimation: EstimationInfo | None = None,
    rank_rel_threshold: float = 1e-10,
) -> Spectrum:
    """Eigendecomposition of W with the condition number of the setup.

    Raises :class:`DegenerateSpectrumError` when every eigenvalue falls
    below the rank threshold, which only happens for A = 0.
    """
    estimation = estimation or EstimationInfo(kind="exact")
    w = _symmetrize(metric.inv_sqrt @ _as_matrix(ez, "expected Z") @ metric.inv_sqrt)
    u, lam_raw = sym_eigendecomposition(w, sym_tol=1e-8)
    slack = 1e-8 if estimation.kind == "exact" else 1e-8 + 3.0 * (estimation.se_norm or 0.0)
    if lam_raw[0] > 1.0 + slack or lam_raw[-1] < -slack:
        raise ValueError(
            f"eigenvalues of W must lie in [0, 1], got range "
            f"[{lam_raw[-1]:.3e}, {lam_raw[0]:.3e}]"
        )
    lam = np.clip(lam_raw, 0.0, 1.0)
    lambda_max = float(lam[0])
    threshold = rank_rel_threshold * max(lam_raw[0], 0.0)
    positive = lam_raw > threshold
    if lambda_max <= 0.0 or not positive.any():
        raise DegenerateSpectrumError("all eigenvalues of W are numerically zero")
    lambda_min_plus = float(lam[positive][-1])
    return Spectrum(
        W=_readonly(w),
        U=_readonly(u),
        lambdas=_readonly(lam),
        lambdas_raw=_readonly(lam_raw),
        lambda_max=lambda_max,
        lambda_min_plus=lambda_min_plus,
        zeta=lambda_max / lambda_min_plus,
        rank_threshold=float(threshold),
        estimation=estimation,
    )


class Reformulation:
    """A problem paired with a sketch distribution and its diagnostics.

    Carries E[Z] (exact or Monte Carlo), the spectrum of W, and a cached
    anchor solution x0* (the minimum-B-norm solution) so the averaged
    loss f and its gradient can be evaluated directly:

        f(x) = (x - x0*)' E[Z] (x - x0*) / 2
        grad f(x) = B^{-1} E[Z] (x - x0*)

    Any solution works as the anchor; the cached one is used throughout.
    """

    def __init__(
        self,
        problem: Problem,
        dist: SketchDistribution,
        ez: np.ndarray,
        estimation: EstimationInfo,
        spectrum: Spectrum,
    ):
        self.problem = problem
        self.dist = dist
        self.expected_Z = _readonly(np.array(ez))
        self.estimation = estimation
        self.spectrum = spectrum
        self.x_star = _readonly(np.array(problem.min_norm_solution))
        self._expected_H = None

    def f_value(self, x) -> float:
        e = _as_vector(x, self.problem.n) - self.x_star
        return 0.5 * float(e @ self.expected_Z @ e)

    def grad_f(self, x) -> np.ndarray:
        e = _as_vector(x, self.problem.n) - self.x_star
        return self.problem.metric.inv @ (self.expected_Z @ e)

    def expected_H(self) -> np.ndarray | None:
        """E[H] from the enumerated support; None without finite support."""
        if self._expected_H is None:
            support = self.dist.support()
            if support is None:
                return None
            eh = np.zeros((self.problem.m, self.problem.m))
            for sample, prob in support:
                eh += prob * sketched_system(
                    self.problem.A, self.problem.b, self.problem.metric, sample
                ).H
            self._expected_H = _readonly(_symmetrize(eh))
        return self._expected_H

    def exactness(self, tol: float = 1e-8) -> str:
        return check_exactness(self, tol=tol)

    def diagnostics(self) -> dict:
        spec = self.spectrum
        omega_star = 2.0 / (spec.lambda_min_plus + spec.lambda_max)

        def rho(omega):
            return max(
                (1.0 - omega * spec.lambda_min_plus) ** 2,
                (1.0 - omega * spec.lambda_max) ** 2,
            )

        out = spec.to_dict()
        out["exactness"] = self.exactness()
        out["omega_star"] = omega_star
        out["rho_unit"] = rho(1.0)
        out["rho_inverse_lambda_max"] = rho(1.0 / spec.lambda_max)
        out["rho_omega_star"] = rho(omega_star)
        return out


def build_reformulation(
    problem: Problem,
    dist: SketchDistribution,
    *,
    seed: int = 0,
    n_samples: int = 10_000,
    support_cap: int = DEFAULT_SUPPORT_CAP,
    rank_rel_threshold: float = 1e-10,
) -> Reformulation:
    """Estimate E[Z], decompose W, and bundle the diagnostics."""
    if dist.m != problem.m:
        raise ValueError(f"distribution is over {dist.m}-row sketches, system has {problem.m} rows")
    ez, info = expected_Z(
        problem.A,
        problem.metric,
        dist,
        n_samples=n_samples,
        seed=seed,
        support_cap=support_cap,
    )
    spec = spectrum_of(ez, problem.metric, info, rank_rel_threshold=rank_rel_threshold)
    return Reformulation(problem, dist, ez, info, spec)


def _null_basis_sym(mat: np.ndarray, tol: float) -> tuple[int, np.ndarray]:
    """(rank, null-space basis) of a symmetric PSD matrix."""
    u, lam = sym_eigendecomposition(mat, sym_tol=1e-8)
    scale = max(float(lam[0]), 0.0)
    keep = lam > tol * max(scale, 1e-300)
    rank = int(keep.sum())
    return rank, u[:, rank:]


def check_exactness(reform: Reformulation, tol: float = 1e-8) -> str:
    """Decide whether minimizing f recovers exactly the solutions of Ax = b.

    The criterion is null(E[Z]) = null(A), tested by comparing ranks and
    verifying that each numerical null-space basis vector of one matrix
    is annihilated by the other. Needs an exactly known E[Z]; with a
    Monte Carlo estimate the verdict is "undecidable".

    Returns one of "exact", "not-exact", "undecidable".
    """
    if reform.estimation.kind != "exact":
        return "undecidable"
    a = reform.problem.A
    ez = reform.expected_Z
    sv = np.linalg.svd(a, compute_uv=False)
    rank_a = int((sv > tol * sv[0]).sum()) if sv[0] > 0 else 0
    _, _, vt = np.linalg.svd(a)
    null_a = vt[rank_a:].T
    rank_z, null_z = _null_basis_sym(ez, tol)
    if rank_a != rank_z:
        return "not-exact"
    scale_z = max(float(np.linalg.norm(ez, 2)), 1e-300)
    scale_a = max(float(np.linalg.norm(a, 2)), 1e-300)
    if null_a.shape[1] and float(np.abs(ez @ null_a).max()) > tol * scale_z:
        return "not-exact"
    if null_z.shape[1] and float(np.abs(a @ null_z).max()) > tol * scale_a:
        return "not-exact"
    return "exact"
