"""Dense linear-algebra substrate.

Pseudoinverses, symmetric eigendecompositions, B-weighted geometry
(inner products, norms, matrix square roots) and affine projections.
Everything here is dense and aimed at desk-scale systems (dimensions
up to a few thousand); all returned arrays are read-only so instances
can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "InconsistentSystemError",
    "pseudoinverse",
    "sym_eigendecomposition",
    "SpdMatrix",
    "quad_form",
    "b_norm",
    "b_pseudoinverse",
    "AffineSystem",
    "check_consistency",
    "project_affine",
    "Problem",
]


class InconsistentSystemError(ValueError):
    """Raised when a linear system Ax = b has no solution."""

    def __init__(self, residual: float, tol: float):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(
            f"system is inconsistent: best-approximation residual "
            f"{self.residual:.6e} exceeds tolerance {self.tol:.6e}"
        )


def _as_matrix(mat, name: str = "matrix") -> np.ndarray:
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_vector(vec, length: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(vec, dtype=float).reshape(-1)
    if length is not None and v.size != length:
        raise ValueError(f"{name} has length {v.size}, expected {length}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def pseudoinverse(mat, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rel_tol * sigma_max`` are treated as zero.
    The default threshold is ``eps * max(rows, cols)``, the usual
    numerically robust rank cutoff.

    Parameters
    ----------
    mat : array_like, shape (m, n)
    rel_tol : float, optional
        Relative singular-value cutoff in (0, 1).

    Returns
    -------
    ndarray, shape (n, m)
    """
    a = _as_matrix(mat)
    if rel_tol is None:
        rel_tol = np.finfo(float).eps * max(a.shape)
    elif not (0.0 < rel_tol < 1.0):
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = rel_tol * s[0] if s.size else 0.0
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv_s) @ u.T


def sym_eigendecomposition(mat, sym_tol: float = 1e-10):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(U, lambdas)`` with orthonormal columns in ``U`` and
    ``U @ diag(lambdas) @ U.T`` reconstructing the input. Raises if the
    input is asymmetric beyond ``sym_tol`` (relative to the largest
    entry).
    """
    a = _as_matrix(mat)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    lam, u = np.linalg.eigh(_symmetrize(a))
    return u[:, ::-1].copy(), lam[::-1].copy()


class SpdMatrix:
    """A symmetric positive definite matrix with cached factorizations.

    Holds the matrix together with its symmetric square root, inverse
    square root and inverse, all computed once at construction from a
    symmetric eigendecomposition. Eigenvalues at or below
    ``1e-12 * lambda_max`` are an error, not clamped: the weighting
    matrix must be strictly positive definite.
    """

    def __init__(self, mat, sym_tol: float = 1e-12):
        a = _as_matrix(mat, "spd matrix")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"spd matrix must be square, got shape {a.shape}")
        scale = float(np.abs(a).max())
        if scale == 0.0:
            raise ValueError("spd matrix is zero")
        if float(np.abs(a - a.T).max()) > sym_tol * scale:
            raise ValueError("spd matrix is not symmetric within tolerance")
        a = _symmetrize(a)
        lam, u = np.linalg.eigh(a)
        if lam[-1] <= 0.0 or lam[0] <= 1e-12 * lam[-1]:
            raise ValueError(
                f"matrix is not positive definite: eigenvalue range "
                f"[{lam[0]:.3e}, {lam[-1]:.3e}]"
            )
        self.dim = a.shape[0]
        self.mat = _readonly(a)
        self.sqrt = _readonly(_symmetrize((u * np.sqrt(lam)) @ u.T))
        self.inv_sqrt = _readonly(_symmetrize((u / np.sqrt(lam)) @ u.T))
        self.inv = _readonly(_symmetrize((u / lam) @ u.T))
        self.eigenvalues = _readonly(lam[::-1].copy())

    @classmethod
    def identity(cls, n: int) -> "SpdMatrix":
        return cls(np.eye(n))

    @classmethod
    def from_diagonal(cls, values) -> "SpdMatrix":
        v = _as_vector(values, name="diagonal")
        return cls(np.diag(v))

    def inner(self, x, y) -> float:
        x = _as_vector(x, self.dim)
        y = _as_vector(y, self.dim)
        return float(x @ self.mat @ y)

    def norm_sq(self, x) -> float:
        x = _as_vector(x, self.dim)
        return float(x @ self.mat @ x)

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.norm_sq(x), 0.0)))

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def quad_form(mat, x) -> float:
    """Evaluate the quadratic form x' M x for positive semidefinite M.

    For merely semidefinite M the square root of this quantity is only a
    pseudonorm, so it is exposed as a raw quadratic form instead.
    """
    a = _as_matrix(mat)
    v = _as_vector(x, a.shape[1])
    return float(v @ a @ v)


def b_norm(x, metric: SpdMatrix) -> float:
    """Weighted norm sqrt(x' B x) for the SPD weighting matrix B."""
    return metric.norm(x)


def b_pseudoinverse(mat, metric: SpdMatrix) -> np.ndarray:
    """Weighted pseudoinverse B^{-1} M' (M B^{-1} M')^+.

    Reduces to the ordinary Moore-Penrose pseudoinverse when the metric
    is the identity. ``mat`` must have ``metric.dim`` columns.
    """
    a = _as_matrix(mat)
    if a.shape[1] != metric.dim:
        raise ValueError(
            f"matrix has {a.shape[1]} columns, metric has dimension {metric.dim}"
        )
    core = a @ metric.inv @ a.T
    return metric.inv @ a.T @ pseudoinverse(_symmetrize(core))


class AffineSystem:
    """The affine solution set {x : Ax = b} of a linear system."""

    def __init__(self, mat, rhs):
        self.A = _readonly(_as_matrix(mat, "A"))
        self.b = _readonly(_as_vector(rhs, self.A.shape[0], "b"))
        self.m, self.n = self.A.shape

    def residual(self, x) -> float:
        return float(np.linalg.norm(self.A @ _as_vector(x, self.n) - self.b))

    def __repr__(self):
        return f"AffineSystem(m={self.m}, n={self.n})"


def check_consistency(system: AffineSystem, metric: SpdMatrix, tol: float = 1e-10) -> bool:
    """True when the least-norm candidate solves the system.

    Tests whether ``A (A^+_B b) = b`` up to ``tol * (1 + ||b||)``, where
    ``A^+_B b`` is the minimum-B-norm least-squares point.
    """
    x_min = b_pseudoinverse(system.A, metric) @ system.b
    residual = float(np.linalg.norm(system.A @ x_min - system.b))
    return residual <= tol * (1.0 + float(np.linalg.norm(system.b)))


def project_affine(x, system: AffineSystem, metric: SpdMatrix, tol: float = 1e-10) -> np.ndarray:
    """Project x onto {x : Ax = b} in the B-norm.

    Returns ``x - A^+_B (Ax - b)``, the unique B-norm minimizer over the
    solution set. Raises :class:`InconsistentSystemError` when the system
    has no solution at tolerance ``tol``.
    """
    v = _as_vector(x, system.n)
    dagger = b_pseudoinverse(system.A, metric)
    out = v - dagger @ (system.A @ v - system.b)
    residual = system.residual(out)
    if residual > tol * (1.0 + float(np.linalg.norm(system.b))):
        raise InconsistentSystemError(residual, tol * (1.0 + float(np.linalg.norm(system.b))))
    return out


class Problem:
    """A consistent linear system Ax = b together with an SPD weighting B.

    Consistency is certified at construction; the certified residual is
    kept on the instance. The weighted pseudoinverse of A is cached so
    projections onto the solution set are cheap to repeat.
    """

    def __init__(self, mat, rhs, metric: SpdMatrix | None = None, consistency_tol: float = 1e-10):
        self.system = AffineSystem(mat, rhs)
        self.A = self.system.A
        self.b = self.system.b
        self.m, self.n = self.system.m, self.system.n
        self.metric = SpdMatrix.identity(self.n) if metric is None else metric
        if self.metric.dim != self.n:
            raise ValueError(
                f"metric dimension {self.metric.dim} does not match {self.n} unknowns"
            )
        self._dagger = _readonly(b_pseudoinverse(self.A, self.metric))
        x_min = self._dagger @ self.b
        self.consistency_residual = float(np.linalg.norm(self.A @ x_min - self.b))
        self._consistency_bound = consistency_tol * (1.0 + float(np.linalg.norm(self.b)))
        if self.consistency_residual > self._consistency_bound:
            raise InconsistentSystemError(self.consistency_residual, self._consistency_bound)
        self.min_norm_solution = _readonly(x_min)

    def project(self, x) -> np.ndarray:
        """B-norm projection of x onto the solution set."""
        v = _as_vector(x, self.n)
        return v - self._dagger @ (self.A @ v - self.b)

    def range_projector_apply(self, d) -> np.ndarray:
        """B-orthogonal projection of d onto range(B^{-1} A')."""
        v = _as_vector(d, self.n)
        return self._dagger @ (self.A @ v)

    def __repr__(self):
        return f"Problem(m={self.m}, n={self.n})"
