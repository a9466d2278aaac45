"""Standalone numerical oracles for identities the solvers rely on.

These live apart from the solver code on purpose: nothing in the main
path imports them, so they can be used by the test suite and the
validation report to audit the algebra independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SpdMatrix, _as_matrix, _symmetrize, pseudoinverse, sym_eigendecomposition

__all__ = [
    "SmwInstance",
    "smw_inverse",
    "random_smw_instance",
    "psd_sandwich_residual",
    "range_restricted_eigen_bound",
]


@dataclass(frozen=True, eq=False)
class SmwInstance:
    """Instance (M, C, N, D) of the low-rank update inverse identity."""

    M: np.ndarray
    C: np.ndarray
    N: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.M, "M")
        c = _as_matrix(self.C, "C")
        n = _as_matrix(self.N, "N")
        d = _as_matrix(self.D, "D")
        if m.shape[0] != m.shape[1] or n.shape[0] != n.shape[1]:
            raise ValueError("M and N must be square")
        if c.shape != (m.shape[0], n.shape[0]) or d.shape != (n.shape[0], m.shape[0]):
            raise ValueError("C must be n-by-q and D q-by-n")
        for name, mat in (("M", m), ("N", n)):
            if np.linalg.cond(mat) >= 1e12:
                raise ValueError(f"{name} is too ill-conditioned (cond >= 1e12)")


def smw_inverse(inst: SmwInstance) -> np.ndarray:
    """Inverse of M + C N D through the Sherman-Morrison-Woodbury form.

    Returns M^{-1} - M^{-1}C (N^{-1} + D M^{-1} C)^{-1} D M^{-1}. A
    singular inner matrix N^{-1} + D M^{-1} C raises LinAlgError.
    """
    m_inv = np.linalg.inv(inst.M)
    n_inv = np.linalg.inv(inst.N)
    inner = n_inv + inst.D @ m_inv @ inst.C
    inner_inv = np.linalg.inv(inner)
    return m_inv - m_inv @ inst.C @ inner_inv @ inst.D @ m_inv


def random_smw_instance(rng, max_cond: float = 1e3) -> SmwInstance:
    """Well-conditioned random instance for auditing the update identity.

    Rejects draws where the inner matrix N^{-1} + D M^{-1} C or the
    updated matrix M + CND exceed ``max_cond``; near-singular inner
    matrices make the identity numerically vacuous.
    """
    while True:
        n, q = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        m = rng.standard_normal((n, n)) + 3.0 * np.eye(n)
        c = rng.standard_normal((n, q))
        nn = rng.standard_normal((q, q)) + 3.0 * np.eye(q)
        d = rng.standard_normal((q, n))
        inner = np.linalg.inv(nn) + d @ np.linalg.inv(m) @ c
        if np.linalg.cond(inner) <= max_cond and np.linalg.cond(m + c @ nn @ d) <= max_cond:
            return SmwInstance(M=m, C=c, N=nn, D=d)


def psd_sandwich_residual(mat, mu: float) -> float:
    """Residual of the pseudoinverse sandwich identity.

    For symmetric PSD M and mu > 0,

        P^{1/2} (I + (1/mu) P^{1/2} M P^{1/2})^{-1} P^{1/2}
            = mu/(1+mu) * P,        P = M^+.

    The middle factor behaves as if P^{1/2} M P^{1/2} were the identity
    even when M is rank deficient. Returns the max-abs difference of
    the two sides.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    a = _symmetrize(_as_matrix(mat, "M"))
    u, lam = sym_eigendecomposition(a)
    cutoff = 1e-12 * max(abs(lam[0]), 1.0)
    inv_lam = np.where(np.abs(lam) > cutoff, 1.0 / np.where(np.abs(lam) > cutoff, lam, 1.0), 0.0)
    p = _symmetrize((u * inv_lam) @ u.T)
    p_half = _symmetrize((u * np.sqrt(np.maximum(inv_lam, 0.0))) @ u.T)
    n = a.shape[0]
    lhs = p_half @ np.linalg.inv(np.eye(n) + (1.0 / mu) * (p_half @ a @ p_half)) @ p_half
    rhs = (mu / (1.0 + mu)) * p
    return float(np.abs(lhs - rhs).max())


def range_restricted_eigen_bound(ez, metric: SpdMatrix, x, lambda_min_plus: float | None = None) -> bool:
    """Check x'Wx >= lambda_min_plus(W) x'x - 1e-9 on range(B^{-1/2}A').

    W = B^{-1/2} E[Z] B^{-1/2}; the bound holds for every x in the
    stated range under exactness, even though W may be singular. The
    caller supplies x already in that range (for example
    x = B^{-1/2} A' w for a random w).
    """
    w = _symmetrize(metric.inv_sqrt @ _as_matrix(ez, "expected Z") @ metric.inv_sqrt)
    v = np.asarray(x, dtype=float).reshape(-1)
    if lambda_min_plus is None:
        _, lam = sym_eigendecomposition(w)
        positive = lam[lam > 1e-10 * max(lam[0], 1e-300)]
        if positive.size == 0:
            raise ValueError("W has no nonzero eigenvalues")
        lambda_min_plus = float(positive[-1])
    return float(v @ w @ v) >= lambda_min_plus * float(v @ v) - 1e-9
