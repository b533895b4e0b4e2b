"""Dense solvers for standard and generalized continuous Lyapunov equations.

Standard:     A X + X A^T + Q = 0
Generalized:  A X + X A^T + sum_i N_i X N_i^T + Q = 0

The standard equation is solved by real Schur reduction followed by the
quasi-triangular Sylvester back-substitution (LAPACK ``trsyl``).  The
generalized equation is solved by the stationary iteration

    X_{j+1} = L_A^{-1}(Q + sum_i N_i X_j N_i^T),   X_0 = 0,

which reuses one Schur factorization of A for every sweep.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

__all__ = [
    "Method",
    "LyapunovSolution",
    "LyapunovError",
    "NotStable",
    "NoConvergence",
    "SolverBreakdown",
    "STABILITY_MARGIN",
    "KRONECKER_MAX_DIM",
    "solve_standard",
    "solve_generalized",
    "solve_kronecker",
    "lyapunov_residual",
    "spectral_abscissa",
]

STABILITY_MARGIN = 1e-12
KRONECKER_MAX_DIM = 30


class Method(str, enum.Enum):
    SCHUR = "SchurDirect"
    STATIONARY = "StationaryIteration"
    KRONECKER = "KroneckerDirect"


class LyapunovError(RuntimeError):
    pass


class NotStable(LyapunovError):
    def __init__(self, abscissa: float):
        super().__init__(f"A is not stable: max Re(eig(A)) = {abscissa:.3e}")
        self.abscissa = abscissa


class NoConvergence(LyapunovError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"stationary iteration did not converge in {iterations} sweeps "
            f"(relative residual {residual:.3e}); the contraction condition likely fails"
        )
        self.iterations = iterations
        self.residual = residual


class SolverBreakdown(LyapunovError):
    pass


@dataclass(frozen=True)
class LyapunovSolution:
    X: np.ndarray
    rel_residual: float
    iterations: int
    method: Method


def spectral_abscissa(A: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(A).real))


def _check_stable(A: np.ndarray) -> None:
    alpha = spectral_abscissa(A)
    if alpha >= -STABILITY_MARGIN:
        raise NotStable(alpha)


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def _as_square(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    return A


class _SchurLyap:
    """Reusable solver for A X + X A^T = -Q given one real Schur form of A."""

    def __init__(self, A: np.ndarray):
        try:
            self.T, self.U = scipy.linalg.schur(A, output="real")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverBreakdown(f"Schur reduction failed: {exc}") from exc

    def __call__(self, Q: np.ndarray) -> np.ndarray:
        U, T = self.U, self.T
        F = -(U.T @ Q @ U)
        Y, scale, info = lapack.dtrsyl(T, T, F, trana="N", tranb="T", isgn=1)
        if info < 0:
            raise SolverBreakdown(f"trsyl rejected argument {-info}")
        if info == 1:
            raise SolverBreakdown("trsyl: A and -A have (nearly) common eigenvalues")
        X = U @ (Y / scale) @ U.T
        return _sym(X)


def lyapunov_residual(A, Ns: Sequence, Q, X) -> float:
    """||A X + X A^T + sum N_i X N_i^T + Q||_F / max(1, ||Q||_F)."""
    A = _as_square(A)
    Q = np.asarray(Q, dtype=float)
    X = np.asarray(X, dtype=float)
    d = A.shape[0]
    if Q.shape != (d, d) or X.shape != (d, d) or any(np.shape(N) != (d, d) for N in Ns):
        raise ValueError("dimension mismatch in lyapunov_residual")
    R = A @ X + X @ A.T + Q
    for N in Ns:
        R = R + N @ X @ N.T
    return float(np.linalg.norm(R, "fro") / max(1.0, np.linalg.norm(Q, "fro")))


def solve_standard(A, Q) -> LyapunovSolution:
    """Solve A X + X A^T + Q = 0 for stable A."""
    A = _as_square(A)
    Q = _sym(np.asarray(Q, dtype=float))
    _check_stable(A)
    X = _SchurLyap(A)(Q)
    return LyapunovSolution(X, lyapunov_residual(A, [], Q, X), 0, Method.SCHUR)


def solve_generalized(
    A,
    Ns: Sequence,
    Q,
    tol: float = 1e-10,
    max_iter: int = 500,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> LyapunovSolution:
    """Solve A X + X A^T + sum_i N_i X N_i^T + Q = 0 by stationary iteration.

    Parameters
    ----------
    A : (d, d) array
        Stable drift matrix.
    Ns : sequence of (d, d) arrays
        Coupling matrices.  An empty list (or all zeros) reduces to the
        standard equation and returns after one sweep.
    Q : (d, d) symmetric array
    tol : float
        Target relative residual, see :func:`lyapunov_residual`.
    max_iter : int
        Maximum number of sweeps before :class:`NoConvergence` is raised.
    callback : callable, optional
        Called as ``callback(j, X_j)`` after every sweep.
    """
    A = _as_square(A)
    d = A.shape[0]
    Q = _sym(np.asarray(Q, dtype=float))
    Ns = [np.asarray(N, dtype=float) for N in Ns]
    Ns = [N for N in Ns if np.any(N)]
    _check_stable(A)
    inner = _SchurLyap(A)
    X = np.zeros((d, d))
    res = np.inf
    for j in range(1, max_iter + 1):
        rhs = Q.copy()
        for N in Ns:
            rhs += N @ X @ N.T
        X = inner(rhs)
        if callback is not None:
            callback(j, X)
        res = lyapunov_residual(A, Ns, Q, X)
        if not np.isfinite(res):
            break
        if res <= tol:
            method = Method.STATIONARY if Ns else Method.SCHUR
            return LyapunovSolution(X, res, j, method)
    raise NoConvergence(j, res)


def solve_kronecker(A, Ns: Sequence, Q) -> LyapunovSolution:
    """Direct solve of the vectorized generalized equation; only for small d.

    (I kron A + A kron I + sum_i N_i kron N_i) vec(X) = -vec(Q)
    with column-major vec.
    """
    A = _as_square(A)
    d = A.shape[0]
    if d > KRONECKER_MAX_DIM:
        raise ValueError(f"Kronecker solve limited to d <= {KRONECKER_MAX_DIM}, got {d}")
    Q = _sym(np.asarray(Q, dtype=float))
    I = np.eye(d)
    K = np.kron(I, A) + np.kron(A, I)
    for N in Ns:
        N = np.asarray(N, dtype=float)
        K += np.kron(N, N)
    x = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    X = _sym(x.reshape((d, d), order="F"))
    return LyapunovSolution(X, lyapunov_residual(A, Ns, Q, X), 0, Method.KRONECKER)
