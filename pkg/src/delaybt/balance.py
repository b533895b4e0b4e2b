"""Gramians, square-root balancing, structure-preserving truncation and error-system
Hankel spectra for delay systems."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lyapunov import solve_generalized
from .sysmodel import DelaySystem, DelayTerm

__all__ = [
    "Variant",
    "GramianPair",
    "Factor",
    "BalancedRealization",
    "ReducedModel",
    "HankelSpectrum",
    "IndefiniteMatrix",
    "RankCollapse",
    "TruncationGapWarning",
    "compute_gramians",
    "variant_discrepancy",
    "psd_factor",
    "balance_transform",
    "truncate",
    "reduce",
    "build_error_system",
    "error_hankel",
]

log = logging.getLogger(__name__)

GAP_TOL = 1e-8


class Variant(str, enum.Enum):
    BILINEAR = "bilinear"
    SDDE = "sdde"


class IndefiniteMatrix(ValueError):
    pass


class RankCollapse(ValueError):
    pass


class TruncationGapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GramianPair:
    P_reach: np.ndarray
    O_obs: np.ndarray
    variant: Variant
    residuals: tuple[float, float]


@dataclass(frozen=True)
class Factor:
    """Economy factor of a PSD matrix.

    ``kind == "right"``: ``M = matrix @ matrix.T`` with ``matrix`` of shape (d, r0).
    ``kind == "left"``:  ``M = matrix.T @ matrix`` with ``matrix`` of shape (r0, d).
    """

    matrix: np.ndarray
    rank: int
    kind: str

    def reconstruct(self) -> np.ndarray:
        F = self.matrix
        return F @ F.T if self.kind == "right" else F.T @ F


@dataclass(frozen=True)
class BalancedRealization:
    Q: np.ndarray
    Qinv: np.ndarray
    hsv: np.ndarray
    system: DelaySystem

    @property
    def r0(self) -> int:
        return self.hsv.size


@dataclass(frozen=True)
class ReducedModel:
    system: DelaySystem
    Q_r: np.ndarray
    Qinv_r: np.ndarray
    hsv_kept: np.ndarray
    hsv_tail: np.ndarray

    @property
    def r(self) -> int:
        return self.system.d

    def project_state(self, x: np.ndarray) -> np.ndarray:
        """Map a full-order state to reduced coordinates."""
        return self.Q_r @ x


@dataclass(frozen=True)
class HankelSpectrum:
    values: np.ndarray
    trace_norm: float


def compute_gramians(
    sys: DelaySystem, variant: Variant | str = Variant.BILINEAR, tol: float = 1e-10, max_iter: int = 500
) -> GramianPair:
    """Reachability and observability Gramians from the generalized Lyapunov equations.

    ``bilinear``: A P + P A^T + sum N P N^T + B B^T + B_in B_in^T = 0.
    ``sdde``:     A X + X A^T + sum N X N^T + B B^T = 0, then P = X + B_in B_in^T.
    Both share  A^T O + O A + sum N^T O N + C^T C = 0.
    """
    variant = Variant(variant)
    A, Ns = sys.A, sys.Ns
    BBt = sys.B @ sys.B.T
    BinBint = sys.B_in @ sys.B_in.T
    if variant is Variant.BILINEAR:
        sol_p = solve_generalized(A, Ns, BBt + BinBint, tol=tol, max_iter=max_iter)
        P = sol_p.X
    else:
        sol_p = solve_generalized(A, Ns, BBt, tol=tol, max_iter=max_iter)
        P = sol_p.X + BinBint
    sol_o = solve_generalized(A.T, [N.T for N in Ns], sys.C.T @ sys.C, tol=tol, max_iter=max_iter)
    return GramianPair(P, sol_o.X, variant, (sol_p.rel_residual, sol_o.rel_residual))


def variant_discrepancy(sys: DelaySystem, tol: float = 1e-10) -> float:
    """Frobenius distance between the two reachability Gramian variants.

    Logged at WARNING level when larger than 1e-10.
    """
    p_bil = compute_gramians(sys, Variant.BILINEAR, tol).P_reach
    p_sdde = compute_gramians(sys, Variant.SDDE, tol).P_reach
    diff = float(np.linalg.norm(p_bil - p_sdde, "fro"))
    if diff > 1e-10:
        log.warning("bilinear and SDDE reachability Gramians differ by %.3e", diff)
    return diff


def psd_factor(M, rank_tol: float | None = None, kind: str = "right") -> Factor:
    """Eigendecomposition-based economy factor of a symmetric PSD matrix.

    Eigenvalues at or below ``rank_tol * lambda_max`` are dropped (default
    ``rank_tol = d * eps``).  Raises :class:`IndefiniteMatrix` if an
    eigenvalue is below ``-10 * rank_tol * lambda_max``.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    if kind not in ("right", "left"):
        raise ValueError("kind must be 'right' or 'left'")
    if rank_tol is None:
        rank_tol = d * np.finfo(float).eps
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.linalg.norm(M - M.T, "fro") > 1e-10 * scale:
        raise ValueError("psd_factor requires a symmetric matrix")
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    lam_max = lam[-1] if lam.size else 0.0
    if lam_max <= 0:
        if lam.size and lam[0] < 0:
            raise IndefiniteMatrix(f"matrix has no positive eigenvalue (min {lam[0]:.3e})")
        F = np.zeros((d, 0))
        return Factor(F if kind == "right" else F.T, 0, kind)
    if lam[0] < -10 * rank_tol * lam_max:
        raise IndefiniteMatrix(
            f"eigenvalue {lam[0]:.3e} below clipping tolerance {-10 * rank_tol * lam_max:.3e}"
        )
    keep = lam > rank_tol * lam_max
    # descending order
    lam_k = lam[keep][::-1]
    U_k = U[:, keep][:, ::-1]
    F = U_k * np.sqrt(lam_k)
    return Factor(F if kind == "right" else F.T, int(keep.sum()), kind)


def _transform(sys: DelaySystem, Q: np.ndarray, Qinv: np.ndarray) -> DelaySystem:
    return sys.replace(
        A=Q @ sys.A @ Qinv,
        delays=tuple(DelayTerm(Q @ t.N @ Qinv, t.tau) for t in sys.delays),
        B=Q @ sys.B,
        B_in=Q @ sys.B_in,
        C=sys.C @ Qinv,
    )


def balance_transform(sys: DelaySystem, gram: GramianPair, rank_tol: float | None = None) -> BalancedRealization:
    """Square-root balancing.

    With P = R R^T, O = W^T W and W R = V S U^T, the transform is
    Q = S^{-1/2} V^T W and its right inverse Qinv = R U S^{-1/2}.
    Singular values at or below ``max(shape) * eps * ||W|| ||R||`` (the
    round-off level of the product) are treated as zero, so Q has r0 <= d rows.
    """
    R = psd_factor(gram.P_reach, rank_tol, "right").matrix
    W = psd_factor(gram.O_obs, rank_tol, "left").matrix
    if R.shape[1] == 0 or W.shape[0] == 0:
        raise RankCollapse("a Gramian is zero; nothing to balance")
    V, s, Uh = scipy.linalg.svd(W @ R, full_matrices=False)
    floor = max(W.shape[0], R.shape[1]) * np.finfo(float).eps * np.linalg.norm(W, 2) * np.linalg.norm(R, 2)
    r0 = int(np.sum(s > floor))
    if r0 == 0:
        raise RankCollapse("W R has no nonzero singular values")
    s = s[:r0]
    isq = 1.0 / np.sqrt(s)
    Q = isq[:, None] * (V[:, :r0].T @ W)
    Qinv = (R @ Uh[:r0].T) * isq[None, :]
    return BalancedRealization(Q, Qinv, s, _transform(sys, Q, Qinv))


def truncate(bal: BalancedRealization, r: int) -> ReducedModel:
    """Keep the leading r balanced states; delay times are left untouched."""
    r0 = bal.r0
    if not 1 <= r <= r0:
        raise ValueError(f"reduced order r={r} outside 1..{r0}")
    hsv = bal.hsv
    if r < r0 and hsv[r - 1] - hsv[r] < GAP_TOL * hsv[0]:
        warnings.warn(
            f"truncating at r={r} splits a near-degenerate Hankel singular value pair "
            f"({hsv[r - 1]:.6e}, {hsv[r]:.6e})",
            TruncationGapWarning,
            stacklevel=2,
        )
    b = bal.system
    red = b.replace(
        A=b.A[:r, :r],
        delays=tuple(DelayTerm(t.N[:r, :r], t.tau) for t in b.delays),
        B=b.B[:r],
        B_in=b.B_in[:r],
        C=b.C[:, :r],
    )
    return ReducedModel(red, bal.Q[:r], bal.Qinv[:, :r], hsv[:r].copy(), hsv[r:].copy())


def reduce(sys: DelaySystem, r: int, variant: Variant | str = Variant.BILINEAR, tol: float = 1e-10) -> ReducedModel:
    """Gramians, balancing and truncation in one call."""
    gram = compute_gramians(sys, variant, tol)
    return truncate(balance_transform(sys, gram), r)


def build_error_system(sys1: DelaySystem, sys2: DelaySystem) -> DelaySystem:
    """Block composition with output C1 x1 - C2 x2; delay terms are paired by equal tau."""
    if (sys1.n, sys1.k, sys1.m) != (sys2.n, sys2.k, sys2.m):
        raise ValueError(
            f"I/O dimension mismatch: (n, k, m) = {(sys1.n, sys1.k, sys1.m)} vs {(sys2.n, sys2.k, sys2.m)}"
        )
    if sorted(sys1.taus) != sorted(sys2.taus):
        raise ValueError(f"delay multiset mismatch: {sys1.taus} vs {sys2.taus}")
    by_tau = {t.tau: t.N for t in sys2.delays}
    delays = tuple(DelayTerm(scipy.linalg.block_diag(t.N, by_tau[t.tau]), t.tau) for t in sys1.delays)
    return DelaySystem(
        A=scipy.linalg.block_diag(sys1.A, sys2.A),
        delays=delays,
        B=np.vstack([sys1.B, sys2.B]),
        B_in=np.vstack([sys1.B_in, sys2.B_in]),
        C=np.hstack([sys1.C, -sys2.C]),
        kind=sys1.kind,
    )


def error_hankel(
    sys1: DelaySystem,
    sys2: DelaySystem,
    variant: Variant | str = Variant.BILINEAR,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> HankelSpectrum:
    """Singular values of W R for the error-system Gramian factors, and their sum."""
    err = build_error_system(sys1, sys2)
    gram = compute_gramians(err, variant, tol, max_iter)
    R = psd_factor(gram.P_reach, kind="right").matrix
    W = psd_factor(gram.O_obs, kind="left").matrix
    if R.shape[1] == 0 or W.shape[0] == 0:
        values = np.zeros(0)
    else:
        values = scipy.linalg.svd(W @ R, compute_uv=False)
    return HankelSpectrum(values, float(np.sum(values)))
