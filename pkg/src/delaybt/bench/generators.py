"""Generators for the three benchmark systems."""

from __future__ import annotations

import numpy as np

from ..lyapunov import spectral_abscissa
from ..sysmodel import DelaySystem, DelayTerm, Kind

__all__ = ["GeneratorError", "gen_stuart_landau", "gen_gle", "gen_gbm", "psd_sqrt"]


class GeneratorError(ValueError):
    pass


def gen_stuart_landau(d: int = 50, alpha: float = -1.2, tau: float = 0.1) -> DelaySystem:
    """Linearized ring of Stuart-Landau oscillators.

    x_j' = alpha x_j + x_{(j+1) mod d}(t - tau), with identity B, B_in and C.
    """
    if d < 2:
        raise GeneratorError("need at least two oscillators")
    if not alpha < 0:
        raise GeneratorError("alpha must be negative")
    N = np.roll(np.eye(d), 1, axis=1)
    I = np.eye(d)
    return DelaySystem(alpha * I, (DelayTerm(N, tau),), I, I, I, Kind.DETERMINISTIC)


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric positive definite matrix."""
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    if lam[0] <= 0:
        raise GeneratorError(f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})")
    return (U * np.sqrt(lam)) @ U.T


def gle_memory_kernel(t: float, hurst: float) -> float:
    return t ** (2.0 * (hurst - 1.0))


def gen_gle(
    d_particles: int = 50,
    hurst: float = 0.75,
    r_mem: float = 0.2,
    perturb_scale: float = 0.1,
    coupling_scale: float = 0.5,
    seed: int = 0,
    max_attempts: int = 10,
    actuation: str = "identity",
) -> DelaySystem:
    """Generalized Langevin dynamics with a midpoint delay surrogate of the memory term.

    Mass and friction are ``I + perturb_scale diag(a)`` with one shared draw
    a ~ N(0, 1); coupling is ``K = I + S S^T / d`` with ``S = coupling_scale |a_ij|``.
    In coordinates y = (L1 x, L2 x') with K = L1^2, M = L2^2 (symmetric roots)

        A = [[0, L1 L2^{-1}], [-L2^{-1} L1, -L2^{-1} F L2^{-1}]],

    and the memory integral is replaced by r gamma(r/2) N y(t - r/2) with
    N = diag(0, I) and gamma(t) = t^{2(H-1)}.  C = I.

    actuation
        ``"identity"``: B = diag(0, I) and B_in = I.
        ``"broadcast"``: one scalar force acting on every particle,
        B = (0, 1)^T and B_in = B / sqrt(d_particles).
    """
    if actuation not in ("identity", "broadcast"):
        raise GeneratorError(f"unknown actuation {actuation!r}")
    if not 0.5 < hurst < 1.0:
        raise GeneratorError("Hurst parameter must lie in (1/2, 1)")
    if r_mem <= 0:
        raise GeneratorError("memory length must be positive")
    p = d_particles
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        a = rng.standard_normal(p)
        a_ij = rng.standard_normal((p, p))
        Mmass = np.eye(p) + perturb_scale * np.diag(a)
        F = np.eye(p) + perturb_scale * np.diag(a)
        S = coupling_scale * np.abs(a_ij)
        K = np.eye(p) + S @ S.T / p
        if np.linalg.eigvalsh(Mmass)[0] > 0 and np.linalg.eigvalsh(K)[0] > 0:
            break
    else:
        raise GeneratorError(f"no positive definite mass/coupling matrix after {max_attempts} draws")
    L1 = psd_sqrt(K)
    L2 = psd_sqrt(Mmass)
    L2inv = np.linalg.inv(L2)
    Z = np.zeros((p, p))
    I = np.eye(p)
    A = np.block([[Z, L1 @ L2inv], [-L2inv @ L1, -L2inv @ F @ L2inv]])
    alpha = spectral_abscissa(A)
    if alpha >= 0:
        raise GeneratorError(f"GLE_Unstable: spectral abscissa {alpha:.3e}")
    gamma0 = I
    N = r_mem * gle_memory_kernel(r_mem / 2, hurst) * np.block([[Z, Z], [Z, gamma0]])
    I2 = np.eye(2 * p)
    if actuation == "identity":
        B = np.block([[Z, Z], [Z, I]])
        B_in = I2
    else:
        B = np.r_[np.zeros(p), np.ones(p)][:, None]
        B_in = B / np.sqrt(p)
    return DelaySystem(A, (DelayTerm(N, r_mem / 2),), B, B_in, I2, Kind.DETERMINISTIC)


def gen_gbm(
    d: int = 40, r_obs: int = 10, tau: float = 0.1, perturb_std: float = 0.01, seed: int = 0
) -> DelaySystem:
    """Geometric Brownian motion with delayed multiplicative noise.

    A = -I + (a_ij), B = I + (a'_ij), N = I + (a''_ij) with i.i.d. N(0, perturb_std^2)
    entries, C = diag(1 x r_obs, 0.01 x (d - r_obs)), B_in = I, one Brownian motion.
    """
    if not 1 <= r_obs <= d:
        raise GeneratorError("need 1 <= r_obs <= d")
    rng = np.random.default_rng(seed)
    I = np.eye(d)
    A = -I + perturb_std * rng.standard_normal((d, d))
    B = I + perturb_std * rng.standard_normal((d, d))
    N = I + perturb_std * rng.standard_normal((d, d))
    C = np.diag(np.r_[np.ones(r_obs), np.full(d - r_obs, 0.01)])
    return DelaySystem(A, (DelayTerm(N, tau),), B, I, C, Kind.STOCHASTIC)
