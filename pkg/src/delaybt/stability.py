"""Stability hypotheses used by the error bounds.

* sampled semigroup envelope ``||exp(tA)|| <= M exp(-omega t)``
* Volterra contraction ``q = M sum ||N_i|| / sqrt(2 omega) < 1``
* delayed-semigroup decay ``M exp(alpha tau) ||N|| / (omega - alpha) < 1``
* mean-square stability of dX = A X dt + sum (A_i X_t + N_i X_{t-tau}) dW_i
  via a Lyapunov matrix G and a delay smallness bound ``tau < tau_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .lyapunov import LyapunovError, NotStable, solve_generalized, spectral_abscissa

__all__ = [
    "OMEGA_SAFETY",
    "semigroup_envelope",
    "log_norm",
    "check_volterra",
    "check_delay_decay",
    "SddeMsRecord",
    "check_sdde_ms_stability",
    "delta3_direct",
    "delta3_rationalized",
    "tau_max_direct",
    "tau_max_rationalized",
    "StabilityReport",
    "stability_report",
]

OMEGA_SAFETY = 1e-3


def _norm2(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def semigroup_envelope(A, n_samples: int = 200) -> tuple[float, float]:
    """Sampled estimate of (M, omega) with ||exp(tA)||_2 <= M exp(-omega t).

    omega is the negated spectral abscissa shrunk by OMEGA_SAFETY; M is the
    largest ``||exp(tA)|| exp(omega t)`` over log-spaced t in (0, 10/omega],
    floored at 1.  This is a sampled estimate, not a rigorous bound.
    """
    A = np.asarray(A, dtype=float)
    alpha = spectral_abscissa(A)
    if alpha >= 0:
        raise NotStable(alpha)
    omega = (1.0 - OMEGA_SAFETY) * (-alpha)
    ts = np.logspace(-4, 1, n_samples) / omega
    M = 1.0
    for t in ts:
        M = max(M, _norm2(scipy.linalg.expm(t * A)) * math.exp(omega * t))
    return M, omega


def log_norm(A) -> float:
    """Logarithmic 2-norm mu(A) = lambda_max((A + A^T) / 2); ||exp(tA)|| <= exp(mu t)."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def check_volterra(M: float, omega: float, Ns: Sequence) -> tuple[float, bool]:
    """Contraction number q = M * sum ||N_i||_2 / sqrt(2 omega) and whether q < 1."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    total = sum(_norm2(N) for N in Ns)
    q = M * total / math.sqrt(2.0 * omega)
    return q, q < 1.0


def check_delay_decay(M: float, omega: float, Ns: Sequence, tau: float, alpha: float = 0.0) -> bool:
    """Strict test M e^{alpha tau} ||N|| / (omega - alpha) < 1 with ||N|| = sum ||N_i||_2."""
    if not 0 <= alpha < omega:
        raise ValueError(f"need 0 <= alpha < omega, got alpha={alpha}, omega={omega}")
    total = sum(_norm2(N) for N in Ns)
    return M * math.exp(alpha * tau) * total / (omega - alpha) < 1.0


# ------------------------------------------------------------ mean-square test


def delta3_direct(delta2: float, lam_min_q: float, g: float, s: float) -> float:
    return ((math.sqrt(delta2**2 + 4 * lam_min_q * g * s) - delta2) / (2 * g * s)) ** 2


def delta3_rationalized(delta2: float, lam_min_q: float, g: float, s: float) -> float:
    # (sqrt(a^2 + b) - a) / c == b / (c (sqrt(a^2 + b) + a))
    return (2 * lam_min_q / (math.sqrt(delta2**2 + 4 * lam_min_q * g * s) + delta2)) ** 2


def tau_max_direct(delta1: float, delta3: float, a: float) -> float:
    return (math.sqrt(delta1**2 + delta3 * a**2) - delta1) / (2 * a**2)


def tau_max_rationalized(delta1: float, delta3: float, a: float) -> float:
    return delta3 / (2 * (math.sqrt(delta1**2 + delta3 * a**2) + delta1))


@dataclass(frozen=True)
class SddeMsRecord:
    delta1: float
    delta2: float
    delta3: float
    tau_max: float
    tau: float
    lyap_ok: bool
    passed: bool
    G: np.ndarray | None = field(default=None, repr=False)
    note: str = ""


def check_sdde_ms_stability(A, As: Sequence, Ns: Sequence, tau: float) -> SddeMsRecord:
    """Mean-square stability test with Q = I.

    Solves G A + A^T G + sum (A_i + N_i)^T G (A_i + N_i) = -I; passes when
    G is positive definite and ``tau < tau_max``.  With every N_i = 0 the
    delay bound degenerates and the test passes for any tau.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    Ns = [np.asarray(N, dtype=float) for N in Ns]
    As = [np.asarray(Ai, dtype=float) for Ai in As] if As else [np.zeros((d, d))] * len(Ns)
    if len(As) != len(Ns):
        raise ValueError("As and Ns must have equal length")
    lam_min_q = 1.0
    try:
        G = solve_generalized(A.T, [(Ai + Ni).T for Ai, Ni in zip(As, Ns)], np.eye(d)).X
        lyap_ok = bool(np.linalg.eigvalsh(G)[0] > 0)
    except (LyapunovError, np.linalg.LinAlgError) as exc:
        return SddeMsRecord(math.nan, math.nan, math.nan, 0.0, tau, False, False, None, f"Lyapunov solve failed: {exc}")
    g = _norm2(G)
    s = sum(_norm2(N) ** 2 for N in Ns)
    delta1 = sum(_norm2(Ai) ** 2 + _norm2(Ni) ** 2 for Ai, Ni in zip(As, Ns))
    delta2 = 2 * g * math.sqrt(2 * delta1 * s)
    a = _norm2(A)
    if s == 0:
        return SddeMsRecord(delta1, delta2, math.inf, math.inf, tau, lyap_ok, lyap_ok, G, "no delayed noise: delay bound void")
    # rationalized forms avoid cancellation when the square roots nearly cancel
    delta3 = delta3_rationalized(delta2, lam_min_q, g, s)
    tau_max = tau_max_rationalized(delta1, delta3, a) if a > 0 else math.inf
    return SddeMsRecord(delta1, delta2, delta3, tau_max, tau, lyap_ok, lyap_ok and tau < tau_max, G)


# ------------------------------------------------------------- combined report


@dataclass(frozen=True)
class StabilityReport:
    M: float
    omega: float
    q: float
    volterra_ok: bool
    delay_decay_ok: bool | None = None
    sdde_ms: SddeMsRecord | None = None
    notes: tuple[str, ...] = ()


def stability_report(
    systems: Sequence,
    delay_scale: float = 1.0,
    alpha: float = 0.0,
    with_sdde: bool = False,
    envelope: tuple[float, float] | None = None,
) -> StabilityReport:
    """Joint hypothesis check for one or more systems sharing a delay structure.

    Sampled envelopes are estimated per system and combined as max M, min
    omega; when every A has a negative logarithmic norm the envelope
    (1, -max mu) is used instead if it gives the smaller contraction number.
    The coupling norm is the largest ``sum_i ||N_i||`` over the systems, times
    ``delay_scale`` (sqrt(T0) for the uncontrolled-delay corollary).
    ``envelope`` overrides the sampled (M, omega).
    """
    worst = max(systems, key=lambda s: sum(_norm2(N) for N in s.Ns))
    Ns = [delay_scale * N for N in worst.Ns]
    if envelope is not None:
        M, omega = envelope
        notes = ["M, omega supplied by caller"]
    else:
        envs = [semigroup_envelope(s.A) for s in systems]
        M, omega = max(e[0] for e in envs), min(e[1] for e in envs)
        notes = ["M, omega are sampled estimates"]
        mus = [log_norm(s.A) for s in systems]
        if max(mus) < 0:
            q_sampled = check_volterra(M, omega, Ns)[0]
            q_log = check_volterra(1.0, -max(mus), Ns)[0]
            if q_log < q_sampled:
                M, omega = 1.0, -max(mus)
                notes = ["M = 1, omega = -max log-norm (rigorous envelope)"]
    if len(systems) > 1:
        notes.append("envelope combined over systems as max M, min omega")
    if any(len(s.delays) > 1 for s in systems):
        notes.append("multiple delays: coupling norm taken as sum of ||N_i||")
    q, ok = check_volterra(M, omega, Ns)
    tau = max((t for s in systems for t in s.taus), default=0.0)
    decay = check_delay_decay(M, omega, [N for N in worst.Ns], tau, alpha) if alpha < omega else None
    ms = None
    if with_sdde:
        recs = [check_sdde_ms_stability(s.A, [], s.Ns, tau) for s in systems]
        ms = min(recs, key=lambda r: (r.passed, r.tau_max))
    return StabilityReport(M, omega, q, ok, decay, ms, tuple(notes))
