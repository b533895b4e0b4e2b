"""A-priori output error bounds and the signal norms they consume."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim import Grid
from .sysmodel import SignalSpec

__all__ = [
    "SignalNorms",
    "Assumption",
    "BoundReport",
    "signal_norms",
    "bound_bilinear_delay",
    "bound_uncontrolled_delay",
    "bound_sdde",
]


@dataclass(frozen=True)
class SignalNorms:
    l1: float
    l2: float
    linf: float
    horizon: float

    @property
    def l2_or_inf(self) -> float:
        return max(self.l2, self.linf)

    @classmethod
    def constant(cls, c: float, horizon: float) -> "SignalNorms":
        """Exact norms of the scalar constant signal c on (0, horizon)."""
        c = abs(c)
        return cls(c * horizon, c * math.sqrt(horizon), c, horizon)


@dataclass(frozen=True)
class Assumption:
    name: str
    satisfied: bool
    margin: float = math.nan
    note: str = ""


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    trace_norm: float
    components: dict
    assumptions: list = field(default_factory=list)

    @property
    def bound_value(self) -> float:
        return float(sum(self.components.values()))

    @property
    def certified(self) -> bool:
        return all(a.satisfied for a in self.assumptions)


def signal_norms(u, grid: Grid) -> SignalNorms:
    """Rectangle-rule L1 and L2 norms and the grid maximum of ||u(t_j)||.

    ``u`` is a :class:`SignalSpec` or an array of samples on the grid nodes
    (shape (steps + 1,) or (steps + 1, dim)).  Nodes t_0..t_{steps-1} are used.
    """
    if isinstance(u, SignalSpec):
        vals = u.evaluate(grid.times)
    else:
        vals = np.asarray(u, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
    if vals.shape[0] == 0:
        raise ValueError("empty grid")
    vals = vals[: grid.steps]
    mag = np.linalg.norm(vals, axis=1)
    dt = grid.dt
    return SignalNorms(float(dt * mag.sum()), float(math.sqrt(dt * np.sum(mag**2))), float(mag.max()), grid.T)


def _nonneg(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{k} must be nonnegative, got {v}")


def _contraction(q: float | None, label: str) -> Assumption:
    if q is None:
        return Assumption(label, False, math.nan, "not checked")
    return Assumption(label, q < 1.0, 1.0 - q, f"q = {q:.6g}")


def bound_bilinear_delay(
    trace_norm: float,
    phi0_norm: float,
    u: SignalNorms,
    v: SignalNorms,
    contraction_q: float | None = None,
) -> BoundReport:
    """4 tn (||phi0|| max(1, ||v||_inf) + max(||u||_2, ||v||_1) ||u||_inf)."""
    _nonneg(trace_norm=trace_norm, phi0_norm=phi0_norm, u_l2=u.l2, u_linf=u.linf, v_l1=v.l1, v_linf=v.linf)
    comps = {
        "initial_state": 4 * trace_norm * phi0_norm * max(1.0, v.linf),
        "control": 4 * trace_norm * max(u.l2, v.l1) * u.linf,
    }
    assumptions = [
        Assumption("v_l2_at_most_one", v.l2 <= 1.0, 1.0 - v.l2),
        _contraction(contraction_q, "volterra_contraction"),
        Assumption("controls_in_H1", True, math.nan, "assumed; not checkable from samples"),
        Assumption("zero_history", True, math.nan, "assumed by caller"),
    ]
    return BoundReport("bilinear_delay", trace_norm, comps, assumptions)


def bound_uncontrolled_delay(
    trace_norm: float,
    phi0_norm: float,
    u: SignalNorms,
    T0: float,
    contraction_q: float | None = None,
) -> BoundReport:
    """4 tn (||phi0|| max(1, T0^{-1/2}) + max(||u||_2, sqrt(T0)) ||u||_inf).

    ``trace_norm`` must come from the systems with N scaled by sqrt(T0), and
    ``contraction_q`` is the contraction number of those rescaled systems.
    """
    if not T0 > 0:
        raise ValueError("T0 must be positive")
    _nonneg(trace_norm=trace_norm, phi0_norm=phi0_norm, u_l2=u.l2, u_linf=u.linf)
    comps = {
        "initial_state": 4 * trace_norm * phi0_norm * max(1.0, T0**-0.5),
        "control": 4 * trace_norm * max(u.l2, math.sqrt(T0)) * u.linf,
    }
    assumptions = [
        _contraction(contraction_q, "volterra_contraction_rescaled"),
        Assumption("zero_history", True, math.nan, "assumed by caller"),
    ]
    return BoundReport("uncontrolled_delay", trace_norm, comps, assumptions)


def bound_sdde(
    trace_norm: float,
    xi_norm: float,
    u_norm: float,
    contraction_q: float | None = None,
) -> BoundReport:
    """tn (||xi|| + 2 ||u||).

    ``u_norm`` is the L^inf_omega L^2_t norm; for deterministic controls this
    is the plain L2(0, T) norm.
    """
    _nonneg(trace_norm=trace_norm, xi_norm=xi_norm, u_norm=u_norm)
    comps = {"initial_state": trace_norm * xi_norm, "control": 2 * trace_norm * u_norm}
    assumptions = [
        _contraction(contraction_q, "volterra_contraction"),
        Assumption("zero_history", True, math.nan, "assumed by caller"),
    ]
    return BoundReport("sdde", trace_norm, comps, assumptions)
