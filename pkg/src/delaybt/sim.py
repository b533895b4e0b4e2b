"""Fixed-step integrators for delay systems and L2 output-error measurement.

All schemes run on a uniform grid t_j = j dt, j = 0..steps, and read delayed
states directly from stored grid values, so every delay must be an integer
multiple of dt.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .sysmodel import DelaySystem, HistorySpec, InitialState, SignalSpec

__all__ = [
    "Grid",
    "NoiseMode",
    "TrajectoryEnsemble",
    "IncommensurateDelay",
    "simulate_dde",
    "simulate_bilinear_dde",
    "simulate_sdde",
    "l2_output_error",
    "normal_stream",
    "write_trajectory_csv",
]

COMMENSURATE_RTOL = 1e-9


class IncommensurateDelay(ValueError):
    pass


class NoiseMode(str, enum.Enum):
    NOT_APPLICABLE = "na"
    INDEPENDENT = "independent"
    COMMON = "common"


@dataclass(frozen=True)
class Grid:
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0 or self.steps < 1:
            raise ValueError("grid needs dt > 0 and at least one step")

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> "Grid":
        return cls(dt, int(round(T / dt)))

    @property
    def T(self) -> float:
        return self.dt * self.steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def lag(self, tau: float) -> int:
        """Delay in grid steps; raises if tau is not a multiple of dt."""
        k = int(round(tau / self.dt))
        if k < 1 or abs(k * self.dt - tau) > COMMENSURATE_RTOL * tau:
            raise IncommensurateDelay(f"delay {tau} is not a positive integer multiple of dt={self.dt}")
        return k


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Simulated paths; ``states`` may be None when dropped to save memory."""

    grid: Grid
    outputs: np.ndarray  # (n_paths, steps + 1, m)
    states: np.ndarray | None  # (n_paths, steps + 1, d)
    seed: int | None = None
    noise_mode: NoiseMode = NoiseMode.NOT_APPLICABLE

    @property
    def n_paths(self) -> int:
        return self.outputs.shape[0]


def normal_stream(seed: int, stream: int, path: int, shape) -> np.ndarray:
    """Standard normals from a Philox generator keyed by (seed, stream, path).

    Draws for a path do not depend on how many other paths exist or the
    order in which they are generated.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(path)])
    return np.random.Generator(np.random.Philox(ss)).standard_normal(shape)


def _prepare(sys: DelaySystem, u: SignalSpec, x0: InitialState, hist: HistorySpec, grid: Grid):
    if u.dim != sys.n:
        raise ValueError(f"control dimension {u.dim} does not match B with {sys.n} columns")
    lags = [grid.lag(t) for t in sys.taus]
    L = max(lags, default=0)
    Bu = u.evaluate(grid.times) @ sys.B.T  # (steps + 1, d)
    return lags, L, Bu, x0.resolve(sys), hist.on_grid(L, sys.d)


def _drift(x, A):
    # einsum sums each row in a fixed order whatever the batch size, so a
    # stacked ensemble reproduces single-path runs bit for bit; BLAS does not
    return np.einsum("...j,ij->...i", x, A)


def _euler(sys, lags, L, Bu, x0, history, grid, v=None, keep_states=True):
    # Z holds history rows 0..L-1 followed by states at t_0..t_steps.
    d = sys.d
    Z = np.empty((L + grid.steps + 1, d))
    Z[:L] = history
    Z[L] = x0
    A = sys.A
    NTs = [N.T for N in sys.Ns]
    dt = grid.dt
    for j in range(grid.steps):
        x = Z[L + j]
        drift = _drift(x, A) + Bu[j]
        if NTs:
            delayed = 0.0
            for NT, k in zip(NTs, lags):
                delayed = delayed + Z[L + j - k] @ NT
            drift = drift + (delayed if v is None else v[j] * delayed)
        Z[L + j + 1] = x + dt * drift
    states = Z[L:]
    outputs = states @ sys.C.T
    return TrajectoryEnsemble(grid, outputs[None], states[None] if keep_states else None)


def simulate_dde(
    sys: DelaySystem, u: SignalSpec, x0: InitialState, hist: HistorySpec, grid: Grid, keep_states: bool = True
) -> TrajectoryEnsemble:
    """Forward Euler for x' = A x + sum N_i x(t - tau_i) + B u."""
    lags, L, Bu, x, history = _prepare(sys, u, x0, hist, grid)
    return _euler(sys, lags, L, Bu, x, history, grid, keep_states=keep_states)


def simulate_bilinear_dde(
    sys: DelaySystem,
    u: SignalSpec,
    v: SignalSpec,
    x0: InitialState,
    hist: HistorySpec,
    grid: Grid,
    keep_states: bool = True,
) -> TrajectoryEnsemble:
    """Forward Euler for x' = A x + sum N_i x(t - tau_i) v(t) + B u with scalar v."""
    if v.dim != 1:
        raise ValueError("v must be scalar")
    lags, L, Bu, x, history = _prepare(sys, u, x0, hist, grid)
    vv = v.evaluate(grid.times)[:, 0]
    return _euler(sys, lags, L, Bu, x, history, grid, v=vv, keep_states=keep_states)


def simulate_sdde(
    sys: DelaySystem,
    u: SignalSpec,
    xi: InitialState,
    hist: HistorySpec,
    grid: Grid,
    n_paths: int,
    seed: int,
    noise_mode: NoiseMode | str = NoiseMode.INDEPENDENT,
    stream: int = 0,
    keep_states: bool = True,
) -> TrajectoryEnsemble:
    """Euler-Maruyama for dX = (A X + B u) dt + sum_i N_i X(t - tau_i) dW_i.

    The increment of W_i on step j of path p is sqrt(dt) * z[p, j, i] with z
    drawn by :func:`normal_stream`.  ``stream`` separates the noise of
    different simulated systems; in COMMON mode it is forced to 0 so that all
    systems see the same Brownian paths.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    noise_mode = NoiseMode(noise_mode)
    if noise_mode is NoiseMode.COMMON:
        stream = 0
    lags, L, Bu, x0, history = _prepare(sys, u, xi, hist, grid)
    d, P, nt = sys.d, n_paths, len(lags)
    dt, sdt = grid.dt, math.sqrt(grid.dt)
    noise = np.stack([normal_stream(seed, stream, p, (grid.steps, nt)) for p in range(P)]) if nt else None
    Z = np.empty((L + grid.steps + 1, P, d))
    Z[:L] = history[:, None, :]
    Z[L] = x0
    A = sys.A
    NTs = [N.T for N in sys.Ns]
    for j in range(grid.steps):
        x = Z[L + j]
        nxt = x + dt * (_drift(x, A) + Bu[j])
        for i, (NT, k) in enumerate(zip(NTs, lags)):
            nxt += (Z[L + j - k] @ NT) * (sdt * noise[:, j, i])[:, None]
        Z[L + j + 1] = nxt
    states = np.ascontiguousarray(Z[L:].transpose(1, 0, 2))
    outputs = states @ sys.C.T
    return TrajectoryEnsemble(grid, outputs, states if keep_states else None, seed, noise_mode)


def l2_output_error(e1: TrajectoryEnsemble, e2: TrajectoryEnsemble) -> tuple[float, float]:
    """Root-mean-square L2(0, T) output distance and its standard error.

    Per path the squared L2 norm uses the left rectangle rule over t_0..t_{steps-1};
    the standard error of the mean is propagated through the square root by
    the delta method (zero for a single path).
    """
    if e1.grid != e2.grid:
        raise ValueError("ensembles live on different grids")
    if e1.outputs.shape != e2.outputs.shape:
        raise ValueError(f"output shapes differ: {e1.outputs.shape} vs {e2.outputs.shape}")
    diff = e1.outputs[:, :-1, :] - e2.outputs[:, :-1, :]
    sq = e1.grid.dt * np.sum(diff**2, axis=(1, 2))
    mean = float(np.mean(sq))
    value = math.sqrt(mean)
    P = sq.size
    if P < 2 or value == 0.0:
        return value, 0.0
    se_mean = float(np.std(sq, ddof=1)) / math.sqrt(P)
    return value, se_mean / (2.0 * value)


def write_trajectory_csv(ens: TrajectoryEnsemble, path, include_states: bool = True) -> None:
    """CSV with columns t, path, x_1..x_d (optional), y_1..y_m."""
    import csv

    t = ens.grid.times
    with_states = include_states and ens.states is not None
    m = ens.outputs.shape[2]
    header = ["t", "path"]
    if with_states:
        header += [f"x_{i + 1}" for i in range(ens.states.shape[2])]
    header += [f"y_{i + 1}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for p in range(ens.n_paths):
            for j in range(t.size):
                row = [repr(float(t[j])), p]
                if with_states:
                    row += [repr(float(x)) for x in ens.states[p, j]]
                row += [repr(float(y)) for y in ens.outputs[p, j]]
                w.writerow(row)
