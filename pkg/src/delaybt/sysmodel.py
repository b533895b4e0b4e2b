"""Delay system representation, validation and on-disk interchange.

A :class:`DelaySystem` stores the matrices of

    x'(t) = A x(t) + sum_i N_i x(t - tau_i) [v(t) | dW_i] + B u(t),   y = C x,

with an initial-state map ``B_in`` whose columns span the admissible initial
states.  The same type is used for full, reduced and error systems.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io

__all__ = [
    "Kind",
    "DelayTerm",
    "DelaySystem",
    "SignalSpec",
    "HistorySpec",
    "InitialState",
    "Violation",
    "SystemFormatError",
    "validate_system",
    "save_system",
    "load_system",
    "make_system",
]


class Kind(str, enum.Enum):
    DETERMINISTIC = "DeterministicDelay"
    BILINEAR = "BilinearDelay"
    STOCHASTIC = "StochasticDelay"


class SystemFormatError(ValueError):
    """Raised when a manifest or its matrix files cannot be read consistently."""


def _frozen(a, ndim=2) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DelayTerm:
    N: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "N", _frozen(self.N))
        object.__setattr__(self, "tau", float(self.tau))


@dataclass(frozen=True, eq=False)
class DelaySystem:
    A: np.ndarray
    delays: tuple[DelayTerm, ...]
    B: np.ndarray
    B_in: np.ndarray
    C: np.ndarray
    kind: Kind = Kind.DETERMINISTIC

    def __post_init__(self):
        for name in ("A", "B", "B_in", "C"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        terms = tuple(t if isinstance(t, DelayTerm) else DelayTerm(*t) for t in self.delays)
        object.__setattr__(self, "delays", terms)
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def k(self) -> int:
        return self.B_in.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def Ns(self) -> list[np.ndarray]:
        return [t.N for t in self.delays]

    @property
    def taus(self) -> list[float]:
        return [t.tau for t in self.delays]

    def replace(self, **changes) -> "DelaySystem":
        fields_ = dict(A=self.A, delays=self.delays, B=self.B, B_in=self.B_in, C=self.C, kind=self.kind)
        fields_.update(changes)
        return DelaySystem(**fields_)

    def scale_delays(self, factor: float) -> "DelaySystem":
        """Return a copy with every N_i multiplied by ``factor``."""
        return self.replace(delays=tuple(DelayTerm(factor * t.N, t.tau) for t in self.delays))

    def similarity(self, S: np.ndarray) -> "DelaySystem":
        """Apply the state transform x -> S x."""
        Sinv = np.linalg.inv(S)
        return self.replace(
            A=S @ self.A @ Sinv,
            delays=tuple(DelayTerm(S @ t.N @ Sinv, t.tau) for t in self.delays),
            B=S @ self.B,
            B_in=S @ self.B_in,
            C=self.C @ Sinv,
        )

    def __eq__(self, other):
        if not isinstance(other, DelaySystem):
            return NotImplemented
        if self.kind != other.kind or len(self.delays) != len(other.delays):
            return False
        mats = ("A", "B", "B_in", "C")
        if not all(np.array_equal(getattr(self, k), getattr(other, k)) for k in mats):
            return False
        return all(
            s.tau == o.tau and np.array_equal(s.N, o.N) for s, o in zip(self.delays, other.delays)
        )

    __hash__ = None


# --------------------------------------------------------------------- signals


@dataclass(frozen=True)
class SignalSpec:
    """A control signal evaluated on a uniform grid.

    ``form`` is one of ``"zero"``, ``"constant"``, ``"sine"`` (sin(freq t)
    times the all-ones vector) or ``"sampled"``.
    """

    form: str
    dim: int
    value: object = None

    def __post_init__(self):
        if self.form not in ("zero", "constant", "sine", "sampled"):
            raise ValueError(f"unknown signal form {self.form!r}")
        if self.dim < 1:
            raise ValueError("signal dimension must be positive")

    @classmethod
    def zero(cls, dim: int) -> "SignalSpec":
        return cls("zero", dim)

    @classmethod
    def constant(cls, c, dim: int | None = None) -> "SignalSpec":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if dim is None:
            dim = c.size
        return cls("constant", dim, np.broadcast_to(c, (dim,)).copy())

    @classmethod
    def sine(cls, freq: float, dim: int) -> "SignalSpec":
        return cls("sine", dim, float(freq))

    @classmethod
    def sampled(cls, values) -> "SignalSpec":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled signal contains non-finite values")
        return cls("sampled", values.shape[1], values)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Values at times ``t`` as an array of shape (len(t), dim)."""
        t = np.asarray(t, dtype=float)
        if self.form == "zero":
            return np.zeros((t.size, self.dim))
        if self.form == "constant":
            return np.tile(self.value, (t.size, 1))
        if self.form == "sine":
            return np.repeat(np.sin(self.value * t)[:, None], self.dim, axis=1)
        if self.value.shape[0] != t.size:
            raise ValueError(
                f"sampled signal has {self.value.shape[0]} values, grid has {t.size} points"
            )
        return np.array(self.value)

    def to_text(self) -> str:
        if self.form == "zero":
            return "zero"
        if self.form == "sine":
            return f"sin:{self.value:g}"
        if self.form == "constant" and np.all(self.value == self.value[0]):
            return f"const:{self.value[0]:g}"
        return self.form

    @classmethod
    def parse(cls, text: str, dim: int) -> "SignalSpec":
        """Parse ``zero``, ``sin:<freq>`` or ``const:<c>``."""
        text = text.strip()
        if text == "zero":
            return cls.zero(dim)
        head, _, arg = text.partition(":")
        if head == "sin" and arg:
            return cls.sine(float(arg), dim)
        if head == "const" and arg:
            return cls.constant(float(arg), dim)
        raise ValueError(f"cannot parse signal {text!r}; expected zero, sin:<f> or const:<c>")


@dataclass(frozen=True)
class HistorySpec:
    """History on [-max tau, 0].

    Sampled values have shape (L + 1, d) at times -L dt, ..., -dt, 0 with
    L = max tau / dt; the value at 0 is superseded by the initial state.
    """

    values: np.ndarray | None = None

    @classmethod
    def zero(cls) -> "HistorySpec":
        return cls(None)

    @property
    def is_zero(self) -> bool:
        return self.values is None

    def on_grid(self, lag: int, d: int) -> np.ndarray:
        """History at times -lag*dt .. -dt, shape (lag, d)."""
        if self.values is None:
            return np.zeros((lag, d))
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (lag + 1, d):
            raise ValueError(f"history must have shape {(lag + 1, d)}, got {vals.shape}")
        return vals[:lag].copy()


@dataclass(frozen=True)
class InitialState:
    """Initial state given by coordinates ``w`` in the B_in frame, or explicitly."""

    w: np.ndarray | None = None
    explicit: np.ndarray | None = None

    def __post_init__(self):
        if (self.w is None) == (self.explicit is None):
            raise ValueError("exactly one of w and explicit must be given")

    @classmethod
    def zero(cls, d: int) -> "InitialState":
        return cls(explicit=np.zeros(d))

    def resolve(self, sys: DelaySystem) -> np.ndarray:
        if self.explicit is not None:
            x0 = np.asarray(self.explicit, dtype=float)
            if x0.shape != (sys.d,):
                raise ValueError(f"explicit initial state must have length {sys.d}")
            return x0.copy()
        w = np.asarray(self.w, dtype=float)
        if w.shape != (sys.k,):
            raise ValueError(f"initial coordinates must have length {sys.k}")
        return sys.B_in @ w


# ------------------------------------------------------------------ validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def validate_system(sys: DelaySystem) -> list[Violation]:
    """Return every invariant violation of ``sys``; an empty list means valid."""
    out: list[Violation] = []
    A = sys.A
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        out.append(Violation("dimension_mismatch", f"A must be square and non-empty, got {A.shape}"))
        return out
    d = A.shape[0]
    for name in ("B", "B_in"):
        M = getattr(sys, name)
        if M.ndim != 2 or M.shape[0] != d:
            out.append(Violation("dimension_mismatch", f"{name} has shape {M.shape}, expected ({d}, *)"))
        elif M.shape[1] < 1:
            out.append(Violation("empty_dimension", f"{name} has no columns"))
    if sys.C.ndim != 2 or sys.C.shape[1] != d:
        out.append(Violation("dimension_mismatch", f"C has shape {sys.C.shape}, expected (*, {d})"))
    elif sys.C.shape[0] < 1:
        out.append(Violation("empty_dimension", "C has no rows"))
    seen: list[float] = []
    for i, term in enumerate(sys.delays):
        if term.N.shape != (d, d):
            out.append(Violation("dimension_mismatch", f"N_{i + 1} has shape {term.N.shape}, expected ({d}, {d})"))
        if not math.isfinite(term.tau) or term.tau <= 0:
            out.append(Violation("nonpositive_delay", f"tau_{i + 1} = {term.tau} is not a positive number"))
        if term.tau in seen:
            out.append(Violation("duplicate_delay", f"tau_{i + 1} = {term.tau} appears more than once"))
        seen.append(term.tau)
    mats = [("A", A), ("B", sys.B), ("B_in", sys.B_in), ("C", sys.C)]
    mats += [(f"N_{i + 1}", t.N) for i, t in enumerate(sys.delays)]
    for name, M in mats:
        if not np.all(np.isfinite(M)):
            out.append(Violation("nonfinite_entry", f"{name} contains non-finite entries"))
    return out


# --------------------------------------------------------------- serialization

_ROLES = ("A", "B", "B_in", "C")


def save_system(sys: DelaySystem, path) -> None:
    """Write a JSON manifest at ``path`` and Matrix Market files beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    files = {}
    for role in _ROLES:
        fname = f"{stem}.{role}.mtx"
        scipy.io.mmwrite(path.parent / fname, np.asarray(getattr(sys, role)), precision=17, symmetry="general")
        files[role] = fname
    delays = []
    for i, term in enumerate(sys.delays, start=1):
        fname = f"{stem}.N{i}.mtx"
        scipy.io.mmwrite(path.parent / fname, np.asarray(term.N), precision=17, symmetry="general")
        delays.append({"tau": term.tau, "matrix_file": fname})
    manifest = {
        "kind": sys.kind.value,
        "d": sys.d,
        "n": sys.n,
        "k": sys.k,
        "m": sys.m,
        "delays": delays,
        "files": files,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _read_matrix(base: Path, fname, shape) -> np.ndarray:
    if not isinstance(fname, str):
        raise SystemFormatError(f"malformed manifest: matrix file entry {fname!r}")
    f = base / fname
    if not f.is_file():
        raise SystemFormatError(f"missing artifact: {f}")
    try:
        M = scipy.io.mmread(f)
    except Exception as exc:  # scipy raises several types for corrupt files
        raise SystemFormatError(f"unreadable matrix file {f}: {exc}") from exc
    M = np.asarray(M.toarray() if hasattr(M, "toarray") else M, dtype=float)
    if M.shape != shape:
        raise SystemFormatError(f"dimension conflict: {f} has shape {M.shape}, manifest implies {shape}")
    return M


def load_system(path) -> DelaySystem:
    """Read a system written by :func:`save_system`."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SystemFormatError(f"malformed manifest {path}: {exc}") from exc
    try:
        kind = Kind(manifest["kind"])
        d, n, k, m = (int(manifest[key]) for key in ("d", "n", "k", "m"))
        files = manifest["files"]
        delay_entries = manifest.get("delays", [])
        shapes = {"A": (d, d), "B": (d, n), "B_in": (d, k), "C": (m, d)}
        mats = {role: _read_matrix(path.parent, files[role], shapes[role]) for role in _ROLES}
        delays = tuple(
            DelayTerm(_read_matrix(path.parent, e["matrix_file"], (d, d)), float(e["tau"]))
            for e in delay_entries
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SystemFormatError):
            raise
        raise SystemFormatError(f"malformed manifest {path}: {exc!r}") from exc
    return DelaySystem(delays=delays, kind=kind, **mats)


def make_system(A, Ns: Sequence, taus: Sequence[float], B, B_in, C, kind=Kind.DETERMINISTIC) -> DelaySystem:
    """Convenience constructor from parallel lists of delay matrices and times."""
    if len(Ns) != len(taus):
        raise ValueError("Ns and taus must have the same length")
    return DelaySystem(A, tuple(DelayTerm(N, t) for N, t in zip(Ns, taus)), B, B_in, C, kind)

