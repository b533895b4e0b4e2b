"""Configuration of benchmark reduction studies.

Configs are plain JSON objects whose keys mirror :class:`ExampleConfig`;
missing keys fall back to the preset of the chosen example.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

__all__ = ["EXAMPLES", "ConfigError", "ExampleConfig", "preset", "load_config"]

EXAMPLES = ("stuart-landau", "gle", "gbm", "file")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExampleConfig:
    """All knobs of a reduction study.

    Signals use the text forms ``zero``, ``sin:<f>`` and ``const:<c>``.
    ``x0`` is ``random`` (N(0, x0_std^2) coordinates in the B_in frame,
    drawn from ``seed``), ``zero`` or ``const:<c>``.

    ``bound_mode`` selects the certified bound:

    * ``corollary``: uncontrolled-delay bound; Gramians use N scaled by sqrt(T0)
    * ``bilinear``: bilinear-delay bound with the scalar signal ``v_form``
    * ``sdde``: stochastic bound; full and reduced noise are independent
    """

    example: str = "stuart-landau"
    path: str | None = None
    # Stuart-Landau
    d: int = 50
    alpha: float = -1.2
    # GLE
    d_particles: int = 50
    hurst: float = 0.75
    r_mem: float = 0.2
    perturb_scale: float = 0.1
    coupling_scale: float = 0.5
    actuation: str = "broadcast"
    # GBM
    perturb_std: float = 0.01
    r_obs: int = 10
    # shared
    tau: float = 0.1
    T: float = 2.0
    dt: float = 0.01
    reduction_dims: tuple[int, ...] = tuple(range(1, 13))
    n_paths: int = 1
    seed: int = 0
    u_form: str = "zero"
    v_form: str = "const:1"
    x0: str = "random"
    x0_std: float = math.sqrt(0.5)
    bound_mode: str = "corollary"
    T0: float | None = None
    gram_tol: float = 1e-10
    max_iter: int = 500
    envelope: tuple[float, float] | None = None
    trace_dims: tuple[int, ...] = ()
    trace_outputs: tuple[int, ...] = (0,)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "reduction_dims", tuple(int(r) for r in self.reduction_dims))
        object.__setattr__(self, "trace_dims", tuple(int(r) for r in self.trace_dims))
        object.__setattr__(self, "trace_outputs", tuple(int(i) for i in self.trace_outputs))
        if self.envelope is not None:
            object.__setattr__(self, "envelope", tuple(float(v) for v in self.envelope))

    @property
    def state_dim(self) -> int | None:
        if self.example == "gle":
            return 2 * self.d_particles
        if self.example == "file":
            return None
        return self.d

    def validate(self) -> None:
        """Raise :class:`ConfigError` on the first inconsistent setting."""
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; expected one of {EXAMPLES}")
        if self.example == "file" and not self.path:
            raise ConfigError("example 'file' needs a manifest path")
        if not self.dt > 0 or not self.T > 0:
            raise ConfigError("T and dt must be positive")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        k = self.tau / self.dt
        if abs(k - round(k)) > 1e-9 * k or round(k) < 1:
            raise ConfigError(f"tau={self.tau} is not an integer multiple of dt={self.dt}")
        if self.example == "gle":
            k = (self.r_mem / 2) / self.dt
            if abs(k - round(k)) > 1e-9 * k or round(k) < 1:
                raise ConfigError(f"GLE delay r_mem/2={self.r_mem / 2} is not a multiple of dt={self.dt}")
        if not self.reduction_dims:
            raise ConfigError("reduction_dims is empty")
        dmax = self.state_dim
        for r in self.reduction_dims:
            if r < 1 or (dmax is not None and r > dmax):
                raise ConfigError(f"reduction dimension {r} outside 1..{dmax}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be positive")
        if self.bound_mode not in ("corollary", "bilinear", "sdde"):
            raise ConfigError(f"unknown bound_mode {self.bound_mode!r}")
        if self.T0 is not None and not self.T0 > 0:
            raise ConfigError("T0 must be positive")
        if self.actuation not in ("identity", "broadcast"):
            raise ConfigError(f"unknown actuation {self.actuation!r}")

    def with_overrides(self, **changes) -> "ExampleConfig":
        names = {f.name for f in fields(self)}
        unknown = set(changes) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


_PRESETS = {
    "stuart-landau": dict(
        example="stuart-landau",
        d=50,
        alpha=-1.2,
        tau=0.1,
        T=2.0,
        dt=0.01,
        reduction_dims=tuple(range(1, 13)),
        u_form="zero",
        x0="random",
        bound_mode="corollary",
        trace_dims=(2, 6),
        trace_outputs=(0,),
    ),
    "gle": dict(
        example="gle",
        d_particles=50,
        tau=0.1,
        T=10.0,
        dt=0.01,
        reduction_dims=(2, 4, 6, 8, 10, 12, 14, 16),
        u_form="sin:20",
        v_form="const:1",
        x0="zero",
        bound_mode="bilinear",
        actuation="broadcast",
        trace_dims=(2, 10),
        trace_outputs=(0, 50),
    ),
    "gbm": dict(
        example="gbm",
        d=40,
        r_obs=10,
        tau=0.1,
        T=2.0,
        dt=0.01,
        reduction_dims=(2, 5, 10, 15, 20, 25, 30, 35),
        n_paths=2000,
        u_form="sin:20",
        x0="const:0.1",
        bound_mode="sdde",
        trace_dims=(5, 20),
        trace_outputs=(0,),
    ),
    "file": dict(example="file", bound_mode="bilinear", x0="zero"),
}


def preset(example: str) -> ExampleConfig:
    """Default configuration of a named example."""
    if example not in _PRESETS:
        raise ConfigError(f"unknown example {example!r}; expected one of {EXAMPLES}")
    return ExampleConfig(**_PRESETS[example])


def load_config(path, example: str | None = None) -> ExampleConfig:
    """Read a JSON config; keys override the preset of ``example`` (or of the file's ``example`` key)."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    name = raw.get("example", example)
    if example is not None and name != example:
        raise ConfigError(f"config is for {name!r}, not {example!r}")
    cfg = preset(name or "stuart-landau").with_overrides(**raw)
    cfg.validate()
    return cfg
