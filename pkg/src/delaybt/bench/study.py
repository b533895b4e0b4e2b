"""Reduction studies: reduce, simulate, bound and compare over a list of orders."""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..balance import TruncationGapWarning, Variant, balance_transform, compute_gramians, error_hankel, truncate
from ..bounds import bound_bilinear_delay, bound_sdde, bound_uncontrolled_delay, signal_norms
from ..sim import Grid, NoiseMode, l2_output_error, simulate_bilinear_dde, simulate_dde, simulate_sdde
from ..stability import check_sdde_ms_stability, stability_report
from ..sysmodel import DelaySystem, HistorySpec, InitialState, Kind, SignalSpec, load_system, validate_system
from .config import ConfigError, ExampleConfig
from .generators import gen_gbm, gen_gle, gen_stuart_landau

__all__ = [
    "StudyRow",
    "StudyReport",
    "StudyError",
    "CSV_COLUMNS",
    "build_system",
    "initial_coordinates",
    "run_reduction_study",
    "write_study_csv",
    "read_study_csv",
    "write_study_outputs",
]

CSV_COLUMNS = (
    "example",
    "d",
    "r",
    "dt",
    "T",
    "n_paths",
    "seed",
    "trace_norm",
    "bound",
    "measured_error",
    "measured_std_error",
    "certified",
)


class StudyError(RuntimeError):
    """An upstream failure annotated with the reduced order being processed."""

    def __init__(self, r: int | None, cause: BaseException):
        where = f"r={r}" if r is not None else "setup"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.r = r
        self.cause = cause


@dataclass(frozen=True)
class StudyRow:
    r: int
    hsv_tail_sum: float
    trace_norm: float
    bound: float
    measured_error: float
    measured_std_error: float
    certified: bool
    relative_error: float = math.nan
    common_error: float = math.nan
    common_std_error: float = math.nan
    q: float = math.nan
    failed_assumptions: tuple[str, ...] = ()


@dataclass
class StudyReport:
    config: ExampleConfig
    rows: list[StudyRow]
    manifest: dict
    hsv: np.ndarray
    traces: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return int(self.manifest["d"])

    def row(self, r: int) -> StudyRow:
        for row in self.rows:
            if row.r == r:
                return row
        raise KeyError(r)


def build_system(cfg: ExampleConfig) -> DelaySystem:
    """Instantiate the full-order system described by ``cfg``."""
    if cfg.example == "stuart-landau":
        return gen_stuart_landau(cfg.d, cfg.alpha, cfg.tau)
    if cfg.example == "gle":
        return gen_gle(
            cfg.d_particles,
            cfg.hurst,
            cfg.r_mem,
            cfg.perturb_scale,
            cfg.coupling_scale,
            seed=cfg.seed,
            actuation=cfg.actuation,
        )
    if cfg.example == "gbm":
        return gen_gbm(cfg.d, cfg.r_obs, cfg.tau, cfg.perturb_std, seed=cfg.seed)
    sys = load_system(cfg.path)
    bad = validate_system(sys)
    if bad:
        raise ConfigError("; ".join(f"{v.code}: {v.message}" for v in bad))
    return sys


def initial_coordinates(cfg: ExampleConfig, k: int) -> np.ndarray:
    """Coordinates w of the initial state x0 = B_in w."""
    text = cfg.x0.strip()
    if text == "zero":
        return np.zeros(k)
    if text == "random":
        return cfg.x0_std * np.random.default_rng(cfg.seed).standard_normal(k)
    head, _, arg = text.partition(":")
    if head == "const" and arg:
        return np.full(k, float(arg))
    raise ConfigError(f"cannot parse initial state {cfg.x0!r}")


def _bound_mode(cfg: ExampleConfig, sys: DelaySystem) -> str:
    if sys.kind is Kind.STOCHASTIC:
        if cfg.bound_mode != "sdde" and cfg.example != "file":
            raise ConfigError("stochastic systems need bound_mode 'sdde'")
        return "sdde"
    if cfg.bound_mode == "sdde":
        raise ConfigError("bound_mode 'sdde' needs a stochastic system")
    return cfg.bound_mode


def _simulate(mode, sys, u, v, x0, grid, cfg, stream=0, noise=NoiseMode.INDEPENDENT):
    hist = HistorySpec.zero()
    if mode == "sdde":
        return simulate_sdde(sys, u, x0, hist, grid, cfg.n_paths, cfg.seed, noise, stream=stream, keep_states=False)
    if mode == "bilinear":
        return simulate_bilinear_dde(sys, u, v, x0, hist, grid, keep_states=False)
    return simulate_dde(sys, u, x0, hist, grid, keep_states=False)


def run_reduction_study(cfg: ExampleConfig, log=None) -> StudyReport:
    """Reduce the configured system to every order in ``cfg.reduction_dims``.

    For each r the balanced truncation is formed once, the error-system trace
    norm and matching bound are evaluated, and full and reduced models are
    simulated with the same control and initial coordinates.  Stochastic runs
    use independent noise for the certified error and common noise for the
    trajectory overlay.
    """
    cfg.validate()
    t_start = time.perf_counter()
    try:
        sys = build_system(cfg)
        mode = _bound_mode(cfg, sys)
        variant = Variant.SDDE if mode == "sdde" else Variant.BILINEAR
        T0 = cfg.T0 if cfg.T0 is not None else cfg.T
        scale = math.sqrt(T0) if mode == "corollary" else 1.0
        gram_sys = sys.scale_delays(scale) if scale != 1.0 else sys
        gram = compute_gramians(gram_sys, variant, cfg.gram_tol, cfg.max_iter)
        bal = balance_transform(gram_sys, gram)
        grid = Grid.from_horizon(cfg.T, cfg.dt)
        u = SignalSpec.parse(cfg.u_form, sys.n)
        v = SignalSpec.parse(cfg.v_form, 1)
        w = initial_coordinates(cfg, sys.k)
        x0 = InitialState(w=w)
        u_norms = signal_norms(u, grid)
        v_norms = signal_norms(v, grid)
        full = _simulate(mode, sys, u, v, x0, grid, cfg, stream=0)
        zero = full.outputs * 0.0
        out_norm, _ = l2_output_error(full, type(full)(grid, zero, None))
        ms = check_sdde_ms_stability(sys.A, [], sys.Ns, max(sys.taus, default=0.0)) if mode == "sdde" else None
    except Exception as exc:
        raise StudyError(None, exc) from exc

    rows: list[StudyRow] = []
    # indices beyond the output count are dropped so presets work at any size
    outs = [i for i in cfg.trace_outputs if 0 <= i < sys.m]
    traces = {
        "t": grid.times,
        "outputs": np.array(outs, dtype=int),
        "full": full.outputs[0][:, outs],
        "norm_full": np.linalg.norm(full.outputs[0], axis=1),
    }
    stab_log = {}
    gap_notes = []
    for r in sorted(set(cfg.reduction_dims)):
        try:
            if r > bal.r0:
                raise ValueError(f"reduced order exceeds numerical rank r0={bal.r0}")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", TruncationGapWarning)
                red = truncate(bal, r)
            if caught:
                gap_notes.append(r)
            red_sim = red.system.scale_delays(1.0 / scale) if scale != 1.0 else red.system
            spec = error_hankel(gram_sys, red.system, variant, cfg.gram_tol, cfg.max_iter)
            stab = stability_report([gram_sys, red.system], envelope=cfg.envelope)
            stab_log[r] = {"M": stab.M, "omega": stab.omega, "q": stab.q, "notes": list(stab.notes)}
            wn = float(np.linalg.norm(w))
            if mode == "corollary":
                rep = bound_uncontrolled_delay(spec.trace_norm, wn, u_norms, T0, stab.q)
            elif mode == "bilinear":
                rep = bound_bilinear_delay(spec.trace_norm, wn, u_norms, v_norms, stab.q)
            else:
                rep = bound_sdde(spec.trace_norm, wn, u_norms.l2, stab.q)
            other = _simulate(mode, red_sim, u, v, x0, grid, cfg, stream=1)
            err, se = l2_output_error(full, other)
            common = (math.nan, math.nan)
            overlay = other
            if mode == "sdde":
                overlay = _simulate(mode, red_sim, u, v, x0, grid, cfg, stream=0, noise=NoiseMode.COMMON)
                common = l2_output_error(full, overlay)
            if r in cfg.trace_dims:
                traces[f"r{r}"] = overlay.outputs[0][:, outs]
                traces[f"norm_r{r}"] = np.linalg.norm(overlay.outputs[0], axis=1)
            rows.append(
                StudyRow(
                    r=r,
                    hsv_tail_sum=float(np.sum(bal.hsv[r:])),
                    trace_norm=spec.trace_norm,
                    bound=rep.bound_value,
                    measured_error=err,
                    measured_std_error=se,
                    certified=rep.certified,
                    relative_error=err / out_norm if out_norm > 0 else math.nan,
                    common_error=common[0],
                    common_std_error=common[1],
                    q=stab.q,
                    failed_assumptions=tuple(a.name for a in rep.assumptions if not a.satisfied),
                )
            )
            if log is not None:
                log(f"r={r}: trace_norm={spec.trace_norm:.4g} bound={rep.bound_value:.4g} error={err:.4g}")
        except Exception as exc:
            raise StudyError(r, exc) from exc

    manifest = {
        "example": cfg.example,
        "config": cfg.to_dict(),
        "d": sys.d,
        "n": sys.n,
        "k": sys.k,
        "m": sys.m,
        "kind": sys.kind.value,
        "seed": cfg.seed,
        "bound_mode": mode,
        "variant": variant.value,
        "T0": T0 if mode == "corollary" else None,
        "delay_scale_for_gramians": scale,
        "gramian_residuals": list(gram.residuals),
        "r0": bal.r0,
        "initial_coordinates": w.tolist(),
        "full_output_l2_norm": out_norm,
        "stability": {str(r): s for r, s in stab_log.items()},
        "near_degenerate_truncations": gap_notes,
        "sdde_mean_square": None
        if ms is None
        else {k: v for k, v in asdict(ms).items() if k != "G"},
        "noise_streams": {"full": 0, "reduced_independent": 1, "reduced_common": 0} if mode == "sdde" else None,
        "runtime_seconds": time.perf_counter() - t_start,
    }
    return StudyReport(cfg, rows, manifest, bal.hsv.copy(), traces)


def write_study_csv(report: StudyReport, path) -> None:
    cfg = report.config
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            w.writerow(
                [
                    cfg.example,
                    report.d,
                    row.r,
                    repr(cfg.dt),
                    repr(cfg.T),
                    cfg.n_paths,
                    cfg.seed,
                    repr(row.trace_norm),
                    repr(row.bound),
                    repr(row.measured_error),
                    repr(row.measured_std_error),
                    str(row.certified).lower(),
                ]
            )


def read_study_csv(path) -> list[dict]:
    """Rows of a study CSV with numeric columns converted."""
    ints = {"d", "r", "n_paths", "seed"}
    floats = {"dt", "T", "trace_norm", "bound", "measured_error", "measured_std_error"}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k in ints:
                    row[k] = int(v)
                elif k in floats:
                    row[k] = float(v)
                elif k == "certified":
                    row[k] = v == "true"
                else:
                    row[k] = v
            out.append(row)
    return out


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def write_study_outputs(report: StudyReport, outdir, stem: str | None = None) -> dict:
    """CSV, JSON manifest (with extra per-row columns) and trace archive.

    Returns the written paths keyed by ``csv``, ``manifest`` and ``traces``.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = stem or report.config.example
    paths = {
        "csv": outdir / f"{stem}.csv",
        "manifest": outdir / f"{stem}.manifest.json",
        "traces": outdir / f"{stem}.traces.npz",
    }
    write_study_csv(report, paths["csv"])
    man = dict(report.manifest)
    man["hsv"] = report.hsv.tolist()
    man["rows"] = [asdict(row) for row in report.rows]
    paths["manifest"].write_text(json.dumps(_jsonable(man), indent=2) + "\n")
    np.savez(paths["traces"], **report.traces)
    return paths
