"""Command line interface.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 hypotheses not
certified (only with ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .balance import RankCollapse, Variant, balance_transform, compute_gramians, error_hankel, truncate
from .bounds import bound_bilinear_delay, bound_sdde, bound_uncontrolled_delay, signal_norms
from .lyapunov import LyapunovError
from .sim import Grid, IncommensurateDelay, simulate_bilinear_dde, simulate_dde, simulate_sdde, write_trajectory_csv
from .stability import stability_report
from .sysmodel import HistorySpec, InitialState, Kind, SignalSpec, SystemFormatError, load_system, save_system, validate_system

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_UNCERTIFIED = 4

log = logging.getLogger("delaybt")


class _Invalid(Exception):
    pass


def _load_valid(path):
    try:
        sys_ = load_system(path)
    except FileNotFoundError as exc:
        raise _Invalid(f"missing artifact: {exc.filename}") from exc
    bad = validate_system(sys_)
    if bad:
        raise _Invalid("; ".join(f"{v.code}: {v.message}" for v in bad))
    return sys_


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    return obj


def _print_json(obj):
    print(json.dumps(_finite(obj), indent=2, default=str))


def cmd_validate(args) -> int:
    try:
        sys_ = load_system(args.manifest)
    except FileNotFoundError as exc:
        print(f"invalid: missing artifact: {exc.filename}")
        return EXIT_INVALID
    bad = validate_system(sys_)
    for v in bad:
        print(f"{v.code}: {v.message}")
    if bad:
        return EXIT_INVALID
    print(f"ok: {sys_.kind.value} d={sys_.d} n={sys_.n} k={sys_.k} m={sys_.m} delays={sys_.taus}")
    return EXIT_OK


def cmd_gramians(args) -> int:
    sys_ = _load_valid(args.manifest)
    gram = compute_gramians(sys_, args.variant, args.tol)
    bal = balance_transform(sys_, gram)
    if args.out:
        np.savez(args.out, P=gram.P_reach, O=gram.O_obs, hsv=bal.hsv)
    _print_json({"variant": gram.variant.value, "residuals": list(gram.residuals), "r0": bal.r0, "hsv": bal.hsv})
    return EXIT_OK


def cmd_reduce(args) -> int:
    sys_ = _load_valid(args.manifest)
    bal = balance_transform(sys_, compute_gramians(sys_, args.variant, args.tol))
    if not 1 <= args.r <= bal.r0:
        raise _Invalid(f"--r must lie in 1..{bal.r0}")
    red = truncate(bal, args.r)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"reduced_r{args.r}.json"
    save_system(red.system, target)
    np.savez(out / f"reduced_r{args.r}.transform.npz", Q=red.Q_r, Qinv=red.Qinv_r, hsv=bal.hsv)
    _print_json({"manifest": str(target), "r": args.r, "hsv_tail_sum": float(red.hsv_tail.sum())})
    return EXIT_OK


def cmd_bound(args) -> int:
    full = _load_valid(args.full)
    red = _load_valid(args.reduced)
    mode = args.mode
    if mode == "auto":
        mode = "sdde" if full.kind is Kind.STOCHASTIC else ("corollary" if args.control == "zero" else "bilinear")
    variant = Variant.SDDE if mode == "sdde" else Variant.BILINEAR
    grid = Grid.from_horizon(args.T, args.dt)
    u = signal_norms(SignalSpec.parse(args.control, full.n), grid)
    T0 = args.T0 if args.T0 is not None else args.T
    scale = math.sqrt(T0) if mode == "corollary" else 1.0
    s1, s2 = full.scale_delays(scale), red.scale_delays(scale)
    tn = error_hankel(s1, s2, variant, args.tol).trace_norm
    q = stability_report([s1, s2]).q
    if mode == "corollary":
        rep = bound_uncontrolled_delay(tn, args.x0_norm, u, T0, q)
    elif mode == "bilinear":
        v = signal_norms(SignalSpec.parse(args.v, 1), grid)
        rep = bound_bilinear_delay(tn, args.x0_norm, u, v, q)
    else:
        rep = bound_sdde(tn, args.x0_norm, u.l2, q)
    _print_json(
        {
            "theorem": rep.theorem,
            "trace_norm": tn,
            "bound": rep.bound_value,
            "components": rep.components,
            "certified": rep.certified,
            "assumptions": [
                {"name": a.name, "satisfied": a.satisfied, "margin": a.margin, "note": a.note} for a in rep.assumptions
            ],
        }
    )
    if args.strict and not rep.certified:
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_simulate(args) -> int:
    sys_ = _load_valid(args.manifest)
    grid = Grid.from_horizon(args.T, args.dt)
    u = SignalSpec.parse(args.control, sys_.n)
    if args.x0 == "zero":
        x0 = InitialState.zero(sys_.d)
    else:
        head, _, arg = args.x0.partition(":")
        if head != "const" or not arg:
            raise _Invalid(f"cannot parse --x0 {args.x0!r}")
        x0 = InitialState(w=np.full(sys_.k, float(arg)))
    hist = HistorySpec.zero()
    if sys_.kind is Kind.STOCHASTIC:
        ens = simulate_sdde(sys_, u, x0, hist, grid, args.paths, args.seed, args.noise)
    elif sys_.kind is Kind.BILINEAR:
        ens = simulate_bilinear_dde(sys_, u, SignalSpec.parse(args.v, 1), x0, hist, grid)
    else:
        ens = simulate_dde(sys_, u, x0, hist, grid)
    out = args.out or "-"
    if out == "-":
        write_trajectory_csv(ens, "/dev/stdout", include_states=not args.outputs_only)
    else:
        write_trajectory_csv(ens, out, include_states=not args.outputs_only)
        print(f"wrote {ens.n_paths} path(s), {grid.steps + 1} nodes to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench.config import load_config, preset
    from .bench.study import run_reduction_study, write_study_outputs

    cfg = load_config(args.config, args.example) if args.config else preset(args.example)
    if args.paths is not None:
        cfg = cfg.with_overrides(n_paths=args.paths)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    cfg.validate()
    report = run_reduction_study(cfg, log=log.info)
    paths = write_study_outputs(report, args.out)
    if not args.no_plot:
        from .bench.plotting import render_study

        paths["figure"] = render_study(paths["csv"], paths["traces"])
    print(f"{'r':>4} {'trace_norm':>12} {'bound':>12} {'error':>12} {'std_err':>10}  certified")
    for row in report.rows:
        print(
            f"{row.r:>4} {row.trace_norm:>12.5g} {row.bound:>12.5g} {row.measured_error:>12.5g} "
            f"{row.measured_std_error:>10.3g}  {row.certified}"
        )
    for k, p in paths.items():
        print(f"{k}: {p}")
    if args.strict and not all(row.certified for row in report.rows):
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_plot(args) -> int:
    from .bench.plotting import render_study

    csv_path = Path(args.csv)
    if not csv_path.is_file():
        raise _Invalid(f"missing artifact: {csv_path}")
    traces = args.traces or csv_path.with_name(csv_path.name.replace(".csv", ".traces.npz"))
    print(render_study(csv_path, traces, args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaybt", description="Balanced truncation for delay systems")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a system manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("gramians", help="Gramians and Hankel singular values")
    s.add_argument("manifest")
    s.add_argument("--variant", choices=[v.value for v in Variant], default="bilinear")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out", help="optional .npz for P, O and hsv")
    s.set_defaults(func=cmd_gramians)

    s = sub.add_parser("reduce", help="balanced truncation to order r")
    s.add_argument("manifest")
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--variant", choices=[v.value for v in Variant], default="bilinear")
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("bound", help="a-priori output error bound between two systems")
    s.add_argument("full")
    s.add_argument("reduced")
    s.add_argument("--mode", choices=["auto", "corollary", "bilinear", "sdde"], default="auto")
    s.add_argument("--control", default="zero")
    s.add_argument("--v", default="const:1", help="scalar delay modulation for the bilinear bound")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--T0", type=float, default=None)
    s.add_argument("--x0-norm", type=float, default=0.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="simulate a system and write a trajectory CSV")
    s.add_argument("manifest")
    s.add_argument("--control", default="zero")
    s.add_argument("--v", default="const:1")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--x0", default="zero", help="zero or const:<c> (coordinates in the B_in frame)")
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", choices=["independent", "common"], default="independent")
    s.add_argument("--out", default=None)
    s.add_argument("--outputs-only", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bench", help="run a reduction study; writes CSV, manifest, traces and a PNG")
    s.add_argument("example", choices=["stuart-landau", "gle", "gbm", "file"])
    s.add_argument("--config")
    s.add_argument("--out", default="results")
    s.add_argument("--paths", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--no-plot", action="store_true")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("plot", help="regenerate a study figure from its CSV and trace archive")
    s.add_argument("csv")
    s.add_argument("--traces", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_plot)
    return p


def _exit_code(exc: BaseException) -> int | None:
    from .bench.config import ConfigError
    from .bench.study import StudyError

    if isinstance(exc, StudyError):
        return _exit_code(exc.cause)
    if isinstance(exc, (LyapunovError, RankCollapse, np.linalg.LinAlgError)):
        return EXIT_SOLVER
    if isinstance(exc, (_Invalid, SystemFormatError, ConfigError, IncommensurateDelay, FileNotFoundError, ValueError)):
        return EXIT_INVALID
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
