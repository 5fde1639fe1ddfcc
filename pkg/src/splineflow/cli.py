"""Command-line interface.

Exit codes: 0 success, 2 usage or validation error, 3 unreadable input file,
4 numeric or shape error.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
import warnings
from pathlib import Path

from . import fileio
from .analysis import (
    cfl_max_timestep,
    cfl_min_spacestep,
    pooled_error,
    trajectory_error,
    virtual_equivalence,
)
from .batch_sparse import fit_flow
from .bench import run_bench, scaling_ratios
from .config import RunConfig
from .errors import InvalidArgumentError, SplineFlowError
from .evaluator import assemble_snapshot
from .flow_model import generate_flow, ground_truth, truncate_flow
from .partitioner import run_spmd

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4

_IO_KEYS = ("input", "output")


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="JSON file of RunConfig key-value pairs")
    g.add_argument("--seed", type=int)
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_const", const=True)
    mode.add_argument("--relaxed", dest="strict", action="store_const", const=False)
    g.add_argument("--convention", choices=["bezier-A", "paper-literal", "bezier_A", "paper_literal"])
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--format", choices=["csv", "bin"])
    return p


def _flow_args(p):
    p.add_argument("--field", choices=["uniform", "vortex", "hill"])
    p.add_argument("--speed", type=float, help="scalar flow speed, cm/s")
    p.add_argument("--M", type=int, help="number of trajectories")
    n = p.add_mutually_exclusive_group()
    n.add_argument("--S", type=int, help="points per trajectory")
    n.add_argument("--N", type=int, help="groups per trajectory (S = 3N + 1)")
    p.add_argument("--dt", type=float, help="coarse sample interval, s")
    p.add_argument("--max-step", type=float, help="largest internal integrator step, s")


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="splineflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic flow file")
    _flow_args(p)
    p.add_argument("-o", "--output")

    p = sub.add_parser("fit", parents=[common], help="compute spline coefficients of a flow file")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--raw-u", action="store_const", const=True, help="export raw splines instead of the blend")
    p.add_argument("--storage", choices=["constant_block", "csr", "dense"])

    p = sub.add_parser("eval", parents=[common], help="evaluate a coefficient file into a snapshot")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--V", type=int, help="subdivisions per segment")

    p = sub.add_parser("pipeline", parents=[common], help="gen (or read), fit and eval in one go")
    _flow_args(p)
    p.add_argument("--input", help="existing flow file instead of generating one")
    p.add_argument("-o", "--output")
    p.add_argument("--V", type=int)
    p.add_argument("--p", type=int, help="worker threads")
    p.add_argument("--raw-u", action="store_const", const=True)
    p.add_argument("--flow-out")
    p.add_argument("--coeffs-out")

    p = sub.add_parser("bench", parents=[common], help="timing and scaling report")
    p.add_argument("--M-list", type=_int_list)
    p.add_argument("--p-list", type=_int_list)
    p.add_argument("--N", type=int)
    p.add_argument("--V", type=int)
    p.add_argument("--stage", choices=["fit", "eval", "pipeline", "all"])
    p.add_argument("--repeats", type=int)
    p.add_argument("-o", "--output")

    p = sub.add_parser("cfl", parents=[common], help="CFL time step / space step calculator")
    p.add_argument("--space-step", type=float, help="cm")
    p.add_argument("--time-step", type=float, help="s")
    p.add_argument("--speed", type=float, required=True, help="cm/s")
    p.add_argument("--csv")

    p = sub.add_parser("equiv", parents=[common], help="spline vs FD time-step equivalence")
    p.add_argument("--L", type=float, required=True, help="linear flow length, cm")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--V", type=int, required=True)
    p.add_argument("--speed", type=float, required=True, help="cm/s")
    p.add_argument("--csv")

    p = sub.add_parser("compare", parents=[common], help="spline snapshot vs fine ground truth")
    _flow_args(p)
    p.add_argument("--V", type=int)
    p.add_argument("--truth-factor", type=int, help="ground truth samples per coarse interval")
    p.add_argument("-o", "--output", help="metrics CSV")
    p.add_argument("--pairs", help="paired truth/spline polyline CSV")
    return parser


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


_CLI_ONLY = {"command", "config", "csv", "pairs", "flow_out", "coeffs_out", "space_step",
             "time_step", "L"}


def make_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    values = {k: v for k, v in vars(args).items() if k not in _CLI_ONLY}
    if values.get("convention"):
        values["convention"] = values["convention"].replace("-", "_")
    return cfg.updated(values)


def _embedded(cfg):
    d = cfg.to_dict()
    for k in _IO_KEYS:
        d.pop(k, None)
    return d


def _emit(write, obj, out, **kwargs):
    """Run ``write(obj, path)`` targeting ``out`` or stdout when out is None/'-'."""
    if out not in (None, "-"):
        write(obj, out, **kwargs)
        return
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "out"
        write(obj, path, **kwargs)
        data = path.read_bytes()
    sys.stdout.flush()
    sys.stdout.buffer.write(data)
    sys.stdout.flush()


def _gen_flow(cfg):
    cfg.validate()
    flow = generate_flow(cfg.flow_field(), cfg.M, cfg.n_points(), cfg.coarse_dt())
    return flow


def cmd_gen(cfg, args):
    flow = _gen_flow(cfg)
    fmt = cfg.format
    _emit(lambda f, p, **kw: fileio.write_flow(f, p, fmt, **kw), flow, cfg.output, config=_embedded(cfg))


def cmd_fit(cfg, args):
    cfg.validate(need_flow=False)
    flow = truncate_flow(fileio.read_flow(cfg.input), strict=cfg.strict)
    fit = fit_flow(flow, cfg.conv, cfg.blend, cfg.curve, storage=cfg.storage)
    fmt = cfg.format
    _emit(lambda f, p, **kw: fileio.write_coeffs(f, p, fmt, **kw), fit, cfg.output, config=_embedded(cfg))


def cmd_eval(cfg, args):
    cfg.validate(need_flow=False)
    fit = fileio.read_coeffs(cfg.input)
    snap = assemble_snapshot(fit, cfg.V)
    _emit(fileio.write_snapshot_csv, snap, cfg.output, config=_embedded(cfg))


def cmd_pipeline(cfg, args):
    if cfg.input:
        cfg.validate(need_flow=False)
        flow = truncate_flow(fileio.read_flow(cfg.input), strict=cfg.strict)
    else:
        flow = _gen_flow(cfg)
    res, timing = run_spmd(flow, cfg.p, "pipeline", cfg.V, cfg.conv, cfg.blend, cfg.curve)
    conf = _embedded(cfg)
    if args.flow_out:
        fileio.write_flow(flow, args.flow_out, cfg.format, config=conf)
    if args.coeffs_out:
        fileio.write_coeffs(res.fit, args.coeffs_out, cfg.format, config=conf)
    _emit(fileio.write_snapshot_csv, res.snapshot, cfg.output, config=conf)
    print(f"pipeline: M={flow.M} N={flow.N} V={cfg.V} p={cfg.p} "
          f"time_execution={timing.time_execution:.6f}s time_cpu={timing.time_cpu:.6f}s "
          f"time_overhead={timing.time_overhead:.6f}s", file=sys.stderr)


def cmd_bench(cfg, args):
    cfg.validate(need_flow=False)
    N = cfg.N if cfg.N is not None else 100
    stages = ("fit", "eval", "pipeline") if cfg.stage == "all" else (cfg.stage,)
    rows, warns = run_bench(cfg.M_list, cfg.p_list, N, cfg.V, stages, cfg.repeats, cfg.seed,
                            conv=cfg.conv, params=cfg.blend, curve=cfg.curve)
    for stage in stages:
        for m, ratio in scaling_ratios(rows, stage).items():
            warns.append(f"info: {stage} time(M={2 * m})/time(M={m}) = {ratio:.3f}")
    mismatched = [r for r in rows if r["flops_instrumented"] != r["flops_exact"]]
    if mismatched:
        warns.append(f"{len(mismatched)} row(s) with instrumented flops != exact form")
    _emit(fileio.write_bench_csv, rows, cfg.output, warnings_=warns, config=_embedded(cfg))
    for w in warns:
        print(f"bench: {w}", file=sys.stderr)


def _report(rows, csv_path, cfg):
    for metric, value, units in rows:
        print(f"{metric} = {value!r} {units}".rstrip())
    if csv_path:
        fileio.write_metrics_csv(rows, csv_path, config=_embedded(cfg))


def cmd_cfl(cfg, args):
    rows = [("speed", args.speed, "cm/s")]
    if args.space_step is None and args.time_step is None:
        raise InvalidArgumentError("cfl needs --space-step and/or --time-step")
    if args.space_step is not None:
        rows += [("space_step", args.space_step, "cm"),
                 ("max_time_step", cfl_max_timestep(args.space_step, args.speed), "s")]
    if args.time_step is not None:
        rows += [("time_step", args.time_step, "s"),
                 ("min_space_step", cfl_min_spacestep(args.time_step, args.speed), "cm")]
    _report(rows, args.csv, cfg)


def cmd_equiv(cfg, args):
    rep = virtual_equivalence(args.L, args.N, args.V, args.speed)
    rows = [("label", rep.label, ""), ("dt_splines", rep.dt_splines, "s"),
            ("dt_fd", rep.dt_fd, "s"), ("ratio", rep.ratio, "1")]
    _report(rows, args.csv, cfg)


def compare(cfg):
    """gen -> fit -> eval -> error against the fine integrator."""
    flow = _gen_flow(cfg)
    fld = cfg.flow_field()
    flow = truncate_flow(flow, strict=cfg.strict)
    fit = fit_flow(flow, cfg.conv, cfg.blend, cfg.curve)
    snap = assemble_snapshot(fit, cfg.V)
    duration = (flow.S - 1) * flow.dt
    truths, metrics = [], []
    d = flow.dims
    for i in range(flow.M):
        gt = ground_truth(fld, flow.points[i, 0], duration, flow.dt / cfg.truth_factor)
        truths.append(gt.polyline)
        metrics.append(trajectory_error(snap.points[i, :, :d], gt.polyline[:, :d], flow.points[i, :, :d]))
    return flow, snap, truths, pooled_error(metrics)


def cmd_compare(cfg, args):
    cfg.validate()
    flow, snap, truths, err = compare(cfg)
    rows = [
        ("max_deviation", err.max_deviation, "cm"),
        ("rms_deviation", err.rms_deviation, "cm"),
        ("mean_chord", err.mean_chord, "cm"),
        ("rel_max", err.rel_max, "1"),
        ("rel_rms", err.rel_rms, "1"),
        ("M", flow.M, "1"),
        ("N", flow.N, "1"),
        ("V", cfg.V, "1"),
        ("points_per_trajectory", snap.n_points, "1"),
    ]
    conf = _embedded(cfg)
    _emit(fileio.write_metrics_csv, rows, cfg.output, config=conf)
    if args.pairs:
        fileio.write_pairs_csv(truths, snap, args.pairs, config=conf)


COMMANDS = {
    "gen": cmd_gen, "fit": cmd_fit, "eval": cmd_eval, "pipeline": cmd_pipeline,
    "bench": cmd_bench, "cfl": cmd_cfl, "equiv": cmd_equiv, "compare": cmd_compare,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = make_config(args)
            COMMANDS[args.command](cfg, args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except SplineFlowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
