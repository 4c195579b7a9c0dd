"""Command line entry point: ``mfstokes <subcommand> --config PATH``.

Exit status: 0 on success, 1 on invalid configuration or input, 2 when a
run fails.
"""
import argparse
import os
import sys

import numpy as np

from . import set_threads
from .config import ConfigError, ExperimentConfig, parse_config, reference_page, with_overrides
from .experiments import RunError, run_converge, run_meso, run_micro, run_summary
from .io import emit_outputs, read_snapshot, save_cloud, save_micro, write_diagnostics, write_summary
from .metrics import TransportError, record_from, wasserstein2
from .micro import MicroState, solve_drag, blob_radius

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _sweep(text):
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def build_parser():
    parser = argparse.ArgumentParser(prog="mfstokes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="key = value config file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--sweep", type=_sweep, help='particle counts, e.g. "256,512,1024"')

    common(sub.add_parser("micro-run", help="simulate the particle system"))
    common(sub.add_parser("meso-run", help="simulate the Lagrangian cloud"))
    common(sub.add_parser("converge", help="N-sweep micro vs meso study"))
    w2 = sub.add_parser("w2", help="W2 distance between two snapshot files")
    w2.add_argument("a")
    w2.add_argument("b")
    w2.add_argument("--space-only", action="store_true", help="compare positions only")
    common(w2, config_required=False)
    diag = sub.add_parser("diag", help="recompute diagnostics from a micro snapshot")
    diag.add_argument("snapshot")
    common(diag, config_required=False)
    ref = sub.add_parser("config-reference", help="print the configuration key table")
    ref.add_argument("--out", help="write to this file instead of stdout")
    return parser


def _load(args):
    config = parse_config(args.config) if args.config else ExperimentConfig()
    return with_overrides(config, seed=args.seed, sweep=args.sweep, output_dir=args.out)


def _micro(config):
    result = run_micro(config)
    out = config.output_dir
    emit_outputs([], result.records, out, run_summary(config, result, "micro"))
    save_micro(os.path.join(out, "final_state.csv"), result.final)


def _meso(config):
    result = run_meso(config)
    out = config.output_dir
    emit_outputs([], result.records, out, run_summary(config, result, "meso"))
    save_cloud(os.path.join(out, "final_cloud.csv"), result.final)


def _converge(config):
    out = config.output_dir

    def keep(N, seed, micro, meso):
        write_diagnostics(micro.records, os.path.join(out, "runs", f"micro_N{N}_seed{seed}.csv"))
        write_diagnostics(meso.records, os.path.join(out, "runs", f"meso_N{N}_seed{seed}.csv"))

    rows, summary = run_converge(config, on_run=keep)
    emit_outputs(rows, [], out, summary)
    if summary["failed_runs"]:
        raise RunError(f"{summary['failed_runs']} run(s) failed; see converge.csv")


def _w2(args, config):
    Pa, Va, ma, _ = read_snapshot(args.a)
    Pb, Vb, mb, _ = read_snapshot(args.b)
    A = Pa if args.space_only else np.hstack([Pa, Va])
    B = Pb if args.space_only else np.hstack([Pb, Vb])
    res = wasserstein2(A, B, ma, mb, method=config.w2_method, cap=config.w2_cap,
                       entropic_fallback=config.w2_entropic_fallback,
                       epsilon=config.w2_epsilon or None)
    print(f"w2={res.w2!r} cost={res.cost!r} method={res.method} support={res.plan_support_size}")
    if args.out:
        write_summary({"w2": res.w2, "cost": res.cost, "method": res.method,
                       "plan_support_size": res.plan_support_size},
                      os.path.join(args.out, "w2.json"))


def _diag(args, config):
    X, V, _, meta = read_snapshot(args.snapshot)
    state = MicroState.from_arrays(X, V, float(meta.get("t", 0.0)))
    forces, _ = solve_drag(state, blob_radius(state, config.kappa), config.drag_tol,
                           config.drag_max_iter, dense_fallback=True)
    record = record_from(state.t, state.X, state.V, forces.nf)
    out = args.out or config.output_dir
    write_diagnostics([record], os.path.join(out, "diagnostics.csv"))
    print(",".join(f"{k}={v!r}" for k, v in record.as_dict().items()))


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "config-reference":
        text = reference_page()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    try:
        config = _load(args)
        set_threads(args.threads)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"mfstokes: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "micro-run":
            _micro(config)
        elif args.command == "meso-run":
            _meso(config)
        elif args.command == "converge":
            if not config.sweep:
                print("mfstokes: invalid input: converge needs sweep.n or --sweep", file=sys.stderr)
                return EXIT_INVALID
            _converge(config)
        elif args.command == "w2":
            _w2(args, config)
        elif args.command == "diag":
            _diag(args, config)
    except (TransportError, FileNotFoundError) as exc:
        print(f"mfstokes: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failure of a simulation or writer
        print(f"mfstokes: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
