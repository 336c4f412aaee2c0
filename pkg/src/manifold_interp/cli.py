"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
Command-line flags override values from the ``--config`` JSON file, which
override the built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, metrics, trajgen
from .baselines import InterpConfig, KnotSeries, MethodId, interpolate_with
from .errors import ExtrapolationUnsupported, InterpolationError, ParseError, ValidationError

logger = logging.getLogger("manifold_interp")


class UsageError(Exception):
    pass


def _load_spec(args) -> bench.ExperimentSpec:
    if args.config is None:
        spec = bench.ExperimentSpec()
    else:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            spec = bench.ExperimentSpec.load(path)
        except (ParseError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid config {path}: {exc}") from None
    overrides = {}
    if getattr(args, "method", None):
        overrides["methods"] = [m for item in args.method for m in item.split(",") if m]
    for flag, name in (("k", "k"), ("sigma", "sigma"), ("seed", "master_seed"), ("policy", "mask_policy")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        try:
            spec = bench.ExperimentSpec.from_dict({**spec.to_dict(), **overrides})
        except (ParseError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    return spec


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args)
    manifest = []
    for li, length in enumerate(spec.curve_lengths):
        for ci in range(spec.curves_per_length):
            cases = bench.make_cases(spec, li, ci)
            stem = f"curve_L{length}_C{ci}"
            truth = out / f"{stem}_truth.csv"
            trajgen.write_trajectory_csv(truth, cases[0].clean)
            manifest.append({"file": truth.name, "seed": cases[0].curve_seed})
            for case in cases:
                ratio = spec.loss_ratios[case.ratio_index]
                obs = out / f"{stem}_run{case.run}_obs.csv"
                if case.ratio_index == 0:
                    trajgen.write_trajectory_csv(obs, case.observed)
                    manifest.append({"file": obs.name, "seed": bench.derive_seed(spec.master_seed, li, ci, 1, case.run)})
                mask = out / f"{stem}_run{case.run}_r{ratio:g}_mask.csv"
                trajgen.write_mask_csv(mask, case.mask)
                manifest.append(
                    {"file": mask.name, "seed": bench.derive_seed(spec.master_seed, li, ci, 2, case.ratio_index, case.run)}
                )
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"spec": spec.to_dict(), "files": manifest}, fh, indent=2)
        fh.write("\n")
    for entry in manifest:
        print(f"{entry['file']}\t{entry['seed']}")
    return 0


def cmd_interpolate(args) -> int:
    try:
        traj = trajgen.load_trajectory_csv(args.traj)
        mask = trajgen.load_mask_csv(args.mask)
    except FileNotFoundError as exc:
        raise UsageError(f"file not found: {exc.filename}") from None
    except (ParseError, ValidationError) as exc:
        raise UsageError(str(exc)) from None
    unknown = np.setdiff1d(mask, traj.t)
    if unknown.size:
        raise UsageError(f"mask lists t={unknown[0]} which is not in the trajectory")
    try:
        method = MethodId.parse(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = InterpConfig(k=args.k, sigma=args.sigma)
    lost = np.isin(traj.t, mask)
    known_t = traj.t[~lost].astype(float)
    if known_t.size < 2:
        print("error: fewer than 2 observed samples", file=sys.stderr)
        return 1
    xy = traj.xy.copy()
    try:
        for d in (0, 1):
            knots = KnotSeries(known_t, traj.xy[~lost, d])
            xy[lost, d] = interpolate_with(method, knots, traj.t[lost].astype(float), config)
    except ExtrapolationUnsupported as exc:
        print(f"error: {method} cannot extrapolate past the observed samples ({exc}); "
              f"only LLI fills trailing gaps", file=sys.stderr)
        return 1
    except (InterpolationError, ValueError) as exc:
        print(f"error: {method} failed: {exc}", file=sys.stderr)
        return 1
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,x,y,source\n")
        for ti, (x, y), is_lost in zip(traj.t, xy, lost):
            fh.write(f"{int(ti)},{metrics.fmt(x)},{metrics.fmt(y)},{'interpolated' if is_lost else 'observed'}\n")
    print(f"{int(lost.sum())} of {len(traj)} samples interpolated with {method} -> {args.out}")
    return 0


def _threads(args):
    return 1 if getattr(args, "timing_serial", False) else None


def _status(records) -> int:
    if records and not any(r.ok for r in records):
        print("error: every cell failed", file=sys.stderr)
        return 1
    failed = [r for r in records if not r.ok]
    for r in failed:
        print(f"failed cell: {r.method} curve_seed={r.curve_seed} ratio={r.loss_ratio:g}: {r.message}", file=sys.stderr)
    return 0


def _print_quantiles(curves):
    table = metrics.quantile_table(curves)
    print("\nerror (cm) at CDF level")
    print(f"{'method':<10}" + "".join(f"{format(q, '.0%'):>9}" for q in metrics.TABLE_LEVELS))
    for method, values in table.items():
        print(f"{method:<10}" + "".join(f"{v:>9.3f}" for v in values))


def cmd_bench(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args)
    records = bench.run_accuracy_sweep(spec, threads=_threads(args))
    metrics.write_metrics_csv(out / "metrics.csv", bench.metrics_rows(records))
    curves = bench.cdf_curves(records)
    metrics.write_cdf_csv(out / "cdf.csv", curves)
    timing = bench.run_timing(spec)
    rows = bench.timing_rows(timing)
    bench.write_timing_csv(out / "timing.csv", rows)
    print("mean Euclidean error (cm)")
    print(bench.summary_table(records, spec.loss_ratios))
    _print_quantiles(curves)
    print("\nwall time (ms, median of %d repetitions)" % spec.repetitions)
    for method, k, n_points, ms in rows:
        print(f"{method:<10}k={k:<4}points={n_points:<8}{ms:>12.3f}")
    return _status(records)


def cmd_ablate(args) -> int:
    spec = _load_spec(args)
    if args.k_values:
        spec = replace(spec, k_values=tuple(args.k_values))
    out = _out_dir(args)
    records = bench.run_k_ablation(spec, threads=_threads(args))
    for k in spec.k_values:
        metrics.write_metrics_csv(out / f"ablation_k{k}.csv", bench.metrics_rows([r for r in records if r.k == k]))
    by_k = bench.mean_error_by(records, "k")
    print(f"{'k':>4}{'mean_err':>12}")
    for k in spec.k_values:
        print(f"{k:>4}{by_k.get((k,), float('nan')):>12.3f}")
    return _status(records)


def cmd_cdf(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args)
    records = bench.run_accuracy_sweep(spec, threads=_threads(args))
    curves = bench.cdf_curves(records)
    metrics.write_cdf_csv(out / "cdf.csv", curves)
    _print_quantiles(curves)
    return _status(records)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manifold-interp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def corpus_flags(p, overrides=True):
        p.add_argument("--config", help="experiment JSON file (defaults apply when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--policy", choices=trajgen.MASK_POLICIES, help="override mask_policy")
        if overrides:
            p.add_argument("--method", action="append", help="method(s) to run; repeat or comma-separate")
            p.add_argument("--k", type=int, help="override k")
            p.add_argument("--sigma", type=float, help="override sigma")
            p.add_argument("--timing-serial", action="store_true", help="run the accuracy sweep serially as well")

    p = sub.add_parser("generate", help="write corpus trajectories and masks")
    corpus_flags(p, overrides=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("interpolate", help="fill masked samples of one trajectory")
    p.add_argument("--traj", required=True, help="trajectory CSV (t,x,y)")
    p.add_argument("--mask", required=True, help="mask CSV (t)")
    p.add_argument("--method", default="LLI", help="one of: " + ", ".join(m.value for m in MethodId))
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="output CSV (t,x,y,source)")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("bench", help="accuracy sweep and timing")
    corpus_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="LLI accuracy across window sizes")
    corpus_flags(p)
    p.add_argument("--k-values", type=int, nargs="+", help="override k_values")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cdf", help="pooled error CDF per method")
    corpus_flags(p)
    p.set_defaults(func=cmd_cdf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InterpolationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
