"""Command-line interface: ``pnp-pdhg run|sweep|summarize|train-prior|selftest``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, expand_sweep, parse_config_text
from .io import read_results_csv, write_results_csv
from .runner import render_summary, run_experiment, summarize, write_summary_csv

log = logging.getLogger("pnp_pdhg")


def _read_config_data(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def _apply_flags(data: dict, args) -> dict:
    run = data.setdefault("run", {})
    if args.seed is not None:
        run["seeds"] = args.seed
    if args.out is not None:
        run["out"] = str(Path(args.out).resolve())
    if args.strict_steps:
        run["strict_steps"] = "true"
    if args.no_timing:
        run["timing"] = "false"
    return data


def _report(records, args) -> None:
    if args.quiet:
        return
    rows = summarize(records)
    print(render_summary(rows, ("method", "fidelity", "task", "noise")))
    failed = [r for r in records if r.status != "ok"]
    if failed:
        print(f"{len(failed)} of {len(records)} runs failed", file=sys.stderr)


def cmd_run(args) -> int:
    path = Path(args.config)
    cfg = ExperimentConfig.from_mapping(_apply_flags(_read_config_data(path), args), path.parent)
    records = run_experiment(cfg)
    if not args.quiet:
        print(f"wrote {cfg.output_dir / 'results.csv'} ({len(records)} rows)")
    _report(records, args)
    return 0


def cmd_sweep(args) -> int:
    path = Path(args.config)
    data = _apply_flags(_read_config_data(path), args)
    variants = [ExperimentConfig.from_mapping(d, path.parent) for d in expand_sweep(data, args.vary)]
    records = []
    for cfg in variants:
        records.extend(run_experiment(cfg, write_csv=False))
    out = variants[0].output_dir
    write_results_csv(records, out / "results.csv")
    if not args.quiet:
        print(f"wrote {out / 'results.csv'} ({len(records)} rows, {len(variants)} variants)")
    _report(records, args)
    return 0


def cmd_summarize(args) -> int:
    records = read_results_csv(args.csv)
    group_by = tuple(args.by.split(",")) if args.by else ("method", "fidelity", "task", "noise")
    rows = summarize(records, group_by)
    if args.output:
        write_summary_csv(rows, group_by, args.output)
    print(render_summary(rows, group_by))
    return 0


def _load_samples(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        data = np.load(path)
    else:
        data = np.loadtxt(path, ndmin=2)
    data = np.asarray(data, dtype=np.float64)
    return data.reshape(data.shape[0], -1)


def cmd_train_prior(args) -> int:
    from ..prior import MlpVelocityField, cfm_train

    samples = _load_samples(Path(args.dataset))
    if samples.shape[0] == 0:
        raise ConfigError(f"dataset {args.dataset} is empty")
    hidden = tuple(int(h) for h in args.hidden.split(","))
    net = MlpVelocityField(samples.shape[1], hidden=hidden, seed=args.seed or 0)
    trained = cfm_train(samples, net, steps=args.steps, batch=args.batch,
                        learning_rate=args.lr, seed=args.seed or 0)
    trained.save(args.out)
    if not args.quiet and trained.history:
        k = min(20, len(trained.history))
        first = float(np.mean(trained.history[:k]))
        last = float(np.mean(trained.history[-k:]))
        print(f"trained {args.steps} steps: loss {first:.4f} -> {last:.4f}; saved {args.out}")
    return 0


def cmd_selftest(args) -> int:
    from ..selftest import run_selftest

    return 0 if run_selftest(verbose=not args.quiet) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnp-pdhg", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", help="override run seeds, e.g. 3 or 0..9")
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict-steps", action="store_true",
                        help="rescale eta so that the primal-dual step condition holds")
    common.add_argument("--no-timing", action="store_true",
                        help="record wall_ms=0 so result files are byte-reproducible")
    common.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run one experiment config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="run the cartesian product of overrides")
    s.add_argument("config")
    s.add_argument("--vary", action="append", required=True, metavar="KEY=V1,V2",
                   help="section.key (or bare section for its kind) and values; repeatable")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("summarize", help="group a results.csv")
    m.add_argument("csv")
    m.add_argument("--by", help="comma-separated columns (default method,fidelity,task,noise)")
    m.add_argument("--output", help="also write the summary as CSV")
    m.set_defaults(func=cmd_summarize)

    t = sub.add_parser("train-prior", help="fit an MLP velocity field by conditional flow matching")
    t.add_argument("dataset", help=".npy array or whitespace text, one sample per row")
    t.add_argument("out")
    t.add_argument("--steps", type=int, default=20000)
    t.add_argument("--batch", type=int, default=256)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--hidden", default="128,128,128")
    t.add_argument("--seed", type=int)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train_prior)

    st = sub.add_parser("selftest", help="check the core invariants")
    st.add_argument("--quiet", action="store_true")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
