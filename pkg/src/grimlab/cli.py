"""Command line entry point: ``grimlab run | compare | ablate``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .harness import find_runs, read_run, run_experiment, write_run
from .stats import METRICS, aggregate_seeds, compare_summaries


def _config(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config, args.override)
    return apply_overrides(ExperimentConfig(), args.override)


def cmd_run(args) -> int:
    cfg = _config(args).replace(seed=args.seed)
    result = run_experiment(cfg)
    out = write_run(result, args.out)
    last = result.metrics[-1]
    print(f"{cfg.name()} seed={cfg.seed}: success={last.mean_success:.3f} "
          f"cum_tv_on={last.cum_frac_tv_on:.3f} ({result.wall_clock:.1f}s) -> {out}")
    return 0


def write_summary(summaries, path) -> Path:
    """One row per (configuration, epoch) with mean/std/sem of every metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config", "fingerprint", "n_seeds", "epoch",
                    *(f"{m}_{s}" for m in METRICS for s in ("mean", "std", "sem"))])
        for s in summaries:
            for j, e in enumerate(s.epochs):
                w.writerow([s.name, s.fingerprint, len(s.seeds), int(e),
                            *(format(float(getattr(s, st)[m][j]), ".9g")
                              for m in METRICS for st in ("mean", "std", "sem"))])
    return path


def write_tests(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_a", "config_b", "metric", "mean_a", "mean_b", "t", "p"])
        for r in rows:
            w.writerow([r["config_a"], r["config_b"], r["metric"],
                        *(format(float(r[k]), ".9g") for k in ("mean_a", "mean_b", "t", "p"))])
    return path


def summarize(run_dirs):
    groups: dict = {}
    for d in run_dirs:
        r = read_run(d)
        groups.setdefault(r.fingerprint, []).append(r)
    return [aggregate_seeds(sorted(rs, key=lambda r: r.seed)) for rs in groups.values()]


def print_table(summaries, rows):
    print(f"{'config':<28}{'seeds':>6}{'success':>16}{'cum tv_on':>16}{'cum object':>16}{'forgetting':>12}")
    for s in summaries:
        cells = []
        for m in ("mean_success", "cum_frac_tv_on", "cum_frac_object_room"):
            cells.append(f"{s.mean[m][-1]:.3f}±{s.sem[m][-1]:.3f}")
        print(f"{s.name:<28}{len(s.seeds):>6}{cells[0]:>16}{cells[1]:>16}{cells[2]:>16}"
              f"{s.forgetting().mean():>12.3f}")
    for r in rows:
        print(f"  {r['config_a']} vs {r['config_b']} [{r['metric']}]: t={r['t']:.3f} p={r['p']:.4g}")


def cmd_compare(args) -> int:
    run_dirs = find_runs(args.runs)
    if not run_dirs:
        print("no runs found", file=sys.stderr)
        return 1
    summaries = summarize(run_dirs)
    rows = compare_summaries(summaries)
    out = write_summary(summaries, args.out)
    write_tests(rows, out.with_name(out.stem + "_tests.csv"))
    print_table(summaries, rows)
    return 0


def cmd_ablate(args) -> int:
    """Run GRIM with ALP-driven and with uniform cluster sampling over the same seeds."""
    base = _config(args).replace(wrap_grimgep=True)
    out = Path(args.out)
    dirs = []
    for mode in ("alp", "uniform-ablation"):
        cfg = base.replace(cluster_sampling=mode)
        for seed in range(args.seeds):
            res = run_experiment(cfg.replace(seed=seed))
            dirs.append(write_run(res, out / cfg.name() / f"seed{seed}"))
            print(f"{cfg.name()} seed={seed}: success={res.metrics[-1].mean_success:.3f}")
    summaries = summarize(dirs)
    rows = compare_summaries(summaries)
    write_summary(summaries, out / "summary.csv")
    write_tests(rows, out / "summary_tests.csv")
    print_table(summaries, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grimlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set any config field (repeatable)")

    r = sub.add_parser("run", help="one seeded run")
    common(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="aggregate runs per configuration and Welch-test them")
    c.add_argument("--runs", nargs="+", required=True)
    c.add_argument("--out", required=True, help="summary csv path")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("ablate", help="ALP vs uniform cluster sampling over several seeds")
    common(a)
    a.add_argument("--seeds", type=int, default=10)
    a.add_argument("--out", default="ablation")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
