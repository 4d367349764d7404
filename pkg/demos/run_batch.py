"""Produce (or top up) the cached comparison batch that the acceptance tests read.

    python3 demos/run_batch.py [--root .acceptance_runs] [--seeds 10] [--epochs 1000] [--only NAME ...]

Finished runs are skipped, so the script can be interrupted and restarted.
"""
import argparse
import logging

from grimlab.cli import print_table
from grimlab.stats import compare_summaries
from grimlab.suite import BATCH, ensure_batch

p = argparse.ArgumentParser()
p.add_argument("--root", default=".acceptance_runs")
p.add_argument("--seeds", type=int, default=10)
p.add_argument("--epochs", type=int, default=1000)
p.add_argument("--only", nargs="*", choices=list(BATCH))
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
summaries = ensure_batch(args.root, range(args.seeds), args.epochs, names=args.only)
print_table(list(summaries.values()), compare_summaries(list(summaries.values())))
