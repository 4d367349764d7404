"""The comparison batch behind the directional checks, with an on-disk cache.

Runs are stored as ``<root>/<source hash>/<config name>-<fingerprint>/seed<k>/``.
The source hash covers the modules that influence a run, with comments and
docstrings ignored, so editing prose does not invalidate finished runs.
"""
from __future__ import annotations

import ast
import hashlib
import logging
from pathlib import Path

from .config import ExperimentConfig
from .harness import read_run, run_experiment, write_run
from .stats import aggregate_seeds

log = logging.getLogger(__name__)

RUN_MODULES = ("config", "env", "representation", "novelty", "grimgep", "learner", "harness")

BATCH = {
    "CountBased": ExperimentConfig(),
    "GRIM-CountBased": ExperimentConfig(wrap_grimgep=True),
    "GRIM-UNI-CountBased": ExperimentConfig(wrap_grimgep=True, cluster_sampling="uniform-ablation"),
    "Skewfit": ExperimentConfig(strategy="skewfit", alpha=-0.25),
    "GRIM-Skewfit": ExperimentConfig(strategy="skewfit", alpha=-0.25, wrap_grimgep=True),
}


def _strip_docstrings(tree):
    for node in ast.walk(tree):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            body = node.body
            if body and isinstance(body[0], ast.Expr) and isinstance(getattr(body[0], "value", None), ast.Constant) \
                    and isinstance(body[0].value.value, str):
                node.body = body[1:] or [ast.Pass()]
    return tree


def source_hash() -> str:
    h = hashlib.sha256()
    here = Path(__file__).parent
    for name in RUN_MODULES:
        tree = _strip_docstrings(ast.parse((here / f"{name}.py").read_text()))
        h.update(ast.dump(tree).encode())
    return h.hexdigest()[:12]


def run_dir(root, name: str, cfg: ExperimentConfig, seed: int) -> Path:
    return Path(root) / source_hash() / f"{name}-{cfg.fingerprint()}" / f"seed{seed}"


def ensure_batch(root, seeds=range(10), n_epochs: int = 1000, names=None, run_missing: bool = True) -> dict:
    """Summaries per configuration name, running whatever is not cached yet."""
    out = {}
    for name in names or BATCH:
        cfg = BATCH[name].replace(n_epochs=n_epochs)
        results = []
        for seed in seeds:
            d = run_dir(root, name, cfg, seed)
            if not (d / "metrics.csv").exists():
                if not run_missing:
                    raise FileNotFoundError(d)
                log.info("running %s seed %d", name, seed)
                write_run(run_experiment(cfg.replace(seed=seed)), d)
            results.append(read_run(d))
        out[name] = aggregate_seeds(results)
    return out


def cached(root, seeds=range(10), n_epochs: int = 1000) -> bool:
    return all((run_dir(root, name, BATCH[name].replace(n_epochs=n_epochs), s) / "metrics.csv").exists()
               for name in BATCH for s in seeds)
