"""Across-seed aggregation, Welch tests and smoothing of per-epoch metrics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


def welch_t_test(a, b) -> tuple[float, float]:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return 0.0, 1.0
        return math.copysign(math.inf, ma - mb), 0.0
    t = (ma - mb) / math.sqrt(se2)
    # shares of the variance, so tiny variances cannot underflow when squared
    wa, wb = va / se2, vb / se2
    df = 1.0 / (wa ** 2 / (len(a) - 1) + wb ** 2 / (len(b) - 1))
    p = 2.0 * sps.t.sf(abs(t), df)
    return float(t), float(min(p, 1.0))


def smooth(series, window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` points average what exists so far."""
    if window < 1:
        raise ValueError("window must be at least 1")
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        return x
    # per-window sums rather than cumsum differences, so window 1 is an exact identity
    padded = np.concatenate([np.zeros(window - 1), x])
    sums = np.lib.stride_tricks.sliding_window_view(padded, window).sum(axis=1)
    return sums / np.minimum(np.arange(1, len(x) + 1), window)


METRICS = (
    "mean_success", "mean_f1",
    "frac_start_room", "frac_object_room", "frac_tv_on", "frac_tv_off",
    "cum_frac_start_room", "cum_frac_object_room", "cum_frac_tv_on", "cum_frac_tv_off",
)


@dataclass
class Summary:
    """Per-epoch mean, sample std and standard error across seeds of every metric."""

    name: str
    fingerprint: str
    seeds: list
    epochs: np.ndarray
    mean: dict
    std: dict
    sem: dict
    values: dict  # metric -> (n_seeds, n_epochs) raw values

    def final(self, metric: str) -> np.ndarray:
        return self.values[metric][:, -1]

    def forgetting(self) -> np.ndarray:
        """Per seed: best success over the run minus final success."""
        v = self.values["mean_success"]
        return v.max(axis=1) - v[:, -1]


def aggregate_seeds(results) -> Summary:
    if not results:
        raise ValueError("nothing to aggregate")
    fps = {r.fingerprint for r in results}
    if len(fps) != 1:
        raise ValueError(f"runs from different configurations: {sorted(fps)}")
    epochs = np.array([m.epoch for m in results[0].metrics])
    for r in results:
        if not np.array_equal([m.epoch for m in r.metrics], epochs):
            raise ValueError("runs do not share the same epochs")
    values = {k: np.array([[getattr(m, k) for m in r.metrics] for r in results]) for k in METRICS}
    n = len(results)
    mean = {k: v.mean(axis=0) for k, v in values.items()}
    std = {k: (v.std(axis=0, ddof=1) if n > 1 else np.zeros(v.shape[1])) for k, v in values.items()}
    sem = {k: s / math.sqrt(n) for k, s in std.items()}
    return Summary(results[0].name, fps.pop(), [r.seed for r in results], epochs, mean, std, sem, values)


def compare_summaries(summaries, metrics=("mean_success", "cum_frac_tv_on", "cum_frac_object_room")):
    """Pairwise Welch tests on final-epoch values; one dict per (pair, metric)."""
    rows = []
    for a, b in itertools.combinations(summaries, 2):
        for m in metrics:
            xa, xb = a.final(m), b.final(m)
            if len(xa) < 2 or len(xb) < 2:
                t, p = math.nan, math.nan
            else:
                t, p = welch_t_test(xa, xb)
            rows.append(dict(config_a=a.name, config_b=b.name, metric=m,
                             mean_a=xa.mean(), mean_b=xb.mean(), t=t, p=p))
    return rows
