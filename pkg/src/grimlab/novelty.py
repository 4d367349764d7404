"""Novelty-based goal prioritization over the replay buffer.

Three strategies produce an explicit probability vector over buffer indices:
uniform, count-based (inverse counts of a coarse quantized image) and
density-skewed (inverse KDE likelihood in the PCA latent space, raised to
``alpha``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .representation import DensityModel, PcaModel, embed, log_density

QUANT_EPS = 1e-9
N_LEVELS = 4
_POWERS = N_LEVELS ** np.arange(27, dtype=np.int64)


class Strategy(str, enum.Enum):
    UNIFORM = "uniform"
    COUNTBASED = "countbased"
    SKEWFIT = "skewfit"


def count_key(image: np.ndarray) -> np.ndarray:
    """Average-pool to 3x3 per channel, then quantize every value to 4 levels."""
    image = np.asarray(image, dtype=float)
    h, w, c = image.shape
    if h % 3 or w % 3:
        raise ValueError(f"image size {h}x{w} not divisible by 3")
    pooled = image.reshape(3, h // 3, 3, w // 3, c).mean(axis=(1, 3))
    return np.floor(np.minimum(pooled, 1.0 - QUANT_EPS) * N_LEVELS).astype(np.int64)


def key_code(key: np.ndarray) -> int:
    """Pack a 3x3x3 quantized key into a single integer."""
    key = np.asarray(key, dtype=np.int64).reshape(-1)
    if key.size != 27:
        raise ValueError("quantized keys have 27 entries")
    return int(key @ _POWERS)


class CountTable:
    """Visit counts of quantized images, keyed by :func:`key_code`."""

    def __init__(self):
        self._counts: dict[int, int] = {}
        self.total = 0

    def add_code(self, code: int, n: int = 1) -> int:
        c = self._counts.get(code, 0) + n
        self._counts[code] = c
        self.total += n
        return c

    def add(self, image) -> int:
        return self.add_code(key_code(count_key(image)))

    def count_code(self, code: int) -> int:
        return self._counts.get(code, 0)

    def count(self, image) -> int:
        return self.count_code(key_code(count_key(image)))

    def __len__(self):
        return len(self._counts)

    def __contains__(self, code):
        return code in self._counts


def count_weight(count, alpha: float):
    count = np.asarray(count, dtype=float)
    if np.any(count < 1):
        raise ValueError("count weight requested for an unseen state")
    out = count ** alpha
    return float(out) if out.ndim == 0 else out


def skew_weight(p, alpha: float):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("skew weight needs strictly positive probabilities")
    out = p ** alpha
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class GoalDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("a goal distribution is a nonempty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("goal distribution has negative or non-finite entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"goal distribution sums to {p.sum()!r}")
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    @classmethod
    def from_weights(cls, weights) -> GoalDistribution:
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights have no positive mass")
        return cls(w / total)

    @classmethod
    def uniform(cls, n: int) -> GoalDistribution:
        if n < 1:
            raise ValueError("empty buffer")
        return cls(np.full(n, 1.0 / n))


def skewed_from_log(logp: np.ndarray, alpha: float) -> np.ndarray:
    """Normalized ``p**alpha`` computed from log-probabilities without underflow."""
    s = alpha * np.asarray(logp, dtype=float)
    w = np.exp(s - s.max())
    return w / w.sum()


def goal_distribution(buffer, strategy, alpha: float = -1.0, counts: CountTable | None = None,
                      density: DensityModel | None = None, pca: PcaModel | None = None) -> GoalDistribution:
    """Prioritized goal-sampling distribution over ``buffer``.

    ``buffer`` is either a :class:`~grimlab.learner.ReplayBuffer` or a plain
    sequence of images. Count-based weighting uses the buffer's own count table
    unless ``counts`` is given; skewing needs a fitted ``density`` and ``pca``.
    """
    strategy = Strategy(strategy)
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot build a goal distribution over an empty buffer")
    if strategy is Strategy.UNIFORM:
        return GoalDistribution.uniform(n)
    fast = hasattr(buffer, "image_ids")
    if strategy is Strategy.COUNTBASED:
        if counts is None:
            counts = getattr(buffer, "counts", None)
        if counts is None or counts.total == 0:
            raise ValueError("count-based sampling needs a populated count table")
        if fast:
            c = buffer.state_counts(counts)
        else:
            c = np.array([counts.count(img) for img in buffer], dtype=float)
        return GoalDistribution.from_weights(count_weight(c, alpha))
    if density is None or pca is None:
        raise ValueError("skewed sampling needs a fitted density model and PCA")
    if fast:
        logp = buffer.image_log_density(density, pca)[buffer.image_ids]
    else:
        Z = np.stack([embed(pca, img) for img in buffer])
        logp = log_density(density, Z)
    return GoalDistribution(skewed_from_log(logp, alpha))


def sample_index(dist: GoalDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw consuming exactly one uniform from ``rng``."""
    return _draw(dist.probs, rng.random())


def _draw(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if i >= len(probs):
        i = int(np.flatnonzero(probs > 0)[-1])
    return i
