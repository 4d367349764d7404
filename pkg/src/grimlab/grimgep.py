"""Goal-region prior built from learning progress.

Pipeline per goal draw: cluster the goal space (PCA latents + diagonal GMM
picked by AIC), rebuild every cluster's competence history from the
(goal, last state) log, turn the absolute learning progress of each cluster
into a bandit distribution, draw a cluster, and mask the wrapped novelty
sampler so it only proposes goals from that cluster.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .novelty import GoalDistribution, _draw
from .representation import PcaModel, embed, rewards

EPS_REG = 1e-6
UNIFORM_SHARE = 0.2
ALP_FLOOR = 1e-12
_LOG_2PI = np.log(2 * np.pi)


class EmptyClusterError(ValueError):
    """The sampled cluster has no member in the buffer."""


class DisjointSupportError(ValueError):
    """Prior and novelty distribution share no index."""


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d) diagonal covariances
    log_likelihood: float  # total over the training points
    n_samples: int
    ll_trace: np.ndarray = field(repr=False)  # mean per-point log-likelihood per EM iteration
    converged: bool = True

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def n_params(self) -> int:
        return self.k * 2 * self.d + (self.k - 1)

    @property
    def aic(self) -> float:
        return 2.0 * self.n_params - 2.0 * self.log_likelihood


def _weighted_log_prob(X, weights, means, variances, X2=None):
    prec = 1.0 / variances
    if X2 is None:
        X2 = X * X
    # expanded quadratic form: sum_d (x - m)^2 / v
    maha = X2 @ prec.T - 2.0 * X @ (means * prec).T + (means * means * prec).sum(1)
    log_det = np.log(variances).sum(axis=1)
    return np.log(weights) - 0.5 * (X.shape[1] * _LOG_2PI + log_det + maha)


def _m_step(X, resp, eps_reg, X2=None):
    if X2 is None:
        X2 = X * X
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    means = resp.T @ X / nk[:, None]
    variances = resp.T @ X2 / nk[:, None] - means * means
    return nk / nk.sum(), means, np.maximum(variances, eps_reg)


def _e_step(lp):
    """Per-point log-likelihood and responsibilities from weighted log densities."""
    m = lp.max(axis=1, keepdims=True)
    e = np.exp(lp - m)
    s = e.sum(axis=1, keepdims=True)
    e /= s
    return (m + np.log(s))[:, 0], e


def _kmeans_pp(X, k, rng):
    n = len(X)
    centers = [X[int(rng.integers(n))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            i = _draw(d2 / total, rng.random())
        else:
            i = int(rng.integers(n))
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(axis=1))
    return np.array(centers)


def fit_gmm(latents, k: int, rng: np.random.Generator, eps_reg: float = EPS_REG,
            tol: float = 1e-6, max_iter: int = 200) -> GmmModel:
    """Diagonal GMM by EM, seeded with k-means++ centers.

    Stops once the mean per-point log-likelihood improves by less than
    ``tol`` or after ``max_iter`` EM updates.
    """
    X = np.asarray(latents, dtype=float)
    if X.ndim != 2:
        raise ValueError("latents must be an (n, d) array")
    n = len(X)
    if k < 1:
        raise ValueError("need at least one component")
    if n < k:
        raise ValueError(f"cannot fit {k} components on {n} points")

    shift = X.mean(axis=0)
    X = X - shift  # centering keeps the expanded quadratic form well conditioned
    centers = _kmeans_pp(X, k, rng)
    labels = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    X2 = X * X
    params = _m_step(X, resp, eps_reg, X2)

    trace = []
    converged = False
    for _ in range(max_iter + 1):
        lp = _weighted_log_prob(X, *params, X2=X2)
        ll, resp = _e_step(lp)
        trace.append(ll.mean())
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        if len(trace) > max_iter:
            break
        params = _m_step(X, resp, eps_reg, X2)
    weights, means, variances = params
    return GmmModel(weights, means + shift, variances, float(ll.sum()), n, np.array(trace), converged)


def gmm_log_prob(gmm: GmmModel, Z: np.ndarray) -> np.ndarray:
    """Per-component weighted log densities, shape ``(n, k)``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != gmm.d:
        raise ValueError(f"latent dimension {Z.shape[1]} does not match the GMM ({gmm.d})")
    return _weighted_log_prob(Z, gmm.weights, gmm.means, gmm.variances)


def gmm_predict(gmm: GmmModel, Z: np.ndarray, chunk: int = 65536) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    out = np.empty(len(Z), dtype=np.int64)
    for s in range(0, len(Z), chunk):
        out[s:s + chunk] = np.argmax(gmm_log_prob(gmm, Z[s:s + chunk]), axis=1)
    return out


def fit_candidates(latents, candidate_ks: Sequence[int], rng: np.random.Generator,
                   **fit_kwargs) -> list:
    """One fit per distinct candidate size, smallest first, drawing from ``rng`` in that order."""
    if not len(candidate_ks):
        raise ValueError("no candidate cluster counts")
    return [fit_gmm(latents, k, rng, **fit_kwargs) for k in sorted(set(int(k) for k in candidate_ks))]


def select_gmm_by_aic(latents, candidate_ks: Sequence[int], rng: np.random.Generator,
                      **fit_kwargs) -> GmmModel:
    """Lowest-AIC fit; ties go to the smaller model."""
    best = None
    for model in fit_candidates(latents, candidate_ks, rng, **fit_kwargs):
        if best is None or model.aic < best.aic:
            best = model
    return best


@dataclass(frozen=True, eq=False)
class ClusteringFn:
    pca: PcaModel
    gmm: GmmModel

    def __post_init__(self):
        if self.pca.d != self.gmm.d:
            raise ValueError("GMM and PCA latent dimensions differ")

    @property
    def n_clusters(self) -> int:
        return self.gmm.k

    def assign_latents(self, Z) -> np.ndarray:
        return gmm_predict(self.gmm, Z)


def assign_cluster(cl: ClusteringFn, image) -> int:
    return int(cl.assign_latents(embed(cl.pca, image))[0])


@dataclass(frozen=True)
class PerformanceRecord:
    goal_image: np.ndarray = field(repr=False)
    last_state_image: np.ndarray = field(repr=False)
    epoch: int


@dataclass
class ClusterHistory:
    """Per-cluster ``(epoch, mean performance)`` pairs, oldest first."""

    entries: dict = field(default_factory=dict)

    def values(self, c: int) -> list:
        return [v for _, v in self.entries.get(c, [])]

    def alps(self, n_clusters: int) -> np.ndarray:
        return np.array([estimate_alp(self.values(c)) for c in range(n_clusters)])


def cluster_histories(clusters, performances, epochs, l: int) -> ClusterHistory:
    """Average performances per (cluster, epoch) and keep each cluster's last ``l`` epochs with data."""
    clusters = np.asarray(clusters, dtype=np.int64)
    performances = np.asarray(performances, dtype=float)
    epochs = np.asarray(epochs, dtype=np.int64)
    hist = ClusterHistory()
    if len(clusters) == 0:
        return hist
    pairs, inv = np.unique(np.stack([clusters, epochs], axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    sums = np.bincount(inv, weights=performances, minlength=len(pairs))
    cnts = np.bincount(inv, minlength=len(pairs))
    means = sums / cnts
    for c in np.unique(pairs[:, 0]):
        rows = np.flatnonzero(pairs[:, 0] == c)[-l:]
        hist.entries[int(c)] = [(int(pairs[r, 1]), float(means[r])) for r in rows]
    return hist


def recompute_performances(history: Sequence[PerformanceRecord], cl: ClusteringFn,
                           reward_model: PcaModel, l: int) -> ClusterHistory:
    """Re-score every logged attempt under the current reward model and group it by goal cluster."""
    if not len(history):
        raise ValueError("empty performance history")
    goals = np.stack([r.goal_image for r in history])
    lasts = np.stack([r.last_state_image for r in history])
    epochs = [r.epoch for r in history]
    zg = np.stack([embed(reward_model, g) for g in goals])
    zl = np.stack([embed(reward_model, s) for s in lasts])
    perf = rewards(zg, zl)
    zc = zg if cl.pca is reward_model else np.stack([embed(cl.pca, g) for g in goals])
    return cluster_histories(cl.assign_latents(zc), perf, epochs, l)


def estimate_alp(history) -> float:
    """Absolute difference between the means of the two halves of a history.

    Accepts plain values or ``(epoch, value)`` pairs. With an odd length the
    first half is the shorter one.
    """
    h = [v[1] if isinstance(v, tuple) else v for v in history]
    n = len(h)
    if n < 2:
        return 0.0
    half = n // 2
    h = np.asarray(h, dtype=float)
    return float(abs(h[:half].mean() - h[half:].mean()))


def cluster_probabilities(alps, T: float = 5.0, uniform: bool = False) -> np.ndarray:
    """Bandit distribution: 80% proportional to ALP**T, 20% uniform."""
    alps = np.asarray(alps, dtype=float)
    C = len(alps)
    if C == 0:
        raise ValueError("no clusters")
    if np.any(alps < 0):
        raise ValueError("ALP estimates are nonnegative")
    top = alps.max()
    if uniform or top < ALP_FLOOR:
        return np.full(C, 1.0 / C)
    # dividing by the max first keeps the power finite and exactly scale-free
    a = (alps / top) ** T
    return (1.0 - UNIFORM_SHARE) * a / a.sum() + UNIFORM_SHARE / C


def sample_cluster(alps, T: float, rng: np.random.Generator, uniform: bool = False) -> int:
    return _draw(cluster_probabilities(alps, T, uniform), rng.random())


def build_prior(sampled_cluster: int, buffer_assignments) -> GoalDistribution:
    a = np.asarray(buffer_assignments)
    if len(a) == 0:
        raise ValueError("no buffer assignments")
    mask = a == sampled_cluster
    n_c = int(mask.sum())
    if n_c == 0:
        raise EmptyClusterError(f"cluster {sampled_cluster} has no member in the buffer")
    return GoalDistribution(mask / n_c)


def combine(prior: GoalDistribution, imgep: GoalDistribution) -> GoalDistribution:
    if len(prior) != len(imgep):
        raise ValueError(f"length mismatch: {len(prior)} vs {len(imgep)}")
    both = (prior.probs > 0) & (imgep.probs > 0)
    if not both.any():
        raise DisjointSupportError("prior and novelty distribution have disjoint supports")
    # rescale both factors to a unit maximum on the overlap so tiny products do not flush to zero
    w = np.where(both, (prior.probs / prior.probs[both].max()) * (imgep.probs / imgep.probs[both].max()), 0.0)
    return GoalDistribution(w / w.sum())
