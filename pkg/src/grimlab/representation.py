"""PCA embedding of downsampled images, the latent reward, and a Gaussian KDE."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import logsumexp


class InsufficientDataError(ValueError):
    pass


def downsample(images: np.ndarray, factor: int = 2) -> np.ndarray:
    """Average-pool ``(..., H, W, C)`` images by ``factor`` along both axes."""
    images = np.asarray(images, dtype=float)
    *lead, h, w, c = images.shape
    if h % factor or w % factor:
        raise ValueError(f"image size {h}x{w} not divisible by {factor}")
    x = images.reshape(*lead, h // factor, factor, w // factor, factor, c)
    return x.mean(axis=(-4, -2))


def image_features(images: np.ndarray, factor: int = 2) -> np.ndarray:
    """Flattened downsampled pixels, one row per image (a single image gives a vector)."""
    images = np.asarray(images, dtype=float)
    small = downsample(images, factor)
    if images.ndim == 3:
        return small.reshape(-1)
    return small.reshape(len(images), -1)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, D), orthonormal rows
    explained_variance: np.ndarray
    factor: int = 2

    @property
    def d(self) -> int:
        return self.components.shape[0]

    @property
    def D(self) -> int:
        return self.components.shape[1]


def fit_pca_features(X: np.ndarray, d: int, factor: int = 2) -> PcaModel:
    X = np.asarray(X, dtype=float)
    n, D = X.shape
    if d < 1:
        raise ValueError("latent dimension must be positive")
    if n < d:
        raise InsufficientDataError(f"need at least {d} samples, got {n}")
    if d > D:
        raise ValueError(f"latent dimension {d} exceeds input dimension {D}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if n < D:
        # thin SVD of the data is cheaper than the D x D covariance here
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        evals = s[:d] ** 2 / max(n - 1, 1)
        comps = vt[:d].copy()
    else:
        cov = Xc.T @ Xc / max(n - 1, 1)
        evals, evecs = scipy.linalg.eigh(cov, subset_by_index=[D - d, D - 1])
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        comps = evecs[:, order].T.copy()
    # sign convention: largest-magnitude entry of every component is positive
    pivots = comps[np.arange(d), np.argmax(np.abs(comps), axis=1)]
    comps *= np.where(pivots < 0, -1.0, 1.0)[:, None]
    return PcaModel(mean=mean, components=comps, explained_variance=evals, factor=factor)


def fit_pca(samples, d: int, factor: int = 2) -> PcaModel:
    """Fit a d-dimensional PCA on a batch of ``(H, W, 3)`` images."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 4:
        raise ValueError("expected a batch of (H, W, C) images")
    if len(samples) < d:
        raise InsufficientDataError(f"need at least {d} samples, got {len(samples)}")
    return fit_pca_features(image_features(samples, factor), d, factor)


def embed_features(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    if X.shape[-1] != model.D:
        raise ValueError(f"feature size {X.shape[-1]} does not match model input {model.D}")
    if X.dtype == np.float32:
        # stored features are float32; keep the product in single precision
        return (X @ model.components.T.astype(np.float32)).astype(float) - model.components @ model.mean
    return (X - model.mean) @ model.components.T


def embed(model: PcaModel, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.ndim != 3:
        raise ValueError("expected a single (H, W, C) image")
    try:
        f = image_features(image, model.factor)
    except ValueError as exc:
        raise ValueError(f"image of shape {image.shape} does not match the model") from exc
    return embed_features(model, f)


def reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z) @ model.components + model.mean


def reward(goal_latent, state_latent) -> float:
    g = np.asarray(goal_latent, dtype=float)
    s = np.asarray(state_latent, dtype=float)
    if g.shape != s.shape:
        raise ValueError(f"latent shapes differ: {g.shape} vs {s.shape}")
    # hypot rescales internally, so tiny nonzero differences never underflow to 0
    return -math.hypot(*(g - s).ravel().tolist())


def rewards(goal_latents: np.ndarray, state_latents: np.ndarray) -> np.ndarray:
    """Row-wise :func:`reward` for two ``(n, d)`` arrays."""
    return -np.linalg.norm(np.asarray(goal_latents) - np.asarray(state_latents), axis=-1)


@dataclass(frozen=True, eq=False)
class DensityModel:
    support: np.ndarray  # (m, d)
    bandwidth: float

    @property
    def d(self) -> int:
        return self.support.shape[1]


def fit_density(latents, bandwidth: float = 0.5, max_points: int = 512,
                rng: np.random.Generator | None = None) -> DensityModel:
    """Isotropic Gaussian KDE on at most ``max_points`` uniformly subsampled latents."""
    Z = np.atleast_2d(np.asarray(latents, dtype=float))
    if Z.size == 0 or len(Z) == 0:
        raise ValueError("cannot fit a density on no points")
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if len(Z) > max_points:
        if rng is None:
            idx = np.linspace(0, len(Z) - 1, max_points).round().astype(int)
        else:
            idx = np.sort(rng.choice(len(Z), size=max_points, replace=False))
        Z = Z[idx]
    return DensityModel(support=Z.copy(), bandwidth=float(bandwidth))


def log_density(model: DensityModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise ValueError(f"point dimension {X.shape[1]} does not match density dimension {model.d}")
    h2 = model.bandwidth ** 2
    S = model.support
    sq = (X * X).sum(1)[:, None] + (S * S).sum(1)[None, :] - 2.0 * X @ S.T
    np.maximum(sq, 0.0, out=sq)
    log_norm = -0.5 * model.d * np.log(2 * np.pi * h2) - np.log(len(S))
    out = logsumexp(-sq / (2 * h2), axis=1) + log_norm
    return out[0] if single else out


def density(model: DensityModel, x) -> float:
    p = np.exp(log_density(model, np.asarray(x, dtype=float).reshape(-1)))
    return float(max(p, np.finfo(float).tiny))
