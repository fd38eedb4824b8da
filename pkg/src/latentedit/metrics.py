"""Reconstruction and transformation quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    DimensionMismatch,
    NonPSDProduct,
    ShapeMismatch,
    TooFewSamples,
    TooSmall,
    ZeroEmbedding,
)
from .generator import FeatureExtractor

PSNR_IDENTICAL = math.inf

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricsReport:
    psnr_db: float
    ssim: float
    perceptual: float
    frechet: float | None = None
    identity: float | None = None


@dataclass(frozen=True)
class GaussianFit:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if sigma.shape != (mu.size, mu.size):
            raise DimensionMismatch(f"sigma {sigma.shape} does not match mu {mu.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, max_val: float = 1.0) -> float:
    """PSNR in dB; identical inputs return ``PSNR_IDENTICAL`` (+inf)."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(max_val * max_val / mse)


def _gaussian_window() -> np.ndarray:
    x = np.arange(SSIM_WIN) - SSIM_WIN // 2
    g = np.exp(-(x * x) / (2 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    r = len(win) // 2
    out = correlate1d(correlate1d(img, win, axis=0, mode="constant"), win, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows, averaged across channels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if min(a.shape[:2]) < SSIM_WIN:
        raise TooSmall(f"SSIM needs at least {SSIM_WIN}x{SSIM_WIN} images")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    win = _gaussian_window()
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx, my = _filter_valid(x, win), _filter_valid(y, win)
        sxx = _filter_valid(x * x, win) - mx * mx
        syy = _filter_valid(y * y, win) - my * my
        sxy = _filter_valid(x * y, win) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    n = np.linalg.norm(v)
    if not n > 0:
        raise ZeroEmbedding(f"{what} has zero norm")
    return v / n


def perceptual_distance(ext: FeatureExtractor, a, b) -> float:
    """Mean squared difference of unit-normalised feature vectors."""
    a, b = _pair(a, b)
    u = _unit(ext.extract(a), "feature vector")
    v = _unit(ext.extract(b), "feature vector")
    return float(np.mean((u - v) ** 2))


def identity_distance(embedder: FeatureExtractor, a, b) -> float:
    """Squared distance of unit-normalised embeddings, in [0, 4]."""
    a, b = _pair(a, b)
    u = _unit(embedder.extract(a), "embedding")
    v = _unit(embedder.extract(b), "embedding")
    return float(np.sum((u - v) ** 2))


def fit_gaussian(feats: Sequence[np.ndarray], reg: float = 1e-6) -> GaussianFit:
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("feature vectors must share one length")
    if len(x) < 2:
        raise TooFewSamples("need at least two feature vectors")
    mu = x.mean(axis=0)
    c = x - mu
    sigma = c.T @ c / (len(x) - 1)
    sigma = (sigma + sigma.T) / 2.0 + reg * np.eye(x.shape[1])
    return GaussianFit(mu, sigma)


def _sym_sqrt(m: np.ndarray, neg_tol: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    if vals.min() < -neg_tol:
        raise NonPSDProduct(f"eigenvalue {vals.min():.3g} below -{neg_tol}")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(g1: GaussianFit, g2: GaussianFit, neg_tol: float = 1e-8) -> float:
    """``|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))``.

    ``Tr((S1 S2)^(1/2))`` is taken as ``Tr((R S2 R)^(1/2))`` with ``R = S1^(1/2)``;
    ``R S2 R`` is similar to ``S1 S2`` and symmetric, so ``eigh`` applies.
    """
    if g1.mu.shape != g2.mu.shape:
        raise DimensionMismatch(f"dimensions differ: {g1.mu.size} vs {g2.mu.size}")
    r = _sym_sqrt(g1.sigma, neg_tol)
    covmean = _sym_sqrt(r @ g2.sigma @ r, neg_tol)
    diff = g1.mu - g2.mu
    val = float(diff @ diff + np.trace(g1.sigma) + np.trace(g2.sigma) - 2.0 * np.trace(covmean))
    return max(val, 0.0)


def evaluate_pair(a, b, ext: FeatureExtractor, embedder: FeatureExtractor | None = None
                  ) -> MetricsReport:
    return MetricsReport(
        psnr_db=psnr(a, b),
        ssim=ssim(a, b),
        perceptual=perceptual_distance(ext, a, b),
        identity=None if embedder is None else identity_distance(embedder, a, b),
    )
