"""Image buffer helpers and the integer-factor resampler used by the losses."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def as_image(pixels) -> np.ndarray:
    """Validate and return an H x W x C float64 image clamped to [0, 1]."""
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeMismatch(f"expected H x W x C image with C in (1, 3), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return np.clip(img, 0.0, 1.0)


def _factor(src: int, dst: int) -> tuple[str, int]:
    if src == dst:
        return "same", 1
    if src > dst and src % dst == 0:
        return "down", src // dst
    if dst > src and dst % src == 0:
        return "up", dst // src
    raise ShapeMismatch(f"cannot resample {src} -> {dst}: sizes must divide")


def resample(img: np.ndarray, size: int) -> np.ndarray:
    """Square resample by an integer factor.

    Downsampling averages k x k blocks, upsampling replicates pixels.  Both are
    linear, so the adjoint in :func:`resample_vjp` is exact.
    """
    h, w, c = img.shape
    if h != w:
        raise ShapeMismatch(f"square image required, got {h}x{w}")
    mode, k = _factor(h, size)
    if mode == "same":
        return img
    if mode == "down":
        return img.reshape(size, k, size, k, c).mean(axis=(1, 3))
    return np.repeat(np.repeat(img, k, axis=0), k, axis=1)


def resample_vjp(upstream: np.ndarray, src_size: int) -> np.ndarray:
    """Pull a gradient on the resampled image back to ``src_size``."""
    n, _, c = upstream.shape
    mode, k = _factor(src_size, n)
    if mode == "same":
        return upstream
    if mode == "down":
        g = np.broadcast_to(upstream[:, None, :, None, :] / (k * k), (n, k, n, k, c))
        return g.reshape(src_size, src_size, c)
    return upstream.reshape(src_size, k, src_size, k, c).sum(axis=(1, 3))
