"""Synthetic fixtures: a renderable cartoon face with a 68-point landmark layout,
and labelled latent sets built around planted directions."""

from __future__ import annotations

import math

import numpy as np

from .directions import LabeledLatentDataset
from .geometry import BoundingBox, LandmarkSet


def _ring(cx, cy, rx, ry, n, start=0.0, stop=2 * math.pi, endpoint=False):
    t = np.linspace(start, stop, n, endpoint=endpoint)
    return np.column_stack([cx + rx * np.cos(t), cy + ry * np.sin(t)])


def face_landmarks(center=(0.0, 0.0), eye_distance: float = 40.0,
                   angle: float = 0.0) -> np.ndarray:
    """68 landmarks of an upright face, rotated by ``angle`` degrees about ``center``.

    A positive angle turns the eye line clockwise on screen, so
    :func:`latentedit.geometry.rotation_angle` reports ``angle`` back.
    """
    s = eye_distance / 2.0
    pts = np.concatenate([
        _ring(0, 0.6 * s, 1.6 * s, 1.9 * s, 17, 0.05 * math.pi, 0.95 * math.pi, True)[::-1],
        _ring(-s, -0.7 * s, 0.5 * s, 0.15 * s, 5, math.pi, 2 * math.pi, True),
        _ring(s, -0.7 * s, 0.5 * s, 0.15 * s, 5, math.pi, 2 * math.pi, True),
        np.column_stack([np.zeros(4), np.linspace(-0.2 * s, 0.6 * s, 4)]),
        np.column_stack([np.linspace(-0.4 * s, 0.4 * s, 5), np.full(5, 0.8 * s)]),
        _ring(-s, 0, 0.35 * s, 0.15 * s, 6, math.pi, 3 * math.pi),
        _ring(s, 0, 0.35 * s, 0.15 * s, 6, math.pi, 3 * math.pi),
        _ring(0, 1.4 * s, 0.7 * s, 0.25 * s, 12, math.pi, 3 * math.pi),
        _ring(0, 1.4 * s, 0.45 * s, 0.1 * s, 8, math.pi, 3 * math.pi),
    ])
    th = math.radians(angle)
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    return pts @ rot.T + np.asarray(center, dtype=np.float64)


def render_face(size: int, center=None, eye_distance: float | None = None,
                angle: float = 0.0, channels: int = 3):
    """Render a smooth cartoon face; returns ``(image, box, landmarks)``.

    Eyes are dark Gaussian blobs centred exactly on the mean of each eye's
    landmark group, so eye positions can be recovered from pixels.
    """
    if center is None:
        center = (size / 2.0, size / 2.0)
    if eye_distance is None:
        eye_distance = 0.3 * size
    pts = face_landmarks(center, eye_distance, angle)
    lm = LandmarkSet(pts)
    s = eye_distance / 2.0
    th = math.radians(angle)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xs - center[0], ys - center[1]
    u = math.cos(th) * dx + math.sin(th) * dy
    v = -math.sin(th) * dx + math.cos(th) * dy
    face = 1.0 / (1.0 + np.exp(((u / (1.7 * s)) ** 2 + ((v - 0.3 * s) / (2.3 * s)) ** 2 - 1.0) * 8.0))
    img = 0.15 + 0.6 * face
    sigma = 0.18 * s
    for grp in ((36, 42), (42, 48)):
        ex, ey = pts[grp[0]:grp[1]].mean(axis=0)
        img -= 0.5 * np.exp(-((xs - ex) ** 2 + (ys - ey) ** 2) / (2 * sigma ** 2))
    img -= 0.25 * np.exp(-(u ** 2 / (2 * (0.5 * s) ** 2) + (v - 1.4 * s) ** 2 / (2 * (0.12 * s) ** 2)))
    img = np.clip(img, 0.0, 1.0)
    x0, y0 = pts.min(axis=0) - 0.2 * s
    x1, y1 = pts.max(axis=0) + 0.2 * s
    box = BoundingBox(float(x0), float(y0), float(x1), float(y1))
    return np.repeat(img[:, :, None], channels, axis=2), box, lm


def dark_blob_centroid(img: np.ndarray, center, radius: float) -> np.ndarray:
    """Darkness-weighted centroid inside a disc; locates an eye blob in pixels."""
    gray = img.mean(axis=2)
    ys, xs = np.mgrid[0:gray.shape[0], 0:gray.shape[1]].astype(np.float64)
    disc = (xs - center[0]) ** 2 + (ys - center[1]) ** 2 <= radius ** 2
    ref = np.max(gray[disc])
    wts = np.where(disc, ref - gray, 0.0)
    return np.array([np.sum(wts * xs), np.sum(wts * ys)]) / np.sum(wts)


def unit_orthogonal(d: np.ndarray, seed: int) -> np.ndarray:
    """A seeded random unit vector orthogonal to unit ``d``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    e = rng.standard_normal(d.shape)
    e -= np.vdot(e, d) * d
    return e / np.linalg.norm(e)


def correlated_direction(d: np.ndarray, cos: float, seed: int) -> np.ndarray:
    """Unit vector whose cosine with unit ``d`` is exactly ``cos`` (up to rounding)."""
    return cos * d + math.sqrt(1.0 - cos * cos) * unit_orthogonal(d, seed)


def planted_dataset(direction: np.ndarray, n: int, seed: int, noise: float = 0.1,
                    names=("negative", "positive")) -> LabeledLatentDataset:
    """Standard-normal codes labelled by ``<direction, w> + noise * N(0, 1) > 0``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    codes = rng.standard_normal((n, *direction.shape))
    score = np.einsum("nij,ij->n", codes, direction) + noise * rng.standard_normal(n)
    return LabeledLatentDataset(codes, (score > 0).astype(np.int64), names)
