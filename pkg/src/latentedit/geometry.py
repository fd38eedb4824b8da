"""Face pre-processing: primary-face selection, de-rotation and canonical alignment.

Coordinates follow the usual image convention: ``x`` grows to the right,
``y`` grows downward and integer coordinates sit on pixel centres.  Affine
matrices are 2x3 and map *source* coordinates to *destination* coordinates,
the same layout ``cv2.warpAffine`` expects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadIndexRange,
    DegenerateEyes,
    EmptyInput,
    ShapeMismatch,
    SingularTransform,
)

# dlib 68-point layout: 36-41 and 42-47 are the two eye contours.
EYE_GROUPS_68 = ((36, 42), (42, 48))

PAD_MODES = ("reflect", "replicate", "constant")


@dataclass(frozen=True)
class BoundingBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates {vals}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {vals}")

    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class LandmarkSet:
    """Landmark points plus the half-open index ranges of the two eye groups."""

    points: np.ndarray
    eye_left_idx: tuple[int, int] = EYE_GROUPS_68[0]
    eye_right_idx: tuple[int, int] = EYE_GROUPS_68[1]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ShapeMismatch(f"landmarks must be (K, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks contain non-finite values")
        object.__setattr__(self, "points", pts)
        for rng in (self.eye_left_idx, self.eye_right_idx):
            lo, hi = rng
            if not (0 <= lo < hi <= len(pts)):
                raise BadIndexRange(f"eye index range {rng} invalid for {len(pts)} points")
        (a0, a1), (b0, b1) = self.eye_left_idx, self.eye_right_idx
        if a0 < b1 and b0 < a1:
            raise BadIndexRange("eye index ranges overlap")


@dataclass(frozen=True)
class AffineTransform:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (2, 3):
            raise ShapeMismatch(f"affine matrix must be 2x3, got {m.shape}")
        object.__setattr__(self, "m", m)

    @property
    def det(self) -> float:
        return float(self.m[0, 0] * self.m[1, 1] - self.m[0, 1] * self.m[1, 0])

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.m[:, :2].T + self.m[:, 2]

    def inverse(self) -> "AffineTransform":
        det = self.det
        if det == 0.0 or not math.isfinite(det):
            raise SingularTransform(f"linear part has determinant {det}")
        (a, b, tx), (c, d, ty) = self.m
        inv = np.array([[d, -b], [-c, a]]) / det
        t = -inv @ np.array([tx, ty])
        return AffineTransform(np.column_stack([inv, t]))

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


@dataclass(frozen=True)
class AlignConfig:
    out_size: int = 1024
    pad_mode: str = "reflect"
    pad_value: float = 0.0
    interp: str = "bilinear"
    eye_distance_frac: float = 0.28
    eye_anchor: tuple[float, float] = field(default=(0.5, 0.42))

    def __post_init__(self):
        n = self.out_size
        if n < 8 or n & (n - 1):
            raise ValueError(f"out_size must be a power of two >= 8, got {n}")
        if self.pad_mode not in PAD_MODES:
            raise ValueError(f"pad_mode must be one of {PAD_MODES}")
        if self.interp != "bilinear":
            raise ValueError("only bilinear interpolation is supported")


def select_primary_face(boxes: Sequence[BoundingBox]) -> BoundingBox:
    """Largest box wins; equal areas fall back to smallest ``x0`` then ``y0``."""
    if not boxes:
        raise EmptyInput("no faces detected")
    return min(boxes, key=lambda b: (-b.area(), b.x0, b.y0))


def eye_centers(lm: LandmarkSet) -> tuple[np.ndarray, np.ndarray]:
    a = lm.points[slice(*lm.eye_left_idx)].mean(axis=0)
    b = lm.points[slice(*lm.eye_right_idx)].mean(axis=0)
    if b[0] < a[0]:
        a, b = b, a
    return a, b


def rotation_angle(left, right) -> float:
    """Angle of the eye line in degrees, in (-180, 180]."""
    dx = float(right[0]) - float(left[0])
    dy = float(right[1]) - float(left[1])
    if dx == 0.0 and dy == 0.0:
        raise DegenerateEyes("eye centres coincide")
    ang = math.degrees(math.atan2(dy, dx))
    return 180.0 if ang == -180.0 else ang


def derotation_transform(center, angle: float, scale: float = 1.0) -> AffineTransform:
    """Rotation by ``-angle`` degrees about ``center`` with uniform ``scale``.

    Identical in layout to OpenCV's ``getRotationMatrix2D``.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    quarter = angle / 90.0
    if quarter == round(quarter):
        # exact trig for quarter turns so axis-aligned warps permute pixels exactly
        cos, sin = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(round(quarter)) % 4]
    else:
        cos, sin = math.cos(math.radians(angle)), math.sin(math.radians(angle))
    a = scale * cos
    b = scale * sin
    cx, cy = float(center[0]), float(center[1])
    return AffineTransform(np.array([
        [a, b, (1.0 - a) * cx - b * cy],
        [-b, a, b * cx + (1.0 - a) * cy],
    ]))


def _pad_index(idx: np.ndarray, n: int, mode: str) -> np.ndarray:
    if mode == "replicate" or mode == "constant":
        return np.clip(idx, 0, n - 1)
    # reflect about the edge pixel centres (-1 -> 1, n -> n-2)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def apply_affine(img: np.ndarray, t: AffineTransform, out_w: int, out_h: int,
                 cfg: AlignConfig | None = None) -> np.ndarray:
    """Warp ``img`` by ``t`` with bilinear sampling at inverse-mapped coordinates."""
    cfg = cfg or AlignConfig(out_size=8)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.size == 0:
        raise EmptyInput("empty image")
    h, w, _ = img.shape
    inv = t.inverse().m

    ys, xs = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    def tap(yi, xi):
        vals = img[_pad_index(yi, h, cfg.pad_mode), _pad_index(xi, w, cfg.pad_mode)]
        if cfg.pad_mode == "constant":
            outside = (xi < 0) | (xi >= w) | (yi < 0) | (yi >= h)
            vals = np.where(outside[..., None], cfg.pad_value, vals)
        return vals

    top = (1.0 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)
    bottom = (1.0 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1)
    return (1.0 - fy) * top + fy * bottom


def alignment_transform(lm: LandmarkSet, cfg: AlignConfig) -> AffineTransform:
    """Similarity transform taking the eye line to its canonical place in the output."""
    left, right = eye_centers(lm)
    angle = rotation_angle(left, right)
    dist = float(np.hypot(*(right - left)))
    scale = cfg.eye_distance_frac * cfg.out_size / dist
    mid = (left + right) / 2.0
    rot = derotation_transform(mid, angle, scale).m.copy()
    anchor = np.array(cfg.eye_anchor, dtype=np.float64) * cfg.out_size
    rot[:, 2] += anchor - mid
    return AffineTransform(rot)


def align_face(img: np.ndarray, box: BoundingBox, lm: LandmarkSet,
               cfg: AlignConfig) -> np.ndarray:
    """De-rotate, scale and crop ``img`` to a ``cfg.out_size`` square canonical face.

    ``box`` is the detected face; landmarks drive the geometry.  The box is only
    checked for consistency with the eye centres, which must fall inside it.
    """
    left, right = eye_centers(lm)
    for p in (left, right):
        if not (box.x0 <= p[0] <= box.x1 and box.y0 <= p[1] <= box.y1):
            raise ValueError(f"eye centre {tuple(p)} lies outside the face box")
    t = alignment_transform(lm, cfg)
    return apply_affine(img, t, cfg.out_size, cfg.out_size, cfg)
