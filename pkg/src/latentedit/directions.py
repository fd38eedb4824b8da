"""Attribute hyperplanes in latent space.

A logistic classifier is fit on labelled latent codes; the normal of its
decision boundary, scaled to unit length, is the attribute direction.
Directions can be compared by cosine similarity and disentangled from one
another by subtracting projections.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DegenerateResult, ShapeMismatch, SingleClassDataset, ZeroVector


@dataclass
class LabeledLatentDataset:
    codes: np.ndarray  # (n, L, D)
    labels: np.ndarray  # (n,) in {0, 1}
    label_names: tuple[str, str] = ("negative", "positive")

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.codes.ndim != 3:
            raise ShapeMismatch(f"codes must be (n, L, D), got {self.codes.shape}")
        if len(self.codes) != len(self.labels):
            raise ShapeMismatch("codes and labels differ in length")
        if len(self.labels) < 2:
            raise ValueError("dataset needs at least two records")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if len(np.unique(self.labels)) < 2:
            raise SingleClassDataset("both labels must be present")

    @classmethod
    def from_records(cls, records, label_names=("negative", "positive")):
        codes, labels = zip(*records)
        return cls(np.stack(codes), np.array(labels), label_names)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class LogisticConfig:
    lr: float = 1.0
    epochs: int = 1000
    l2: float = 1e-4
    seed: int = 0
    split: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class AttributeDirection:
    a: np.ndarray
    b: float = 0.0
    name: str = ""
    train_accuracy: float = float("nan")

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if not np.all(np.isfinite(a)) or not np.isfinite(self.b):
            raise ValueError("direction contains non-finite values")
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit norm, got {np.linalg.norm(a)}")
        object.__setattr__(self, "a", a)

    @property
    def shape(self):
        return self.a.shape


@dataclass
class LogisticFit:
    a_raw: np.ndarray
    b: float
    train_acc: float
    test_acc: float


def _split(n: int, cfg: LogisticConfig) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.Generator(np.random.PCG64(cfg.seed)).permutation(n)
    n_train = min(max(int(round(cfg.split * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _accuracy(x, y, a, b) -> float:
    return float(np.mean(((x @ a + b) > 0) == (y == 1)))


def train_logistic(ds: LabeledLatentDataset, cfg: LogisticConfig | None = None) -> LogisticFit:
    """Full-batch gradient descent on L2-regularised mean cross-entropy.

    The bias is not regularised.  Accuracies use the 0.5 probability threshold.
    """
    cfg = cfg or LogisticConfig()
    shape = ds.codes.shape[1:]
    x = ds.codes.reshape(len(ds), -1)
    y = ds.labels.astype(np.float64)
    tr, te = _split(len(ds), cfg)
    xt, yt = x[tr], y[tr]
    if len(np.unique(yt)) < 2:
        raise SingleClassDataset("training split holds a single class")

    a = np.zeros(x.shape[1])
    b = 0.0
    n = len(yt)
    for _ in range(cfg.epochs):
        r = expit(xt @ a + b) - yt
        a -= cfg.lr * (xt.T @ r / n + cfg.l2 * a)
        b -= cfg.lr * float(r.mean())

    return LogisticFit(a.reshape(shape), b, _accuracy(xt, yt, a, b),
                       _accuracy(x[te], y[te], a, b))


def extract_direction(a_raw, b: float, name: str = "", train_accuracy=float("nan")
                      ) -> AttributeDirection:
    """Scale ``(a_raw, b)`` so ``a`` has unit norm; the zero-level set is unchanged."""
    a_raw = np.asarray(a_raw, dtype=np.float64)
    norm = np.linalg.norm(a_raw)
    if not norm > 0:
        raise ZeroVector("attribute vector has zero norm")
    return AttributeDirection(a_raw / norm, float(b) / norm, name, float(train_accuracy))


def _check_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def classify(d: AttributeDirection, w) -> float:
    w = np.asarray(w, dtype=np.float64)
    _check_shape(d.a, w)
    return float(expit(np.vdot(d.a, w) + d.b))


def cosine_similarity(d1: AttributeDirection, d2: AttributeDirection) -> float:
    _check_shape(d1.a, d2.a)
    return float(np.clip(np.vdot(d1.a, d2.a), -1.0, 1.0))


def correlation_matrix(dirs: Sequence[AttributeDirection]) -> np.ndarray:
    if len(dirs) < 2:
        raise ValueError("need at least two directions")
    for d in dirs[1:]:
        _check_shape(dirs[0].a, d.a)
    flat = np.stack([d.a.reshape(-1) for d in dirs])
    c = np.clip(flat @ flat.T, -1.0, 1.0)
    c = (c + c.T) / 2.0
    np.fill_diagonal(c, 1.0)
    return c


def project_subtract(a: AttributeDirection, xs: Sequence[AttributeDirection],
                     iterate: bool = False, tol: float = 1e-10,
                     max_passes: int = 1000) -> AttributeDirection:
    """Remove from ``a`` its components along each ``x`` in turn.

    A single pass subtracts ``<a, x> x`` for every ``x`` in order.  With
    ``iterate`` the passes repeat until ``a`` is orthogonal to all ``xs``
    within ``tol``.  The result is renormalised and carries a zero bias.
    """
    for x in xs:
        _check_shape(a.a, x.a)
    # Passes act on the unnormalised residual (a has unit norm), so a
    # direction inside span(xs) decays towards zero instead of having its
    # rounding noise rescaled into a spurious answer.
    v = a.a.copy()
    for _ in range(max_passes):
        for x in xs:
            v = v - np.vdot(v, x.a) * x.a
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            raise DegenerateResult("direction lies in the span of the projected set")
        u = v / norm
        if not iterate or not xs or max(abs(np.vdot(u, x.a)) for x in xs) <= tol:
            return replace(a, a=u, b=0.0)
    raise DegenerateResult(f"no orthogonal residual after {max_passes} passes")
