"""Layer-masked linear edits of latent codes along attribute directions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .directions import AttributeDirection
from .errors import ShapeMismatch

# Edits outside this range tend to leave the generator's training manifold.
ADVISORY_ALPHA_RANGE = (-5.0, 5.0)
DEFAULT_ALPHAS = (-5.0, -3.0, 3.0, 5.0)


@dataclass(frozen=True)
class LayerMask:
    included: frozenset
    n_layers: int

    def __post_init__(self):
        inc = frozenset(int(i) for i in self.included)
        if not inc:
            raise ValueError("layer mask must include at least one layer")
        if min(inc) < 0 or max(inc) >= self.n_layers:
            raise ValueError(f"mask indices {sorted(inc)} out of range for {self.n_layers} layers")
        object.__setattr__(self, "included", inc)

    @classmethod
    def default(cls, n_layers: int) -> "LayerMask":
        """First ceil(8L/18) layers: exactly the first 8 of 18 at full scale."""
        return cls(frozenset(range(math.ceil(8 * n_layers / 18))), n_layers)

    @classmethod
    def full(cls, n_layers: int) -> "LayerMask":
        return cls(frozenset(range(n_layers)), n_layers)

    @classmethod
    def parse(cls, text: str, n_layers: int) -> "LayerMask":
        """Parse ``"default"``, ``"all"`` or a list such as ``"0-3,5"``."""
        text = text.strip().lower()
        if text == "default":
            return cls.default(n_layers)
        if text in ("all", "full"):
            return cls.full(n_layers)
        idx: set[int] = set()
        for part in text.split(","):
            lo, _, hi = part.partition("-")
            idx.update(range(int(lo), int(hi or lo) + 1))
        return cls(frozenset(idx), n_layers)

    def rows(self) -> np.ndarray:
        return np.array(sorted(self.included), dtype=np.int64)

    def __str__(self):
        return ",".join(str(i) for i in sorted(self.included))


@dataclass(frozen=True)
class EditSpec:
    direction: AttributeDirection
    alpha: float
    mask: LayerMask

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")


def edit_latent(w, spec: EditSpec) -> np.ndarray:
    """``w + alpha * a`` on the masked rows; other rows are copied unchanged."""
    w = np.asarray(w, dtype=np.float64)
    a = spec.direction.a
    if w.shape != a.shape or spec.mask.n_layers != w.shape[0]:
        raise ShapeMismatch(f"latent {w.shape}, direction {a.shape}, mask {spec.mask.n_layers} layers")
    out = w.copy()
    if spec.alpha != 0.0:
        rows = spec.mask.rows()
        out[rows] = w[rows] + spec.alpha * a[rows]
    return out


def sweep(w, direction: AttributeDirection, alphas: Sequence[float],
          mask: LayerMask) -> list[np.ndarray]:
    if len(alphas) == 0:
        raise ValueError("alphas must be non-empty")
    return [edit_latent(w, EditSpec(direction, float(al), mask)) for al in alphas]


def multi_edit(w, specs: Iterable[EditSpec]) -> np.ndarray:
    out = np.asarray(w, dtype=np.float64).copy()
    for spec in specs:
        out = edit_latent(out, spec)
    return out
