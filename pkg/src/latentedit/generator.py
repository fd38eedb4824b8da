"""Differentiable generator / feature-extractor contracts and seeded synthetic worlds.

Two reference generators are provided.  Both map a layered latent code
``w`` (L x D) to an n x n x C image through a sigmoid output layer:

* ``LinearGenerator``:  ``sigmoid(A @ vec(w) + c)``
* ``MLPGenerator``:     ``sigmoid(W2 @ tanh(W1 @ vec(w) + b1) + b2)``

Each world carries a planted unit direction ``d``.  Its parameters are built
so that ``d`` pushes every pixel of the central region upward, which makes the
central-region mean brightness strictly increasing along ``d``.

Seeding: generator parameters are drawn from
``Generator(PCG64(SeedSequence([seed, KIND_TAG])))`` in the order listed in
each ``_build`` method, then rounded to float32 so that the GEN1 file (which
stores f32) reloads a bit-identical world.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
from scipy.special import expit

from .errors import BadGrid, ShapeMismatch

DEFAULT_LATENT_SHAPE = (4, 16)
DEFAULT_OUT_SIZE = 64
DEFAULT_CHANNELS = 3
DEFAULT_HIDDEN = 32

KIND_TAGS = {"linear": 0, "mlp": 1}


class GeneratorSpec(Protocol):
    latent_shape: tuple[int, int]
    out_size: int
    channels: int

    def generate(self, w: np.ndarray) -> np.ndarray: ...

    def vjp(self, w: np.ndarray, upstream: np.ndarray) -> np.ndarray: ...


class FeatureExtractor(Protocol):
    def extract(self, img: np.ndarray) -> np.ndarray: ...

    def vjp(self, img: np.ndarray, upstream: np.ndarray) -> np.ndarray: ...


def sample_latent(seed: int, shape=DEFAULT_LATENT_SHAPE) -> np.ndarray:
    """I.i.d. standard normal code from ``Generator(PCG64(seed))``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(tuple(shape))


def central_mean(img: np.ndarray) -> float:
    """Mean intensity over the central n/2 x n/2 window (the planted statistic)."""
    h, w = img.shape[:2]
    return float(img[h // 4: h - h // 4, w // 4: w - w // 4].mean())


def central_mask(n: int, channels: int) -> np.ndarray:
    m = np.zeros((n, n, channels), dtype=bool)
    m[n // 4: n - n // 4, n // 4: n - n // 4] = True
    return m.reshape(-1)


def _f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def f32_unit(v: np.ndarray, max_iter: int = 8) -> np.ndarray:
    """Unit vector whose float32 rounding renormalises back to itself.

    Storing the result as f32 and renormalising on load reproduces it bit for
    bit, which keeps unit-norm quantities stable across file round trips.
    """
    v32 = _f32(v)
    u = v32 / np.linalg.norm(v32)
    for _ in range(max_iter):
        u32 = _f32(u)
        if np.array_equal(u32, v32):
            break
        v32 = u32
        u = v32 / np.linalg.norm(v32)
    return u


_unit = f32_unit


class SyntheticGenerator:
    """Shared plumbing for the seeded reference generators."""

    kind = ""

    def __init__(self, seed: int, latent_shape=DEFAULT_LATENT_SHAPE,
                 out_size: int = DEFAULT_OUT_SIZE, channels: int = DEFAULT_CHANNELS,
                 hidden: int = DEFAULT_HIDDEN, params: dict | None = None):
        self.seed = int(seed)
        self.latent_shape = (int(latent_shape[0]), int(latent_shape[1]))
        self.out_size = int(out_size)
        self.channels = int(channels)
        self.hidden = int(hidden)
        if min(self.latent_shape) < 1:
            raise ValueError(f"latent shape must be positive, got {self.latent_shape}")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if params is None:
            ss = np.random.SeedSequence([self.seed, KIND_TAGS[self.kind]])
            params = self._build(np.random.Generator(np.random.PCG64(ss)))
        self.params = {k: _f32(v) for k, v in params.items()}
        self.params["d"] = _unit(self.params["d"])
        for v in self.params.values():
            v.setflags(write=False)

    @property
    def n_latent(self) -> int:
        return self.latent_shape[0] * self.latent_shape[1]

    @property
    def n_pixels(self) -> int:
        return self.out_size * self.out_size * self.channels

    @property
    def planted(self) -> np.ndarray:
        """The planted unit direction as an L x D matrix."""
        return self.params["d"].reshape(self.latent_shape)

    def statistic(self, img: np.ndarray) -> float:
        return central_mean(img)

    def _flat(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.latent_shape:
            raise ShapeMismatch(f"latent shape {w.shape} != {self.latent_shape}")
        return w.reshape(-1)

    def _image_shape(self) -> tuple[int, int, int]:
        return (self.out_size, self.out_size, self.channels)

    def _upstream(self, upstream) -> np.ndarray:
        u = np.asarray(upstream, dtype=np.float64)
        if u.shape != self._image_shape():
            raise ShapeMismatch(f"upstream shape {u.shape} != {self._image_shape()}")
        return u.reshape(-1)

    def _planted_parts(self, rng):
        d = _unit(rng.standard_normal(self.n_latent))
        cm = central_mask(self.out_size, self.channels)
        return d, cm

    def _build(self, rng) -> dict:
        raise NotImplementedError

    def generate(self, w) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, w, upstream) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return (f"{type(self).__name__}(seed={self.seed}, latent_shape={self.latent_shape}, "
                f"out_size={self.out_size}, channels={self.channels})")


class LinearGenerator(SyntheticGenerator):
    kind = "linear"

    def _build(self, rng) -> dict:
        d, cm = self._planted_parts(rng)
        n_px, n_lat = self.n_pixels, self.n_latent
        a0 = rng.standard_normal((n_px, n_lat)) / np.sqrt(n_lat)
        c = 0.5 * rng.standard_normal(n_px)
        gain = 0.1 * rng.standard_normal(n_px)
        gain[cm] = 0.5 + np.abs(gain[cm])
        a = a0 - np.outer(a0 @ d, d) + np.outer(gain, d)
        return {"d": d, "A": a, "c": c}

    def preactivation(self, w) -> np.ndarray:
        return self.params["A"] @ self._flat(w) + self.params["c"]

    def generate(self, w) -> np.ndarray:
        return expit(self.preactivation(w)).reshape(self._image_shape())

    def vjp(self, w, upstream) -> np.ndarray:
        u = self._upstream(upstream)
        y = expit(self.preactivation(w))
        return (self.params["A"].T @ (u * y * (1.0 - y))).reshape(self.latent_shape)


class MLPGenerator(SyntheticGenerator):
    kind = "mlp"

    def _build(self, rng) -> dict:
        d, cm = self._planted_parts(rng)
        n_px, n_lat, hid = self.n_pixels, self.n_latent, self.hidden
        w1_0 = rng.standard_normal((hid, n_lat)) / np.sqrt(n_lat)
        b1 = 0.1 * rng.standard_normal(hid)
        q = 0.5 + 0.1 * np.abs(rng.standard_normal(hid))
        w2 = rng.standard_normal((n_px, hid)) * (2.0 / np.sqrt(hid))
        b2 = 0.5 * rng.standard_normal(n_px)
        w1 = w1_0 - np.outer(w1_0 @ d, d) + np.outer(q, d)
        w2[cm] = np.abs(w2[cm])
        return {"d": d, "W1": w1, "b1": b1, "W2": w2, "b2": b2}

    def _forward(self, w):
        h = np.tanh(self.params["W1"] @ self._flat(w) + self.params["b1"])
        y = expit(self.params["W2"] @ h + self.params["b2"])
        return h, y

    def generate(self, w) -> np.ndarray:
        return self._forward(w)[1].reshape(self._image_shape())

    def vjp(self, w, upstream) -> np.ndarray:
        u = self._upstream(upstream)
        h, y = self._forward(w)
        dh = self.params["W2"].T @ (u * y * (1.0 - y))
        return (self.params["W1"].T @ (dh * (1.0 - h * h))).reshape(self.latent_shape)


GENERATORS = {"linear": LinearGenerator, "mlp": MLPGenerator}


def make_generator(kind: str = "linear", seed: int = 0, **kwargs) -> SyntheticGenerator:
    try:
        cls = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown generator kind {kind!r}") from None
    return cls(seed, **kwargs)


def linear_generate(w, world: LinearGenerator) -> np.ndarray:
    if not isinstance(world, LinearGenerator):
        raise TypeError("linear_generate needs a LinearGenerator world")
    return world.generate(w)


def mlp_generate(w, world: MLPGenerator) -> np.ndarray:
    if not isinstance(world, MLPGenerator):
        raise TypeError("mlp_generate needs an MLPGenerator world")
    return world.generate(w)


def generator_vjp(gen: GeneratorSpec, w, upstream) -> np.ndarray:
    """Gradient of ``<upstream, gen.generate(w)>`` with respect to ``w``."""
    return gen.vjp(w, upstream)


class PatchFeatures:
    """Per-cell, per-channel means over a g x g grid.

    Stands in for a convolutional feature map: spatially pooled, linear, with
    an adjoint that spreads each cell's gradient uniformly over its pixels.
    """

    def __init__(self, grid: int = 4):
        if grid < 1:
            raise BadGrid(f"grid must be >= 1, got {grid}")
        self.grid = int(grid)

    def _cell(self, img) -> int:
        n = img.shape[0]
        if img.shape[1] != n or n % self.grid:
            raise BadGrid(f"grid {self.grid} does not divide image size {img.shape[:2]}")
        return n // self.grid

    def extract(self, img) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        k = self._cell(img)
        g, c = self.grid, img.shape[2]
        return img.reshape(g, k, g, k, c).mean(axis=(1, 3)).reshape(-1)

    def vjp(self, img, upstream) -> np.ndarray:
        k = self._cell(img)
        g, c = self.grid, img.shape[2]
        u = np.asarray(upstream, dtype=np.float64).reshape(g, 1, g, 1, c) / (k * k)
        return np.broadcast_to(u, (g, k, g, k, c)).reshape(img.shape).copy()

    def __repr__(self):
        return f"PatchFeatures(grid={self.grid})"


def patch_features(img, grid: int) -> np.ndarray:
    return PatchFeatures(grid).extract(img)


class ProjectionEmbedder:
    """Seeded random linear projection of the mean-centred image.

    Used as the pluggable identity embedder: unlike patch means its outputs
    take both signs, so unit-normalised embeddings spread over the sphere.
    """

    def __init__(self, seed: int = 0, dim: int = 64, shape=(DEFAULT_OUT_SIZE, DEFAULT_OUT_SIZE,
                                                         DEFAULT_CHANNELS)):
        self.seed = int(seed)
        self.dim = int(dim)
        self.shape = tuple(shape)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, 7])))
        n = int(np.prod(self.shape))
        self.proj = rng.standard_normal((self.dim, n)) / np.sqrt(n)

    def _check(self, img):
        if img.shape != self.shape:
            raise ShapeMismatch(f"embedder built for {self.shape}, got {img.shape}")

    def extract(self, img) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        self._check(img)
        return self.proj @ (img.reshape(-1) - 0.5)

    def vjp(self, img, upstream) -> np.ndarray:
        self._check(img)
        return (self.proj.T @ np.asarray(upstream, dtype=np.float64)).reshape(self.shape)

    def __repr__(self):
        return f"ProjectionEmbedder(seed={self.seed}, dim={self.dim}, shape={self.shape})"
