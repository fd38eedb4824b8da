"""Optimisation-based inversion of an image into a generator's latent space.

The objective is a weighted sum of a feature-space (perceptual) loss computed
at a reduced resolution and a pixel MSE computed at full resolution.  Codes
are updated with bias-corrected Adam, and the best code seen so far is kept.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import logit

from .errors import MissingTarget, NonFiniteLoss, ShapeMismatch
from .generator import GeneratorSpec, FeatureExtractor, LinearGenerator, PatchFeatures
from .imaging import resample, resample_vjp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    lambda_vgg: float = 1.0
    lambda_mse: float = 1.0

    def __post_init__(self):
        if self.lambda_vgg < 0 or self.lambda_mse < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_vgg == 0 and self.lambda_mse == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8

    @classmethod
    def fresh(cls, shape, **hyper) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), **hyper)


def adam_step(state: AdamState, grad, w) -> tuple[np.ndarray, AdamState]:
    grad = np.asarray(grad, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if grad.shape != w.shape or grad.shape != state.m.shape:
        raise ShapeMismatch(f"grad {grad.shape}, w {w.shape}, state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    w_new = w - state.eta * m_hat / (np.sqrt(v_hat) + state.eps)
    return w_new, replace(state, m=m, v=v, t=t)


# --- losses -----------------------------------------------------------------

def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")


def perceptual_loss(ext: FeatureExtractor, gen_img, target) -> float:
    _same_shape(gen_img, target)
    diff = ext.extract(gen_img) - ext.extract(target)
    return float(diff @ diff) / diff.size


def pixel_mse(gen_img, target) -> float:
    gen_img = np.asarray(gen_img, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _same_shape(gen_img, target)
    diff = (gen_img - target).reshape(-1)
    return float(diff @ diff) / diff.size


def loss_and_grad(weights: LossWeights, ext: FeatureExtractor, gen_img, target,
                  vgg_size: int, mse_size: int) -> tuple[float, np.ndarray]:
    """Weighted loss and its gradient with respect to ``gen_img``."""
    n = gen_img.shape[0]
    loss = 0.0
    grad = np.zeros_like(gen_img)
    if weights.lambda_vgg:
        x = resample(gen_img, vgg_size)
        t = resample(target, vgg_size)
        _same_shape(x, t)
        diff = ext.extract(x) - ext.extract(t)
        loss += weights.lambda_vgg * float(diff @ diff) / diff.size
        up = ext.vjp(x, (2.0 * weights.lambda_vgg / diff.size) * diff)
        grad += resample_vjp(up, n)
    if weights.lambda_mse:
        x = resample(gen_img, mse_size)
        t = resample(target, mse_size)
        _same_shape(x, t)
        diff = x - t
        loss += weights.lambda_mse * float(diff.reshape(-1) @ diff.reshape(-1)) / diff.size
        grad += resample_vjp((2.0 * weights.lambda_mse / diff.size) * diff, n)
    return loss, grad


def total_loss(weights: LossWeights, ext: FeatureExtractor, gen_img, target,
               vgg_size: int, mse_size: int) -> float:
    loss = 0.0
    if weights.lambda_vgg:
        loss += weights.lambda_vgg * perceptual_loss(
            ext, resample(gen_img, vgg_size), resample(target, vgg_size))
    if weights.lambda_mse:
        loss += weights.lambda_mse * pixel_mse(
            resample(gen_img, mse_size), resample(target, mse_size))
    return loss


# --- initialisation -----------------------------------------------------------

class RidgeEncoder:
    """Closed-form pre-image for :class:`LinearGenerator` only.

    Inverts the sigmoid pixelwise and solves the ridge system
    ``(A^T A + lam I) w = A^T (logit(I) - c)``.
    """

    def __init__(self, lam: float = 1e-3, clip: float = 1e-6):
        self.lam = lam
        self.clip = clip

    def __call__(self, gen: GeneratorSpec, target) -> np.ndarray:
        if not isinstance(gen, LinearGenerator):
            raise TypeError("RidgeEncoder only inverts LinearGenerator worlds")
        t = resample(np.asarray(target, dtype=np.float64), gen.out_size)
        z = logit(np.clip(t.reshape(-1), self.clip, 1.0 - self.clip)) - gen.params["c"]
        a = gen.params["A"]
        lhs = a.T @ a + self.lam * np.eye(a.shape[1])
        return np.linalg.solve(lhs, a.T @ z).reshape(gen.latent_shape)


@dataclass(frozen=True)
class InitStrategy:
    kind: str = "random"  # "encoder" | "mean_latent" | "random"
    seed: int = 0
    samples: int = 1000
    encoder: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("encoder", "mean_latent", "random"):
            raise ValueError(f"unknown init strategy {self.kind!r}")
        if self.samples < 1:
            raise ValueError("mean_latent needs at least one sample")


def init_latent(strategy: InitStrategy, gen: GeneratorSpec, target=None) -> np.ndarray:
    shape = gen.latent_shape
    if strategy.kind == "random":
        rng = np.random.Generator(np.random.PCG64(strategy.seed))
        return rng.standard_normal(shape)
    if strategy.kind == "mean_latent":
        rng = np.random.Generator(np.random.PCG64(strategy.seed))
        return rng.standard_normal((strategy.samples, *shape)).mean(axis=0)
    if target is None:
        raise MissingTarget("encoder initialisation needs a target image")
    encoder = strategy.encoder or RidgeEncoder()
    return np.asarray(encoder(gen, target), dtype=np.float64)


# --- Algorithm ---------------------------------------------------------------

@dataclass(frozen=True)
class EmbedConfig:
    iterations: int = 1000
    init: InitStrategy = field(default_factory=InitStrategy)
    weights: LossWeights = field(default_factory=LossWeights)
    vgg_size: int | None = None  # default: a quarter of the generator resolution
    mse_size: int | None = None  # default: the generator resolution
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def sizes(self, out_size: int) -> tuple[int, int]:
        vgg = self.vgg_size
        if vgg is None:
            vgg = out_size // 4 if out_size % 4 == 0 else out_size
        return vgg, self.mse_size or out_size


@dataclass
class EmbeddingResult:
    w_star: np.ndarray
    best_loss: float
    loss_trace: np.ndarray
    iterations_run: int
    w_init: np.ndarray | None = None


def embed(target, gen: GeneratorSpec, ext: FeatureExtractor | None = None,
          cfg: EmbedConfig | None = None, w_init=None) -> EmbeddingResult:
    """Invert ``target`` into ``gen``'s latent space.

    The loss at iteration ``i`` is evaluated at the code *before* the Adam
    update of that iteration, and ``w_star`` is that evaluated code, so
    ``G(w_star)`` reproduces ``best_loss`` exactly.
    """
    cfg = cfg or EmbedConfig()
    ext = ext or PatchFeatures(4)
    target = np.asarray(target, dtype=np.float64)
    vgg_size, mse_size = cfg.sizes(gen.out_size)
    w = init_latent(cfg.init, gen, target) if w_init is None else np.array(w_init, dtype=np.float64)
    w0 = w.copy()
    state = AdamState.fresh(gen.latent_shape, eta=cfg.eta, beta1=cfg.beta1,
                            beta2=cfg.beta2, eps=cfg.eps)

    trace = np.empty(cfg.iterations)
    best = math.inf
    w_star = w.copy()
    for i in range(cfg.iterations):
        img = gen.generate(w)
        loss, g_img = loss_and_grad(cfg.weights, ext, img, target, vgg_size, mse_size)
        if not math.isfinite(loss):
            raise NonFiniteLoss(i, loss)
        trace[i] = loss
        if loss < best:
            best = loss
            w_star = w.copy()
        w, state = adam_step(state, gen.vjp(w, g_img), w)
        if log.isEnabledFor(logging.DEBUG) and i % 100 == 0:
            log.debug("iter %d loss %.6g best %.6g", i, loss, best)

    return EmbeddingResult(w_star=w_star, best_loss=best, loss_trace=trace,
                           iterations_run=cfg.iterations, w_init=w0)
