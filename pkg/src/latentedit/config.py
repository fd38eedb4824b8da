"""Pipeline configuration: defaults, JSON overrides and object builders."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .directions import LogisticConfig
from .editing import DEFAULT_ALPHAS
from .embedding import EmbedConfig, InitStrategy, LossWeights
from .generator import (
    DEFAULT_CHANNELS,
    DEFAULT_HIDDEN,
    DEFAULT_LATENT_SHAPE,
    DEFAULT_OUT_SIZE,
    PatchFeatures,
    ProjectionEmbedder,
    make_generator,
)
from .geometry import AlignConfig

DEFAULTS = {
    "seed": 0,
    "generator": {
        "kind": "linear",
        "seed": None,  # falls back to the global seed
        "latent_shape": list(DEFAULT_LATENT_SHAPE),
        "out_size": DEFAULT_OUT_SIZE,
        "channels": DEFAULT_CHANNELS,
        "hidden": DEFAULT_HIDDEN,
    },
    "embed": {
        "iterations": 1000,
        "init": "random",
        "init_seed": None,
        "mean_samples": 1000,
        "lambda_vgg": 1.0,
        "lambda_mse": 1.0,
        "vgg_size": None,
        "mse_size": None,
        "grid": 4,
        "eta": 0.01,
        "beta1": 0.9,
        "beta2": 0.99,
        "eps": 1e-8,
    },
    "logistic": {"lr": 1.0, "epochs": 1000, "l2": 1e-4, "seed": None, "split": 0.7},
    "align": {"out_size": 1024, "pad_mode": "reflect", "pad_value": 0.0,
              "eye_distance_frac": 0.28, "eye_anchor": [0.5, 0.42]},
    "mask": "default",
    "alphas": list(DEFAULT_ALPHAS),
}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ValueError(f"unknown config key '{where}{key}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ValueError(f"config key '{where}{key}' must be an object")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def load_config(path=None, seed: int | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        cfg = _merge(cfg, json.loads(Path(path).read_text()))
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def _or_seed(val, cfg):
    return cfg["seed"] if val is None else int(val)


def build_generator(cfg: dict):
    g = cfg["generator"]
    return make_generator(g["kind"], _or_seed(g["seed"], cfg), latent_shape=tuple(g["latent_shape"]),
                          out_size=g["out_size"], channels=g["channels"], hidden=g["hidden"])


def build_embed_config(cfg: dict) -> EmbedConfig:
    e = cfg["embed"]
    init = InitStrategy(e["init"], seed=_or_seed(e["init_seed"], cfg), samples=e["mean_samples"])
    return EmbedConfig(
        iterations=int(e["iterations"]), init=init,
        weights=LossWeights(float(e["lambda_vgg"]), float(e["lambda_mse"])),
        vgg_size=e["vgg_size"], mse_size=e["mse_size"],
        eta=e["eta"], beta1=e["beta1"], beta2=e["beta2"], eps=e["eps"])


def build_extractor(cfg: dict) -> PatchFeatures:
    return PatchFeatures(int(cfg["embed"]["grid"]))


def build_logistic_config(cfg: dict) -> LogisticConfig:
    lg = cfg["logistic"]
    return LogisticConfig(lr=lg["lr"], epochs=int(lg["epochs"]), l2=lg["l2"],
                          seed=_or_seed(lg["seed"], cfg), split=lg["split"])


def build_align_config(cfg: dict) -> AlignConfig:
    a = cfg["align"]
    return AlignConfig(out_size=int(a["out_size"]), pad_mode=a["pad_mode"],
                       pad_value=float(a["pad_value"]),
                       eye_distance_frac=float(a["eye_distance_frac"]),
                       eye_anchor=tuple(a["eye_anchor"]))


def parse_extractor(spec: str, shape=None):
    """``patch:G`` (grid means) or ``proj:DIM[:SEED]`` (seeded projection)."""
    kind, _, rest = spec.partition(":")
    if kind == "patch":
        return PatchFeatures(int(rest or 4))
    if kind == "proj":
        dim, _, seed = rest.partition(":")
        if shape is None:
            raise ValueError("projection embedder needs an image shape")
        return ProjectionEmbedder(int(seed or 0), int(dim or 64), shape)
    raise ValueError(f"unknown extractor spec {spec!r}")
