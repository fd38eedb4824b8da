"""Latent-space inversion and attribute editing against synthetic generators."""

from .directions import AttributeDirection, LabeledLatentDataset, LogisticConfig
from .editing import EditSpec, LayerMask, edit_latent, sweep
from .embedding import EmbedConfig, EmbeddingResult, InitStrategy, embed
from .errors import LatentEditError
from .generator import LinearGenerator, MLPGenerator, PatchFeatures, make_generator

__version__ = "0.1.0"

__all__ = [
    "AttributeDirection", "LabeledLatentDataset", "LogisticConfig",
    "EditSpec", "LayerMask", "edit_latent", "sweep",
    "EmbedConfig", "EmbeddingResult", "InitStrategy", "embed",
    "LatentEditError", "LinearGenerator", "MLPGenerator", "PatchFeatures", "make_generator",
]
