"""
Fixed feature networks used by the losses.

FeatureExtractor is a seeded random conv pyramid whose three taps play the
role of a pretrained classifier's early layers. IdentityEmbedder is a small
trainable CNN producing unit-norm embeddings; it is trained once on synthetic
identity labels (see training.embedder_training) and then frozen.
"""

import logging
from typing import Dict, List

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import RefusalError

logger = logging.getLogger(__name__)

TAPS = ("level1", "level2", "level3")


class FeatureExtractor(nn.Module):
    """
    Three stride-2 3×3 convs (3 -> 16 -> 32 -> 64) with leaky ReLU.

    Example:
        features = FeatureExtractor(seed=0)(images)
        features["level3"].shape -> (B, 64, R/8, R/8)
    """

    def __init__(self, seed: int = 0, widths: List[int] = (16, 32, 64)):
        super().__init__()
        self.seed = seed
        generator = torch.Generator().manual_seed(seed)
        levels = []
        previous = 3
        for width in widths:
            conv = nn.Conv2d(previous, width, 3, stride=2, padding=1)
            fan_in = previous * 9
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=generator)
                                  * (2.0 / fan_in) ** 0.5)
                conv.bias.zero_()
            levels.append(conv)
            previous = width
        self.levels = nn.ModuleList(levels)
        self.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> Dict[str, torch.Tensor]:
        features = {}
        for name, conv in zip(TAPS, self.levels):
            x = F.leaky_relu(conv(x), 0.2)
            features[name] = x
        return features


class IdentityEmbedder(nn.Module):
    """Small CNN -> GAP -> linear -> unit-norm embedding."""

    def __init__(self, embedding_dim: int = 32):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.features = nn.Sequential(
            nn.Conv2d(3, 32, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(64, 64, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(64, 128, 3, stride=2, padding=1), nn.LeakyReLU(0.2),
        )
        self.project = nn.Linear(128, embedding_dim)
        self.register_buffer("trained", torch.zeros((), dtype=torch.bool))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        pooled = self.features(x).mean(dim=(2, 3))
        return F.normalize(self.project(pooled), dim=-1)

    def embed(self, x: torch.Tensor, allow_untrained: bool = False) -> torch.Tensor:
        """
        Unit-norm embeddings (B, embedding_dim).

        Raises:
            RefusalError: if the embedder is untrained and allow_untrained is False
        """
        if not bool(self.trained) and not allow_untrained:
            raise RefusalError("identity embedder is untrained; run train-base first")
        return self(x)

    def mark_trained(self):
        self.trained.fill_(True)
        self.requires_grad_(False)
