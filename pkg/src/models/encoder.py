"""
Latent encoder E: images -> extended z-space codes (B, L, D).
A shared conv backbone feeds L separate linear row heads.
"""

import torch
from torch import nn

from ..config import GeneratorConfig
from ..errors import RefusalError, require


class LatentEncoder(nn.Module):
    """Conv pyramid 3×R×R -> 4×4 features -> shared hidden vector -> L row heads."""

    def __init__(self, config: GeneratorConfig, hidden: int = 256):
        super().__init__()
        self.config = config
        self.num_slots = config.num_slots
        self.latent_dim = config.latent_dim
        resolutions = list(reversed(config.resolutions))

        layers = [nn.Conv2d(3, config.channels(resolutions[0]), 3, padding=1), nn.LeakyReLU(0.2)]
        for res in resolutions[:-1]:
            layers += [nn.Conv2d(config.channels(res), config.channels(res // 2), 3,
                                 stride=2, padding=1),
                       nn.LeakyReLU(0.2)]
        self.backbone = nn.Sequential(*layers)
        self.shared = nn.Sequential(
            nn.Flatten(), nn.Linear(config.channels(4) * 16, hidden), nn.LeakyReLU(0.2))
        self.heads = nn.ModuleList(nn.Linear(hidden, config.latent_dim)
                                   for _ in range(self.num_slots))
        self.register_buffer("trained", torch.zeros((), dtype=torch.bool))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        require(x.dim() == 4 and x.shape[1:] == (3, self.config.resolution, self.config.resolution),
                f"encoder expects (B, 3, {self.config.resolution}, {self.config.resolution}), "
                f"got {tuple(x.shape)}")
        features = self.shared(self.backbone(x))
        return torch.stack([head(features) for head in self.heads], dim=1)

    def encode(self, x: torch.Tensor, allow_untrained: bool = False) -> torch.Tensor:
        """
        Deterministic z+ code for each image.

        Raises:
            RefusalError: if the encoder has not been trained and allow_untrained is False
        """
        if not bool(self.trained) and not allow_untrained:
            raise RefusalError("encoder is untrained; train it first or pass allow_untrained")
        return self(x)

    def mark_trained(self):
        self.trained.fill_(True)

