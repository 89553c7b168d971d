"""
Sampling networks N_s and N_c: unit-Gaussian noise -> extrinsic code row slices.
"""

from typing import Optional

import torch
from torch import nn

from ..config import GeneratorConfig


class RowSampler(nn.Module):
    """MLP from a noise vector to `rows` code rows of width D."""

    def __init__(self, noise_dim: int, rows: int, latent_dim: int, hidden: int = 128):
        super().__init__()
        self.noise_dim = noise_dim
        self.rows = rows
        self.latent_dim = latent_dim
        self.net = nn.Sequential(
            nn.Linear(noise_dim, hidden), nn.LeakyReLU(0.2),
            nn.Linear(hidden, hidden), nn.LeakyReLU(0.2),
            nn.Linear(hidden, rows * latent_dim),
        )

    def forward(self, noise: torch.Tensor) -> torch.Tensor:
        return self.net(noise).view(-1, self.rows, self.latent_dim)

    def noise(self, batch: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return torch.randn(batch, self.noise_dim, generator=generator)


class StyleSampler(nn.Module):
    """N_s for structure rows [0, n_s) and N_c for color rows [n_s, L)."""

    def __init__(self, config: GeneratorConfig, noise_dim: int = 64, hidden: int = 128):
        super().__init__()
        self.n_structure = config.n_structure
        self.n_color = config.n_color
        self.structure = RowSampler(noise_dim, config.n_structure, config.latent_dim, hidden)
        self.color = RowSampler(noise_dim, config.n_color, config.latent_dim, hidden)

    def forward(self, structure_noise: torch.Tensor, color_noise: torch.Tensor) -> torch.Tensor:
        return torch.cat([self.structure(structure_noise), self.color(color_noise)], dim=1)
