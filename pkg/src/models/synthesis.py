"""
Base style-based generator g = synthesize ∘ f, its discriminator, and style mixing.

Codes are batched throughout:
    (B, D)       one z per sample, broadcast to every style slot
    (B, 1, D)    same, explicit row axis
    (B, L, D)    extended code z+, one row per style slot
Images are (B, 3, R, R) in [-1, 1].
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from ..config import GeneratorConfig
from ..errors import ContractViolation, require
from ..numerics.adain import TRAIN_EPS, adain

logger = logging.getLogger(__name__)

NOISE_MODES = ("zero", "seeded")

Style = Tuple[torch.Tensor, torch.Tensor]
ResidualHook = Callable[[int, torch.Tensor], torch.Tensor]


def extend_code(z: torch.Tensor, num_slots: int, latent_dim: int) -> torch.Tensor:
    """
    Broadcast a code to (B, L, D).

    Raises:
        ContractViolation: for any other shape
    """
    if z.dim() == 2 and z.shape[1] == latent_dim:
        return z.unsqueeze(1).expand(-1, num_slots, -1)
    if z.dim() == 3 and z.shape[2] == latent_dim:
        if z.shape[1] == 1:
            return z.expand(-1, num_slots, -1)
        if z.shape[1] == num_slots:
            return z
    raise ContractViolation(
        f"style code must be (B, {latent_dim}), (B, 1, {latent_dim}) or "
        f"(B, {num_slots}, {latent_dim}); got {tuple(z.shape)}")


def style_mix(z1: torch.Tensor, z2: torch.Tensor, l: int,
              num_slots: int, latent_dim: int) -> torch.Tensor:
    """
    Rows [0, l) from z1, rows [l, L) from z2.

    Args:
        z1, z2: Codes of any accepted shape with the same batch size
        l: Split row, 0 ≤ l ≤ L

    Returns:
        Extended code (B, L, D)
    """
    require(0 <= l <= num_slots, f"style-mix split l={l} outside [0, {num_slots}]")
    a = extend_code(z1, num_slots, latent_dim)
    b = extend_code(z2, num_slots, latent_dim)
    require(a.shape[0] == b.shape[0], "style_mix needs codes with equal batch size")
    return torch.cat([a[:, :l], b[:, l:]], dim=1)


class PixelNorm(nn.Module):
    """Row-wise normalization to unit RMS; makes the mapping network scale invariant."""

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return z * torch.rsqrt(z.pow(2).mean(dim=-1, keepdim=True) + 1e-8)


class MappingNetwork(nn.Module):
    """f: z-space rows -> intermediate style rows, applied row-wise."""

    def __init__(self, latent_dim: int, num_layers: int = 3):
        super().__init__()
        layers: List[nn.Module] = [PixelNorm()]
        for _ in range(num_layers):
            layers += [nn.Linear(latent_dim, latent_dim), nn.LeakyReLU(0.2)]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class TrunkConv(nn.Module):
    """Optional 2× upsample, 3×3 conv, per-channel scaled noise, leaky ReLU."""

    def __init__(self, in_channels: int, out_channels: int, upsample: bool):
        super().__init__()
        self.upsample = upsample
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.noise_strength = nn.Parameter(torch.zeros(out_channels))

    def forward(self, x: torch.Tensor, noise: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = self.conv(x)
        if noise is not None:
            x = x + self.noise_strength[None, :, None, None] * noise
        return F.leaky_relu(x, 0.2)


class StyleAffine(nn.Module):
    """A_k: style row -> per-channel (gamma, beta); gamma starts around 1."""

    def __init__(self, latent_dim: int, channels: int):
        super().__init__()
        self.channels = channels
        self.linear = nn.Linear(latent_dim, 2 * channels)
        with torch.no_grad():
            self.linear.bias[:channels].fill_(1.0)
            self.linear.bias[channels:].zero_()

    def forward(self, u: torch.Tensor) -> Style:
        out = self.linear(u)
        return out[..., :self.channels], out[..., self.channels:]


class BaseGenerator(nn.Module):
    """
    Miniature AdaIN-based generator g.

    Trunk: learned 4×4 constant -> AdaIN slot 0 -> for each trunk conv k:
    conv -> (residual hook) -> AdaIN slot k -> ... -> ToRGB -> tanh.
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.num_slots = config.num_slots
        self.latent_dim = config.latent_dim
        self.mapping = MappingNetwork(config.latent_dim, config.mapping_layers)

        convs = config.trunk_convs
        self.const = nn.Parameter(torch.randn(config.channels(4), 4, 4))

        slot_channels = [config.channels(4)]
        trunk = []
        previous = config.channels(4)
        for index, res in enumerate(convs):
            out_channels = config.channels(res)
            upsample = index > 0 and index % 2 == 1
            trunk.append(TrunkConv(previous, out_channels, upsample))
            slot_channels.append(out_channels)
            previous = out_channels
        self.convs = nn.ModuleList(trunk)
        self.slot_channels = slot_channels
        self.conv_resolutions = convs
        self.affines = nn.ModuleList(StyleAffine(config.latent_dim, c) for c in slot_channels)
        self.to_rgb = nn.Conv2d(previous, 3, 1)

        assert len(self.affines) == self.num_slots

    @property
    def rgb_channels(self) -> int:
        return self.slot_channels[-1]

    def extend(self, z: torch.Tensor) -> torch.Tensor:
        return extend_code(z, self.num_slots, self.latent_dim)

    def map_latent(self, z: torch.Tensor) -> torch.Tensor:
        """f applied row-wise; returns (B, L, D)."""
        return self.mapping(self.extend(z))

    def slot_styles(self, u: torch.Tensor) -> List[Style]:
        """Per-slot AdaIN parameters A_k(u[:, k])."""
        require(u.dim() == 3 and u.shape[1] == self.num_slots,
                f"mapped code must have {self.num_slots} rows, got {tuple(u.shape)}")
        return [affine(u[:, k]) for k, affine in enumerate(self.affines)]

    def _noises(self, batch: int, noise_mode: str, noise_seed: int,
                reference: torch.Tensor) -> Sequence[Optional[torch.Tensor]]:
        if noise_mode not in NOISE_MODES:
            raise ContractViolation(f"noise_mode must be one of {NOISE_MODES}, got '{noise_mode}'")
        if noise_mode == "zero":
            return [None] * len(self.convs)
        generator = torch.Generator().manual_seed(noise_seed)
        return [torch.randn(batch, 1, res, res, generator=generator).to(reference)
                for res in self.conv_resolutions]

    def run_trunk(self, styles: Sequence[Style],
                  residual: Optional[ResidualHook] = None,
                  pre_conv: Optional[ResidualHook] = None,
                  rgb_modulation: Optional[Style] = None,
                  noise_mode: str = "zero",
                  noise_seed: int = 0) -> torch.Tensor:
        """
        Run the synthesis trunk from explicit per-slot AdaIN parameters.

        Args:
            styles: L pairs of (gamma, beta), each (B, C_k)
            residual: Called as residual(k, h) after trunk conv k (1-based)
            pre_conv: Called as pre_conv(k, x) on the input of trunk conv k
            rgb_modulation: Optional per-channel (scale, shift) before ToRGB
            noise_mode: "zero" or "seeded"
            noise_seed: Seed for seeded noise

        Returns:
            Images (B, 3, R, R) in [-1, 1]
        """
        gamma0, beta0 = styles[0]
        batch = gamma0.shape[0]
        x = self.const.unsqueeze(0).expand(batch, -1, -1, -1)
        x = adain(x, gamma0, beta0, TRAIN_EPS)

        noises = self._noises(batch, noise_mode, noise_seed, x)
        for k, (conv, noise) in enumerate(zip(self.convs, noises), start=1):
            if pre_conv is not None:
                x = pre_conv(k, x)
            x = conv(x, noise)
            if residual is not None:
                x = residual(k, x)
            gamma, beta = styles[k]
            x = adain(x, gamma, beta, TRAIN_EPS)

        if rgb_modulation is not None:
            scale, shift = rgb_modulation
            x = x * scale[:, :, None, None] + shift[:, :, None, None]
        return torch.tanh(self.to_rgb(x))

    def synthesize(self, u: torch.Tensor, noise_mode: str = "zero",
                   noise_seed: int = 0) -> torch.Tensor:
        return self.run_trunk(self.slot_styles(u), noise_mode=noise_mode, noise_seed=noise_seed)

    def forward(self, z: torch.Tensor, noise_mode: str = "zero", noise_seed: int = 0) -> torch.Tensor:
        """g(z) = synthesize(map_latent(z))."""
        return self.synthesize(self.map_latent(z), noise_mode, noise_seed)

    def sample_z(self, batch: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return torch.randn(batch, self.latent_dim, generator=generator).to(self.const)


class Discriminator(nn.Module):
    """Strided conv pyramid mirroring the generator's resolutions; one logit per image."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        resolutions = list(reversed(config.resolutions))
        self.from_rgb = nn.Conv2d(3, config.channels(resolutions[0]), 1)
        blocks = []
        for res in resolutions[:-1]:
            c_in, c_out = config.channels(res), config.channels(res // 2)
            blocks.append(nn.Sequential(
                nn.Conv2d(c_in, c_in, 3, padding=1), nn.LeakyReLU(0.2),
                nn.Conv2d(c_in, c_out, 3, padding=1, stride=2), nn.LeakyReLU(0.2),
            ))
        self.blocks = nn.Sequential(*blocks)
        final = config.channels(4)
        self.head = nn.Sequential(
            nn.Conv2d(final, final, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Flatten(), nn.Linear(final * 16, final), nn.LeakyReLU(0.2),
            nn.Linear(final, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Logits shaped (B,)."""
        h = F.leaky_relu(self.from_rgb(x), 0.2)
        return self.head(self.blocks(h)).squeeze(-1)
