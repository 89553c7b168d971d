"""
Residual adapters that simulate unconditional fine-tuning on a frozen base generator.

Three designs are compared:
    resblock       element-wise: two 3×3 convs, output conv zero-initialized
    adain_channel  channel-wise: AdaIN whose style comes from the input feature itself
    dat_spatial    spatial-wise: one-channel attention map multiplying the input

Each adapter acts on the input feature of a wrapped trunk conv and returns
x + residual(x), so the conv sees adapted features.
"""

import logging
from typing import Dict, List

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContractViolation
from ..numerics.adain import TRAIN_EPS, adain
from .synthesis import BaseGenerator

logger = logging.getLogger(__name__)

ADAPTER_KINDS = ("resblock", "adain_channel", "dat_spatial")


class ResBlockAdapter(nn.Module):
    """conv3×3 -> leaky ReLU -> conv3×3; the second conv starts at zero."""

    def __init__(self, channels: int, resolution: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv2(F.leaky_relu(self.conv1(x), 0.2))


class AdaINAdapter(nn.Module):
    """
    Channel-wise adapter: GAP + linear gives a style code, an affine map turns it
    into (gamma, beta), and the re-normalized feature is scaled by a learnable λ.
    """

    def __init__(self, channels: int, resolution: int, scale: float = 0.01):
        super().__init__()
        self.style = nn.Linear(channels, channels)
        self.affine = nn.Linear(channels, 2 * channels)
        with torch.no_grad():
            self.affine.bias[:channels].fill_(1.0)
            self.affine.bias[channels:].zero_()
        self.scale = nn.Parameter(torch.tensor(float(scale)))
        self.channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        code = self.style(x.mean(dim=(2, 3)))
        params = self.affine(code)
        gamma, beta = params[:, :self.channels], params[:, self.channels:]
        return self.scale * adain(x, gamma, beta, TRAIN_EPS)


class DATAdapter(nn.Module):
    """
    Spatial-wise adapter: adaptive pooling, 1×1 conv to one channel, a linear
    layer back to full resolution and a sigmoid give an attention map A;
    the residual is λ·A·x.
    """

    def __init__(self, channels: int, resolution: int, scale: float = 0.01, pooled: int = 4):
        super().__init__()
        self.pooled = min(pooled, resolution)
        self.resolution = resolution
        self.reduce = nn.Conv2d(channels, 1, 1)
        self.expand = nn.Linear(self.pooled ** 2, resolution ** 2)
        self.scale = nn.Parameter(torch.tensor(float(scale)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        pooled = F.adaptive_avg_pool2d(x, self.pooled)
        logits = self.expand(self.reduce(pooled).flatten(1))
        attention = torch.sigmoid(logits).view(-1, 1, self.resolution, self.resolution)
        return self.scale * attention * x


_ADAPTERS = {
    "resblock": ResBlockAdapter,
    "adain_channel": AdaINAdapter,
    "dat_spatial": DATAdapter,
}


class AdaptedGenerator(nn.Module):
    """
    Frozen base generator plus one adapter on the input of every trunk conv
    at resolution ≤ R_s.
    """

    def __init__(self, base: BaseGenerator, kind: str):
        super().__init__()
        if kind not in _ADAPTERS:
            raise ContractViolation(f"unknown adapter kind '{kind}', expected one of {ADAPTER_KINDS}")
        self.kind = kind
        self.base = base
        self.base.requires_grad_(False)
        self.latent_dim = base.latent_dim

        cutoff = base.config.structure_cutoff
        adapters: Dict[str, nn.Module] = {}
        # input of conv k (1-based) has the channels of slot k-1 and the
        # resolution of the conv output before any upsampling
        for k, res in enumerate(base.conv_resolutions, start=1):
            if res > cutoff:
                continue
            upsample = base.convs[k - 1].upsample
            in_res = res // 2 if upsample else res
            adapters[str(k)] = _ADAPTERS[kind](base.slot_channels[k - 1], in_res)
        self.adapters = nn.ModuleDict(adapters)

    def _pre_conv(self, k: int, x: torch.Tensor) -> torch.Tensor:
        adapter = self.adapters[str(k)] if str(k) in self.adapters else None
        if adapter is None:
            return x
        return x + adapter(x)

    def forward(self, z: torch.Tensor, noise_mode: str = "zero", noise_seed: int = 0) -> torch.Tensor:
        styles = self.base.slot_styles(self.base.map_latent(z))
        return self.base.run_trunk(styles, pre_conv=self._pre_conv,
                                   noise_mode=noise_mode, noise_seed=noise_seed)

    def sample_z(self, batch: int, generator=None) -> torch.Tensor:
        return self.base.sample_z(batch, generator)

    def adapter_parameters(self) -> List[nn.Parameter]:
        return list(self.adapters.parameters())

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.adapters.parameters())


def attach_adapters(base: BaseGenerator, kind: str) -> AdaptedGenerator:
    """
    Wrap the structure-resolution trunk convs of a base generator with adapters.

    Args:
        base: Generator to wrap; its parameters are frozen in place
        kind: One of "resblock", "adain_channel", "dat_spatial"

    Returns:
        AdaptedGenerator whose only trainable parameters are the adapters
    """
    model = AdaptedGenerator(base, kind)
    logger.info("Attached %d %s adapters (%d parameters)",
                len(model.adapters), kind, model.parameter_count())
    return model
