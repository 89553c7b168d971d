"""
Adaptive instance normalization.

Each channel of a feature map is renormalized to zero mean and unit
(population) standard deviation, then rescaled by gamma and shifted by beta:

    out[c] = gamma[c] * (x[c] - mean(x[c])) / (std(x[c]) + eps) + beta[c]
"""

import torch

from ..errors import require

# Stabilizer used while training; analytic checks pass a smaller value.
TRAIN_EPS = 1e-5
EXACT_EPS = 1e-8


def channel_stats(x: torch.Tensor, eps: float = 0.0):
    """
    Per-channel mean and population std over the two spatial axes.

    Args:
        x: Tensor shaped (..., C, H, W)
        eps: Added to the std

    Returns:
        Tuple of (mean, std), each shaped (..., C, 1, 1)
    """
    mean = x.mean(dim=(-2, -1), keepdim=True)
    var = ((x - mean) ** 2).mean(dim=(-2, -1), keepdim=True)
    # floor keeps the backward pass finite on constant channels
    std = var.clamp_min(1e-20).sqrt()
    return mean, std + eps


def adain(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
          eps: float = TRAIN_EPS) -> torch.Tensor:
    """
    Apply adaptive instance normalization.

    Args:
        x: Features shaped (C, H, W) or (B, C, H, W)
        gamma: Scales shaped (C,) or (B, C)
        beta: Shifts shaped like gamma
        eps: Std stabilizer

    Returns:
        Tensor shaped like x
    """
    require(x.dim() in (3, 4), f"adain expects a 3-d or 4-d feature map, got {tuple(x.shape)}")
    channels = x.shape[-3]
    require(x.shape[-1] * x.shape[-2] >= 1, "adain needs at least one spatial position")
    require(gamma.shape[-1] == channels and beta.shape[-1] == channels,
            f"adain channel mismatch: x has {channels}, gamma {tuple(gamma.shape)}, "
            f"beta {tuple(beta.shape)}")

    mean, std = channel_stats(x, eps)
    normalized = (x - mean) / std
    return gamma[..., None, None] * normalized + beta[..., None, None]
