"""
DualStyleGenerator G: the extrinsic style path layered on a frozen base generator.

Extrinsic units are numbered u = 0 .. L-1 and each reads row u of the
extrinsic code and weight w[u]:
    u < n_s           ModRes after trunk conv u+1, conditioned on T_s(f(z_e)[u])
    n_s ≤ u < L-1     color block for the AdaIN after trunk conv u+1
    u = L-1           color block for ToRGB
The intrinsic path keeps the base generator's slot indexing (slot k follows
trunk conv k, slot 0 is the constant input).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from torch import nn

from ..codec.decoder import RunLengthDecoder
from ..codec.encoder import RunLengthEncoder
from ..config import StyleProfile, get_profile
from ..errors import ContractViolation, require
from ..numerics.adain import TRAIN_EPS, adain
from .synthesis import BaseGenerator, StyleAffine

logger = logging.getLogger(__name__)

Overrides = Union[Sequence[float], Mapping[int, float], None]


@dataclass
class WeightVector:
    """L blend weights in [0, 1]; first n_s are structure weights, the rest color."""
    values: torch.Tensor
    n_structure: int

    def __post_init__(self):
        self.values = torch.as_tensor(self.values, dtype=torch.float32).flatten()
        require(0 <= self.n_structure <= self.values.numel(), "n_structure out of range")
        require(bool(((self.values >= 0) & (self.values <= 1)).all()),
                f"weights must lie in [0, 1], got {self.values.tolist()}")

    @property
    def structure(self) -> torch.Tensor:
        return self.values[:self.n_structure]

    @property
    def color(self) -> torch.Tensor:
        return self.values[self.n_structure:]

    def __len__(self) -> int:
        return self.values.numel()

    @classmethod
    def full(cls, value: float, num_units: int, n_structure: int) -> "WeightVector":
        return cls(torch.full((num_units,), float(value)), n_structure)

    @classmethod
    def from_string(cls, text: str, num_units: int, n_structure: int) -> "WeightVector":
        """Parse "7*0.75,11*1.0" style run-length notation."""
        values = RunLengthDecoder.decode_string(text)
        if len(values) != num_units:
            raise ContractViolation(
                f"weight string '{text}' expands to {len(values)} entries, expected {num_units}")
        return cls(torch.tensor(values), n_structure)

    def to_string(self) -> str:
        return RunLengthEncoder.encode_to_string(self.values.tolist())


def preset_weights(style: str, n_structure: int, n_color: int,
                   overrides: Overrides = None) -> WeightVector:
    """
    Default weight vectors per style profile.

    cartoon: w_s = 0.75, caricature: w_s = 1, anime: first 4/7 of w_s zero and the
    rest 0.75; w_c = 1 everywhere. custom starts from the cartoon preset.

    Args:
        style: Profile name
        n_structure, n_color: Unit counts
        overrides: Full list of L values, or {unit index: value}

    Returns:
        WeightVector
    """
    profile: StyleProfile = get_profile(style)
    zeros = int(round(profile.zero_fraction * n_structure))
    structure = [0.0] * zeros + [profile.structure_weight] * (n_structure - zeros)
    values = structure + [1.0] * n_color

    if overrides is not None:
        if isinstance(overrides, Mapping):
            items = overrides.items()
        else:
            require(len(overrides) == len(values),
                    f"override list needs {len(values)} entries, got {len(overrides)}")
            items = enumerate(overrides)
        for index, value in items:
            require(0 <= int(index) < len(values), f"override index {index} out of range")
            require(0.0 <= float(value) <= 1.0, f"override value {value} outside [0, 1]")
            values[int(index)] = float(value)

    return WeightVector(torch.tensor(values), n_structure)


def blend_codes(a: torch.Tensor, b: torch.Tensor, t: float) -> torch.Tensor:
    """(1 − t)·a + t·b for intrinsic or extrinsic codes."""
    require(a.shape == b.shape, f"blend_codes shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    require(0.0 <= t <= 1.0, f"blend factor t={t} outside [0, 1]")
    return (1.0 - t) * a + t * b


def color_preserving_code(z_intrinsic: torch.Tensor, z_extrinsic: torch.Tensor,
                          n_structure: int) -> torch.Tensor:
    """
    Extrinsic code whose color rows come from the intrinsic code.

    Color unit u reads extrinsic row u but sits at intrinsic slot u+1, so the
    intrinsic rows are shifted by one; ToRGB keeps the last intrinsic row.
    """
    require(z_intrinsic.shape == z_extrinsic.shape and z_intrinsic.dim() == 3,
            "color preservation needs two extended codes of equal shape")
    out = z_extrinsic.clone()
    out[:, n_structure:-1] = z_intrinsic[:, n_structure + 1:]
    out[:, -1] = z_intrinsic[:, -1]
    return out


class ModRes(nn.Module):
    """
    Modulative residual block: AdaIN -> 3×3 conv -> leaky ReLU -> AdaIN -> 3×3 conv.
    Both AdaINs are driven by the structure style s; the output is a residual.

    Each AdaIN runs before its conv rather than after, so the block ends in conv2
    and a zeroed conv2 gives an exactly zero residual for any h and s.
    """

    def __init__(self, channels: int, latent_dim: int):
        super().__init__()
        self.norm1 = StyleAffine(latent_dim, channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm2 = StyleAffine(latent_dim, channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, h: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        out = adain(h, *self.norm1(s), TRAIN_EPS)
        out = F.leaky_relu(self.conv1(out), 0.2)
        out = adain(out, *self.norm2(s), TRAIN_EPS)
        return self.conv2(out)

    def reset_stage1(self, generator: Optional[torch.Generator] = None):
        with torch.no_grad():
            self.conv1.weight.copy_(
                torch.randn(self.conv1.weight.shape, generator=generator) * 0.01)
            self.conv1.bias.zero_()
            self.conv2.weight.zero_()
            self.conv2.bias.zero_()

    def kernels(self) -> List[torch.Tensor]:
        return [self.conv1.weight, self.conv2.weight]


class ExtrinsicPath(nn.Module):
    """T_s, n_s ModRes blocks, n_c color blocks T_c and the ToRGB modulation head."""

    def __init__(self, base: BaseGenerator):
        super().__init__()
        config = base.config
        dim = config.latent_dim
        self.n_structure = config.n_structure
        self.n_color = config.n_color
        self.num_units = config.num_slots

        self.structure_transform = nn.Sequential(
            nn.Linear(dim, dim), nn.LeakyReLU(0.2), nn.Linear(dim, dim))
        self.modres = nn.ModuleList(
            ModRes(base.slot_channels[k], dim) for k in range(1, self.n_structure + 1))
        self.color_transforms = nn.ModuleList(nn.Linear(dim, dim) for _ in range(self.n_color))
        self.rgb_channels = base.rgb_channels
        self.rgb_head = nn.Linear(dim, 2 * self.rgb_channels)
        self.reset_stage1()

    def reset_stage1(self, seed: int = 0):
        """Zero residuals, identity color blocks, identity ToRGB modulation."""
        generator = torch.Generator().manual_seed(seed)
        for block in self.modres:
            block.reset_stage1(generator)
        with torch.no_grad():
            for transform in self.color_transforms:
                transform.weight.copy_(torch.eye(transform.weight.shape[0]))
                transform.bias.zero_()
            self.rgb_head.weight.zero_()
            self.rgb_head.bias[:self.rgb_channels].fill_(1.0)
            self.rgb_head.bias[self.rgb_channels:].zero_()

    def rgb_modulation(self, u_e_row: torch.Tensor):
        out = self.rgb_head(self.color_transforms[-1](u_e_row))
        return out[..., :self.rgb_channels], out[..., self.rgb_channels:]

    def modres_kernels(self) -> List[torch.Tensor]:
        return [k for block in self.modres for k in block.kernels()]


class DualStyleGenerator(nn.Module):
    """
    G(z_i, z_e, w).

    The base generator (mapping network, affines, trunk, ToRGB) stays frozen;
    only `self.extrinsic` is trainable.
    """

    def __init__(self, base: BaseGenerator, extrinsic: Optional[ExtrinsicPath] = None):
        super().__init__()
        self.base = base
        self.base.requires_grad_(False)
        self.extrinsic = extrinsic if extrinsic is not None else ExtrinsicPath(base)
        self.num_slots = base.num_slots
        self.n_structure = self.extrinsic.n_structure
        self.n_color = self.extrinsic.n_color

    def _weights(self, w: Union[WeightVector, torch.Tensor, float], batch: int,
                 reference: torch.Tensor) -> torch.Tensor:
        if isinstance(w, WeightVector):
            w = w.values
        w = torch.as_tensor(w).to(reference)
        if w.dim() == 0:
            w = w.expand(self.num_slots)
        if w.dim() == 1:
            w = w.unsqueeze(0).expand(batch, -1)
        require(w.shape == (batch, self.num_slots),
                f"weight vector must have {self.num_slots} entries, got {tuple(w.shape)}")
        return w

    def forward(self, z_intrinsic: torch.Tensor, z_extrinsic: torch.Tensor,
                w: Union[WeightVector, torch.Tensor, float] = 1.0,
                noise_mode: str = "zero", noise_seed: int = 0) -> torch.Tensor:
        """
        Render G(z_i, z_e, w).

        Args:
            z_intrinsic: Intrinsic code, (B, D) or (B, L, D)
            z_extrinsic: Extrinsic code, (B, D) or (B, L, D)
            w: WeightVector, tensor of L (or B×L) weights, or one scalar
            noise_mode: "zero" or "seeded"

        Returns:
            Images (B, 3, R, R)
        """
        base = self.base
        path = self.extrinsic
        u_i = base.map_latent(z_intrinsic)
        u_e = base.map_latent(z_extrinsic)
        require(u_i.shape[0] == u_e.shape[0], "intrinsic and extrinsic batch sizes differ")
        weights = self._weights(w, u_i.shape[0], u_i)

        styles = base.slot_styles(u_i)
        n_s = self.n_structure

        for unit in range(n_s, self.num_slots - 1):
            slot = unit + 1
            wk = weights[:, unit:unit + 1]
            transformed = path.color_transforms[unit - n_s](u_e[:, unit])
            gamma_e, beta_e = base.affines[slot](transformed)
            gamma_i, beta_i = styles[slot]
            styles[slot] = (wk * gamma_e + (1 - wk) * gamma_i,
                            wk * beta_e + (1 - wk) * beta_i)

        structure_styles = [path.structure_transform(u_e[:, unit]) for unit in range(n_s)]

        def residual(k: int, h: torch.Tensor) -> torch.Tensor:
            if k > n_s:
                return h
            unit = k - 1
            wk = weights[:, unit, None, None, None]
            return h + wk * path.modres[unit](h, structure_styles[unit])

        w_rgb = weights[:, -1:]
        scale, shift = path.rgb_modulation(u_e[:, -1])
        rgb = (w_rgb * scale + (1 - w_rgb), w_rgb * shift)

        return base.run_trunk(styles, residual=residual, rgb_modulation=rgb,
                              noise_mode=noise_mode, noise_seed=noise_seed)

    def unit_aligned_mix(self, u_intrinsic: torch.Tensor, u_extrinsic: torch.Tensor) -> torch.Tensor:
        """
        Mapped code that G reproduces right after Stage-I initialization at w = 1:
        slots 0..n_s from the intrinsic code, slot k > n_s from extrinsic row k-1.

        Rows are indexed by unit, not by trunk slot. Structure unit u (u < n_s)
        drives the ModRes block after trunk conv u+1; color unit u (u ≥ n_s) reads
        extrinsic row u and replaces the AdaIN style of slot u+1; the last unit
        drives the ToRGB modulation. Slot 0 (the first 4×4 conv) is always
        intrinsic, so extrinsic row k-1 lands on slot k. color_preserving_code
        applies the same one-row shift in reverse.
        """
        mixed = u_intrinsic.clone()
        mixed[:, self.n_structure + 1:] = u_extrinsic[:, self.n_structure:-1]
        return mixed

    def trainable_parameters(self):
        return self.extrinsic.parameters()
