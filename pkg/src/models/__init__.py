"""
Models Module - Base generator, DualStyle generator, encoder, adapters and samplers
"""

from .synthesis import (
    BaseGenerator, Discriminator, MappingNetwork, PixelNorm, extend_code, style_mix,
    NOISE_MODES
)
from .extrinsic import (
    DualStyleGenerator, ExtrinsicPath, ModRes, WeightVector,
    blend_codes, color_preserving_code, preset_weights
)
from .encoder import LatentEncoder
from .adapters import AdaptedGenerator, attach_adapters, ADAPTER_KINDS
from .sampler import RowSampler, StyleSampler

__all__ = [
    'BaseGenerator', 'Discriminator', 'MappingNetwork', 'PixelNorm',
    'extend_code', 'style_mix', 'NOISE_MODES',
    'DualStyleGenerator', 'ExtrinsicPath', 'ModRes', 'WeightVector',
    'blend_codes', 'color_preserving_code', 'preset_weights',
    'LatentEncoder',
    'AdaptedGenerator', 'attach_adapters', 'ADAPTER_KINDS',
    'RowSampler', 'StyleSampler'
]
