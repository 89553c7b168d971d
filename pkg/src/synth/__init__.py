"""
Synth Module - Sprite renderers, shape/colour oracles and dataset generation
"""

from .render import (
    IdentityParams, StyleParams, render_source, render_style,
    to_tensor, to_numpy, to_uint8
)
from .measure import (
    ShapeDescriptor, measure_shape, hue_histogram, hue_histogram_distance,
    circular_hue_mean, circular_difference, color_histogram, color_histogram_distance
)
from .dataset import (
    DatasetSummary, gen_dataset, read_manifest, rerender, load_images, load_png, save_png,
    draw_identities
)

__all__ = [
    'IdentityParams', 'StyleParams', 'render_source', 'render_style',
    'to_tensor', 'to_numpy', 'to_uint8',
    'ShapeDescriptor', 'measure_shape', 'hue_histogram', 'hue_histogram_distance',
    'circular_hue_mean', 'circular_difference', 'color_histogram', 'color_histogram_distance',
    'DatasetSummary', 'gen_dataset', 'read_manifest', 'rerender', 'load_images',
    'load_png', 'save_png', 'draw_identities'
]
