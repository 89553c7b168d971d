"""
Oracles for the sprite domain: shape descriptor and color statistics.

measure_shape estimates eye area, face aspect and mouth curvature sign with
thresholds tuned to the renderer's palette. Color helpers compute
saturation-weighted hue histograms and joint RGB histograms with Pillow and numpy.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import torch
from PIL import Image, ImageFilter

from .render import BACKGROUND, EYE_VALUE, to_numpy, to_uint8

logger = logging.getLogger(__name__)

ImageLike = Union[torch.Tensor, np.ndarray]

FOREGROUND_DELTA = 0.03
MIN_FOREGROUND = 0.02
SKIN_MIN_VALUE = 0.75
CORE_MAX_VALUE = 0.25
MOUTH_RED_MARGIN = 0.35


@dataclass
class ShapeDescriptor:
    """
    Structure measurements of one sprite.

    eye_area is the mean area of one eye as a fraction of the image area, so
    it compares directly with π·r² for r given as a fraction of R.
    """
    measurable: bool
    eye_area: float = 0.0
    face_aspect: float = 0.0
    mouth_sign: int = 0

    @classmethod
    def unmeasurable(cls) -> "ShapeDescriptor":
        return cls(measurable=False)


def _as_rgb(x: ImageLike) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return to_numpy(x)
    array = np.asarray(x, dtype=np.float64)
    if array.shape[0] == 3 and array.shape[-1] != 3:
        return to_numpy(torch.from_numpy(array))
    return array


def _dilate(mask: np.ndarray, size: int = 3) -> np.ndarray:
    image = Image.fromarray((mask * 255).astype(np.uint8))
    return np.asarray(image.filter(ImageFilter.MaxFilter(size))) > 0


def measure_shape(x: ImageLike) -> ShapeDescriptor:
    """
    Estimate the shape descriptor of a sprite image.

    Args:
        x: (3, R, R) tensor in [-1, 1] or an HxWx3 array in [0, 1]

    Returns:
        ShapeDescriptor; measurable is False when no face-like blob is found
    """
    rgb = _as_rgb(x)
    size = rgb.shape[0]
    value = rgb.max(axis=-1)
    foreground = (np.abs(rgb - BACKGROUND) > FOREGROUND_DELTA).any(axis=-1)
    skin = foreground & (value >= SKIN_MIN_VALUE)
    if foreground.mean() < MIN_FOREGROUND or skin.sum() < 4:
        return ShapeDescriptor.unmeasurable()

    rows = np.flatnonzero(skin.any(axis=1))
    cols = np.flatnonzero(skin.any(axis=0))
    height = rows[-1] - rows[0] + 1
    width = cols[-1] - cols[0] + 1
    face_aspect = float(height) / float(width)

    # eyes sit in the upper part of the skin box, away from the contour
    inset = max(1, int(round(0.08 * width)))
    region = np.zeros_like(skin)
    upper = rows[0] + int(round(0.65 * height))
    region[rows[0]:upper, cols[0] + inset:cols[-1] - inset + 1] = True

    skin_value = float(np.median(value[skin]))
    core = region & foreground & (value <= CORE_MAX_VALUE)
    if core.sum() == 0 or skin_value <= EYE_VALUE:
        return ShapeDescriptor(measurable=True, eye_area=0.0, face_aspect=face_aspect,
                               mouth_sign=_mouth_sign(rgb, rows, cols))
    near = _dilate(core) & region
    coverage = np.clip((skin_value - value) / (skin_value - EYE_VALUE), 0.0, 1.0)
    eye_area = float((coverage * near).sum()) / 2.0 / (size * size)

    return ShapeDescriptor(measurable=True, eye_area=eye_area, face_aspect=face_aspect,
                           mouth_sign=_mouth_sign(rgb, rows, cols))


def _mouth_sign(rgb: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> int:
    """+1 when the mouth corners sit above its center, −1 below, 0 if flat or absent."""
    red = rgb[..., 0] - np.maximum(rgb[..., 1], rgb[..., 2]) > MOUTH_RED_MARGIN
    height = rows[-1] - rows[0] + 1
    middle_col = (cols[0] + cols[-1]) // 2
    half = max(1, (cols[-1] - cols[0] + 1) // 4)
    lower = np.zeros_like(red)
    lower[rows[0] + height // 2:, middle_col - half:middle_col + half + 1] = True
    mouth = red & lower
    ys, xs = np.nonzero(mouth)
    if len(xs) < 3:
        return 0
    center = xs.mean()
    spread = np.abs(xs - center)
    cutoff = np.quantile(spread, 0.5)
    middle = ys[spread <= cutoff].mean()
    corners = ys[spread > cutoff].mean() if (spread > cutoff).any() else middle
    if abs(middle - corners) < 0.5:
        return 0
    return 1 if corners < middle else -1


def hue_histogram(x: ImageLike, bins: int = 36) -> np.ndarray:
    """Saturation-weighted hue histogram, normalized to sum 1 (uniform if gray)."""
    hsv = np.asarray(Image.fromarray(to_uint8(_as_rgb(x))).convert("HSV")).astype(np.float64)
    hue = hsv[..., 0] / 256.0
    weight = hsv[..., 1] / 255.0
    histogram, _ = np.histogram(hue, bins=bins, range=(0.0, 1.0), weights=weight)
    total = histogram.sum()
    if total <= 0:
        return np.full(bins, 1.0 / bins)
    return histogram / total


def circular_hue_mean(x: ImageLike) -> Optional[float]:
    """Saturation-weighted circular mean of hue in [0, 1); None for a gray image."""
    hsv = np.asarray(Image.fromarray(to_uint8(_as_rgb(x))).convert("HSV")).astype(np.float64)
    angle = hsv[..., 0] / 256.0 * 2.0 * np.pi
    weight = hsv[..., 1] / 255.0
    if weight.sum() <= 0:
        return None
    c = (weight * np.cos(angle)).sum()
    s = (weight * np.sin(angle)).sum()
    return float((np.arctan2(s, c) / (2.0 * np.pi)) % 1.0)


def circular_difference(a: float, b: float) -> float:
    """Signed difference a − b wrapped into [−0.5, 0.5)."""
    return float((a - b + 0.5) % 1.0 - 0.5)


def hue_histogram_distance(x: ImageLike, y: ImageLike, bins: int = 36) -> float:
    return float(np.abs(hue_histogram(x, bins) - hue_histogram(y, bins)).sum())


def color_histogram(x: ImageLike, bins: int = 8) -> np.ndarray:
    """Joint RGB histogram with `bins` levels per channel, normalized to sum 1."""
    rgb = _as_rgb(x).reshape(-1, 3)
    histogram, _ = np.histogramdd(rgb, bins=bins, range=[(0.0, 1.0)] * 3)
    return histogram.ravel() / max(len(rgb), 1)


def color_histogram_distance(x: ImageLike, y: ImageLike, bins: int = 8) -> float:
    """L1 distance between joint RGB histograms; 0 for identical color content."""
    return float(np.abs(color_histogram(x, bins) - color_histogram(y, bins)).sum())
