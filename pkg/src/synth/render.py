"""
Procedural sprite faces.

render_source draws a face from identity parameters θ at 4× supersampling and
box-downsamples to R×R. render_style applies a style ψ on top: larger eyes,
palette quantization, a black face outline and a hue rotation. Images come
back as float32 tensors (3, R, R) in [-1, 1]; the background is mid grey (0).
"""

import colorsys
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

import numpy as np
import torch
from PIL import Image, ImageFilter

from ..errors import require

logger = logging.getLogger(__name__)

SUPERSAMPLE = 4
BACKGROUND = 0.5
EYE_VALUE = 0.04
SKIN_SATURATION = 0.3
SKIN_VALUE = 0.92
HAIR_SATURATION = 0.7
HAIR_VALUE = 0.55
MOUTH_RGB = (0.62, 0.1, 0.14)
MAX_STYLED_EYE = 0.15

FACE_CENTER = (0.5, 0.52)
FACE_HALF_WIDTH = 0.3
EYE_LINE = 0.47
MOUTH_HALF_WIDTH = 0.12
MOUTH_THICKNESS = 0.022


@dataclass
class IdentityParams:
    """θ: geometry and colors of one sprite identity. Lengths are fractions of R."""
    face_aspect: float = 1.0
    eye_radius: float = 0.08
    eye_spacing: float = 0.3
    mouth_curvature: float = 0.5
    skin_hue: float = 0.08
    hair_hue: float = 0.6
    hair_style: int = 0

    def __post_init__(self):
        require(0.7 <= self.face_aspect <= 1.3, f"face_aspect {self.face_aspect} outside [0.7, 1.3]")
        require(0.04 <= self.eye_radius <= 0.12, f"eye_radius {self.eye_radius} outside [0.04, 0.12]")
        require(0.2 <= self.eye_spacing <= 0.4, f"eye_spacing {self.eye_spacing} outside [0.2, 0.4]")
        require(-1.0 <= self.mouth_curvature <= 1.0,
                f"mouth_curvature {self.mouth_curvature} outside [-1, 1]")
        require(0.0 <= self.skin_hue < 1.0, f"skin_hue {self.skin_hue} outside [0, 1)")
        require(0.0 <= self.hair_hue < 1.0, f"hair_hue {self.hair_hue} outside [0, 1)")
        require(self.hair_style in (0, 1), f"hair_style must be 0 or 1, got {self.hair_style}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "IdentityParams":
        return cls(
            face_aspect=float(rng.uniform(0.7, 1.3)),
            eye_radius=float(rng.uniform(0.04, 0.12)),
            eye_spacing=float(rng.uniform(0.2, 0.4)),
            mouth_curvature=float(rng.uniform(-1.0, 1.0)),
            skin_hue=float(rng.uniform(0.0, 1.0)) % 1.0,
            hair_hue=float(rng.uniform(0.0, 1.0)) % 1.0,
            hair_style=int(rng.integers(0, 2)),
        )


@dataclass
class StyleParams:
    """ψ: the artistic transform applied to a source render."""
    eye_scale: float = 1.0
    palette_levels: int = 8
    outline: int = 0
    hue_shift: float = 0.0
    neutral: bool = False

    def __post_init__(self):
        require(1.0 <= self.eye_scale <= 2.5, f"eye_scale {self.eye_scale} outside [1, 2.5]")
        require(2 <= self.palette_levels <= 8, f"palette_levels {self.palette_levels} outside 2..8")
        require(0 <= self.outline <= 3, f"outline {self.outline} outside 0..3")
        require(-0.2 <= self.hue_shift <= 0.2, f"hue_shift {self.hue_shift} outside [-0.2, 0.2]")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def identity(cls) -> "StyleParams":
        return cls(neutral=True)

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "StyleParams":
        """Draw from the cartoon-like style domain used by the dataset."""
        return cls(
            eye_scale=float(rng.uniform(1.5, 2.5)),
            palette_levels=int(rng.integers(3, 6)),
            outline=int(rng.integers(1, 3)),
            hue_shift=float(rng.uniform(-0.2, 0.2)),
        )


def _hsv(hue: float, saturation: float, value: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(hue, saturation, value), dtype=np.float64)


def _grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    coords = (np.arange(size, dtype=np.float64) + 0.5) / size
    v, u = np.meshgrid(coords, coords, indexing="ij")
    return u, v


def _downsample(canvas: np.ndarray, factor: int) -> np.ndarray:
    h, w = canvas.shape[:2]
    shaped = canvas.reshape(h // factor, factor, w // factor, factor, *canvas.shape[2:])
    return shaped.mean(axis=(1, 3))


def _draw(theta: IdentityParams, resolution: int, eye_radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Supersampled drawing; returns (rgb HxWx3 in [0,1], face coverage HxW) at R×R."""
    size = resolution * SUPERSAMPLE
    u, v = _grid(size)
    cx, cy = FACE_CENTER
    a = FACE_HALF_WIDTH
    b = FACE_HALF_WIDTH * theta.face_aspect
    canvas = np.full((size, size, 3), BACKGROUND, dtype=np.float64)

    face = ((u - cx) / a) ** 2 + ((v - cy) / b) ** 2 <= 1.0
    hair_color = _hsv(theta.hair_hue, HAIR_SATURATION, HAIR_VALUE)
    outer = ((u - cx) / (a * 1.15)) ** 2 + ((v - cy) / (b * 1.12)) ** 2 <= 1.0

    if theta.hair_style == 1:
        canvas[outer & (v < cy + 0.5 * b)] = hair_color
    canvas[face] = _hsv(theta.skin_hue, SKIN_SATURATION, SKIN_VALUE)
    fringe = outer & (v < cy - 0.62 * b)
    canvas[fringe] = hair_color

    for side in (-1.0, 1.0):
        ex = cx + side * theta.eye_spacing / 2
        eye = (u - ex) ** 2 + (v - EYE_LINE) ** 2 <= eye_radius ** 2
        canvas[eye] = EYE_VALUE

    mouth_y = cy + 0.6 * b
    # positive curvature lifts the corners
    curve = mouth_y - 0.08 * theta.mouth_curvature * ((u - cx) / MOUTH_HALF_WIDTH) ** 2
    mouth = (np.abs(u - cx) <= MOUTH_HALF_WIDTH) & (np.abs(v - curve) <= MOUTH_THICKNESS)
    canvas[mouth] = MOUTH_RGB

    rgb = _downsample(canvas, SUPERSAMPLE)
    coverage = _downsample((face | fringe).astype(np.float64), SUPERSAMPLE)
    return rgb, coverage


def to_tensor(rgb: np.ndarray) -> torch.Tensor:
    """HxWx3 in [0,1] -> (3, H, W) float32 in [-1, 1]."""
    return torch.from_numpy(np.ascontiguousarray(rgb.transpose(2, 0, 1) * 2.0 - 1.0)).float()


def to_numpy(image: torch.Tensor) -> np.ndarray:
    """(3, H, W) in [-1, 1] -> HxWx3 float64 in [0, 1]."""
    array = image.detach().cpu().double().numpy() if isinstance(image, torch.Tensor) else np.asarray(image)
    return np.clip((array.transpose(1, 2, 0) + 1.0) / 2.0, 0.0, 1.0)


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def render_source(theta: IdentityParams, resolution: int = 32) -> torch.Tensor:
    """
    Render the source-domain sprite for θ.

    Args:
        theta: Identity parameters
        resolution: Output side length R (multiple of 4 recommended)

    Returns:
        (3, R, R) float32 tensor in [-1, 1]
    """
    require(resolution >= 8, f"resolution must be ≥ 8, got {resolution}")
    rgb, _ = _draw(theta, resolution, theta.eye_radius)
    return to_tensor(rgb)


def _quantize(rgb: np.ndarray, levels: int) -> np.ndarray:
    return np.round(rgb * (levels - 1)) / (levels - 1)


def _outline(rgb: np.ndarray, coverage: np.ndarray, thickness: int) -> np.ndarray:
    mask = Image.fromarray(((coverage >= 0.5) * 255).astype(np.uint8))
    grown = np.asarray(mask.filter(ImageFilter.MaxFilter(2 * thickness + 1))) > 0
    ring = grown & ~(np.asarray(mask) > 0)
    out = rgb.copy()
    out[ring] = 0.0
    return out


def _rotate_hue(rgb: np.ndarray, shift: float) -> np.ndarray:
    hsv = np.asarray(Image.fromarray(to_uint8(rgb)).convert("HSV")).copy()
    offset = int(round(shift * 256)) % 256
    hsv[..., 0] = ((hsv[..., 0].astype(np.int32) + offset) % 256).astype(np.uint8)
    rotated = Image.merge("HSV", [Image.fromarray(hsv[..., c]) for c in range(3)]).convert("RGB")
    return np.asarray(rotated).astype(np.float64) / 255.0


def render_style(theta: IdentityParams, psi: StyleParams, resolution: int = 32) -> torch.Tensor:
    """
    Render the style-domain exemplar for (θ, ψ).

    Order: eye scaling (redraw), palette quantization, outline, hue rotation.
    A neutral ψ returns render_source(θ) unchanged.
    """
    if psi.neutral:
        return render_source(theta, resolution)
    eye_radius = min(theta.eye_radius * psi.eye_scale, MAX_STYLED_EYE)
    rgb, coverage = _draw(theta, resolution, eye_radius)
    rgb = _quantize(rgb, psi.palette_levels)
    if psi.outline > 0:
        rgb = _outline(rgb, coverage, psi.outline)
    if psi.hue_shift != 0.0:
        rgb = _rotate_hue(rgb, psi.hue_shift)
    return to_tensor(rgb)
