"""
Style Handler
Backs `train-sampler`, `transfer`, `sample` and `grid`: inference on a
trained DualStyle generator.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import torch

from ..config import RunConfig
from ..errors import ContractViolation, require
from ..models.extrinsic import (DualStyleGenerator, WeightVector, blend_codes,
                                color_preserving_code, preset_weights)
from ..reporting import RunReporter, save_grid
from ..synth.dataset import load_images, load_png, save_png
from ..training.codebook import sample_extrinsic, train_sampler
from ..training.records import StyleRecord, load_records
from .workspace import WorkspaceStore

logger = logging.getLogger(__name__)

BLEND_MODES = ("intrinsic", "extrinsic", "both")


class StyleHandler:
    """
    Handles stylization and generation.

    Capabilities:
    - Train the extrinsic code samplers on refined records
    - Exemplar-based transfer with weight strings and color preservation
    - Random artistic portraits from sampled codes
    - Content × exemplar panels and blending strips
    """

    def __init__(self, config: RunConfig, store: WorkspaceStore, reporter: RunReporter,
                 progress: bool = False):
        self.config = config
        self.store = store
        self.reporter = reporter
        self.progress = progress
        self._records: Optional[List[StyleRecord]] = None

    @property
    def outputs(self) -> Path:
        return self.config.workspace_path / "outputs"

    def _records_or_empty(self) -> List[StyleRecord]:
        if self._records is None:
            directory = self.config.workspace_path / "records"
            self._records = load_records(self.config.workspace_path) if directory.exists() else []
        return self._records

    def _generator(self) -> DualStyleGenerator:
        g, _, _ = self.store.load_base()
        G, _ = self.store.load_stage(self.store.latest_stage(), g)
        G.requires_grad_(False)
        return G

    def weights(self, G: DualStyleGenerator, text: Optional[str]) -> WeightVector:
        """Weight string from --w, else the style profile preset."""
        if text:
            return WeightVector.from_string(text, G.num_slots, G.n_structure)
        return preset_weights(self.config.style_profile, G.n_structure, G.n_color)

    def _image(self, reference: str, kind: str) -> torch.Tensor:
        """A dataset index ("12") or a PNG path, as (1, 3, R, R)."""
        if reference.isdigit():
            images = load_images(self.config.workspace_path, kind)
            index = int(reference)
            require(index < images.shape[0], f"{kind} index {index} out of range ({images.shape[0]})")
            return images[index:index + 1]
        return load_png(Path(reference)).unsqueeze(0)

    def _exemplar(self, reference: str, encoder) -> Tuple[torch.Tensor, torch.Tensor]:
        """(image, extrinsic code); stored records supply their refined codes."""
        if reference.isdigit():
            for record in self._records_or_empty():
                if record.index == int(reference):
                    return record.image.unsqueeze(0), record.extrinsic_code.unsqueeze(0)
        image = self._image(reference, "style")
        with torch.no_grad():
            return image, encoder.encode(image)

    # -- sampler -----------------------------------------------------------------

    def train_sampler(self) -> str:
        """Fit N_s and N_c to the records' extrinsic codes; write checkpoints/sampler.pt."""
        records = load_records(self.config.workspace_path)
        codes = torch.stack([r.extrinsic_code for r in records])
        cfg = self.config.training.sampler
        sampler = train_sampler(codes, self.config.generator, cfg, self.config.seed,
                                self.reporter.metrics, self.progress)
        path = self.store.save_sampler(sampler, self.config.generator, cfg.noise_dim, cfg.hidden)

        drawn = sample_extrinsic(sampler, self.config.seed, 1000)
        gap = ((drawn.mean(dim=0) - codes.mean(dim=0)).abs()
               / codes.std(dim=0, unbiased=False).clamp_min(1e-8))
        self.reporter.add_input("codes", codes.shape[0])
        self.reporter.add_output("checkpoint", path)
        self.reporter.add_metrics(mean_gap_in_std=float(gap.mean()), max_gap_in_std=float(gap.max()))
        return f"Samplers trained on {codes.shape[0]} codes; saved {path}"

    # -- transfer ------------------------------------------------------------------

    def stylize(self, content: str, exemplar: str, weight_string: Optional[str] = None,
                preserve_color: bool = False) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        G(E(I), z_e, w).

        Args:
            content: Source dataset index or PNG path
            exemplar: Record/style index or PNG path
            weight_string: Run-length weights such as "3*0.75,5*1.0"
            preserve_color: Take the color rows of z_e from E(I)

        Returns:
            (content image, exemplar image, stylized image), each (1, 3, R, R)
        """
        G = self._generator()
        encoder = self.store.load_encoder()
        content_image = self._image(content, "source")
        exemplar_image, z_extrinsic = self._exemplar(exemplar, encoder)
        w = self.weights(G, weight_string)
        with torch.no_grad():
            z_intrinsic = encoder.encode(content_image)
            if preserve_color:
                z_extrinsic = color_preserving_code(z_intrinsic, z_extrinsic, G.n_structure)
            output = G(z_intrinsic, z_extrinsic, w)
        self.reporter.add_input("weights", w.to_string())
        return content_image, exemplar_image, output

    def transfer(self, content: str, exemplar: str, weight_string: Optional[str] = None,
                 preserve_color: bool = False, output: Optional[str] = None) -> str:
        content_image, exemplar_image, stylized = self.stylize(content, exemplar, weight_string,
                                                               preserve_color)
        target = Path(output) if output else self.outputs / "transfer.png"
        target.parent.mkdir(parents=True, exist_ok=True)
        save_png(stylized[0], target)
        panel = save_grid(torch.cat([content_image, exemplar_image, stylized]),
                          self.outputs / "transfer_panel.png", nrow=3)
        self.reporter.add_input("content", content)
        self.reporter.add_input("exemplar", exemplar)
        self.reporter.add_input("preserve_color", preserve_color)
        self.reporter.add_output("image", target)
        self.reporter.add_output("panel", panel)
        return f"Stylized image written to {target}"

    # -- generation --------------------------------------------------------------

    def sample(self, count: int = 16, weight_string: Optional[str] = None) -> str:
        """Random G(z1, N(z2), w) portraits."""
        require(count >= 1, "sample count must be positive")
        G = self._generator()
        sampler = self.store.load_sampler()
        rng = torch.Generator().manual_seed(self.config.seed)
        w = self.weights(G, weight_string)
        with torch.no_grad():
            z_intrinsic = G.base.sample_z(count, rng)
            z_extrinsic = sample_extrinsic(sampler, self.config.seed, count, rng)
            images = G(z_intrinsic, z_extrinsic, w)
        grid = save_grid(images, self.outputs / "sample.png")
        self.reporter.add_input("weights", w.to_string())
        self.reporter.add_output("grid", grid)
        return f"Sampled {count} portraits into {grid}"

    def grid(self, contents: int = 4, exemplars: int = 4, blend: Optional[str] = None,
             steps: int = 5, weight_string: Optional[str] = None) -> str:
        """
        Content-row × exemplar-column panel, or a blending strip with --blend.

        The panel's first row holds the exemplars and its first column the
        content images; cell (i, j) is G(E(content_i), z_e(exemplar_j), w).
        """
        G = self._generator()
        encoder = self.store.load_encoder()
        w = self.weights(G, weight_string)
        records = self._records_or_empty()
        if not records:
            raise ContractViolation("grid needs destylized style records; run destylize first")
        records = records[:exemplars]
        sources = load_images(self.config.workspace_path, "source", contents)

        with torch.no_grad():
            z_content = encoder.encode(sources)
            z_styles = torch.stack([r.extrinsic_code for r in records])
            if blend:
                images, nrow = self._blend_strip(G, z_content, z_styles, w, blend, steps)
                name = f"grid_blend_{blend}.png"
            else:
                blank = torch.zeros_like(sources[:1])
                cells = [torch.cat([blank, torch.stack([r.image for r in records])])]
                for row in range(sources.shape[0]):
                    zi = z_content[row:row + 1].expand(len(records), -1, -1)
                    cells.append(torch.cat([sources[row:row + 1], G(zi, z_styles, w)]))
                images, nrow = torch.cat(cells), len(records) + 1
                name = "grid.png"
        path = save_grid(images, self.outputs / name, nrow=nrow)
        self.reporter.add_input("weights", w.to_string())
        self.reporter.add_output("grid", path)
        return f"Grid written to {path}"

    @staticmethod
    def _blend_strip(G: DualStyleGenerator, z_content: torch.Tensor, z_styles: torch.Tensor,
                     w: WeightVector, mode: str, steps: int):
        if mode not in BLEND_MODES:
            raise ContractViolation(f"--blend must be one of {BLEND_MODES}, got '{mode}'")
        require(steps >= 2, "a blending strip needs at least two steps")
        require(z_content.shape[0] >= 2 or mode == "extrinsic",
                "intrinsic blending needs at least two content images")
        require(z_styles.shape[0] >= 2 or mode == "intrinsic",
                "extrinsic blending needs at least two style records")
        frames = []
        for t in torch.linspace(0.0, 1.0, steps).tolist():
            zi = z_content[:1]
            ze = z_styles[:1]
            if mode in ("intrinsic", "both"):
                zi = blend_codes(z_content[0:1], z_content[1:2], t)
            if mode in ("extrinsic", "both"):
                ze = blend_codes(z_styles[0:1], z_styles[1:2], t)
            frames.append(G(zi, ze, w))
        return torch.cat(frames), steps
