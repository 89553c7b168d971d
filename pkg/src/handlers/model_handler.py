"""
Model Handler
Backs `train-base`, `train-encoder` and `finetune-uncond`: the networks every
later stage builds on.
"""

import logging

import torch

from ..config import RunConfig
from ..errors import require
from ..losses.extractor import FeatureExtractor
from ..models.encoder import LatentEncoder
from ..models.synthesis import BaseGenerator, Discriminator
from ..reporting import RunReporter, save_grid
from ..synth.dataset import load_images
from ..training.base import finetune_unconditional, train_base
from ..training.embedder_training import train_embedder
from ..training.encoder_training import row_error, train_encoder
from .workspace import WorkspaceStore

logger = logging.getLogger(__name__)

SAMPLE_COUNT = 16
ORACLE_SAMPLES = 64


class ModelHandler:
    """
    Handles base-model training.

    Capabilities:
    - Train g and D on source renders, plus the identity embedder
    - Train the latent encoder against the frozen g
    - Fine-tune a copy of g on the style exemplars (g′)
    """

    def __init__(self, config: RunConfig, store: WorkspaceStore, reporter: RunReporter,
                 progress: bool = False):
        """
        Args:
            config: Run configuration
            store: Checkpoint access for the workspace
            reporter: Manifest and metric sink for the running command
            progress: Show tqdm bars
        """
        self.config = config
        self.store = store
        self.reporter = reporter
        self.progress = progress

    def _images(self, kind: str) -> torch.Tensor:
        images = load_images(self.config.workspace_path, kind)
        resolution = self.config.generator.resolution
        require(images.shape[-1] == resolution,
                f"{kind} images are {images.shape[-1]}×{images.shape[-1]} but the generator "
                f"resolution is {resolution}; regenerate the dataset")
        self.reporter.add_input(f"{kind}_images", images.shape[0])
        return images

    def train_base(self) -> str:
        """Train g, D and the identity embedder; write checkpoints/base.pt."""
        seed = self.config.seed
        source = self._images("source")
        embedder = train_embedder(self.config.training.embedder, self.config.generator.resolution,
                                  seed, self.reporter.metrics, self.progress)
        extractor = FeatureExtractor(seed)

        torch.manual_seed(seed)
        g = BaseGenerator(self.config.generator)
        D = Discriminator(self.config.generator)

        def checkpoint(step: int):
            return self.store.save_base(g, D, extractor, embedder, step)

        trace = train_base(g, D, source, self.config.training.base, seed,
                           self.reporter.metrics, checkpoint, self.progress)
        g.requires_grad_(False)
        path = self.store.save_base(g, D, extractor, embedder)

        with torch.no_grad():
            samples = g(g.sample_z(SAMPLE_COUNT, torch.Generator().manual_seed(seed)))
        grid = save_grid(samples, self.config.workspace_path / "outputs" / "train-base.png")
        self.reporter.add_output("checkpoint", path)
        self.reporter.add_output("samples", grid)
        if trace:
            self.reporter.add_metrics(final_d=trace[-1]["d"], final_g=trace[-1]["g"])
        return f"Base generator trained for {len(trace)} iterations; saved {path}"

    def train_encoder(self) -> str:
        """Train E on (g(z), z) pairs; write checkpoints/encoder.pt."""
        g, _, losses = self.store.load_base()
        torch.manual_seed(self.config.seed)
        encoder = LatentEncoder(g.config)
        baseline = row_error(encoder, g, ORACLE_SAMPLES, self.config.seed + 1)
        encoder, curve = train_encoder(encoder, g, losses, self.config.training.encoder,
                                       self.config.seed, self.reporter.metrics, self.progress)
        final = row_error(encoder, g, ORACLE_SAMPLES, self.config.seed + 1)
        path = self.store.save_encoder(encoder)

        self.reporter.add_output("checkpoint", path)
        self.reporter.add_metrics(row_error_untrained=baseline, row_error_trained=final)
        if curve:
            self.reporter.add_metrics(initial_loss=curve[0], final_loss=curve[-1])
        return f"Encoder trained for {len(curve)} steps; row error {baseline:.4f} -> {final:.4f}"

    def finetune_uncond(self) -> str:
        """Fine-tune g′ and D′ on style images; write checkpoints/uncond.pt."""
        g, D, _ = self.store.load_base()
        styles = self._images("style")

        def checkpoint(step: int, g_prime: BaseGenerator, d_prime: Discriminator):
            return self.store.save_uncond(g_prime, d_prime, step)

        g_prime, d_prime = finetune_unconditional(g, D, styles, self.config.training.uncond,
                                                  self.config.seed, self.reporter.metrics,
                                                  checkpoint, self.progress)
        path = self.store.save_uncond(g_prime, d_prime)

        rng = torch.Generator().manual_seed(self.config.seed)
        z = g.sample_z(ORACLE_SAMPLES, rng)
        with torch.no_grad():
            base_logit = float(d_prime(g(z)).mean())
            tuned_logit = float(d_prime(g_prime(z)).mean())
            grid = save_grid(torch.cat([g(z[:8]), g_prime(z[:8])]),
                             self.config.workspace_path / "outputs" / "finetune-uncond.png")
        self.reporter.add_output("checkpoint", path)
        self.reporter.add_output("samples", grid)
        self.reporter.add_metrics(style_logit_base=base_logit, style_logit_tuned=tuned_logit)
        return (f"Unconditional fine-tuning done; style-discriminator logit "
                f"{base_logit:.3f} (g) vs {tuned_logit:.3f} (g′)")
