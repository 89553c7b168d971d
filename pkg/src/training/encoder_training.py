"""
Self-supervised encoder training against the frozen base generator.

Samples (g(z), z) are drawn on the fly; the ground-truth code is known, so the
encoder gets a direct row loss next to perceptual and identity reconstruction.
"""

import logging
from typing import List, Tuple

import torch
import torch.nn.functional as F
from tqdm import tqdm

from ..config import EncoderTrainingConfig
from ..losses.objectives import LossSuite
from ..models.encoder import LatentEncoder
from ..models.synthesis import BaseGenerator
from .common import adam, ensure_finite

logger = logging.getLogger(__name__)


def row_error(encoder: LatentEncoder, g: BaseGenerator, n_samples: int = 64, seed: int = 0) -> float:
    """Mean squared distance between E(g(z)) and the broadcast z over fixed samples."""
    rng = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        z = g.sample_z(n_samples, rng)
        codes = encoder(g(z))
        return float(F.mse_loss(codes, g.extend(z)))


def train_encoder(encoder: LatentEncoder, g: BaseGenerator, losses: LossSuite,
                  cfg: EncoderTrainingConfig, seed: int = 0, metrics=None,
                  progress: bool = False) -> Tuple[LatentEncoder, List[float]]:
    """
    Train E in place on generator samples.

    Args:
        encoder: Encoder to train
        g: Frozen base generator
        losses: Extractor and (optional) identity embedder
        cfg: Steps, batch size, lr and loss weights

    Returns:
        (encoder, loss curve); steps=0 leaves the encoder as initialized
    """
    curve: List[float] = []
    if cfg.steps <= 0:
        return encoder, curve

    g.requires_grad_(False)
    use_identity = losses.embedder is not None and cfg.lambda_id > 0
    if not use_identity:
        logger.info("Encoder training without identity term")
    optimizer = adam(encoder.parameters(), cfg.lr)
    rng = torch.Generator().manual_seed(seed)

    for step in tqdm(range(cfg.steps), desc="encoder", disable=not progress):
        with torch.no_grad():
            z = g.sample_z(cfg.batch_size, rng)
            x = g(z)
        codes = encoder(x)
        reconstruction = g(codes)

        terms = {
            "perc": losses.perceptual(reconstruction, x),
            "row": F.mse_loss(codes, g.extend(z)),
        }
        total = cfg.lambda_perc * terms["perc"] + cfg.lambda_row * terms["row"]
        if use_identity:
            terms["id"] = losses.identity(reconstruction, x)
            total = total + cfg.lambda_id * terms["id"]
        terms["total"] = total
        ensure_finite(step, "encoder", terms, "encoder")

        optimizer.zero_grad(set_to_none=True)
        total.backward()
        optimizer.step()

        curve.append(float(total.detach()))
        if metrics is not None:
            metrics.write(step, "encoder", **losses.components(**terms))

    encoder.mark_trained()
    logger.info("Encoder loss %.4f -> %.4f over %d steps", curve[0], curve[-1], cfg.steps)
    return encoder, curve
