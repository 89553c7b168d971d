"""
Adversarial training of the base generator on source renders, and
unconditional fine-tuning of a copy of it on style exemplars.
"""

import copy
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import torch

from ..config import BaseTrainingConfig, UncondConfig
from ..models.synthesis import BaseGenerator, Discriminator
from .common import CheckpointFn, train_adversarial

logger = logging.getLogger(__name__)

# checkpoint(step, g′, D′); both copies are created inside finetune_unconditional
CopyCheckpointFn = Callable[[int, BaseGenerator, Discriminator], Optional[Path]]


def train_base(g: BaseGenerator, discriminator: Discriminator, source_images: torch.Tensor,
               cfg: BaseTrainingConfig, seed: int = 0, metrics=None,
               checkpoint: Optional[CheckpointFn] = None,
               progress: bool = False) -> List[Dict[str, float]]:
    """
    Train g and D in place on the source domain.

    Args:
        g: Base generator
        discriminator: Source-domain discriminator
        source_images: (N, 3, R, R) source renders
        cfg: Iterations, batch size, learning rates, R1 coefficient
        seed: Seed for latent and batch draws

    Returns:
        Loss trace
    """
    g.requires_grad_(True)
    logger.info("Training base generator for %d iterations on %d images",
                cfg.iterations, source_images.shape[0])
    return train_adversarial(g, list(g.parameters()), discriminator, source_images,
                             cfg.iterations, cfg.batch_size, cfg.lr_generator,
                             cfg.lr_discriminator, cfg.r1_gamma, seed, "base",
                             metrics, checkpoint, cfg.checkpoint_every, progress)


def finetune_unconditional(g: BaseGenerator, discriminator: Discriminator,
                           style_images: torch.Tensor, cfg: UncondConfig, seed: int = 0,
                           metrics=None, checkpoint: Optional[CopyCheckpointFn] = None,
                           progress: bool = False) -> Tuple[BaseGenerator, Discriminator]:
    """
    Fine-tune copies of every generator and discriminator weight on style images.

    The inputs are left untouched; with zero iterations the returned g′ equals g
    bit for bit.

    Returns:
        (g′, D′)
    """
    g_prime = copy.deepcopy(g)
    d_prime = copy.deepcopy(discriminator)
    if cfg.iterations <= 0:
        return g_prime, d_prime
    g_prime.requires_grad_(True)
    save = None if checkpoint is None else (lambda step: checkpoint(step, g_prime, d_prime))
    logger.info("Unconditional fine-tuning for %d iterations on %d style images",
                cfg.iterations, style_images.shape[0])
    train_adversarial(g_prime, list(g_prime.parameters()), d_prime, style_images,
                      cfg.iterations, cfg.batch_size, cfg.lr_generator,
                      cfg.lr_discriminator, cfg.r1_gamma, seed, "uncond",
                      metrics, save, cfg.checkpoint_every, progress)
    g_prime.requires_grad_(False)
    return g_prime, d_prime
