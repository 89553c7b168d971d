"""
Identity embedder training on synthetic identity labels.

Each identity θ is rendered several times under mild random styles; a cosine
softmax classifier on the unit-norm embedding then learns to tell identities
apart regardless of style, which is what the identity loss relies on.
"""

import logging
from typing import List

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from tqdm import tqdm

from ..config import EmbedderTrainingConfig
from ..errors import require
from ..losses.extractor import IdentityEmbedder
from ..synth.render import IdentityParams, StyleParams, render_style
from .common import draw_batch, ensure_finite

logger = logging.getLogger(__name__)

COSINE_SCALE = 16.0
EMBEDDER_STREAM = 2


def mild_style(rng: np.random.Generator) -> StyleParams:
    """Small eye scaling, fine palettes, thin outlines and small hue shifts."""
    return StyleParams(
        eye_scale=float(rng.uniform(1.0, 1.3)),
        palette_levels=int(rng.integers(6, 9)),
        outline=int(rng.integers(0, 2)),
        hue_shift=float(rng.uniform(-0.05, 0.05)),
    )


def identity_dataset(cfg: EmbedderTrainingConfig, resolution: int, seed: int):
    """Returns (images (N, 3, R, R), labels (N,)) for cfg.n_identities identities."""
    rng = np.random.default_rng([seed, EMBEDDER_STREAM])
    images: List[torch.Tensor] = []
    labels: List[int] = []
    for label in range(cfg.n_identities):
        theta = IdentityParams.sample(rng)
        for _ in range(cfg.samples_per_identity):
            images.append(render_style(theta, mild_style(rng), resolution))
            labels.append(label)
    return torch.stack(images), torch.tensor(labels)


def train_embedder(cfg: EmbedderTrainingConfig, resolution: int, seed: int = 0,
                   metrics=None, progress: bool = False) -> IdentityEmbedder:
    """
    Train and freeze an IdentityEmbedder.

    Args:
        cfg: Identity count, samples per identity, steps, batch size, lr
        resolution: Render size R
        seed: Seed for identities, styles and initialization

    Returns:
        Trained embedder with its `trained` marker set
    """
    require(cfg.n_identities >= 2, "embedder training needs at least two identities")
    require(cfg.samples_per_identity >= 1, "samples_per_identity must be positive")

    torch.manual_seed(seed)
    embedder = IdentityEmbedder(cfg.embedding_dim)
    classes = nn.Parameter(torch.randn(cfg.n_identities, cfg.embedding_dim) * 0.1)
    images, labels = identity_dataset(cfg, resolution, seed)
    optimizer = torch.optim.Adam(list(embedder.parameters()) + [classes], lr=cfg.lr)
    rng = torch.Generator().manual_seed(seed)
    logger.info("Training identity embedder on %d identities × %d renders",
                cfg.n_identities, cfg.samples_per_identity)

    batch_size = min(cfg.batch_size, images.shape[0])
    for step in tqdm(range(cfg.steps), desc="embedder", disable=not progress):
        index = draw_batch(torch.arange(images.shape[0]), batch_size, rng)
        embeddings = embedder(images[index])
        logits = COSINE_SCALE * embeddings @ F.normalize(classes, dim=-1).t()
        loss = F.cross_entropy(logits, labels[index])
        ensure_finite(step, "embedder", {"ce": loss}, "embedder")
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()

        if metrics is not None:
            accuracy = (logits.argmax(dim=-1) == labels[index]).float().mean()
            metrics.write(step, "embedder", ce=float(loss.detach()), accuracy=float(accuracy))

    embedder.mark_trained()
    embedder.eval()
    return embedder
