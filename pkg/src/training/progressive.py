"""
Progressive fine-tuning of the extrinsic style path.

Stage I   init_stage1: residuals at zero, identity color blocks; G(z1, z2, 1)
          reproduces the base generator on a style-mixed code.
Stage II  pretrain_stage2: learn structure transfer within the source domain
          from style-mix targets g(z+_l), with l decreasing over time.
Stage III finetune_stage3: fit destylized (z_i, z_e, S) records with style,
          content and adversarial objectives.

The base generator, mapping network and intrinsic path stay frozen
throughout; only G.extrinsic and D are updated.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import torch
from tqdm import tqdm

from ..config import StageConfig, scale_l_schedule
from ..errors import RefusalError, require
from ..losses.objectives import LossSuite, modres_l2
from ..models.encoder import LatentEncoder
from ..models.extrinsic import DualStyleGenerator, ExtrinsicPath
from ..models.synthesis import Discriminator, style_mix
from .common import (CheckpointFn, adam, adversarial_generator_term, discriminator_step,
                     draw_batch, ensure_finite)
from .records import StyleRecord

logger = logging.getLogger(__name__)

STAGE2_MARKER = "stage2_complete"
STAGE3_MARKER = "stage3_complete"


def init_stage1(extrinsic: ExtrinsicPath, seed: int = 0) -> ExtrinsicPath:
    """Stage-I initialization in place; second ModRes convs exactly zero."""
    extrinsic.reset_stage1(seed)
    logger.info("Extrinsic path initialized (Stage I)")
    return extrinsic


def level_per_step(cfg: StageConfig, num_slots: int) -> List[int]:
    """Expand the (l, iterations) schedule into one split row per step."""
    schedule = [tuple(entry) for entry in cfg.l_schedule]
    if not schedule:
        schedule = scale_l_schedule(num_slots, cfg.iterations)
    levels: List[int] = []
    for l, iterations in schedule:
        require(0 <= l <= num_slots, f"style-mix split l={l} outside [0, {num_slots}]")
        levels.extend([int(l)] * int(iterations))
    return levels


def _checkpoint_due(cfg: StageConfig, step: int) -> bool:
    return cfg.checkpoint_every > 0 and (step + 1) % cfg.checkpoint_every == 0


def pretrain_stage2(G: DualStyleGenerator, D: Discriminator, cfg: StageConfig,
                    encoder: LatentEncoder, losses: LossSuite, metrics=None,
                    checkpoint: Optional[CheckpointFn] = None,
                    progress: bool = False) -> List[Dict[str, float]]:
    """
    Color and structure transfer pretraining on the source domain.

    Each step draws z1, z2, replaces z2 by E(g(z2)) with probability
    cfg.encoded_probability per sample, and regresses G(z1, z̃2, 1) onto
    g(style_mix(z1, z2, l)) under λ_adv·L_adv + λ_perc·L_perc.

    Returns:
        Per-step loss records
    """
    base = G.base
    levels = level_per_step(cfg, G.num_slots)
    g_optimizer = adam(G.trainable_parameters(), cfg.lr_extrinsic)
    d_optimizer = adam(D.parameters(), cfg.lr_discriminator)
    rng = torch.Generator().manual_seed(cfg.seed)
    trace: List[Dict[str, float]] = []
    last_checkpoint = None
    logger.info("Stage II: %d iterations, l schedule %s", len(levels), cfg.l_schedule)

    for step, l in enumerate(tqdm(levels, desc="stage2", disable=not progress)):
        with torch.no_grad():
            z1 = base.sample_z(cfg.batch_size, rng)
            z2 = base.sample_z(cfg.batch_size, rng)
            pick = torch.rand(cfg.batch_size, generator=rng) < cfg.encoded_probability
            z2_tilde = base.extend(z2)
            if bool(pick.any()):
                encoded = encoder.encode(base(z2))
                z2_tilde = torch.where(pick[:, None, None], encoded, z2_tilde)
            target = base(style_mix(z1, z2, l, G.num_slots, base.latent_dim))

        fake = G(z1, z2_tilde, 1.0)
        d_loss = discriminator_step(D, d_optimizer, target, fake, cfg.r1_gamma)

        terms = {
            "adv": adversarial_generator_term(D, fake),
            "perc": losses.perceptual(fake, target, cfg.perc_taps),
        }
        total = cfg.lambda_adv * terms["adv"] + cfg.lambda_perc * terms["perc"]
        ensure_finite(step, "stage2", dict(terms, d=d_loss, total=total), "extrinsic",
                      last_checkpoint)
        g_optimizer.zero_grad(set_to_none=True)
        total.backward()
        g_optimizer.step()

        record = losses.components(d=d_loss, total=total, **terms)
        record["l"] = float(l)
        trace.append(record)
        if metrics is not None:
            metrics.write(step, "stage2", **record)
        if checkpoint is not None and _checkpoint_due(cfg, step):
            last_checkpoint = checkpoint(step + 1)

    D.requires_grad_(True)
    return trace


def _stack_records(records: Sequence[StyleRecord]) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    images = torch.stack([r.image for r in records])
    z_intrinsic = torch.stack([r.z_intrinsic for r in records])
    z_extrinsic = torch.stack([r.extrinsic_code for r in records])
    return images, z_intrinsic, z_extrinsic


def finetune_stage3(G: DualStyleGenerator, D: Discriminator, records: Sequence[StyleRecord],
                    cfg: StageConfig, losses: LossSuite, markers: Sequence[str],
                    metrics=None, checkpoint: Optional[CheckpointFn] = None,
                    progress: bool = False) -> List[Dict[str, float]]:
    """
    Style transfer fine-tuning on destylized records.

    Objective per step, with rec = G(z_i, z_e, 1) and sty = G(z, z_e, 1) for
    random z:
        λ_adv·L_adv + λ_perc·perc(rec, S) + λ_CX·CX(sty, S) + λ_FM·FM(sty, S)
        + λ_ID·id(sty, g(z)) + λ_reg·‖W‖₂

    Args:
        markers: Completion markers of the checkpoint Stage III starts from

    Raises:
        RefusalError: no records, or Stage II not completed
    """
    if STAGE2_MARKER not in markers:
        raise RefusalError("Stage III needs a checkpoint marked stage2_complete; run pretrain first")
    if not records:
        raise RefusalError("Stage III needs at least one destylized style record")

    base = G.base
    images, z_intrinsic, z_extrinsic = _stack_records(records)
    g_optimizer = adam(G.trainable_parameters(), cfg.lr_extrinsic)
    d_optimizer = adam(D.parameters(), cfg.lr_discriminator)
    rng = torch.Generator().manual_seed(cfg.seed)
    index_pool = torch.arange(len(records))
    batch_size = min(cfg.batch_size, len(records))
    trace: List[Dict[str, float]] = []
    last_checkpoint = None
    logger.info("Stage III: %d iterations on %d records", cfg.iterations, len(records))

    for step in tqdm(range(cfg.iterations), desc="stage3", disable=not progress):
        index = draw_batch(index_pool, batch_size, rng)
        exemplars, zi, ze = images[index], z_intrinsic[index], z_extrinsic[index]
        z = base.sample_z(batch_size, rng)

        reconstruction = G(zi, ze, 1.0)
        stylized = G(z, ze, 1.0)
        fake = torch.cat([reconstruction, stylized])
        d_loss = discriminator_step(D, d_optimizer, exemplars, fake, cfg.r1_gamma)

        terms = {
            "adv": adversarial_generator_term(D, fake),
            "perc": losses.perceptual(reconstruction, exemplars, cfg.perc_taps),
        }
        total = cfg.lambda_adv * terms["adv"] + cfg.lambda_perc * terms["perc"]
        if cfg.lambda_cx > 0:
            terms["cx"] = losses.contextual(stylized, exemplars)
            total = total + cfg.lambda_cx * terms["cx"]
        if cfg.lambda_fm > 0:
            terms["fm"] = losses.feature_matching(stylized, exemplars)
            total = total + cfg.lambda_fm * terms["fm"]
        if cfg.lambda_id > 0:
            with torch.no_grad():
                content = base(z)
            terms["id"] = losses.identity(stylized, content)
            total = total + cfg.lambda_id * terms["id"]
        if cfg.lambda_reg > 0:
            terms["reg"] = modres_l2(G.extrinsic)
            total = total + cfg.lambda_reg * terms["reg"]

        ensure_finite(step, "stage3", dict(terms, d=d_loss, total=total), "extrinsic",
                      last_checkpoint)
        g_optimizer.zero_grad(set_to_none=True)
        total.backward()
        g_optimizer.step()

        record = losses.components(d=d_loss, total=total, **terms)
        trace.append(record)
        if metrics is not None:
            metrics.write(step, "stage3", **record)
        if checkpoint is not None and _checkpoint_due(cfg, step):
            last_checkpoint = checkpoint(step + 1)

    D.requires_grad_(True)
    return trace


def style_mix_gap(G: DualStyleGenerator, losses: LossSuite, l: int, pairs: int = 50,
                  seed: int = 1234) -> float:
    """Mean perceptual distance between G(z1, z2, 1) and g(style_mix(z1, z2, l)) on held-out pairs."""
    rng = torch.Generator().manual_seed(seed)
    base = G.base
    with torch.no_grad():
        z1 = base.sample_z(pairs, rng)
        z2 = base.sample_z(pairs, rng)
        target = base(style_mix(z1, z2, l, G.num_slots, base.latent_dim))
        return float(losses.perceptual(G(z1, z2, 1.0), target))


def style_gap(G: DualStyleGenerator, records: Sequence[StyleRecord], losses: LossSuite,
              samples: int = 4, seed: int = 1234) -> Dict[str, float]:
    """
    Mean contextual loss of G(z, z_e, 1) against S, and mean identity loss
    against g(z), over held-out z.
    """
    images, _, z_extrinsic = _stack_records(records)
    rng = torch.Generator().manual_seed(seed)
    base = G.base
    contextual, identity = [], []
    with torch.no_grad():
        for _ in range(samples):
            z = base.sample_z(len(records), rng)
            stylized = G(z, z_extrinsic, 1.0)
            contextual.append(float(losses.contextual(stylized, images)))
            if losses.embedder is not None:
                identity.append(float(losses.identity(stylized, base(z))))
    out = {"contextual": sum(contextual) / len(contextual)}
    if identity:
        out["identity"] = sum(identity) / len(identity)
    return out
