"""
Extrinsic style codebook: per-exemplar code refinement after Stage III and
sampling networks that turn Gaussian noise into new extrinsic codes.
"""

import dataclasses
import logging
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from tqdm import tqdm

from ..config import GeneratorConfig, RefineConfig, SamplerConfig, StyleProfile
from ..errors import RefusalError, require
from ..losses.objectives import LossSuite
from ..models.extrinsic import DualStyleGenerator
from ..models.sampler import RowSampler, StyleSampler
from .common import adam, draw_batch, ensure_finite
from .destylize import LearningRateSchedule, OptimizationResult, optimize_code
from .records import StyleRecord

logger = logging.getLogger(__name__)


def refine_codes(G: DualStyleGenerator, records: List[StyleRecord], cfg: RefineConfig,
                 profile: StyleProfile, losses: LossSuite,
                 progress: bool = False) -> Tuple[List[StyleRecord], List[OptimizationResult]]:
    """
    Fit each record's extrinsic code to its exemplar through G.

    Structure rows use the profile's slow learning rate, color rows the fast one.
    The loss is perc(G(z_i, z_e, 1), S) + λ_CX·CX(G(z_i, z_e, 1), S).

    Returns:
        (records with z_refined set, per-record optimization results);
        z_intrinsic is never changed
    """
    if not records:
        raise RefusalError("no style records to refine")
    schedule = LearningRateSchedule(profile.refine_lr_color, split=G.n_structure,
                                    structure_lr=profile.refine_lr_structure)

    def loss_fn(rendered, target, code):
        terms = {"perc": losses.perceptual(rendered, target)}
        if cfg.lambda_cx > 0:
            terms["cx"] = cfg.lambda_cx * losses.contextual(rendered, target)
        return terms

    refined, results = [], []
    for record in tqdm(records, desc="refine", disable=not progress):
        z_intrinsic = record.z_intrinsic.unsqueeze(0)
        result = optimize_code(record.image.unsqueeze(0),
                               lambda code: G(z_intrinsic, code, 1.0),
                               record.z_extrinsic.unsqueeze(0), loss_fn, cfg.steps, schedule,
                               stage=f"refine{record.index}")
        refined.append(dataclasses.replace(record, z_refined=result.code[0]))
        results.append(result)
        logger.debug("Record %d refined: %.4f -> %.4f", record.index,
                     result.initial_loss, result.best_loss)
    return refined, results


def _fit_rows(network: RowSampler, targets: torch.Tensor, cfg: SamplerConfig,
              rng: torch.Generator, stage: str, metrics=None, progress: bool = False):
    """
    Implicit maximum likelihood fit of one row sampler.

    Per step a batch of target slices is drawn; for each target the nearest of
    cfg.noise_batch fresh samples is selected without gradients and then
    regressed onto the target.
    """
    optimizer = adam(network.parameters(), cfg.lr)
    pool = torch.arange(targets.shape[0])
    for step in tqdm(range(cfg.steps), desc=stage, disable=not progress):
        batch = targets[draw_batch(pool, cfg.codes_per_step, rng)]
        noise = network.noise(batch.shape[0] * cfg.noise_batch, rng)
        noise = noise.view(batch.shape[0], cfg.noise_batch, -1)

        with torch.no_grad():
            candidates = network(noise.flatten(0, 1)).view(batch.shape[0], cfg.noise_batch, -1)
            distances = (candidates - batch.flatten(1).unsqueeze(1)).pow(2).sum(dim=-1)
            nearest = distances.argmin(dim=1)
        selected = noise[torch.arange(batch.shape[0]), nearest]

        loss = F.mse_loss(network(selected), batch)
        ensure_finite(step, stage, {"imle": loss}, stage)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if metrics is not None:
            metrics.write(step, stage, imle=float(loss.detach()))


def train_sampler(codes: torch.Tensor, config: GeneratorConfig, cfg: SamplerConfig,
                  seed: int = 0, metrics=None, progress: bool = False) -> StyleSampler:
    """
    Train N_s on structure rows and N_c on color rows independently.

    Args:
        codes: Refined extrinsic codes (N, L, D)
        config: Generator shape (n_s, n_c, D)
        cfg: Steps, noise batch, lr, minimum code count

    Raises:
        RefusalError: fewer than cfg.min_codes codes
    """
    require(codes.dim() == 3 and codes.shape[1:] == (config.num_slots, config.latent_dim),
            f"sampler codes must be (N, {config.num_slots}, {config.latent_dim}), "
            f"got {tuple(codes.shape)}")
    if codes.shape[0] < cfg.min_codes:
        raise RefusalError(f"sampler training needs at least {cfg.min_codes} codes, "
                           f"got {codes.shape[0]}")

    torch.manual_seed(seed)
    sampler = StyleSampler(config, cfg.noise_dim, cfg.hidden)
    rng = torch.Generator().manual_seed(seed)
    codes = codes.detach()
    logger.info("Training samplers on %d codes", codes.shape[0])
    _fit_rows(sampler.structure, codes[:, :config.n_structure], cfg, rng,
              "sampler_structure", metrics, progress)
    _fit_rows(sampler.color, codes[:, config.n_structure:], cfg, rng,
              "sampler_color", metrics, progress)
    sampler.requires_grad_(False)
    return sampler


def sample_extrinsic(sampler: StyleSampler, seed: int, batch: int = 1,
                     generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """
    Draw independent structure and color noises and concatenate the rows.

    Returns:
        Extrinsic codes (batch, L, D); identical for identical seeds
    """
    rng = generator if generator is not None else torch.Generator().manual_seed(seed)
    with torch.no_grad():
        structure_noise = sampler.structure.noise(batch, rng)
        color_noise = sampler.color.noise(batch, rng)
        return sampler(structure_noise, color_noise)
