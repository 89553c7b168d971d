"""
Helpers shared by the training loops: finiteness checks, batch drawing,
the adversarial step pair and the projector-style learning-rate ramp.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import torch
from torch import nn
from tqdm import tqdm

from ..errors import NumericFailure
from ..losses.objectives import discriminator_loss, generator_loss

logger = logging.getLogger(__name__)

CheckpointFn = Callable[[int], Path]


def ensure_finite(step: int, stage: str, components: Dict[str, torch.Tensor],
                  parameter_set: str, checkpoint: Optional[Path] = None):
    """
    Raise NumericFailure if any loss component is NaN or infinite.

    Args:
        step: Current step
        stage: Name of the loop ("stage2", "encoder", ...)
        components: Loss terms of this step
        parameter_set: Which parameters were being optimized
        checkpoint: Last checkpoint written, reported with the failure
    """
    bad = [name for name, value in components.items() if not torch.isfinite(value).all()]
    if bad:
        values = {name: float(value.detach().reshape(-1)[0]) for name, value in components.items()}
        raise NumericFailure(f"non-finite loss in {stage} at step {step}: {bad}",
                             {"step": step, "stage": stage, "parameters": parameter_set,
                              "components": values},
                             checkpoint)


def draw_batch(images: torch.Tensor, batch_size: int, generator: torch.Generator) -> torch.Tensor:
    index = torch.randint(0, images.shape[0], (batch_size,), generator=generator)
    return images[index]


def adam(params: Iterable[nn.Parameter], lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(list(params), lr=lr, betas=(0.0, 0.99))


def set_lr(optimizer: torch.optim.Optimizer, lrs: List[float]):
    for group, lr in zip(optimizer.param_groups, lrs):
        group["lr"] = lr


def ramp_factor(step: int, num_steps: int, rampdown: float = 0.25, rampup: float = 0.05) -> float:
    """Cosine ramp-down over the last `rampdown` share, linear ramp-up over the first `rampup`."""
    t = step / max(num_steps, 1)
    factor = min(1.0, (1.0 - t) / rampdown)
    factor = 0.5 - 0.5 * math.cos(factor * math.pi)
    return factor * min(1.0, t / rampup) if rampup > 0 else factor


def discriminator_step(discriminator: nn.Module, optimizer: torch.optim.Optimizer,
                       real: torch.Tensor, fake: torch.Tensor, r1_gamma: float) -> torch.Tensor:
    """One D update on (real, detached fake); returns the loss."""
    discriminator.requires_grad_(True)
    real = real.detach().requires_grad_(r1_gamma > 0)
    loss = discriminator_loss(discriminator(real), discriminator(fake.detach()), real, r1_gamma)
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    return loss.detach()


def adversarial_generator_term(discriminator: nn.Module, fake: torch.Tensor) -> torch.Tensor:
    """L_G on D(fake) with D frozen for the generator step."""
    discriminator.requires_grad_(False)
    return generator_loss(discriminator(fake))


def train_adversarial(generator: nn.Module, trainable: List[nn.Parameter],
                      discriminator: nn.Module, real_images: torch.Tensor,
                      iterations: int, batch_size: int, lr_generator: float,
                      lr_discriminator: float, r1_gamma: float, seed: int,
                      stage: str, metrics=None, checkpoint: Optional[CheckpointFn] = None,
                      checkpoint_every: int = 0, progress: bool = False) -> List[Dict[str, float]]:
    """
    Plain non-saturating GAN training of `trainable` against real_images.

    The generator must expose forward(z) and sample_z(batch, generator).
    Used for base training, unconditional fine-tuning and the adapter arms.

    Returns:
        Per-step loss records
    """
    g_optimizer = adam(trainable, lr_generator)
    d_optimizer = adam(discriminator.parameters(), lr_discriminator)
    rng = torch.Generator().manual_seed(seed)
    trace: List[Dict[str, float]] = []
    last_checkpoint: Optional[Path] = None

    for step in tqdm(range(iterations), desc=stage, disable=not progress):
        real = draw_batch(real_images, batch_size, rng)
        z = generator.sample_z(batch_size, rng)

        with torch.no_grad():
            fake = generator(z)
        d_loss = discriminator_step(discriminator, d_optimizer, real, fake, r1_gamma)

        g_loss = adversarial_generator_term(discriminator, generator(z))
        ensure_finite(step, stage, {"d": d_loss, "g": g_loss}, stage, last_checkpoint)
        g_optimizer.zero_grad(set_to_none=True)
        g_loss.backward()
        g_optimizer.step()

        record = {"d": float(d_loss), "g": float(g_loss.detach())}
        trace.append(record)
        if metrics is not None:
            metrics.write(step, stage, **record)
        if checkpoint is not None and checkpoint_every and (step + 1) % checkpoint_every == 0:
            last_checkpoint = checkpoint(step + 1)

    discriminator.requires_grad_(True)
    return trace
