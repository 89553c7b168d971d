"""
Adapter lab: which residual adapter on a frozen generator best simulates
unconditional fine-tuning of the whole generator?

For every seed a ground-truth model g″ is fine-tuned on the style images, and
each adapter kind is trained adversarially on the same data and budget. Arms
are scored by the perceptual distance of their outputs to g″ on a shared z set.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import torch

from ..config import AdapterLabConfig, UncondConfig
from ..errors import NumericFailure
from ..losses.extractor import FeatureExtractor
from ..losses.objectives import perceptual
from ..models.adapters import ADAPTER_KINDS, attach_adapters
from ..models.synthesis import BaseGenerator, Discriminator
from .base import finetune_unconditional
from .common import train_adversarial

logger = logging.getLogger(__name__)

EVAL_SEED = 4321
PANEL_SAMPLES = 4


@dataclass
class AdapterReport:
    """Per-seed distances (None for failed arms) and the ordering verdict."""
    seeds: List[int]
    distances: List[Dict[str, Optional[float]]]
    parameter_counts: Dict[str, int]
    failures: List[Dict[str, Any]] = field(default_factory=list)
    panels: Optional[torch.Tensor] = None

    def mean_distances(self) -> Dict[str, Optional[float]]:
        means = {}
        for kind in ADAPTER_KINDS:
            values = [d[kind] for d in self.distances if d.get(kind) is not None]
            means[kind] = sum(values) / len(values) if values else None
        return means

    def resblock_wins(self) -> int:
        """Seeds where resblock is strictly closer than both other kinds."""
        wins = 0
        for d in self.distances:
            if any(d.get(kind) is None for kind in ADAPTER_KINDS):
                continue
            if d["resblock"] < d["adain_channel"] and d["resblock"] < d["dat_spatial"]:
                wins += 1
        return wins

    @property
    def verdict(self) -> bool:
        return bool(self.seeds) and 3 * self.resblock_wins() >= 2 * len(self.seeds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seeds": self.seeds,
            "distances": self.distances,
            "mean_distances": self.mean_distances(),
            "parameter_counts": self.parameter_counts,
            "failures": self.failures,
            "resblock_wins": self.resblock_wins(),
            "verdict": self.verdict,
        }

    def to_text(self) -> str:
        lines = ["adapter distance to fine-tuned ground truth (lower is closer)", ""]
        header = "seed".ljust(8) + "".join(kind.ljust(16) for kind in ADAPTER_KINDS)
        lines.append(header)
        for seed, d in zip(self.seeds, self.distances):
            cells = ["failed".ljust(16) if d.get(kind) is None else f"{d[kind]:.6f}".ljust(16)
                     for kind in ADAPTER_KINDS]
            lines.append(str(seed).ljust(8) + "".join(cells))
        means = self.mean_distances()
        lines.append("mean".ljust(8) + "".join(
            ("n/a" if means[k] is None else f"{means[k]:.6f}").ljust(16) for k in ADAPTER_KINDS))
        lines.append("")
        lines.append("parameters: " + ", ".join(
            f"{k}={self.parameter_counts.get(k, 0)}" for k in ADAPTER_KINDS))
        lines.append(f"resblock closest in {self.resblock_wins()} of {len(self.seeds)} seeds; "
                     f"verdict {'holds' if self.verdict else 'does not hold'}")
        for failure in self.failures:
            lines.append(f"failed arm: seed {failure['seed']} {failure['kind']}: {failure['error']}")
        return "\n".join(lines) + "\n"


def run_adapter_experiment(g: BaseGenerator, D: Discriminator, style_images: torch.Tensor,
                           cfg: AdapterLabConfig, extractor: FeatureExtractor,
                           progress: bool = False) -> AdapterReport:
    """
    Compare the three adapter kinds against unconditional fine-tuning.

    g and D are never modified; every arm trains deep copies.

    Args:
        g: Trained base generator
        D: Its discriminator, copied as the starting point of every arm
        style_images: (N, 3, R, R) style exemplars
        cfg: Iterations, seeds, batch size, lr, evaluation sample count
        extractor: Feature network for the perceptual distance

    Returns:
        AdapterReport
    """
    uncond = UncondConfig(iterations=cfg.iterations, batch_size=cfg.batch_size,
                          lr_generator=cfg.lr, lr_discriminator=cfg.lr, r1_gamma=cfg.r1_gamma)
    z_eval = g.sample_z(cfg.eval_samples, torch.Generator().manual_seed(EVAL_SEED))
    report = AdapterReport(seeds=list(cfg.seeds), distances=[], parameter_counts={})

    for seed in cfg.seeds:
        logger.info("Adapter lab seed %d: fine-tuning ground truth", seed)
        torch.manual_seed(seed)
        truth, _ = finetune_unconditional(g, D, style_images, uncond, seed, progress=progress)
        with torch.no_grad():
            reference = truth(z_eval)

        distances: Dict[str, Optional[float]] = {}
        outputs: Dict[str, torch.Tensor] = {}
        for kind in ADAPTER_KINDS:
            torch.manual_seed(seed)
            model = attach_adapters(copy.deepcopy(g), kind)
            report.parameter_counts[kind] = model.parameter_count()
            try:
                train_adversarial(model, model.adapter_parameters(), copy.deepcopy(D),
                                  style_images, cfg.iterations, cfg.batch_size, cfg.lr, cfg.lr,
                                  cfg.r1_gamma, seed, f"adapter_{kind}", progress=progress)
            except NumericFailure as e:
                logger.warning("Adapter arm %s failed on seed %d: %s", kind, seed, e)
                report.failures.append({"seed": seed, "kind": kind, "error": str(e)})
                distances[kind] = None
                continue
            with torch.no_grad():
                outputs[kind] = model(z_eval)
                distances[kind] = float(perceptual(extractor, outputs[kind], reference))
        report.distances.append(distances)
        logger.info("Seed %d distances: %s", seed, distances)

        with torch.no_grad():
            rows = [g(z_eval[:PANEL_SAMPLES]), reference[:PANEL_SAMPLES]]
        rows += [outputs.get(kind, torch.zeros_like(reference))[:PANEL_SAMPLES]
                 for kind in ADAPTER_KINDS]
        report.panels = torch.cat(rows)

    return report
