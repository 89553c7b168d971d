"""
Stage Handler
Backs `destylize`, `pretrain`, `finetune` and `refine`: everything that
produces or consumes style records and stage checkpoints.
"""

import logging
from typing import Optional

import torch

from ..config import RunConfig
from ..errors import NumericFailure
from ..models.extrinsic import DualStyleGenerator
from ..reporting import RunReporter, save_grid
from ..synth.dataset import load_images
from ..synth.measure import color_histogram_distance
from ..training.codebook import refine_codes
from ..training.destylize import destylize_all
from ..training.progressive import (STAGE2_MARKER, STAGE3_MARKER, finetune_stage3,
                                    init_stage1, level_per_step, pretrain_stage2, style_gap,
                                    style_mix_gap)
from ..training.records import load_records, save_records
from .workspace import WorkspaceStore

logger = logging.getLogger(__name__)

GRID_RECORDS = 8
DEGENERACY_SAMPLES = 8
DEGENERACY_TOLERANCE = 1e-5


class StageHandler:
    """
    Handles destylization and the progressive fine-tuning stages.

    Capabilities:
    - Destylize style exemplars into records
    - Stage I + II pretraining with intermediate checkpoints
    - Stage III fine-tuning on the records
    - Per-record extrinsic code refinement
    """

    def __init__(self, config: RunConfig, store: WorkspaceStore, reporter: RunReporter,
                 progress: bool = False):
        self.config = config
        self.store = store
        self.reporter = reporter
        self.progress = progress

    def _check_degeneracy(self, G: DualStyleGenerator) -> float:
        """Max |G(z, z_e, 0) − g(z)| over a few samples; must stay below 1e−5."""
        rng = torch.Generator().manual_seed(self.config.seed)
        with torch.no_grad():
            z = G.base.sample_z(DEGENERACY_SAMPLES, rng)
            z_e = G.base.sample_z(DEGENERACY_SAMPLES, rng)
            diff = float((G(z, z_e, 0.0) - G.base(z)).abs().max())
        if diff >= DEGENERACY_TOLERANCE:
            raise NumericFailure(f"w=0 output deviates from g by {diff:.2e}",
                                 {"stage": "degeneracy", "max_abs_diff": diff})
        return diff

    def destylize(self, limit: Optional[int] = None) -> str:
        """Destylize the style exemplars; write records/ and a stage grid."""
        g, _, losses = self.store.load_base()
        encoder = self.store.load_encoder()
        g_prime = self.store.load_uncond()
        exemplars = load_images(self.config.workspace_path, "style", limit)
        self.reporter.add_input("style_images", exemplars.shape[0])

        records = destylize_all(exemplars, encoder, g, g_prime, losses,
                                self.config.training.destylize, self.progress)
        directory = save_records(self.config.workspace_path, records)

        shown = records[:GRID_RECORDS]
        rows = [torch.stack([r.stage_images[name] for r in shown])
                for name in ("exemplar", "stage1", "stage2", "stage3")]
        grid = save_grid(torch.cat(rows), self.config.workspace_path / "outputs" / "destylize.png",
                         nrow=len(shown))
        self.reporter.add_output("records", directory)
        self.reporter.add_output("grid", grid)
        self.reporter.add_metrics(records=len(records))
        return f"Destylized {len(records)} exemplars into {directory}"

    def pretrain(self) -> str:
        """Stage I initialization and Stage II pretraining; write checkpoints/stage2.pt."""
        g, D, losses = self.store.load_base()
        encoder = self.store.load_encoder()
        cfg = self.config.training.stage2
        torch.manual_seed(self.config.seed)
        G = DualStyleGenerator(g)
        init_stage1(G.extrinsic, self.config.seed)

        final_l = level_per_step(cfg, G.num_slots)[-1] if cfg.iterations else G.n_structure
        gap_init = style_mix_gap(G, losses, final_l)

        def checkpoint(step: int):
            return self.store.save_stage("stage2", G, D, [], step)

        pretrain_stage2(G, D, cfg, encoder, losses, self.reporter.metrics, checkpoint,
                        self.progress)
        diff = self._check_degeneracy(G)
        path = self.store.save_stage("stage2", G, D, [STAGE2_MARKER])
        gap_final = style_mix_gap(G, losses, final_l)

        self.reporter.add_output("checkpoint", path)
        self.reporter.add_metrics(style_mix_gap_init=gap_init, style_mix_gap_final=gap_final,
                                  degeneracy_max_diff=diff)
        return (f"Stage II finished; style-mix gap {gap_init:.4f} -> {gap_final:.4f} "
                f"(l={final_l}); saved {path}")

    def finetune(self) -> str:
        """Stage III on the destylized records; write checkpoints/stage3.pt."""
        g, D, losses = self.store.load_base()
        G, markers = self.store.load_stage("stage2", g, D)
        records = load_records(self.config.workspace_path)
        cfg = self.config.stage3_config()
        self.reporter.add_input("records", len(records))
        self.reporter.add_input("style_profile", self.config.style_profile)

        before = style_gap(G, records, losses)

        def checkpoint(step: int):
            return self.store.save_stage("stage3", G, D, [STAGE2_MARKER], step)

        finetune_stage3(G, D, records, cfg, losses, markers, self.reporter.metrics,
                        checkpoint, self.progress)
        diff = self._check_degeneracy(G)
        path = self.store.save_stage("stage3", G, D, [STAGE2_MARKER, STAGE3_MARKER])
        after = style_gap(G, records, losses)

        self.reporter.add_output("checkpoint", path)
        self.reporter.add_metrics(degeneracy_max_diff=diff,
                                  **{f"{k}_before": v for k, v in before.items()},
                                  **{f"{k}_after": v for k, v in after.items()})
        return (f"Stage III finished; contextual loss {before['contextual']:.4f} -> "
                f"{after['contextual']:.4f}; saved {path}")

    def refine(self) -> str:
        """Refine every record's extrinsic code against the Stage-III generator."""
        g, _, losses = self.store.load_base()
        G, _ = self.store.load_stage("stage3", g)
        records = load_records(self.config.workspace_path)
        refined, results = refine_codes(G, records, self.config.training.refine,
                                        self.config.profile, losses, self.progress)

        improved_loss = sum(r.best_loss < r.initial_loss for r in results)
        improved_color = 0
        with torch.no_grad():
            for before, after in zip(records, refined):
                z_i = before.z_intrinsic.unsqueeze(0)
                old = G(z_i, before.z_extrinsic.unsqueeze(0), 1.0)[0]
                new = G(z_i, after.z_refined.unsqueeze(0), 1.0)[0]
                if color_histogram_distance(new, before.image) < color_histogram_distance(old, before.image):
                    improved_color += 1
        directory = save_records(self.config.workspace_path, refined)

        self.reporter.add_output("records", directory)
        self.reporter.add_metrics(records=len(refined), improved_loss=improved_loss,
                                  improved_color=improved_color)
        return (f"Refined {len(refined)} codes; loss improved on {improved_loss}, "
                f"color histogram on {improved_color}")
