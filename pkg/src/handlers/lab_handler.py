"""
Lab Handler
Backs `adapter-lab`: the residual adapter comparison.
"""

import json
import logging

from ..config import RunConfig
from ..errors import EnvironmentFailure
from ..reporting import RunReporter, save_grid
from ..synth.dataset import load_images
from ..training.adapter_lab import PANEL_SAMPLES, run_adapter_experiment
from .workspace import WorkspaceStore

logger = logging.getLogger(__name__)


class LabHandler:
    """Runs the adapter experiment and writes its text report, JSON and panel."""

    def __init__(self, config: RunConfig, store: WorkspaceStore, reporter: RunReporter,
                 progress: bool = False):
        self.config = config
        self.store = store
        self.reporter = reporter
        self.progress = progress

    def adapter_lab(self) -> str:
        g, D, losses = self.store.load_base()
        styles = load_images(self.config.workspace_path, "style")
        cfg = self.config.training.adapter_lab
        report = run_adapter_experiment(g, D, styles, cfg, losses.extractor, self.progress)

        directory = self.config.workspace_path / "reports"
        try:
            directory.mkdir(parents=True, exist_ok=True)
            (directory / "adapter_lab.txt").write_text(report.to_text(), encoding="utf-8")
            with open(directory / "adapter_lab.json", 'w', encoding='utf-8') as f:
                json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        except OSError as e:
            raise EnvironmentFailure(f"cannot write adapter report: {e}")

        self.reporter.add_input("style_images", styles.shape[0])
        self.reporter.add_output("report", directory / "adapter_lab.txt")
        if report.panels is not None:
            # rows: base, ground truth, resblock, adain_channel, dat_spatial
            panel = save_grid(report.panels, self.config.workspace_path / "outputs" / "adapter_lab.png",
                              nrow=min(PANEL_SAMPLES, cfg.eval_samples))
            self.reporter.add_output("panel", panel)
        self.reporter.add_metrics(resblock_wins=report.resblock_wins(), verdict=report.verdict,
                                  **{f"distance_{k}": v for k, v in report.mean_distances().items()})
        return report.to_text()
