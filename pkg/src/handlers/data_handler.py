"""
Data Handler
Backs the `dataset` command: renders source sprites and style exemplars.
"""

import logging
from typing import Optional

import torch

from ..config import RunConfig
from ..reporting import RunReporter, save_grid
from ..synth.dataset import gen_dataset, load_images

logger = logging.getLogger(__name__)

PREVIEW_COUNT = 16


class DataHandler:
    """
    Handles synthetic dataset generation.

    Capabilities:
    - Render source and style images with their parameter manifests
    - Write a preview grid of both kinds
    """

    def __init__(self, config: RunConfig, reporter: RunReporter, progress: bool = False):
        self.config = config
        self.reporter = reporter
        self.progress = progress

    def generate(self, n_identities: Optional[int] = None, n_styles: Optional[int] = None) -> str:
        """
        Render the dataset into the workspace.

        Args:
            n_identities: Source image count (config value when None)
            n_styles: Style exemplar count (config value when None)

        Returns:
            Summary line
        """
        dataset = self.config.dataset
        summary = gen_dataset(self.config.workspace_path,
                              n_identities or dataset.n_identities,
                              n_styles or dataset.n_styles,
                              dataset.seed, self.config.generator.resolution, self.progress)

        workspace = self.config.workspace_path
        preview = load_images(workspace, "source", PREVIEW_COUNT)
        styles = load_images(workspace, "style", PREVIEW_COUNT)
        grid = save_grid(torch.cat([preview, styles]), workspace / "outputs" / "dataset.png")

        self.reporter.add_input("dataset_seed", dataset.seed)
        self.reporter.add_output("dataset", summary.root)
        self.reporter.add_output("preview", grid)
        self.reporter.add_metrics(n_source=summary.n_source, n_style=summary.n_style,
                                  resolution=summary.resolution)
        return (f"Rendered {summary.n_source} source and {summary.n_style} style images "
                f"at {summary.resolution}×{summary.resolution} into {summary.root}")
