"""
Reporting Module
Metric traces (JSON lines), command manifests, image grids and logging setup.
"""

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import torch
from torchvision.utils import make_grid, save_image

from .errors import DualStyleError, EnvironmentFailure

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
MANIFEST_VERSION = 1


def setup_logging(level: str = "INFO"):
    """Configure the root logger once for a CLI process."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


class MetricWriter:
    """
    Appends one JSON object per training step to a .jsonl trace.

    Example:
        writer = MetricWriter(workspace / "metrics" / "pretrain.jsonl")
        writer.write(step=10, stage="stage2", adv=0.69, perc=0.12)
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.records: List[Dict[str, Any]] = []
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                # one trace per command run
                self.path.write_text("", encoding="utf-8")
            except OSError as e:
                raise EnvironmentFailure(f"cannot create metrics file: {e}")

    def write(self, step: int, stage: str, **components: float):
        record = {"step": int(step), "stage": stage}
        record.update({k: float(v) for k, v in components.items()})
        self.records.append(record)
        if self.path is None:
            return
        try:
            with open(self.path, 'a', encoding='utf-8') as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")
        except OSError as e:
            raise EnvironmentFailure(f"cannot append to {self.path}: {e}")

    def summary(self) -> Dict[str, float]:
        """Last value of every component seen, for manifests."""
        out: Dict[str, float] = {}
        for record in self.records:
            for key, value in record.items():
                if key not in ("step", "stage"):
                    out[key] = value
        return out


class ManifestWriter:
    """Writes <workspace>/manifests/<command>.json."""

    def __init__(self, workspace: Path):
        self.directory = Path(workspace) / "manifests"

    def write(self, command: str, config_hash: str, seed: int,
              inputs: Dict[str, Any], outputs: Dict[str, Any],
              metrics: Dict[str, Any], exit_code: int = 0,
              error: Optional[str] = None) -> Path:
        """
        Record what a command read, wrote and measured.

        A failed command still gets a manifest with its exit code and error message.

        Returns:
            Path of the manifest
        """
        manifest = {
            "command": command,
            "config_hash": config_hash,
            "seed": seed,
            "inputs": inputs,
            "outputs": outputs,
            "metrics": metrics,
            "version": MANIFEST_VERSION,
            "status": "ok" if exit_code == 0 else "failed",
            "exit_code": exit_code,
        }
        if error is not None:
            manifest["error"] = error
        path = self.directory / f"{command}.json"
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        except OSError as e:
            raise EnvironmentFailure(f"cannot write manifest {path}: {e}")
        return path


def save_grid(images: torch.Tensor, path: Path, nrow: int = 8) -> Path:
    """Save a batch (N, 3, R, R) in [-1, 1] as one PNG grid."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        grid = make_grid(images.detach().cpu().float(), nrow=nrow, padding=1,
                         normalize=True, value_range=(-1, 1))
        save_image(grid, path)
    except OSError as e:
        raise EnvironmentFailure(f"cannot write image grid {path}: {e}")
    return path


class RunReporter:
    """
    Unified reporting for one command: metric trace, manifest and timing.
    """

    def __init__(self, workspace: Path, command: str, config_hash: str, seed: int):
        self.workspace = Path(workspace)
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.metrics = MetricWriter(self.workspace / "metrics" / f"{command}.jsonl")
        self.manifests = ManifestWriter(self.workspace)
        self.inputs: Dict[str, Any] = {}
        self.outputs: Dict[str, Any] = {}
        self.extra: Dict[str, Any] = {}
        self._started = time.time()

    def add_input(self, name: str, value: Any):
        self.inputs[name] = str(value) if isinstance(value, Path) else value

    def add_output(self, name: str, value: Any):
        self.outputs[name] = str(value) if isinstance(value, Path) else value

    def add_metrics(self, **values: Any):
        self.extra.update(values)

    def finish(self) -> Path:
        metrics = self.metrics.summary()
        metrics.update(self.extra)
        path = self.manifests.write(self.command, self.config_hash, self.seed,
                                    self.inputs, self.outputs, metrics)
        logger.info("Manifest written: %s (%.1fs)", path, time.time() - self._started)
        return path

    def fail(self, error: DualStyleError) -> Optional[Path]:
        """Write a failure manifest; returns None if even that cannot be written."""
        metrics = self.metrics.summary()
        metrics.update(self.extra)
        try:
            path = self.manifests.write(self.command, self.config_hash, self.seed, self.inputs,
                                        self.outputs, metrics, error.exit_code, str(error))
        except EnvironmentFailure as e:
            logger.warning("No failure manifest for %s: %s", self.command, e)
            return None
        logger.info("Failure manifest written: %s (exit code %d)", path, error.exit_code)
        return path
