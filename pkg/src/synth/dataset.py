"""
Synthetic dataset generation and loading.

Layout under the workspace:
    dataset/source/000000.png ...   source renders
    dataset/source.jsonl            one record per image: {"id", "theta", "seed", "resolution"}
    dataset/style/000000.png ...    style exemplars
    dataset/style.jsonl             {"id", "theta", "psi", "seed", "resolution"}
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import torch
from PIL import Image
from tqdm import tqdm

from ..errors import ContractViolation, EnvironmentFailure, require
from .render import (IdentityParams, StyleParams, render_source, render_style,
                     to_numpy, to_tensor, to_uint8)

logger = logging.getLogger(__name__)

DATASET_DIR = "dataset"
KINDS = ("source", "style")

# separate streams per kind so source and style draws never share state
_STREAMS = {"source": 0, "style": 1}


@dataclass
class DatasetSummary:
    root: Path
    n_source: int
    n_style: int
    resolution: int
    seed: int


def _rng(seed: int, kind: str) -> np.random.Generator:
    return np.random.default_rng([seed, _STREAMS[kind]])


def draw_identities(n: int, seed: int, kind: str = "source") -> List[IdentityParams]:
    rng = _rng(seed, kind)
    return [IdentityParams.sample(rng) for _ in range(n)]


def save_png(image: torch.Tensor, path: Path):
    """(3, R, R) in [-1, 1] -> 8-bit PNG with the linear [−1,1] -> [0,255] map."""
    Image.fromarray(to_uint8(to_numpy(image))).save(path)


def load_png(path: Path) -> torch.Tensor:
    try:
        with Image.open(path) as image:
            array = np.asarray(image.convert("RGB")).astype(np.float64) / 255.0
    except OSError as e:
        raise EnvironmentFailure(f"cannot read image {path}: {e}")
    return to_tensor(array)


def gen_dataset(workspace: Path, n_identities: int = 1000, n_styles: int = 200,
                seed: int = 0, resolution: int = 32, progress: bool = False) -> DatasetSummary:
    """
    Render source sprites and style exemplars with their manifests.

    Args:
        workspace: Run workspace; images go to <workspace>/dataset
        n_identities: Number of source renders
        n_styles: Number of style exemplars
        seed: Dataset seed
        resolution: Image side length

    Returns:
        DatasetSummary
    """
    require(n_identities >= 1 and n_styles >= 1, "dataset needs at least one image of each kind")
    root = Path(workspace) / DATASET_DIR
    try:
        for kind in KINDS:
            (root / kind).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise EnvironmentFailure(f"workspace not writable: {e}")

    source_rng = _rng(seed, "source")
    style_rng = _rng(seed, "style")
    records: Dict[str, List[Dict[str, Any]]] = {"source": [], "style": []}

    try:
        for index in tqdm(range(n_identities), desc="source", disable=not progress):
            theta = IdentityParams.sample(source_rng)
            save_png(render_source(theta, resolution), root / "source" / f"{index:06d}.png")
            records["source"].append({"id": index, "theta": theta.to_dict(),
                                      "seed": seed, "resolution": resolution})

        for index in tqdm(range(n_styles), desc="style", disable=not progress):
            theta = IdentityParams.sample(style_rng)
            psi = StyleParams.sample(style_rng)
            save_png(render_style(theta, psi, resolution), root / "style" / f"{index:06d}.png")
            records["style"].append({"id": index, "theta": theta.to_dict(), "psi": psi.to_dict(),
                                     "seed": seed, "resolution": resolution})

        for kind in KINDS:
            with open(root / f"{kind}.jsonl", 'w', encoding='utf-8') as f:
                for record in records[kind]:
                    f.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError as e:
        raise EnvironmentFailure(f"cannot write dataset to {root}: {e}")

    logger.info("Dataset written to %s: %d source, %d style images at %d×%d",
                root, n_identities, n_styles, resolution, resolution)
    return DatasetSummary(root, n_identities, n_styles, resolution, seed)


def read_manifest(workspace: Path, kind: str) -> List[Dict[str, Any]]:
    if kind not in KINDS:
        raise ContractViolation(f"unknown dataset kind '{kind}'")
    path = Path(workspace) / DATASET_DIR / f"{kind}.jsonl"
    if not path.exists():
        raise EnvironmentFailure(f"dataset manifest not found: {path}; run the dataset command first")
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def rerender(record: Dict[str, Any]) -> torch.Tensor:
    """Render the image a manifest record describes."""
    theta = IdentityParams(**record["theta"])
    if "psi" in record:
        return render_style(theta, StyleParams(**record["psi"]), record["resolution"])
    return render_source(theta, record["resolution"])


def load_images(workspace: Path, kind: str, limit: Optional[int] = None) -> torch.Tensor:
    """Stack the stored PNGs of one kind into (N, 3, R, R)."""
    records = read_manifest(workspace, kind)
    if limit is not None:
        records = records[:limit]
    root = Path(workspace) / DATASET_DIR / kind
    return torch.stack([load_png(root / f"{r['id']:06d}.png") for r in records])
