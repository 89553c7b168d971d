"""
StyleRecord: one destylized style exemplar and its anchored codes.

Records live under <workspace>/records/<index>.pt and are read by Stage III,
code refinement and sampler training.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import torch

from ..errors import EnvironmentFailure, RefusalError

logger = logging.getLogger(__name__)

RECORDS_DIR = "records"


@dataclass
class StyleRecord:
    """
    Codes are (L, D) z-space tensors; images are (3, R, R).

    z_extrinsic is E(S), z_destylized the optimized code on g′, z_intrinsic
    E(g(z_destylized)). z_refined is set by code refinement.
    """
    index: int
    image: torch.Tensor
    z_extrinsic: torch.Tensor
    z_destylized: torch.Tensor
    z_intrinsic: torch.Tensor
    z_refined: Optional[torch.Tensor] = None
    stage_images: Dict[str, torch.Tensor] = field(default_factory=dict)

    @property
    def extrinsic_code(self) -> torch.Tensor:
        """Refined extrinsic code when available, else E(S)."""
        return self.z_refined if self.z_refined is not None else self.z_extrinsic

    def to_dict(self) -> Dict[str, object]:
        return {
            "index": self.index,
            "image": self.image.detach().cpu(),
            "z_extrinsic": self.z_extrinsic.detach().cpu(),
            "z_destylized": self.z_destylized.detach().cpu(),
            "z_intrinsic": self.z_intrinsic.detach().cpu(),
            "z_refined": None if self.z_refined is None else self.z_refined.detach().cpu(),
            "stage_images": {k: v.detach().cpu() for k, v in self.stage_images.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "StyleRecord":
        return cls(**data)


def record_path(workspace: Path, index: int) -> Path:
    return Path(workspace) / RECORDS_DIR / f"{index:06d}.pt"


def save_records(workspace: Path, records: List[StyleRecord]) -> Path:
    directory = Path(workspace) / RECORDS_DIR
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for record in records:
            torch.save(record.to_dict(), record_path(workspace, record.index))
    except OSError as e:
        raise EnvironmentFailure(f"cannot write style records to {directory}: {e}")
    logger.info("Saved %d style records to %s", len(records), directory)
    return directory


def load_records(workspace: Path, limit: Optional[int] = None) -> List[StyleRecord]:
    """
    Load every stored record, ordered by index.

    Raises:
        RefusalError: if no records exist
    """
    directory = Path(workspace) / RECORDS_DIR
    paths = sorted(directory.glob("*.pt")) if directory.exists() else []
    if not paths:
        raise RefusalError(f"no style records in {directory}; run destylize first")
    if limit is not None:
        paths = paths[:limit]
    records = []
    for path in paths:
        try:
            data = torch.load(path, map_location="cpu", weights_only=False)
        except (OSError, RuntimeError) as e:
            raise EnvironmentFailure(f"cannot read style record {path}: {e}")
        records.append(StyleRecord.from_dict(data))
    return records
