"""
Codec Module - Encoder
Run-length encoding of weight vectors and checkpoint archive writing.

Key formats:
1. Run-length weight strings: "7*0.75,11*1.0" (count*value, comma separated)
2. Checkpoint archives: one torch archive holding namespaced tensors plus a
   JSON-compatible metadata block (format version, GeneratorConfig, seed,
   stage markers)
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import torch

from ..errors import EnvironmentFailure
from ..numerics.store import ParameterStore

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class RunLengthEncoder:
    """
    Run-Length Encoding: compresses consecutive repeated weights.

    Example:
        [0.75, 0.75, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0]
        -> [(0.75, 3), (1.0, 5)]
        -> "3*0.75,5*1.0"
    """

    @staticmethod
    def encode(values: Sequence[float]) -> List[Tuple[float, int]]:
        """
        Encode a list using Run-Length Encoding.

        Args:
            values: Sequence of weights

        Returns:
            List of (value, count) tuples
        """
        if not values:
            return []

        encoded = []
        current_value = float(values[0])
        count = 1

        for value in values[1:]:
            if float(value) == current_value:
                count += 1
            else:
                encoded.append((current_value, count))
                current_value = float(value)
                count = 1

        encoded.append((current_value, count))
        return encoded

    @staticmethod
    def encode_to_string(values: Sequence[float]) -> str:
        """Encode to the compact "count*value" notation accepted by --w."""
        return ",".join(f"{count}*{value:g}" for value, count in RunLengthEncoder.encode(values))


class CheckpointWriter:
    """
    Writes ParameterStores into versioned checkpoint archives.

    Archive layout:
        {"metadata": {"format_version", "namespaces", "markers", ...},
         "tensors": {"generator/const": tensor, "extrinsic/...": tensor, ...}}
    A JSON copy of the metadata is written next to the archive for inspection.
    """

    def __init__(self, path: Path):
        self.path = Path(path)

    def write(self, store: ParameterStore, metadata: Dict[str, Any]) -> Path:
        """
        Save tensors and metadata.

        Args:
            store: Namespaced tensors (float32 unless the caller chose otherwise)
            metadata: Extra manifest entries (generator config, seed, markers)

        Returns:
            Path of the archive
        """
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise EnvironmentFailure(f"cannot create checkpoint directory: {e}")

        header = {
            "format_version": FORMAT_VERSION,
            "namespaces": store.namespaces(),
            "markers": [],
        }
        header.update(metadata)

        archive = {
            "metadata": header,
            "tensors": {name: tensor.detach().cpu().contiguous() for name, tensor in store.items()},
        }
        try:
            torch.save(archive, self.path)
            with open(self.path.with_suffix(".json"), 'w', encoding='utf-8') as f:
                json.dump(header, f, indent=2, sort_keys=True, default=str)
        except OSError as e:
            raise EnvironmentFailure(f"cannot write checkpoint {self.path}: {e}")

        logger.info("Checkpoint written: %s (%d tensors, namespaces %s)",
                    self.path, len(store), header["namespaces"])
        return self.path
