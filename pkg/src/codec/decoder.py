"""
Codec Module - Decoder
Reverse operations for run-length weight strings and checkpoint archives.
Supports selective loading of one namespace from an archive.
"""

import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import torch

from ..errors import ContractViolation, EnvironmentFailure
from ..numerics.store import ParameterStore
from .encoder import FORMAT_VERSION

logger = logging.getLogger(__name__)

_RUN = re.compile(r"^\s*(?:(\d+)\s*\*\s*)?([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*$")


class RunLengthDecoder:
    """
    Decodes run-length weights back to a flat sequence.

    Example:
        "3*0.75,5*1.0" -> [(0.75, 3), (1.0, 5)]
        -> [0.75, 0.75, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0]

    A bare value counts once: "0,0,1" -> [0.0, 0.0, 1.0].
    """

    @staticmethod
    def decode(encoded: List[Tuple[float, int]]) -> List[float]:
        """
        Fully decode RLE data.

        Args:
            encoded: List of (value, count) tuples or [value, count] lists

        Returns:
            Expanded list of values

        Raises:
            ContractViolation: on items that are not (value, count) pairs with count ≥ 1
        """
        decoded = []
        for item in encoded:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ContractViolation(f"run-length item must be (value, count), got {item!r}")
            value, count = item
            try:
                value, count = float(value), int(count)
            except (TypeError, ValueError):
                raise ContractViolation(f"run-length item {item!r} is not numeric")
            if count < 1:
                raise ContractViolation(f"run count must be ≥ 1, got {item!r}")
            decoded.extend([value] * count)
        return decoded

    @staticmethod
    def parse(text: str) -> List[Tuple[float, int]]:
        """
        Parse the "count*value" notation.

        Raises:
            ContractViolation: on malformed runs or zero counts
        """
        if not text or not text.strip():
            raise ContractViolation("empty weight string")
        runs = []
        for chunk in text.split(","):
            match = _RUN.match(chunk)
            if not match:
                raise ContractViolation(f"malformed weight run '{chunk.strip()}' in '{text}'")
            count = int(match.group(1)) if match.group(1) else 1
            if count < 1:
                raise ContractViolation(f"run count must be ≥ 1 in '{chunk.strip()}'")
            runs.append((float(match.group(2)), count))
        return runs

    @staticmethod
    def decode_string(text: str) -> List[float]:
        return RunLengthDecoder.decode(RunLengthDecoder.parse(text))


class CheckpointReader:
    """
    Loads checkpoint archives on demand and caches them.

    Example:
        reader = CheckpointReader(workspace / "checkpoints" / "stage2.pt")
        reader.has_marker("stage2_complete")
        reader.store("extrinsic")  -> ParameterStore with prefix stripped
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self._archive: Optional[Dict[str, Any]] = None

    def _load(self) -> Dict[str, Any]:
        if self._archive is None:
            if not self.path.exists():
                raise EnvironmentFailure(f"checkpoint not found: {self.path}")
            try:
                self._archive = torch.load(self.path, map_location="cpu", weights_only=False)
            except (OSError, RuntimeError) as e:
                raise EnvironmentFailure(f"cannot read checkpoint {self.path}: {e}")
            version = self._archive.get("metadata", {}).get("format_version")
            if version != FORMAT_VERSION:
                raise ContractViolation(
                    f"checkpoint {self.path} has format version {version}, expected {FORMAT_VERSION}")
        return self._archive

    @property
    def metadata(self) -> Dict[str, Any]:
        return self._load()["metadata"]

    def has_marker(self, marker: str) -> bool:
        return marker in self.metadata.get("markers", [])

    def store(self, namespace: str = "") -> ParameterStore:
        """All tensors, or only those under one namespace (prefix stripped)."""
        full = ParameterStore(self._load()["tensors"])
        return full.subset(namespace) if namespace else full

    def has_namespace(self, namespace: str) -> bool:
        return namespace in self.metadata.get("namespaces", [])
