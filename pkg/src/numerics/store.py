"""
Parameter Store
Named, shaped parameter arrays for any network, grouped by namespace
("generator/", "extrinsic/", "encoder/", ...) so that several networks can
share one checkpoint archive.
"""

import hashlib
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import torch
from torch import nn

from ..errors import ContractViolation


class ParameterStore:
    """
    Ordered mapping of parameter names to tensors.

    Example:
        store = ParameterStore.from_module(generator, "generator")
        store["generator/const"]  -> tensor of shape (C, 4, 4)
    """

    def __init__(self, tensors: Optional[Dict[str, torch.Tensor]] = None):
        self._tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        for name, tensor in (tensors or {}).items():
            self[name] = tensor

    @classmethod
    def from_module(cls, module: nn.Module, namespace: str = "") -> "ParameterStore":
        """Snapshot a module's state dict (parameters and buffers) under a namespace."""
        prefix = f"{namespace}/" if namespace else ""
        return cls({prefix + k: v.detach().clone() for k, v in module.state_dict().items()})

    def load_into(self, module: nn.Module, namespace: str = ""):
        """Copy this store's tensors under `namespace` into a module."""
        sub = self.subset(namespace) if namespace else self
        missing = set(module.state_dict().keys()) - set(sub.keys())
        if missing:
            raise ContractViolation(
                f"checkpoint namespace '{namespace}' lacks {sorted(missing)[:5]}")
        module.load_state_dict(OrderedDict(sub.items()), strict=True)

    def subset(self, namespace: str) -> "ParameterStore":
        """Tensors under a namespace, with the namespace prefix stripped."""
        prefix = f"{namespace}/"
        return ParameterStore({k[len(prefix):]: v for k, v in self._tensors.items()
                               if k.startswith(prefix)})

    def namespaces(self) -> List[str]:
        return sorted({k.split("/", 1)[0] for k in self._tensors if "/" in k})

    def update(self, other: "ParameterStore") -> "ParameterStore":
        for name, tensor in other.items():
            self[name] = tensor
        return self

    def digest(self, namespace: str = "") -> str:
        """sha256 over names, shapes and raw bytes; used for frozen-weight checks."""
        sha = hashlib.sha256()
        source = self.subset(namespace) if namespace else self
        for name, tensor in source.items():
            sha.update(name.encode("utf-8"))
            sha.update(str(tuple(tensor.shape)).encode("utf-8"))
            sha.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        return sha.hexdigest()

    def to(self, dtype: torch.dtype) -> "ParameterStore":
        return ParameterStore({k: v.to(dtype) for k, v in self._tensors.items()})

    def numel(self) -> int:
        return sum(v.numel() for v in self._tensors.values())

    def keys(self) -> List[str]:
        return list(self._tensors.keys())

    def items(self) -> Iterator[Tuple[str, torch.Tensor]]:
        return iter(self._tensors.items())

    def __getitem__(self, name: str) -> torch.Tensor:
        return self._tensors[name]

    def __setitem__(self, name: str, tensor: torch.Tensor):
        if not isinstance(tensor, torch.Tensor):
            tensor = torch.as_tensor(tensor)
        self._tensors[name] = tensor

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterStore) or self.keys() != other.keys():
            return False
        return all(torch.equal(self[k], other[k]) for k in self.keys())


def module_digest(module: nn.Module) -> str:
    """Shortcut for ParameterStore.from_module(module).digest()."""
    return ParameterStore.from_module(module).digest()
