"""Named, ordered collection of trainable tensors."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from cxr.errors import ConfigurationError
from cxr.numerics.tensor import ArrayLike, Tensor


class ParameterStore:
    """Insertion-ordered map from parameter name to a gradient-tracking `Tensor`."""

    def __init__(self) -> None:
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, values: ArrayLike) -> Tensor:
        if name in self._entries:
            raise ConfigurationError(f"Duplicate parameter name '{name}'.")
        tensor = Tensor(np.array(values, dtype=np.float64), requires_grad=True)
        self._entries[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._entries.items())

    def names(self) -> list[str]:
        return list(self._entries)

    def num_scalars(self) -> int:
        return sum(t.values.size for t in self._entries.values())

    def zero_grads(self) -> None:
        for tensor in self._entries.values():
            tensor.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self._entries.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; names and shapes must match exactly."""
        missing = sorted(set(self._entries) - set(values))
        unknown = sorted(set(values) - set(self._entries))
        if missing or unknown:
            raise ConfigurationError(
                f"Parameter names differ: missing={missing} unexpected={unknown}"
            )
        for name, tensor in self._entries.items():
            incoming = np.asarray(values[name], dtype=np.float64)
            if incoming.shape != tensor.dims:
                raise ConfigurationError(
                    f"Parameter '{name}' expects dims {tensor.dims}, got {incoming.shape}"
                )
            tensor.values[...] = incoming
