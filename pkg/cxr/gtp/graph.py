"""Complete batch graph over node feature vectors."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from cxr.config.schema import EdgeMode
from cxr.errors import ConfigurationError, ShapeError
from cxr.numerics import Tensor, crop


@dataclass(frozen=True)
class BatchGraph:
    """Nodes are the b rows of `node_features`; N(i) is every node except i."""

    node_features: Tensor
    edge_mode: EdgeMode
    edge_embeddings: Tensor | None = None

    @property
    def batch_size(self) -> int:
        return self.node_features.dims[0]

    @property
    def num_edges(self) -> int:
        b = self.batch_size
        return b * (b - 1)

    def neighbors(self, node: int) -> list[int]:
        return [j for j in range(self.batch_size) if j != node]

    def edges(self) -> list[tuple[int, int]]:
        return list(permutations(range(self.batch_size), 2))

    def neighbor_mask(self) -> np.ndarray:
        return ~np.eye(self.batch_size, dtype=bool)

    def edge_embedding(self, source: int, target: int) -> np.ndarray:
        """Raw e_ij for one directed edge (zeros when the graph carries no edge features)."""
        if source == target:
            raise ConfigurationError("The batch graph has no self-loops.")
        if self.edge_embeddings is None:
            return np.zeros(0)
        if self.edge_mode is EdgeMode.SHARED:
            return self.edge_embeddings.values.copy()
        return self.edge_embeddings.values[source, target].copy()


def build_batch_graph(
    features: Tensor,
    edge_mode: EdgeMode,
    edge_embeddings: Tensor | None = None,
) -> BatchGraph:
    """Wrap one batch of features as a complete digraph without self-loops.

    SHARED expects a single [d_e] vector used by every edge. POSITIONAL expects a
    [b_max, b_max, d_e] table and uses its leading b x b block; NONE ignores embeddings.
    """
    if features.ndim != 2 or features.dims[0] < 1:
        raise ShapeError(f"batch graph needs features [b >= 1, d], got {features.dims}")
    b = features.dims[0]

    if edge_mode is EdgeMode.NONE:
        return BatchGraph(features, edge_mode, None)

    if edge_embeddings is None:
        raise ConfigurationError(f"edge mode '{edge_mode.value}' requires edge embeddings")

    if edge_mode is EdgeMode.SHARED:
        if edge_embeddings.ndim != 1:
            raise ShapeError(f"shared edge embedding must be [d_e], got {edge_embeddings.dims}")
        return BatchGraph(features, edge_mode, edge_embeddings)

    if edge_embeddings.ndim != 3 or edge_embeddings.dims[0] != edge_embeddings.dims[1]:
        raise ShapeError(
            f"positional edge table must be [b_max, b_max, d_e], got {edge_embeddings.dims}"
        )
    max_batch = edge_embeddings.dims[0]
    if b > max_batch:
        raise ConfigurationError(
            f"positional edges support batches up to b_max={max_batch}, got b={b}"
        )
    table = edge_embeddings if b == max_batch else crop(edge_embeddings, b, b)
    return BatchGraph(features, edge_mode, table)
