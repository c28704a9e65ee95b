"""One graph transformer block: edge-aware attention, aggregation and a gated residual."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cxr.config.schema import AttentionScale, EdgeMode
from cxr.errors import ShapeError
from cxr.gtp.graph import BatchGraph
from cxr.gtp.initializers import uniform_fan_in
from cxr.numerics import ParameterStore, Tensor, concat, matmul, ordered_sum, sigmoid, softmax


@dataclass(frozen=True)
class GtpBlockParams:
    """Weights of one block. `w_e` is absent when the network runs without edge features."""

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_r: Tensor
    w_g: Tensor
    w_e: Tensor | None
    heads: int
    scale: AttentionScale = AttentionScale.PER_HEAD

    def __post_init__(self) -> None:
        d_in, d_out = self.w_q.dims
        for name in ("w_k", "w_v", "w_r"):
            if getattr(self, name).dims != (d_in, d_out):
                dims = getattr(self, name).dims
                raise ShapeError(f"{name} must be [{d_in} x {d_out}], got {dims}")
        if self.w_g.dims != (3 * d_out, 1):
            raise ShapeError(f"w_g must be [{3 * d_out} x 1], got {self.w_g.dims}")
        if self.w_e is not None and (self.w_e.ndim != 2 or self.w_e.dims[1] != d_out):
            raise ShapeError(f"w_e must be [d_e x {d_out}], got {self.w_e.dims}")
        if d_out % self.heads != 0:
            raise ShapeError(f"output dim {d_out} not divisible by {self.heads} heads")

    @property
    def d_in(self) -> int:
        return self.w_q.dims[0]

    @property
    def d_out(self) -> int:
        return self.w_q.dims[1]

    @property
    def head_dim(self) -> int:
        return self.d_out // self.heads

    @property
    def score_scale(self) -> float:
        width = self.head_dim if self.scale is AttentionScale.PER_HEAD else self.d_out
        return math.sqrt(width)

    @classmethod
    def from_store(
        cls,
        store: ParameterStore,
        prefix: str,
        heads: int,
        scale: AttentionScale = AttentionScale.PER_HEAD,
    ) -> GtpBlockParams:
        w_e_name = f"{prefix}.w_e"
        return cls(
            w_q=store[f"{prefix}.w_q"],
            w_k=store[f"{prefix}.w_k"],
            w_v=store[f"{prefix}.w_v"],
            w_r=store[f"{prefix}.w_r"],
            w_g=store[f"{prefix}.w_g"],
            w_e=store[w_e_name] if w_e_name in store else None,
            heads=heads,
            scale=scale,
        )


def init_block(
    store: ParameterStore,
    rng: np.random.Generator,
    prefix: str,
    d_in: int,
    d_out: int,
    edge_dim: int | None,
) -> None:
    for name in ("w_q", "w_k", "w_v", "w_r"):
        store.add(f"{prefix}.{name}", uniform_fan_in(rng, (d_in, d_out), d_in))
    store.add(f"{prefix}.w_g", uniform_fan_in(rng, (3 * d_out, 1), 3 * d_out))
    if edge_dim is not None:
        store.add(f"{prefix}.w_e", uniform_fan_in(rng, (edge_dim, d_out), edge_dim))


def _edge_projection(graph: BatchGraph, params: GtpBlockParams) -> Tensor | None:
    """W_e e_ij split into heads: [1, 1, h, dh] for SHARED, [b, b, h, dh] for POSITIONAL."""
    if graph.edge_mode is EdgeMode.NONE or graph.edge_embeddings is None:
        return None
    if params.w_e is None:
        raise ShapeError("graph carries edge embeddings but the block has no w_e")
    h, dh = params.heads, params.head_dim
    e = graph.edge_embeddings
    if graph.edge_mode is EdgeMode.SHARED:
        return matmul(e.reshape(1, e.dims[0]), params.w_e).reshape(1, 1, h, dh)
    b = graph.batch_size
    flat = e.reshape(b * b, e.dims[2])
    return matmul(flat, params.w_e).reshape(b, b, h, dh)


def _node_projection(graph: BatchGraph, weight: Tensor, params: GtpBlockParams) -> Tensor:
    c = graph.node_features
    if c.dims[1] != params.d_in:
        raise ShapeError(f"node features have dim {c.dims[1]}, block expects {params.d_in}")
    return matmul(c, weight)


def attention_coefficients(graph: BatchGraph, params: GtpBlockParams) -> Tensor:
    """alpha[head, i, j]: softmax over j in N(i) of q_i . (k_j + W_e e_ij) / scale."""
    b, h, dh = graph.batch_size, params.heads, params.head_dim
    queries = _node_projection(graph, params.w_q, params).reshape(b, 1, h, dh)
    keys = _node_projection(graph, params.w_k, params).reshape(1, b, h, dh)
    edges = _edge_projection(graph, params)
    if edges is not None:
        keys = keys + edges

    scores = (queries * keys).sum(axis=3) / params.score_scale
    mask = graph.neighbor_mask()[:, :, None]
    alpha = softmax(scores, axis=1, mask=mask, ordered=True)
    return alpha.transpose(2, 0, 1)


def message_aggregate(graph: BatchGraph, alpha: Tensor, params: GtpBlockParams) -> Tensor:
    """c_hat_i = sum over j in N(i) of alpha_ij (W_v c_j + W_e e_ij), heads concatenated."""
    b, h, dh = graph.batch_size, params.heads, params.head_dim
    if alpha.dims != (h, b, b):
        raise ShapeError(f"attention must be [{h}, {b}, {b}], got {alpha.dims}")
    values = _node_projection(graph, params.w_v, params).reshape(1, b, h, dh)
    edges = _edge_projection(graph, params)
    if edges is not None:
        values = values + edges

    weights = alpha.transpose(1, 2, 0).reshape(b, b, h, 1)
    messages = ordered_sum(weights * values, axis=1)
    return messages.reshape(b, params.d_out)


def gate(c: Tensor, c_hat: Tensor, params: GtpBlockParams) -> tuple[Tensor, Tensor]:
    """Residual branch r = W_r c and scalar gate beta = sigmoid(W_g [c_hat; r; c_hat - r])."""
    if c.dims[1] != params.d_in or c_hat.dims != (c.dims[0], params.d_out):
        raise ShapeError(f"gated residual got c {c.dims} and c_hat {c_hat.dims}")
    r = matmul(c, params.w_r)
    beta = sigmoid(matmul(concat([c_hat, r, c_hat - r], axis=1), params.w_g))
    return r, beta


def gated_residual(c: Tensor, c_hat: Tensor, params: GtpBlockParams) -> Tensor:
    r, beta = gate(c, c_hat, params)
    return beta * r + (1.0 - beta) * c_hat


def gtp_block(graph: BatchGraph, params: GtpBlockParams) -> Tensor:
    alpha = attention_coefficients(graph, params)
    c_hat = message_aggregate(graph, alpha, params)
    return gated_residual(graph.node_features, c_hat, params)
