"""Graph Transformer Post-hoc network built on the numerics layer."""

from cxr.gtp.attention import (
    GtpBlockParams,
    attention_coefficients,
    gated_residual,
    gtp_block,
    message_aggregate,
)
from cxr.gtp.encoder import cnn_encode
from cxr.gtp.graph import BatchGraph, build_batch_graph
from cxr.gtp.head import BatchNormState, HeadParams, batch_norm, project_normalize
from cxr.gtp.network import GtpNetwork, build_network, forward_network, predict_proba

__all__ = [
    "BatchGraph",
    "BatchNormState",
    "GtpBlockParams",
    "GtpNetwork",
    "HeadParams",
    "attention_coefficients",
    "batch_norm",
    "build_batch_graph",
    "build_network",
    "cnn_encode",
    "forward_network",
    "gated_residual",
    "gtp_block",
    "message_aggregate",
    "predict_proba",
    "project_normalize",
]
