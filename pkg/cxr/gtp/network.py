"""Full classifier: encoder, graph transformer blocks, projection head, linear classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from loguru import logger

from cxr import NUM_CLASSES
from cxr.config.schema import EdgeMode, Mode, ModelConfig
from cxr.errors import ShapeError
from cxr.gtp.attention import GtpBlockParams, gtp_block, init_block
from cxr.gtp.encoder import PREFIX as ENCODER_PREFIX
from cxr.gtp.encoder import cnn_encode, init_encoder
from cxr.gtp.graph import build_batch_graph
from cxr.gtp.head import BatchNormState, HeadParams, project_normalize
from cxr.gtp.initializers import uniform_fan_in
from cxr.numerics import ParameterStore, Tensor, linear, relu, softmax
from cxr.seeding import Stream, derive_rng

EDGE_PARAM = "edges.embedding"


@dataclass
class GtpNetwork:
    """Parameters plus the BatchNorm running statistics of one model."""

    config: ModelConfig
    params: ParameterStore
    batch_norm: BatchNormState

    def blocks(self) -> list[GtpBlockParams]:
        return [
            GtpBlockParams.from_store(
                self.params, f"block{i}", self.config.heads, self.config.attention_scale
            )
            for i in range(1, self.config.num_blocks + 1)
        ]

    def head(self) -> HeadParams:
        return HeadParams(
            weight=self.params["head.weight"],
            bias=self.params["head.bias"],
            gamma=self.params["head.bn_gamma"],
            beta=self.params["head.bn_beta"],
        )

    def edge_embeddings(self) -> Tensor | None:
        return self.params[EDGE_PARAM] if EDGE_PARAM in self.params else None

    def encoder_parameter_names(self) -> list[str]:
        return [name for name in self.params if name.startswith(f"{ENCODER_PREFIX}.")]

    def frozen_parameter_names(self) -> frozenset[str]:
        if not self.config.freeze_encoder:
            return frozenset()
        return frozenset(self.encoder_parameter_names())


def build_network(config: ModelConfig, seed: int) -> GtpNetwork:
    """Initialise every parameter from a generator seeded by `seed`, in a fixed order."""
    rng = derive_rng(seed, Stream.INIT)
    store = ParameterStore()
    init_encoder(store, rng, config.encoder_channels, config.feature_dim)

    classifier_in = config.feature_dim
    if config.use_gtp:
        edge_dim = None if config.edge_mode is EdgeMode.NONE else config.edge_dim
        if config.edge_mode is EdgeMode.SHARED:
            store.add(EDGE_PARAM, np.zeros(config.edge_dim))
        elif config.edge_mode is EdgeMode.POSITIONAL:
            store.add(EDGE_PARAM, np.zeros((config.max_batch, config.max_batch, config.edge_dim)))

        d_in = config.feature_dim
        for i in range(1, config.num_blocks + 1):
            init_block(store, rng, f"block{i}", d_in, config.hidden_dim, edge_dim)
            d_in = config.hidden_dim

        d = config.hidden_dim
        store.add("head.weight", uniform_fan_in(rng, (d, d), d))
        store.add("head.bias", np.zeros(d))
        store.add("head.bn_gamma", np.ones(d))
        store.add("head.bn_beta", np.zeros(d))
        classifier_in = d

    store.add(
        "classifier.weight",
        uniform_fan_in(rng, (classifier_in, NUM_CLASSES), classifier_in),
    )
    store.add("classifier.bias", np.zeros(NUM_CLASSES))

    width = config.hidden_dim if config.use_gtp else 0
    state = BatchNormState.neutral(width, momentum=config.bn_momentum, epsilon=config.bn_epsilon)
    logger.debug(
        "Built network: {} tensors, {} scalars, gtp={}",
        len(store),
        store.num_scalars(),
        config.use_gtp,
    )
    return GtpNetwork(config=config, params=store, batch_norm=state)


def refine_features(features: Tensor, net: GtpNetwork) -> Tensor:
    """Run the stacked blocks over the batch graph, ReLU between blocks but not after the last."""
    edges = net.edge_embeddings()
    blocks = net.blocks()
    c = features
    for index, params in enumerate(blocks):
        graph = build_batch_graph(c, net.config.edge_mode, edges)
        c = gtp_block(graph, params)
        if index < len(blocks) - 1:
            c = relu(c)
    return c


def forward_network(images: Tensor, net: GtpNetwork, mode: Mode) -> Tensor:
    """Logits [b, 4] for a batch of images [b, 3, H, W]."""
    features = cnn_encode(images, net.params)
    if net.config.use_gtp:
        refined = refine_features(features, net)
        features = project_normalize(refined, net.head(), net.batch_norm, mode)
    logits = linear(features, net.params["classifier.weight"], net.params["classifier.bias"])
    if logits.dims[1] != NUM_CLASSES:
        raise ShapeError(f"classifier produced {logits.dims[1]} outputs, expected {NUM_CLASSES}")
    return logits


def predict_proba(images: Tensor, net: GtpNetwork, mode: Mode = Mode.EVAL) -> np.ndarray:
    """Class probabilities as a plain array; no gradients are kept."""
    logits = forward_network(images, net, mode)
    return softmax(logits.detach(), axis=1).values
