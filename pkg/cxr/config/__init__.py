from cxr.config.loader import (
    load_json_config,
    load_synth_config,
    load_train_config,
    merge_overrides,
    resolve_config_path,
    shipped_config,
)
from cxr.config.schema import (
    AttentionScale,
    EdgeMode,
    EnsembleMethod,
    LossKind,
    Mode,
    ModelConfig,
    RuntimeSettings,
    SynthConfig,
    TrainConfig,
    load_runtime_settings,
    validate_document,
)

__all__ = [
    "AttentionScale",
    "EdgeMode",
    "EnsembleMethod",
    "LossKind",
    "Mode",
    "ModelConfig",
    "RuntimeSettings",
    "SynthConfig",
    "TrainConfig",
    "load_json_config",
    "load_runtime_settings",
    "load_synth_config",
    "load_train_config",
    "merge_overrides",
    "resolve_config_path",
    "shipped_config",
    "validate_document",
]
