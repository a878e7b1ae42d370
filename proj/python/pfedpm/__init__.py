from ._pfedpm import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    NumericError,
    ProtocolError,
    aggregate_global,
    load_mnist_idx,
    mix_prototypes,
    partition_label_skew,
    preset_config,
    preset_names,
    replay,
    resolve_config,
    run_experiment,
    synth_blobs,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "FormatError",
    "NumericError",
    "ProtocolError",
    "aggregate_global",
    "load_mnist_idx",
    "mix_prototypes",
    "partition_label_skew",
    "preset_config",
    "preset_names",
    "replay",
    "resolve_config",
    "run_experiment",
    "synth_blobs",
]
