"""Deep Transformer laboratory: depth-scaled initialization, merged attention
and gradient-flow probes on a small C++ core."""

from ._deepnmt import (
    ConfigError,
    DimensionError,
    Model,
    ParameterError,
    UnsupportedLayoutError,
    average_mask,
    ds_init_bound,
    glorot_bound,
    layer_norm,
    length_penalty,
    lr_schedule,
    max_decode_length,
    positional_encoding,
    run_cli,
    sample_weights,
    softmax,
    train,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "Model",
    "ParameterError",
    "UnsupportedLayoutError",
    "average_mask",
    "ds_init_bound",
    "glorot_bound",
    "layer_norm",
    "length_penalty",
    "lr_schedule",
    "max_decode_length",
    "positional_encoding",
    "run_cli",
    "sample_weights",
    "softmax",
    "train",
]
