"""Python bindings for the fkmad anomaly detector."""

from ._core import (
    ConfigError,
    ContractError,
    DataError,
    Error,
    NumericError,
    ShapeError,
    default_config,
    energy,
    evaluate,
    hfr,
    locality,
    percentile,
    run_cli,
    similarity_matrix,
    synth_benchmark,
    verify,
    zscore_scores,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "Error",
    "NumericError",
    "ShapeError",
    "default_config",
    "energy",
    "evaluate",
    "hfr",
    "locality",
    "percentile",
    "run_cli",
    "similarity_matrix",
    "synth_benchmark",
    "verify",
    "zscore_scores",
]
