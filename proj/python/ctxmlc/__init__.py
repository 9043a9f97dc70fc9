"""Python interface to the ctxmlc multi-label classifier."""

from ._ctxmlc import (
    ConfigError,
    Error,
    NumericalError,
    ParseError,
    Dataset,
    Model,
    asl,
    bce,
    binarize,
    ebf1,
    fit,
    grad_check,
    inject_noise,
    load_dataset,
    maf1,
    mif1,
    parse_dataset,
    write_dataset,
)

__all__ = [
    "ConfigError",
    "Error",
    "NumericalError",
    "ParseError",
    "Dataset",
    "Model",
    "asl",
    "bce",
    "binarize",
    "ebf1",
    "fit",
    "grad_check",
    "inject_noise",
    "load_dataset",
    "maf1",
    "mif1",
    "parse_dataset",
    "write_dataset",
]
