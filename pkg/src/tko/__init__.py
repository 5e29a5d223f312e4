"""tko: compressed tractography containers.

Parse TCK/TRK/VTK streamline files, compress geometry and attached
attributes with a bounded-loss codec into glTF-2.0 ``.tko`` containers
(JSON or GLB), restore them, and quantify compression and information
loss.  See the trakofy/untrakofy/tkompare command-line tools.
"""

from . import codec, container, errors, io_formats, metrics, model
from .codec import CodecConfig, CompressedAttribute, QuantizationParams
from .container import (
    TrakoDocument,
    build_document,
    parse_document,
    read_tko_binary,
    read_tko_json,
    write_tko_binary,
    write_tko_json,
)
from .generate import generate_tractogram
from .io_formats import FormatTag, detect_format, read_file, write_file
from .metrics import (
    ComparisonReport,
    ErrorStats,
    bhattacharyya_overlap,
    compare,
    compression_factor,
    compression_ratio,
)
from .model import PropertyField, ScalarField, SummaryStats, Tractogram, stats, validate

__version__ = "0.1.0"

__all__ = [
    "CodecConfig",
    "ComparisonReport",
    "CompressedAttribute",
    "ErrorStats",
    "FormatTag",
    "PropertyField",
    "QuantizationParams",
    "ScalarField",
    "SummaryStats",
    "Tractogram",
    "TrakoDocument",
    "bhattacharyya_overlap",
    "build_document",
    "codec",
    "compare",
    "compression_factor",
    "compression_ratio",
    "container",
    "detect_format",
    "errors",
    "generate_tractogram",
    "io_formats",
    "metrics",
    "model",
    "parse_document",
    "read_file",
    "read_tko_binary",
    "read_tko_json",
    "stats",
    "validate",
    "write_file",
    "write_tko_binary",
    "write_tko_json",
    "__version__",
]
