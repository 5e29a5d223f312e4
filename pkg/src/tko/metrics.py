"""Compression and information-loss metrics.

Sizes reduce to a ratio (percent saved) and a factor (original over
compressed).  Geometry loss is reported as per-vertex Euclidean
distances between corresponding vertices (full set, and endpoints
only), attribute loss as per-element absolute differences, and overall
spatial agreement as the Bhattacharyya overlap score: the mean over
x/y/z of the Bhattacharyya coefficient between the coordinate marginal
histograms of the two tractograms (1 = perfect overlap, 0 = disjoint).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTractogram,
    FieldMismatch,
    StreamlineCountMismatch,
    TopologyMismatch,
    ZeroCompressedSize,
    ZeroOriginalSize,
)
from .model import Tractogram

DEFAULT_BINS = 128


@dataclass(frozen=True)
class ErrorStats:
    """min/max/mean/std over a sequence of nonnegative per-element errors."""

    min: float
    max: float
    mean: float
    std: float

    @classmethod
    def of(cls, errors) -> "ErrorStats":
        e = np.asarray(errors, dtype=np.float64)
        if e.size == 0:
            return cls(0.0, 0.0, 0.0, 0.0)
        return cls(float(e.min()), float(e.max()), float(e.mean()), float(e.std()))

    def to_dict(self):
        return {"min": self.min, "max": self.max, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        return cls(min=d["min"], max=d["max"], mean=d["mean"], std=d["std"])


@dataclass(frozen=True)
class ComparisonReport:
    original_size: int
    compressed_size: int
    ratio: float
    factor: float
    vertex_errors: ErrorStats
    endpoint_errors: ErrorStats
    attribute_errors: dict[str, ErrorStats] = field(default_factory=dict)
    bhattacharyya: float = 1.0
    encode_ms: float | None = None
    decode_ms: float | None = None

    def to_dict(self):
        return {
            "original_size": self.original_size,
            "compressed_size": self.compressed_size,
            "ratio": self.ratio,
            "factor": self.factor,
            "vertex_errors": self.vertex_errors.to_dict(),
            "endpoint_errors": self.endpoint_errors.to_dict(),
            "attribute_errors": {k: v.to_dict() for k, v in self.attribute_errors.items()},
            "bhattacharyya": self.bhattacharyya,
            "encode_ms": self.encode_ms,
            "decode_ms": self.decode_ms,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            original_size=d["original_size"],
            compressed_size=d["compressed_size"],
            ratio=d["ratio"],
            factor=d["factor"],
            vertex_errors=ErrorStats.from_dict(d["vertex_errors"]),
            endpoint_errors=ErrorStats.from_dict(d["endpoint_errors"]),
            attribute_errors={
                k: ErrorStats.from_dict(v) for k, v in d["attribute_errors"].items()
            },
            bhattacharyya=d["bhattacharyya"],
            encode_ms=d["encode_ms"],
            decode_ms=d["decode_ms"],
        )


def compression_ratio(original_size, compressed_size) -> float:
    """Percent saved: 100 * (1 - compressed/original)."""
    if original_size <= 0:
        raise ZeroOriginalSize("original size must be positive")
    return 100.0 * (1.0 - compressed_size / original_size)


def compression_factor(original_size, compressed_size) -> float:
    """Size multiple: original / compressed."""
    if compressed_size <= 0:
        raise ZeroCompressedSize("compressed size must be positive")
    return original_size / compressed_size


def _check_topology(orig: Tractogram, restored: Tractogram):
    if not np.array_equal(orig.offsets, restored.offsets):
        raise TopologyMismatch(
            f"offsets differ: {orig.streamline_count} streamlines /"
            f" {orig.vertex_count} vertices vs {restored.streamline_count} /"
            f" {restored.vertex_count}"
        )


def pointwise_errors(orig: Tractogram, restored: Tractogram) -> ErrorStats:
    """Euclidean distance between corresponding vertices, over all vertices."""
    _check_topology(orig, restored)
    d = np.linalg.norm(orig.vertices - restored.vertices, axis=1)
    return ErrorStats.of(d)


def pointwise_error_sum(orig: Tractogram, restored: Tractogram) -> float:
    """Sum of all per-vertex Euclidean distances (the raw aggregate form)."""
    _check_topology(orig, restored)
    return float(np.linalg.norm(orig.vertices - restored.vertices, axis=1).sum())


def _endpoint_indices(t: Tractogram) -> np.ndarray:
    starts = t.offsets[:-1]
    ends = t.offsets[1:] - 1
    # a length-1 streamline contributes a single endpoint
    return np.concatenate([starts, ends[ends > starts]])


def endpoint_errors(orig: Tractogram, restored: Tractogram) -> ErrorStats:
    """Euclidean errors measured only at each streamline's first/last vertex."""
    if orig.streamline_count != restored.streamline_count:
        raise StreamlineCountMismatch(
            f"{orig.streamline_count} vs {restored.streamline_count} streamlines"
        )
    _check_topology(orig, restored)
    idx = _endpoint_indices(orig)
    d = np.linalg.norm(orig.vertices[idx] - restored.vertices[idx], axis=1)
    return ErrorStats.of(d)


def attribute_errors(orig: Tractogram, restored: Tractogram) -> dict[str, ErrorStats]:
    """Per-element absolute differences, one ErrorStats per named field."""
    out = {}
    for kind, a, b in (
        ("scalar", orig.vertex_scalars, restored.vertex_scalars),
        ("property", orig.fiber_properties, restored.fiber_properties),
    ):
        if list(a) != list(b):
            raise FieldMismatch(f"{kind} field names differ: {list(a)} vs {list(b)}")
        for name, fa in a.items():
            fb = b[name]
            if fa.dims != fb.dims or len(fa.values) != len(fb.values):
                raise FieldMismatch(f"{kind} field {name!r}: dims/length differ")
            key = name if name not in out else f"{name} ({kind})"
            out[key] = ErrorStats.of(np.abs(fa.values - fb.values))
    return out


def bhattacharyya_overlap(orig: Tractogram, restored: Tractogram, bins: int = DEFAULT_BINS) -> float:
    """Mean over x/y/z of the Bhattacharyya coefficient between the two
    vertex-coordinate marginals, histogrammed over the union range."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if orig.vertex_count == 0 or restored.vertex_count == 0:
        raise EmptyTractogram("both tractograms must contain vertices")
    coeffs = []
    for axis in range(3):
        a = orig.vertices[:, axis]
        b = restored.vertices[:, axis]
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if lo == hi:
            coeffs.append(1.0)  # all mass of both in one degenerate bin
            continue
        pa, _ = np.histogram(a, bins=bins, range=(lo, hi))
        pb, _ = np.histogram(b, bins=bins, range=(lo, hi))
        p = pa / pa.sum()
        q = pb / pb.sum()
        coeffs.append(float(np.sqrt(p * q).sum()))
    return float(np.mean(coeffs))


def compare(
    orig: Tractogram,
    restored: Tractogram,
    original_size: int,
    compressed_size: int,
    bins: int = DEFAULT_BINS,
    encode_ms: float | None = None,
    decode_ms: float | None = None,
) -> ComparisonReport:
    """Assemble the full comparison report for two parsed tractograms."""
    return ComparisonReport(
        original_size=int(original_size),
        compressed_size=int(compressed_size),
        ratio=compression_ratio(original_size, compressed_size),
        factor=compression_factor(original_size, compressed_size),
        vertex_errors=pointwise_errors(orig, restored),
        endpoint_errors=endpoint_errors(orig, restored),
        attribute_errors=attribute_errors(orig, restored),
        bhattacharyya=bhattacharyya_overlap(orig, restored, bins=bins),
        encode_ms=encode_ms,
        decode_ms=decode_ms,
    )
