"""Bounded-loss attribute codec.

Float attributes run quantize -> delta -> zigzag -> varint -> deflate;
integer-typed attributes default to a lossless path that skips
quantization.  Streamline offsets are always coded losslessly.  Every
stage is invertible and the stage list actually applied is recorded
next to the payload, so decoding is driven entirely by recorded state.

Payload format (normative): an optional raw-DEFLATE (RFC 1951) wrapper;
inside, minimal-length LEB128 varints, one per component, elements in
original order with components interleaved within each element.

The per-component quantization error is bounded by half a step:
|restored - original| <= (max_c - min_c) / (2 * (2**bits - 1)).
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptStream,
    LengthMismatch,
    NonFiniteInput,
    OutOfRangeCode,
    OverlongVarint,
    TruncatedVarint,
)
from .model import INTEGER_TYPES

MIN_BITS = 1
MAX_BITS = 31
MAX_COMPRESSION_LEVEL = 10

STAGE_QUANTIZE = "quantize"
STAGE_DELTA = "delta"
STAGE_ZIGZAG = "zigzag"
STAGE_VARINT = "varint"
STAGE_DEFLATE = "deflate"

#: Stages must appear in this order (each one optional except varint).
_STAGE_ORDER = (STAGE_QUANTIZE, STAGE_DELTA, STAGE_ZIGZAG, STAGE_VARINT, STAGE_DEFLATE)


@dataclass(frozen=True)
class QuantizationParams:
    """Quantization grid for one attribute: bits plus per-component range."""

    bits: int
    min_values: tuple[float, ...]
    max_values: tuple[float, ...]
    components: int
    count: int

    def __post_init__(self):
        if not MIN_BITS <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {self.bits}")
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if self.count < 0:
            raise ValueError("count must be >= 0")
        object.__setattr__(self, "min_values", tuple(float(v) for v in self.min_values))
        object.__setattr__(self, "max_values", tuple(float(v) for v in self.max_values))
        if len(self.min_values) != self.components or len(self.max_values) != self.components:
            raise ValueError("min_values/max_values must have one entry per component")
        for lo, hi in zip(self.min_values, self.max_values):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"component range [{lo}, {hi}] is not a finite ordered pair")

    @property
    def levels(self):
        return (1 << self.bits) - 1


@dataclass(frozen=True)
class CodecConfig:
    """User-facing knobs: quantization bits and speed/size trade-off."""

    bits: int = 14
    compression_level: int = 10
    prediction: str = "delta"
    lossless_integers: bool = True

    def __post_init__(self):
        if not MIN_BITS <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {self.bits}")
        if not 0 <= self.compression_level <= MAX_COMPRESSION_LEVEL:
            raise ValueError(
                f"compression_level must be in [0, {MAX_COMPRESSION_LEVEL}],"
                f" got {self.compression_level}"
            )
        if self.prediction not in ("delta", "none"):
            raise ValueError(f"prediction must be 'delta' or 'none', got {self.prediction!r}")


@dataclass(frozen=True)
class CompressedAttribute:
    """Encoded payload plus everything needed to invert it."""

    payload: bytes
    params: QuantizationParams
    stages: tuple[str, ...] = field(default=())
    declared_type: str = "float32"


def quantize(values, params: QuantizationParams) -> np.ndarray:
    """Map floats onto the integer grid [0, 2**bits - 1], per component.

    Ties round half away from zero; results are clamped to the grid.  A
    degenerate component range (max == min) maps everything to code 0.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size and not np.isfinite(v).all():
        raise NonFiniteInput("cannot quantize non-finite values")
    v = v.reshape(-1, params.components)
    mins = np.asarray(params.min_values)
    span = np.asarray(params.max_values) - mins
    safe = np.where(span > 0, span, 1.0)
    scale = np.where(span > 0, params.levels / safe, 0.0)
    x = (v - mins) * scale
    q = np.copysign(np.floor(np.abs(x) + 0.5), x)  # ties away from zero
    return np.clip(q, 0, params.levels).astype(np.uint32).ravel()


def dequantize(codes, params: QuantizationParams) -> np.ndarray:
    """Inverse of :func:`quantize`: grid code -> reconstruction value."""
    q = np.asarray(codes)
    if q.size and (q.min() < 0 or q.max() > params.levels):
        raise OutOfRangeCode(f"code outside [0, {params.levels}]")
    mins = np.asarray(params.min_values)
    step = (np.asarray(params.max_values) - mins) / params.levels
    v = mins + q.reshape(-1, params.components).astype(np.float64) * step
    return v.ravel()


def delta_encode(values, components: int = 1) -> np.ndarray:
    """First element verbatim, then per-component differences."""
    a = np.asarray(values, dtype=np.int64).reshape(-1, components)
    out = np.empty_like(a)
    if len(a):
        out[0] = a[0]
        np.subtract(a[1:], a[:-1], out=out[1:])
    return out.ravel()


def delta_decode(values, components: int = 1) -> np.ndarray:
    a = np.asarray(values, dtype=np.int64).reshape(-1, components)
    return np.cumsum(a, axis=0, dtype=np.int64).ravel()


def zigzag(values) -> np.ndarray:
    """Map signed to unsigned so small magnitudes get short varints."""
    s = np.asarray(values, dtype=np.int64)
    u = s.astype(np.uint64)
    flip = np.where(s < 0, np.uint64(0xFFFFFFFFFFFFFFFF), np.uint64(0))
    return (u << np.uint64(1)) ^ flip


def unzigzag(values) -> np.ndarray:
    u = np.ascontiguousarray(values, dtype=np.uint64)
    half = u >> np.uint64(1)
    out = np.where((u & np.uint64(1)).astype(bool), ~half, half)
    return out.view(np.int64)


# Value v needs k+1 varint bytes iff v >= 2**(7k); 10 bytes cover 64 bits.
_VARINT_THRESHOLDS = [1 << (7 * k) for k in range(1, 10)]


def varint_encode(values) -> bytes:
    """Minimal-length unsigned LEB128, vectorized."""
    u = np.ascontiguousarray(values, dtype=np.uint64)
    if u.size == 0:
        return b""
    nbytes = np.ones(u.shape, dtype=np.int64)
    for t in _VARINT_THRESHOLDS:
        nbytes += u >= t
    ends = np.cumsum(nbytes)
    starts = ends - nbytes
    out = np.empty(int(ends[-1]), dtype=np.uint8)
    for j in range(10):
        mask = nbytes > j
        if not mask.any():
            break
        chunk = ((u[mask] >> np.uint64(7 * j)) & np.uint64(0x7F)).astype(np.uint8)
        chunk[nbytes[mask] > j + 1] |= 0x80
        out[starts[mask] + j] = chunk
    return out.tobytes()


def varint_decode(data) -> np.ndarray:
    """Inverse of :func:`varint_encode`; rejects truncated, overlong, and
    non-minimal encodings."""
    b = np.frombuffer(bytes(data), dtype=np.uint8)
    if b.size == 0:
        return np.empty(0, dtype=np.uint64)
    is_last = (b & 0x80) == 0
    if not is_last[-1]:
        raise TruncatedVarint("stream ends inside a varint")
    ends = np.flatnonzero(is_last)
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    lengths = ends - starts + 1
    if int(lengths.max()) > 10:
        raise OverlongVarint("varint longer than 10 bytes")
    if bool(((lengths > 1) & (b[ends] == 0)).any()):
        raise OverlongVarint("non-minimal varint (trailing zero byte)")
    vals = np.zeros(len(ends), dtype=np.uint64)
    for j in range(10):
        mask = lengths > j
        if not mask.any():
            break
        chunk = (b[starts[mask] + j] & 0x7F).astype(np.uint64)
        if j == 9:
            # only one bit of the tenth byte fits below 2**64
            if bool((chunk > 1).any()):
                raise OverlongVarint("varint exceeds 64 bits")
            vals[mask] |= chunk << np.uint64(63)
        else:
            vals[mask] |= chunk << np.uint64(7 * j)
    return vals


def deflate_stage(data: bytes, compression_level: int) -> bytes:
    """Raw DEFLATE (RFC 1951).  Level 0 is the identity; 10 maps to 9."""
    if not 0 <= compression_level <= MAX_COMPRESSION_LEVEL:
        raise ValueError(f"compression_level must be in [0, {MAX_COMPRESSION_LEVEL}]")
    if compression_level == 0:
        return bytes(data)
    level = min(compression_level, 9)
    co = zlib.compressobj(level=level, method=zlib.DEFLATED, wbits=-15)
    return co.compress(bytes(data)) + co.flush()


def inflate_stage(data: bytes) -> bytes:
    try:
        do = zlib.decompressobj(wbits=-15)
        out = do.decompress(bytes(data))
    except zlib.error as e:
        raise CorruptStream(f"bad DEFLATE stream: {e}") from e
    if not do.eof or do.unused_data:
        raise CorruptStream("DEFLATE stream not fully consumed")
    return out


def _check_stages(stages):
    order = [_STAGE_ORDER.index(s) for s in stages if s in _STAGE_ORDER]
    if len(order) != len(stages) or sorted(order) != order or len(set(order)) != len(order):
        raise CorruptStream(f"unintelligible stage list {stages!r}")
    if STAGE_VARINT not in stages:
        raise CorruptStream("stage list lacks the varint serialization stage")


def encode_attribute(values, dims: int, config: CodecConfig, declared_type: str = "float32") -> CompressedAttribute:
    """Encode one attribute (``dims`` interleaved components per element).

    Integer-declared attributes take the lossless path when the config
    asks for it (the default): the round-tripped values are exact.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size % dims:
        raise LengthMismatch(f"{v.size} values not divisible by {dims} components")
    if v.size and not np.isfinite(v).all():
        raise NonFiniteInput("cannot encode non-finite values")
    count = v.size // dims

    if count:
        per = v.reshape(count, dims)
        mins, maxs = per.min(axis=0), per.max(axis=0)
    else:
        mins = maxs = np.zeros(dims)
    params = QuantizationParams(
        bits=config.bits,
        min_values=tuple(mins),
        max_values=tuple(maxs),
        components=dims,
        count=count,
    )

    stages = []
    lossless = declared_type in INTEGER_TYPES and config.lossless_integers
    if lossless:
        ints = np.rint(v).astype(np.int64)
    else:
        ints = quantize(v, params).astype(np.int64)
        stages.append(STAGE_QUANTIZE)

    if config.prediction == "delta":
        ints = delta_encode(ints, dims)
        stages.append(STAGE_DELTA)
        u = zigzag(ints)
        stages.append(STAGE_ZIGZAG)
    elif lossless:
        u = zigzag(ints)  # undeltaed integers may still be negative
        stages.append(STAGE_ZIGZAG)
    else:
        u = ints.astype(np.uint64)  # quantized codes are nonnegative

    payload = varint_encode(u)
    stages.append(STAGE_VARINT)
    if config.compression_level > 0:
        payload = deflate_stage(payload, config.compression_level)
        stages.append(STAGE_DEFLATE)

    return CompressedAttribute(
        payload=payload,
        params=params,
        stages=tuple(stages),
        declared_type=declared_type,
    )


def _decode_ints(ca: CompressedAttribute) -> np.ndarray:
    """Run the recorded stages backwards down to the integer stream."""
    _check_stages(ca.stages)
    data = ca.payload
    if STAGE_DEFLATE in ca.stages:
        data = inflate_stage(data)
    u = varint_decode(data)
    if STAGE_ZIGZAG in ca.stages:
        ints = unzigzag(u)
    else:
        if u.size and bool((u > np.uint64(0x7FFFFFFFFFFFFFFF)).any()):
            raise CorruptStream("unsigned value overflows signed 64-bit range")
        ints = u.astype(np.int64)
    if STAGE_DELTA in ca.stages:
        ints = delta_decode(ints, ca.params.components)
    return ints


def decode_attribute(ca: CompressedAttribute) -> np.ndarray:
    """Invert :func:`encode_attribute`; returns float64 values."""
    ints = _decode_ints(ca)
    expected = ca.params.count * ca.params.components
    if ints.size != expected:
        raise LengthMismatch(f"decoded {ints.size} values, expected {expected}")
    if STAGE_QUANTIZE in ca.stages:
        return dequantize(ints, ca.params)
    return ints.astype(np.float64)


def encode_offsets(offsets, compression_level: int = 10) -> CompressedAttribute:
    """Losslessly encode a streamline offsets array (delta/varint/deflate).

    Topology is never lossy: deltas of a valid offsets array are the
    streamline lengths, all positive, so no zigzag stage is needed.
    """
    o = np.asarray(offsets, dtype=np.int64).ravel()
    d = delta_encode(o, 1)
    if d.size and (d.min() < 0 or o[0] < 0):
        raise ValueError("offsets must be nondecreasing and nonnegative")
    stages = [STAGE_DELTA, STAGE_VARINT]
    payload = varint_encode(d.astype(np.uint64))
    if compression_level > 0:
        payload = deflate_stage(payload, compression_level)
        stages.append(STAGE_DEFLATE)
    last = int(o[-1]) if o.size else 0
    params = QuantizationParams(
        bits=MAX_BITS,  # informational; no quantize stage on this path
        min_values=(float(o[0]) if o.size else 0.0,),
        max_values=(float(last),),
        components=1,
        count=int(o.size),
    )
    return CompressedAttribute(
        payload=payload, params=params, stages=tuple(stages), declared_type="uint32"
    )


def decode_offsets(ca: CompressedAttribute) -> np.ndarray:
    """Invert :func:`encode_offsets`; returns the exact int64 offsets."""
    ints = _decode_ints(ca)
    if ints.size != ca.params.count:
        raise LengthMismatch(f"decoded {ints.size} offsets, expected {ca.params.count}")
    return ints
