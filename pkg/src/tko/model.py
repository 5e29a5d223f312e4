"""In-memory tractogram model shared by parsers, codec, container, and metrics.

A tractogram is a flat vertex array partitioned into streamlines by an
offsets array, plus named per-vertex scalar fields, named per-streamline
property fields, and pass-through header metadata.  All numeric payloads
are held as float64 regardless of their declared on-disk type; the
declared type only governs serialization.  Instances are immutable after
construction (arrays are frozen), so they can be shared across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Canonical declared-type tags, mapped to numpy dtypes for serialization.
DECLARED_DTYPES = {
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
    "int8": np.dtype("<i1"),
    "uint8": np.dtype("<u1"),
    "int16": np.dtype("<i2"),
    "uint16": np.dtype("<u2"),
    "int32": np.dtype("<i4"),
    "uint32": np.dtype("<u4"),
    "int64": np.dtype("<i8"),
    "uint64": np.dtype("<u8"),
}

INTEGER_TYPES = frozenset(t for t in DECLARED_DTYPES if not t.startswith("float"))


def _frozen_array(values, dtype):
    arr = np.ascontiguousarray(np.asarray(values, dtype=dtype))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Per-vertex data: ``dims`` components for each vertex, stored flat."""

    dims: int
    values: np.ndarray
    declared_type: str = "float32"

    def __post_init__(self):
        if self.declared_type not in DECLARED_DTYPES:
            raise ValueError(f"unknown declared_type {self.declared_type!r}")
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64).ravel())

    def __eq__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.declared_type == other.declared_type
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class PropertyField(ScalarField):
    """Per-streamline data: ``dims`` components for each streamline."""


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which rule, where, and a readable message."""

    invariant: str
    message: str
    index: int | None = None
    field_name: str | None = None

    def __str__(self):
        where = ""
        if self.field_name is not None:
            where += f" field {self.field_name!r}"
        if self.index is not None:
            where += f" at index {self.index}"
        return f"{self.invariant}:{where + ' ' if where else ' '}{self.message}"


@dataclass(frozen=True, eq=False)
class Tractogram:
    """A set of streamlines with attached per-vertex and per-fiber data.

    vertices
        (N, 3) float64 array of point coordinates in millimeters, in the
        source file's space.  Values always originate from 32-bit floats.
    offsets
        (S + 1,) int64 array; streamline i spans
        ``vertices[offsets[i]:offsets[i + 1]]``.
    vertex_scalars / fiber_properties
        Ordered name -> field maps.
    metadata
        Ordered name -> string map of header key/values carried through
        from the source file, preserved verbatim.
    space
        Tag recording the source coordinate convention (e.g. "scanner"
        for TCK, "voxmm" for TRK).  Purely informational; coordinates
        are never transformed.
    """

    vertices: np.ndarray
    offsets: np.ndarray
    vertex_scalars: dict[str, ScalarField] = field(default_factory=dict)
    fiber_properties: dict[str, PropertyField] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)
    space: str = "unknown"

    def __post_init__(self):
        verts = _frozen_array(self.vertices, np.float64)
        object.__setattr__(self, "vertices", verts.reshape(-1, 3))
        object.__setattr__(self, "offsets", _frozen_array(self.offsets, np.int64).ravel())

    @classmethod
    def from_streamlines(cls, streamlines, **kwargs):
        """Build a tractogram from an iterable of (m, 3) coordinate arrays."""
        chunks = [np.asarray(s, dtype=np.float64).reshape(-1, 3) for s in streamlines]
        lengths = [len(c) for c in chunks]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        vertices = (
            np.concatenate(chunks, axis=0) if chunks else np.empty((0, 3), np.float64)
        )
        return cls(vertices=vertices, offsets=offsets, **kwargs)

    @property
    def streamline_count(self):
        return max(len(self.offsets) - 1, 0)

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def lengths(self):
        return np.diff(self.offsets)

    def streamline(self, i):
        """Read-only view of streamline i's (m, 3) coordinates."""
        return self.vertices[self.offsets[i] : self.offsets[i + 1]]

    def __eq__(self, other):
        if not isinstance(other, Tractogram):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.offsets, other.offsets)
            and self.vertex_scalars == other.vertex_scalars
            and self.fiber_properties == other.fiber_properties
            and self.metadata == other.metadata
            and self.space == other.space
        )


@dataclass(frozen=True)
class AttributeSummary:
    kind: str  # "vertex_scalar" | "fiber_property"
    dims: int
    declared_type: str
    minimum: float
    maximum: float


@dataclass(frozen=True)
class SummaryStats:
    streamline_count: int
    vertex_count: int
    single_point_streamlines: int
    bbox_min: tuple[float, float, float] | None
    bbox_max: tuple[float, float, float] | None
    attributes: dict[str, AttributeSummary]


def validate(t: Tractogram) -> list[Violation]:
    """Check every structural invariant; violations are data, not failures."""
    out = []
    offs = t.offsets
    n = t.vertex_count

    if len(offs) == 0:
        out.append(Violation("offsets-nonempty", "offsets array is empty"))
        return out
    if offs[0] != 0:
        out.append(Violation("offsets-start", f"first offset is {offs[0]}, expected 0", index=0))
    bad = np.flatnonzero(np.diff(offs) <= 0)
    for i in bad[:16]:
        out.append(
            Violation(
                "offsets-increasing",
                "offsets not strictly increasing",
                index=int(i) + 1,
            )
        )
    if offs[-1] != n:
        out.append(
            Violation(
                "offsets-end",
                f"last offset {offs[-1]} != vertex count {n}",
                index=len(offs) - 1,
            )
        )

    if n and not np.isfinite(t.vertices).all():
        idx = int(np.flatnonzero(~np.isfinite(t.vertices).all(axis=1))[0])
        out.append(Violation("vertices-finite", "non-finite vertex coordinate", index=idx))

    s = t.streamline_count
    for name, f in t.vertex_scalars.items():
        if f.dims < 1:
            out.append(Violation("field-dims", "dims must be >= 1", field_name=name))
        elif len(f.values) != n * f.dims:
            out.append(
                Violation(
                    "scalar-length",
                    f"ScalarField length mismatch: {len(f.values)} != "
                    f"{n} vertices x {f.dims} dims",
                    field_name=name,
                )
            )
    for name, f in t.fiber_properties.items():
        if f.dims < 1:
            out.append(Violation("field-dims", "dims must be >= 1", field_name=name))
        elif len(f.values) != s * f.dims:
            out.append(
                Violation(
                    "property-length",
                    f"PropertyField length mismatch: {len(f.values)} != "
                    f"{s} streamlines x {f.dims} dims",
                    field_name=name,
                )
            )
    return out


def stats(t: Tractogram) -> SummaryStats:
    """Summary counts, bounding box, and per-attribute ranges.

    Assumes ``validate(t)`` is empty.
    """
    n = t.vertex_count
    if n:
        bbox_min = tuple(float(v) for v in t.vertices.min(axis=0))
        bbox_max = tuple(float(v) for v in t.vertices.max(axis=0))
    else:
        bbox_min = bbox_max = None

    attrs = {}
    for kind, fields in (
        ("vertex_scalar", t.vertex_scalars),
        ("fiber_property", t.fiber_properties),
    ):
        for name, f in fields.items():
            if len(f.values):
                lo, hi = float(f.values.min()), float(f.values.max())
            else:
                lo = hi = 0.0
            attrs[name] = AttributeSummary(kind, f.dims, f.declared_type, lo, hi)

    lengths = t.lengths
    return SummaryStats(
        streamline_count=t.streamline_count,
        vertex_count=n,
        single_point_streamlines=int((lengths == 1).sum()) if len(lengths) else 0,
        bbox_min=bbox_min,
        bbox_max=bbox_max,
        attributes=attrs,
    )
