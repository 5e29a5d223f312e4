"""Legacy VTK polydata reader/writer (ASCII and binary).

Layout per https://vtk.org/wp-content/uploads/2015/04/file-formats.pdf:
a version comment line, a title line, ASCII|BINARY, DATASET POLYDATA,
then POINTS / LINES sections and optional POINT_DATA / CELL_DATA
sections.  Binary payloads are big-endian regardless of host order.
Streamlines map to LINES cells; per-vertex data to POINT_DATA and
per-fiber data to CELL_DATA (SCALARS or FIELD arrays).
"""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import (
    MalformedHeader,
    NonFloatPoints,
    TruncatedBody,
    UnsupportedDataset,
    UnsupportedSection,
)
from ..model import DECLARED_DTYPES, PropertyField, ScalarField, Tractogram

MAGIC = b"# vtk DataFile"

VTK_TO_DECLARED = {
    "unsigned_char": "uint8",
    "char": "int8",
    "unsigned_short": "uint16",
    "short": "int16",
    "unsigned_int": "uint32",
    "int": "int32",
    "unsigned_long": "uint64",
    "long": "int64",
    "float": "float32",
    "double": "float64",
}
DECLARED_TO_VTK = {v: k for k, v in VTK_TO_DECLARED.items()}

# Exact decimal round-trip: 9 significant digits for float32, 17 for float64.
_ASCII_FMT = {"float32": "%.9g", "float64": "%.17g"}


def _err(cls, msg, offset=None):
    return cls(msg, format_name="VTK", offset=offset)


class _Cursor:
    """Byte-precise line/block reader over an in-memory VTK file."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def readline(self) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            end = len(self.data)
        line = self.data[self.pos : end]
        self.pos = min(end + 1, len(self.data))
        return line.decode("latin-1")

    def next_tokens(self):
        """Tokens of the next non-blank line, or None at EOF."""
        while self.pos < len(self.data):
            line = self.readline()
            tokens = line.split()
            if tokens:
                return tokens
        return None

    def read_block(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise _err(TruncatedBody, "EOF inside a binary block", self.pos)
        block = self.data[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return block

    def read_numbers(self, count: int, dtype: np.dtype, ascii_mode: bool) -> np.ndarray:
        """Read exactly ``count`` numbers, ASCII tokens or big-endian binary."""
        if not ascii_mode:
            big = dtype.newbyteorder(">")
            out = np.frombuffer(self.read_block(count * big.itemsize), dtype=big)
            # the trailing newline after a binary block is optional
            if self.pos < len(self.data) and self.data[self.pos : self.pos + 1] == b"\n":
                self.pos += 1
            return out.astype(dtype.newbyteorder("="))
        values = []
        while len(values) < count:
            tokens = self.next_tokens()
            if tokens is None:
                raise _err(TruncatedBody, f"EOF while reading {count} ASCII values", self.pos)
            values.extend(tokens)
        if len(values) > count:
            raise _err(TruncatedBody, "too many values on the last data line", self.pos)
        try:
            return np.array(values, dtype=dtype)
        except ValueError as e:
            raise _err(TruncatedBody, f"bad numeric token: {e}", self.pos) from None


def _declared(vtk_type: str):
    if vtk_type not in VTK_TO_DECLARED:
        raise _err(UnsupportedSection, f"unsupported VTK data type {vtk_type!r}")
    tag = VTK_TO_DECLARED[vtk_type]
    return tag, DECLARED_DTYPES[tag]


def _read_attribute_sections(cur, tokens, n_items, ascii_mode, target):
    """Parse one POINT_DATA/CELL_DATA subsection into ``target``.

    Returns the tokens of the first line that does not belong to the
    section (or None at EOF).
    """
    kind = tokens[0].upper()
    if kind == "SCALARS":
        name, vtk_type = tokens[1], tokens[2]
        comps = int(tokens[3]) if len(tokens) > 3 else 1
        tag, dtype = _declared(vtk_type)
        # the LOOKUP_TABLE line is customary but optional
        mark = cur.pos
        nxt = cur.next_tokens()
        if not (nxt and nxt[0].upper() == "LOOKUP_TABLE"):
            cur.pos = mark
        vals = cur.read_numbers(n_items * comps, dtype, ascii_mode)
        target[name] = (comps, vals.astype(np.float64), tag)
        return None
    if kind in ("VECTORS", "NORMALS", "TENSORS"):
        comps = 9 if kind == "TENSORS" else 3
        name, vtk_type = tokens[1], tokens[2]
        tag, dtype = _declared(vtk_type)
        vals = cur.read_numbers(n_items * comps, dtype, ascii_mode)
        target[name] = (comps, vals.astype(np.float64), tag)
        return None
    if kind == "FIELD":
        n_arrays = int(tokens[2])
        for _ in range(n_arrays):
            head = cur.next_tokens()
            if head is None or len(head) < 4:
                raise _err(TruncatedBody, "EOF inside FIELD section", cur.pos)
            name, comps, tuples = head[0], int(head[1]), int(head[2])
            tag, dtype = _declared(head[3])
            if tuples != n_items:
                raise _err(TruncatedBody, f"FIELD array {name!r} has {tuples} tuples, expected {n_items}", cur.pos)
            vals = cur.read_numbers(tuples * comps, dtype, ascii_mode)
            target[name] = (comps, vals.astype(np.float64), tag)
        return None
    raise _err(UnsupportedSection, f"unsupported attribute section {kind!r}")


def read_vtk(data: bytes) -> Tractogram:
    if not data.startswith(MAGIC):
        raise _err(MalformedHeader, "missing '# vtk DataFile' signature", 0)
    cur = _Cursor(data)
    version_line = cur.readline()
    title = cur.readline()
    mode = cur.readline().strip().upper()
    if mode not in ("ASCII", "BINARY"):
        raise _err(MalformedHeader, f"mode must be ASCII or BINARY, got {mode!r}", cur.pos)
    ascii_mode = mode == "ASCII"

    points = None
    conn_records = None
    n_lines = 0
    point_data: dict[str, tuple] = {}
    cell_data: dict[str, tuple] = {}

    tokens = cur.next_tokens()
    if tokens is None or tokens[0].upper() != "DATASET":
        raise _err(MalformedHeader, "expected DATASET line", cur.pos)
    if tokens[1].upper() != "POLYDATA":
        raise _err(UnsupportedDataset, f"only POLYDATA is supported, got {tokens[1]}")

    tokens = cur.next_tokens()
    while tokens is not None:
        section = tokens[0].upper()
        if section == "POINTS":
            n_points = int(tokens[1])
            vtk_type = tokens[2]
            if vtk_type not in ("float", "double"):
                raise _err(NonFloatPoints, f"POINTS must be float or double, got {vtk_type}")
            _tag, dtype = _declared(vtk_type)
            points = cur.read_numbers(n_points * 3, dtype, ascii_mode).astype(np.float64)
            points = points.reshape(n_points, 3)
            tokens = cur.next_tokens()
        elif section == "LINES":
            n_lines = int(tokens[1])
            total = int(tokens[2])
            flat = cur.read_numbers(total, np.dtype("<i4"), ascii_mode).astype(np.int64)
            conn_records = []
            pos = 0
            for _ in range(n_lines):
                if pos >= len(flat):
                    raise _err(TruncatedBody, "LINES section shorter than declared", cur.pos)
                m = int(flat[pos])
                rec = flat[pos + 1 : pos + 1 + m]
                if len(rec) != m:
                    raise _err(TruncatedBody, "LINES record shorter than its count", cur.pos)
                conn_records.append(rec)
                pos += 1 + m
            if pos != len(flat):
                raise _err(TruncatedBody, "LINES section longer than declared", cur.pos)
            tokens = cur.next_tokens()
        elif section in ("POINT_DATA", "CELL_DATA"):
            n_items = int(tokens[1])
            target = point_data if section == "POINT_DATA" else cell_data
            sub = cur.next_tokens()
            while sub is not None and sub[0].upper() not in ("POINT_DATA", "CELL_DATA"):
                _read_attribute_sections(cur, sub, n_items, ascii_mode, target)
                sub = cur.next_tokens()
            tokens = sub
        elif section in ("VERTICES", "POLYGONS", "TRIANGLE_STRIPS"):
            raise _err(UnsupportedSection, f"{section} cells are not streamlines")
        else:
            raise _err(UnsupportedSection, f"unsupported section {section!r}")

    if points is None:
        raise _err(TruncatedBody, "no POINTS section", cur.pos)
    if conn_records is None:
        conn_records = []

    lengths = np.array([len(r) for r in conn_records], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    conn = (
        np.concatenate(conn_records) if conn_records else np.empty(0, np.int64)
    )
    if conn.size and (conn.min() < 0 or conn.max() >= len(points)):
        raise _err(TruncatedBody, "LINES connectivity references missing points")

    consecutive = conn.size == len(points) and np.array_equal(conn, np.arange(len(points)))
    if consecutive:
        vertices = points
        gather = None
    else:
        warnings.warn(
            "VTK LINES connectivity is not a consecutive partition of the "
            "points; re-ordering (and duplicating shared) vertices",
            stacklevel=2,
        )
        gather = conn
        vertices = points[gather]

    vertex_scalars = {}
    for name, (comps, vals, tag) in point_data.items():
        table = vals.reshape(len(points), comps)
        if gather is not None:
            table = table[gather]
        vertex_scalars[name] = ScalarField(comps, table.ravel(), tag)
    fiber_properties = {
        name: PropertyField(comps, vals, tag) for name, (comps, vals, tag) in cell_data.items()
    }

    metadata = {
        "vtk_version_line": version_line.strip(),
        "vtk_title": title.strip(),
    }
    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        vertex_scalars=vertex_scalars,
        fiber_properties=fiber_properties,
        metadata=metadata,
        space="world",
    )


def _format_ascii(values: np.ndarray, tag: str, per_line: int) -> list[str]:
    fmt = _ASCII_FMT.get(tag)
    if fmt is None:
        strs = [str(int(v)) for v in np.rint(values).astype(np.int64)]
    else:
        strs = [fmt % v for v in values]
    return [
        " ".join(strs[i : i + per_line]) for i in range(0, len(strs), per_line)
    ]


def _emit_array(lines, blobs, values, tag, ascii_mode, per_line):
    if ascii_mode:
        lines.extend(_format_ascii(values, tag, per_line))
        return
    dtype = DECLARED_DTYPES[tag].newbyteorder(">")
    values = np.asarray(values)
    if not tag.startswith("float"):
        values = np.rint(values)
    # binary payload goes right after the line just appended
    key = len(lines) - 1
    blobs[key] = blobs.get(key, b"") + values.astype(dtype).tobytes() + b"\n"


def write_vtk(t: Tractogram, mode: str = "binary") -> bytes:
    """Serialize to legacy VTK polydata; ``mode`` is "ascii" or "binary"."""
    if mode not in ("ascii", "binary"):
        raise ValueError(f"mode must be 'ascii' or 'binary', got {mode!r}")
    ascii_mode = mode == "ascii"
    for name in list(t.vertex_scalars) + list(t.fiber_properties):
        if any(c.isspace() for c in name):
            raise ValueError(f"VTK field names cannot contain whitespace: {name!r}")

    lines: list[str] = []
    blobs: dict[int, bytes] = {}  # binary payloads keyed by line index
    lines.append("# vtk DataFile Version 4.2")
    lines.append(t.metadata.get("vtk_title", "tko tractogram"))
    lines.append("ASCII" if ascii_mode else "BINARY")
    lines.append("DATASET POLYDATA")

    n, s = t.vertex_count, t.streamline_count
    lines.append(f"POINTS {n} float")
    _emit_array(lines, blobs, t.vertices.astype(np.float32).ravel(), "float32", ascii_mode, 3)

    lines.append(f"LINES {s} {s + n}")
    lengths = t.lengths
    conn = np.empty(s + n, dtype=np.int64)
    pos = 0
    for i in range(s):
        m = int(lengths[i])
        conn[pos] = m
        conn[pos + 1 : pos + 1 + m] = np.arange(t.offsets[i], t.offsets[i + 1])
        pos += 1 + m
    _emit_array(lines, blobs, conn, "int32", ascii_mode, 9)

    for header, fields, count in (
        ("POINT_DATA", t.vertex_scalars, n),
        ("CELL_DATA", t.fiber_properties, s),
    ):
        if not fields:
            continue
        lines.append(f"{header} {count}")
        lines.append(f"FIELD {header.lower()}_fields {len(fields)}")
        for name, f in fields.items():
            vtk_type = DECLARED_TO_VTK[f.declared_type]
            lines.append(f"{name} {f.dims} {count} {vtk_type}")
            _emit_array(lines, blobs, f.values, f.declared_type, ascii_mode, max(f.dims, 1))

    out = bytearray()
    for i, line in enumerate(lines):
        out += line.encode("latin-1") + b"\n"
        if i in blobs:
            out += blobs[i]
    return bytes(out)
