"""TrackVis .trk v2 reader/writer.

Layout per http://trackvis.org/dtk/?subsect=format: a fixed 1000-byte
little-endian header, then one record per streamline: an int32 point
count m, m * (3 + n_scalars) float32 values, then n_properties float32
values.  Coordinates pass through untransformed; the voxel-to-RAS
transform and all other header fields ride along in metadata under
"trk_*" keys so a write/read cycle reproduces them.
"""
from __future__ import annotations

import numpy as np

from ..errors import BadMagic, CountMismatch, HeaderSizeMismatch, TruncatedBody
from ..model import PropertyField, ScalarField, Tractogram

MAGIC = b"TRACK"
HEADER_SIZE = 1000
MAX_NAMED_FIELDS = 10

HEADER_DTYPE = np.dtype(
    [
        ("id_string", "S6"),
        ("dim", "<i2", 3),
        ("voxel_size", "<f4", 3),
        ("origin", "<f4", 3),
        ("n_scalars", "<i2"),
        ("scalar_name", "S20", MAX_NAMED_FIELDS),
        ("n_properties", "<i2"),
        ("property_name", "S20", MAX_NAMED_FIELDS),
        ("vox_to_ras", "<f4", (4, 4)),
        ("reserved", "S444"),
        ("voxel_order", "S4"),
        ("pad2", "S4"),
        ("image_orientation_patient", "<f4", 6),
        ("pad1", "S2"),
        ("invert_x", "u1"),
        ("invert_y", "u1"),
        ("invert_z", "u1"),
        ("swap_xy", "u1"),
        ("swap_yz", "u1"),
        ("swap_zx", "u1"),
        ("n_count", "<i4"),
        ("version", "<i4"),
        ("hdr_size", "<i4"),
    ]
)
assert HEADER_DTYPE.itemsize == HEADER_SIZE

_FLAG_FIELDS = ("invert_x", "invert_y", "invert_z", "swap_xy", "swap_yz", "swap_zx")

# Header fields carried through metadata (all floats printed with enough
# digits to reproduce the float32 value exactly).
_META_VECTORS = {
    "trk_dim": ("dim", "%d"),
    "trk_voxel_size": ("voxel_size", "%.9g"),
    "trk_origin": ("origin", "%.9g"),
    "trk_vox_to_ras": ("vox_to_ras", "%.9g"),
    "trk_image_orientation_patient": ("image_orientation_patient", "%.9g"),
}


def _err(cls, msg, offset=None):
    return cls(msg, format_name="TRK", offset=offset)


def _decode_name(raw: bytes) -> tuple[str, int]:
    """Decode a 20-byte name slot; "name\\0<d>" marks a d-component field."""
    text = raw.rstrip(b"\x00").decode("latin-1")
    if not text:
        return "", 0
    parts = text.split("\x00")
    name = parts[0]
    dims = 1
    if len(parts) == 2 and parts[1].isdigit():
        dims = int(parts[1])
    return name, dims


def _encode_name(name: str, dims: int) -> bytes:
    text = name if dims <= 1 else f"{name}\x00{dims}"
    raw = text.encode("latin-1")
    if len(raw) > 20:
        raise ValueError(f"TRK field name too long: {name!r}")
    return raw.ljust(20, b"\x00")


def _field_layout(name_slots, declared_total, prefix):
    """Map name slots onto the declared per-point/per-streamline columns."""
    layout = []
    used = 0
    for raw in name_slots:
        name, dims = _decode_name(bytes(raw))
        if dims == 0:
            continue
        if used + dims > declared_total:
            break
        layout.append((name, used, dims))
        used += dims
    while used < declared_total:
        layout.append((f"{prefix}_{used}", used, 1))
        used += 1
    return layout


def read_trk(data: bytes) -> Tractogram:
    if len(data) < HEADER_SIZE:
        raise _err(TruncatedBody, f"file shorter than the {HEADER_SIZE}-byte header", len(data))
    if not data.startswith(MAGIC):
        raise _err(BadMagic, "missing TRACK signature", 0)
    hdr = np.frombuffer(data[:HEADER_SIZE], dtype=HEADER_DTYPE)[0]
    if int(hdr["hdr_size"]) != HEADER_SIZE:
        raise _err(
            HeaderSizeMismatch,
            f"hdr_size {int(hdr['hdr_size'])} != {HEADER_SIZE} (not little-endian v2?)",
        )

    n_scalars = int(hdr["n_scalars"])
    n_properties = int(hdr["n_properties"])
    n_count = int(hdr["n_count"])
    scalar_layout = _field_layout(hdr["scalar_name"], n_scalars, "scalar")
    property_layout = _field_layout(hdr["property_name"], n_properties, "property")

    body = np.frombuffer(data, dtype=np.uint8, offset=HEADER_SIZE)
    pos = 0
    counts = []
    point_blocks = []
    prop_rows = []
    row_width = 3 + n_scalars
    while pos < len(body):
        if n_count and len(counts) == n_count:
            raise _err(CountMismatch, f"body continues past the declared {n_count} streamlines",
                       HEADER_SIZE + pos)
        if pos + 4 > len(body):
            raise _err(TruncatedBody, "EOF inside a point-count field", HEADER_SIZE + pos)
        m = int(body[pos : pos + 4].view("<i4")[0])
        pos += 4
        if m < 0:
            raise _err(TruncatedBody, f"negative point count {m}", HEADER_SIZE + pos - 4)
        nbytes = 4 * (m * row_width + n_properties)
        if pos + nbytes > len(body):
            raise _err(TruncatedBody, "EOF inside a streamline record", HEADER_SIZE + pos)
        block = body[pos : pos + 4 * m * row_width].view("<f4").reshape(m, row_width)
        pos += 4 * m * row_width
        props = body[pos : pos + 4 * n_properties].view("<f4")
        pos += 4 * n_properties
        if m == 0:
            continue  # pointless record; drop it but keep scanning
        counts.append(m)
        point_blocks.append(block)
        prop_rows.append(props)
    if n_count and len(counts) != n_count:
        raise _err(CountMismatch, f"header declares {n_count} streamlines, body holds {len(counts)}")

    if point_blocks:
        table = np.concatenate(point_blocks, axis=0).astype(np.float64)
    else:
        table = np.empty((0, row_width), np.float64)
    vertices = table[:, :3]
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    prop_table = (
        np.asarray(prop_rows, dtype=np.float32).astype(np.float64).reshape(len(counts), n_properties)
        if n_properties
        else np.empty((len(counts), 0), np.float64)
    )

    vertex_scalars = {
        name: ScalarField(dims, table[:, 3 + col : 3 + col + dims].ravel(), "float32")
        for name, col, dims in scalar_layout
    }
    fiber_properties = {
        name: PropertyField(dims, prop_table[:, col : col + dims].ravel(), "float32")
        for name, col, dims in property_layout
    }

    metadata = {}
    for key, (fld, fmt) in _META_VECTORS.items():
        metadata[key] = " ".join(fmt % v for v in np.asarray(hdr[fld]).ravel())
    metadata["trk_voxel_order"] = bytes(hdr["voxel_order"]).rstrip(b"\x00").decode("latin-1")
    metadata["trk_pad2"] = bytes(hdr["pad2"]).rstrip(b"\x00").decode("latin-1")
    metadata["trk_flags"] = " ".join(str(int(hdr[f])) for f in _FLAG_FIELDS)
    metadata["trk_version"] = str(int(hdr["version"]))

    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        vertex_scalars=vertex_scalars,
        fiber_properties=fiber_properties,
        metadata=metadata,
        space="voxmm",
    )


def write_trk(t: Tractogram) -> bytes:
    if len(t.vertex_scalars) > MAX_NAMED_FIELDS or len(t.fiber_properties) > MAX_NAMED_FIELDS:
        raise ValueError(f"TRK holds at most {MAX_NAMED_FIELDS} named fields of each kind")

    hdr = np.zeros((), dtype=HEADER_DTYPE)
    hdr["id_string"] = MAGIC
    hdr["voxel_size"] = (1.0, 1.0, 1.0)
    hdr["dim"] = (1, 1, 1)
    hdr["vox_to_ras"] = np.eye(4, dtype=np.float32)
    hdr["voxel_order"] = b"RAS"
    hdr["version"] = 2
    hdr["hdr_size"] = HEADER_SIZE

    md = t.metadata
    for key, (fld, _fmt) in _META_VECTORS.items():
        if key in md:
            vals = np.array(md[key].split(), dtype=np.float64)
            hdr[fld] = vals.reshape(np.asarray(hdr[fld]).shape)
    if "trk_voxel_order" in md:
        hdr["voxel_order"] = md["trk_voxel_order"].encode("latin-1")
    if "trk_pad2" in md:
        hdr["pad2"] = md["trk_pad2"].encode("latin-1")
    if "trk_flags" in md:
        for fld, val in zip(_FLAG_FIELDS, md["trk_flags"].split()):
            hdr[fld] = int(val)
    if "trk_version" in md:
        hdr["version"] = int(md["trk_version"])

    n_scalars = sum(f.dims for f in t.vertex_scalars.values())
    n_properties = sum(f.dims for f in t.fiber_properties.values())
    hdr["n_scalars"] = n_scalars
    hdr["n_properties"] = n_properties
    for i, (name, f) in enumerate(t.vertex_scalars.items()):
        hdr["scalar_name"][i] = _encode_name(name, f.dims)
    for i, (name, f) in enumerate(t.fiber_properties.items()):
        hdr["property_name"][i] = _encode_name(name, f.dims)
    hdr["n_count"] = t.streamline_count

    n = t.vertex_count
    table = np.empty((n, 3 + n_scalars), dtype="<f4")
    table[:, :3] = t.vertices
    col = 3
    for f in t.vertex_scalars.values():
        table[:, col : col + f.dims] = f.values.reshape(n, f.dims)
        col += f.dims
    s = t.streamline_count
    props = np.empty((s, n_properties), dtype="<f4")
    col = 0
    for f in t.fiber_properties.values():
        props[:, col : col + f.dims] = f.values.reshape(s, f.dims)
        col += f.dims

    chunks = [hdr.tobytes()]
    offs = t.offsets
    for i in range(s):
        a, b = int(offs[i]), int(offs[i + 1])
        chunks.append(np.int32(b - a).tobytes())
        chunks.append(table[a:b].tobytes())
        chunks.append(props[i].tobytes())
    return b"".join(chunks)
