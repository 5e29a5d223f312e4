"""MRtrix .tck reader/writer.

Layout per https://mrtrix.readthedocs.io: an ASCII header of "key: value"
lines opened by "mrtrix tracks" and closed by a line "END", then a binary
body of float triplets at the byte offset declared by "file: . <offset>".
A (NaN,NaN,NaN) triplet ends each streamline and an (Inf,Inf,Inf) triplet
ends the stream.  TCK carries geometry only: no scalars, no properties.
"""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import MalformedHeader, TruncatedBody, UnsupportedDatatype
from ..model import Tractogram

MAGIC = b"mrtrix tracks"

_DATATYPES = {"Float32LE": "<f4", "Float32BE": ">f4"}

#: Header keys the writer regenerates; user metadata never overrides them.
_MANAGED_KEYS = ("datatype", "file", "count", "total_count")


def _err(cls, msg, offset=None):
    return cls(msg, format_name="TCK", offset=offset)


def read_tck(data: bytes) -> Tractogram:
    """Parse TCK bytes into a tractogram (sentinels stripped)."""
    if not data.startswith(MAGIC):
        raise _err(MalformedHeader, "missing 'mrtrix tracks' signature", 0)

    # Header: everything up to the END line, as latin-1 text.
    end = data.find(b"\nEND")
    if end < 0:
        raise _err(MalformedHeader, "no END line in header")
    header_text = data[:end].decode("latin-1")

    metadata: dict[str, str] = {}
    for line in header_text.splitlines()[1:]:
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise _err(MalformedHeader, f"header line without ':' ({line!r})")
        key, value = key.strip(), value.strip()
        if key in metadata:
            metadata[key] = metadata[key] + "\n" + value
        else:
            metadata[key] = value

    datatype = metadata.get("datatype", "Float32LE")
    if datatype not in _DATATYPES:
        raise _err(UnsupportedDatatype, f"datatype {datatype!r} not supported")
    dtype = np.dtype(_DATATYPES[datatype])

    file_field = metadata.get("file")
    if file_field is None:
        raise _err(MalformedHeader, "header lacks the 'file' offset field")
    parts = file_field.split()
    if len(parts) != 2 or parts[0] != ".":
        raise _err(MalformedHeader, f"detached or malformed 'file' field {file_field!r}")
    try:
        offset = int(parts[1])
    except ValueError:
        raise _err(MalformedHeader, f"non-integer body offset {parts[1]!r}") from None
    if offset < 0 or offset > len(data):
        raise _err(MalformedHeader, f"body offset {offset} outside file")

    body = data[offset:]
    if len(body) % (3 * dtype.itemsize):
        raise _err(TruncatedBody, "body is not a whole number of triplets", offset + len(body))
    rows = np.frombuffer(body, dtype=dtype).astype(np.float64).reshape(-1, 3)

    nonfinite = ~np.isfinite(rows)
    is_nan = np.isnan(rows).any(axis=1)
    is_inf = (nonfinite & ~np.isnan(rows)).any(axis=1)
    inf_rows = np.flatnonzero(is_inf)
    if len(inf_rows) == 0:
        raise _err(TruncatedBody, "no end-of-stream triplet before EOF", len(data))
    stop = int(inf_rows[0])

    keep = ~is_nan[:stop]
    vertices = rows[:stop][keep]
    # Streamline lengths are the gaps between separator rows.
    seps = np.flatnonzero(is_nan[:stop])
    bounds = np.concatenate([[0], seps, [stop]])
    lengths = np.diff(bounds) - 1
    lengths[0] += 1  # first segment has no leading separator
    lengths = lengths[lengths > 0]
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)

    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        metadata=metadata,
        space="scanner",
    )


def write_tck(t: Tractogram) -> bytes:
    """Serialize geometry to TCK (Float32LE).  Attached fields are dropped
    with a warning because the format cannot represent them."""
    dropped = list(t.vertex_scalars) + list(t.fiber_properties)
    if dropped:
        warnings.warn(
            "TCK cannot store scalar/property fields; dropping: " + ", ".join(dropped),
            stacklevel=2,
        )

    lines = ["mrtrix tracks"]
    for key, value in t.metadata.items():
        if key in _MANAGED_KEYS:
            continue
        for chunk in str(value).split("\n"):
            lines.append(f"{key}: {chunk}")
    lines.append(f"count: {t.streamline_count}")
    lines.append("datatype: Float32LE")
    head = "\n".join(lines) + "\n"

    # The body offset counts its own digits; iterate until stable.
    offset = len(head) + len("file: . \nEND\n") + 1
    while True:
        candidate = f"{head}file: . {offset}\nEND\n"
        if len(candidate) == offset:
            break
        offset = len(candidate)
    header = candidate.encode("latin-1")

    n, s = t.vertex_count, t.streamline_count
    body = np.full((n + s + 1, 3), np.nan, dtype="<f4")
    if n:
        dest = np.arange(n) + np.repeat(np.arange(s), t.lengths)
        body[dest] = t.vertices
    body[-1] = np.inf
    return header + body.tobytes()
