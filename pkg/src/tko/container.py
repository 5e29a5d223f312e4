"""The .tko container: a glTF 2.0 document holding a compressed tractogram.

One mesh with one primitive; POSITION is a VEC3/float accessor carrying
the vertex bounding box as its min/max.  The ``TRAKO_tractogram`` mesh
extension maps streamline offsets, named attribute accessors, and
metadata.  When an attribute is compressed, its accessor has no core
bufferView (a plain glTF loader sees it as zero-initialized) and a
``TRAKO_compressed`` accessor extension points at the payload bufferView
and records the codec state needed to invert it.

Two on-disk forms share one in-memory document: ASCII JSON with buffers
embedded as base64 data URIs, and GLB (12-byte header, 4-byte-aligned
JSON and BIN chunks).  Both serializers are deterministic.
"""
from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .codec import (
    CodecConfig,
    CompressedAttribute,
    QuantizationParams,
    decode_attribute,
    decode_offsets,
    encode_attribute,
    encode_offsets,
)
from .errors import (
    BadMagic,
    ChunkLengthMismatch,
    ContainerError,
    CorruptStream,
    MalformedJson,
    NotATrakoFile,
    TruncatedFile,
    UnsupportedExtensionVersion,
)
from .model import DECLARED_DTYPES, PropertyField, ScalarField, Tractogram

EXT_TRACTOGRAM = "TRAKO_tractogram"
EXT_COMPRESSED = "TRAKO_compressed"
EXTENSION_VERSION = 1
GENERATOR = "tko 0.1.0"

GLB_MAGIC = b"glTF"
_CHUNK_JSON = 0x4E4F534A  # "JSON"
_CHUNK_BIN = 0x004E4942  # "BIN\0"

COMPONENT_FLOAT = 5126
COMPONENT_UBYTE = 5121

#: Declared types with a matching glTF core componentType; anything else
#: is stored as an opaque byte accessor and typed via accessor extras.
_CORE_COMPONENT_TYPES = {
    "int8": 5120,
    "uint8": 5121,
    "int16": 5122,
    "uint16": 5123,
    "float32": 5126,
}
_COMPONENT_SIZES = {5120: 1, 5121: 1, 5122: 2, 5123: 2, 5125: 4, 5126: 4}
_TYPE_COUNTS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT2": 4, "MAT3": 9, "MAT4": 16}

_DATA_URI_PREFIX = "data:application/octet-stream;base64,"


@dataclass
class TrakoDocument:
    """A glTF JSON tree plus the binary buffers it references."""

    json_tree: dict
    binary_buffers: list[bytes] = field(default_factory=list)


class _BufferBuilder:
    """Accumulates 4-byte-aligned bufferView segments into buffer 0."""

    def __init__(self):
        self.chunks: list[bytes] = []
        self.size = 0
        self.views: list[dict] = []

    def add(self, data: bytes) -> int | None:
        if not data:
            return None  # glTF forbids zero-length bufferViews
        pad = (-self.size) % 4
        if pad:
            self.chunks.append(b"\x00" * pad)
            self.size += pad
        view = {"buffer": 0, "byteOffset": self.size, "byteLength": len(data)}
        self.chunks.append(bytes(data))
        self.size += len(data)
        self.views.append(view)
        return len(self.views) - 1

    def buffer(self) -> bytes:
        return b"".join(self.chunks)


def _compressed_extension(ca: CompressedAttribute, view_id: int | None) -> dict:
    ext = {
        "version": EXTENSION_VERSION,
        "stages": list(ca.stages),
        "bits": ca.params.bits,
        "min_values": list(ca.params.min_values),
        "max_values": list(ca.params.max_values),
        "count": ca.params.count,
        "components": ca.params.components,
        "declared_type": ca.declared_type,
    }
    if view_id is not None:
        ext["bufferView"] = view_id
    return ext


def _attribute_accessor(builder, values, dims, declared_type, config):
    """Accessor dict for one non-POSITION attribute, flattened to SCALAR."""
    values = np.asarray(values, dtype=np.float64).ravel()
    count = values.size // dims if dims else 0
    if config is not None:
        ca = encode_attribute(values, dims, config, declared_type)
        view_id = builder.add(ca.payload)
        return {
            "componentType": COMPONENT_FLOAT,
            "count": values.size,
            "type": "SCALAR",
            "extensions": {EXT_COMPRESSED: _compressed_extension(ca, view_id)},
        }
    extras = {"count": count, "components": dims, "declared_type": declared_type}
    dtype = DECLARED_DTYPES[declared_type]
    raw = values.astype(dtype).tobytes() if declared_type.startswith("float") else (
        np.rint(values).astype(dtype).tobytes()
    )
    if declared_type in _CORE_COMPONENT_TYPES:
        acc = {
            "componentType": _CORE_COMPONENT_TYPES[declared_type],
            "count": values.size,
            "type": "SCALAR",
            "extras": extras,
        }
    else:
        acc = {
            "componentType": COMPONENT_UBYTE,
            "count": len(raw),
            "type": "SCALAR",
            "extras": extras,
        }
    view_id = builder.add(raw)
    if view_id is not None:
        acc["bufferView"] = view_id
    return acc


def build_document(t: Tractogram, config: CodecConfig | None = None) -> TrakoDocument:
    """Pack a tractogram into a glTF document.

    ``config=None`` stores every payload raw (bit-exact restoration);
    otherwise geometry and float attributes are quantized at
    ``config.bits`` and integer attributes stay lossless by default.
    """
    builder = _BufferBuilder()
    accessors: list[dict] = []
    n = t.vertex_count

    if n:
        vmin = [float(v) for v in t.vertices.min(axis=0)]
        vmax = [float(v) for v in t.vertices.max(axis=0)]
    else:
        vmin = vmax = [0.0, 0.0, 0.0]
    position = {
        "componentType": COMPONENT_FLOAT,
        "count": n,
        "type": "VEC3",
        "min": vmin,
        "max": vmax,
    }
    if config is not None:
        ca = encode_attribute(t.vertices.ravel(), 3, config, "float32")
        view_id = builder.add(ca.payload)
        position["extensions"] = {EXT_COMPRESSED: _compressed_extension(ca, view_id)}
    else:
        view_id = builder.add(t.vertices.astype("<f4").tobytes())
        if view_id is not None:
            position["bufferView"] = view_id
            builder.views[view_id]["target"] = 34962  # ARRAY_BUFFER
    accessors.append(position)

    offsets_acc = {
        "componentType": COMPONENT_FLOAT,
        "count": len(t.offsets),
        "type": "SCALAR",
    }
    if config is not None:
        ca = encode_offsets(t.offsets, config.compression_level)
        view_id = builder.add(ca.payload)
        offsets_acc["extensions"] = {EXT_COMPRESSED: _compressed_extension(ca, view_id)}
    else:
        offsets_acc["extras"] = {
            "count": len(t.offsets),
            "components": 1,
            "declared_type": "uint32",
        }
        offsets_acc["componentType"] = COMPONENT_UBYTE
        raw = t.offsets.astype("<u4").tobytes()
        offsets_acc["count"] = len(raw)
        view_id = builder.add(raw)
        if view_id is not None:
            offsets_acc["bufferView"] = view_id
    accessors.append(offsets_acc)
    offsets_id = len(accessors) - 1

    scalar_map = {}
    for name, f in t.vertex_scalars.items():
        accessors.append(_attribute_accessor(builder, f.values, f.dims, f.declared_type, config))
        scalar_map[name] = len(accessors) - 1
    property_map = {}
    for name, f in t.fiber_properties.items():
        accessors.append(_attribute_accessor(builder, f.values, f.dims, f.declared_type, config))
        property_map[name] = len(accessors) - 1

    mesh_ext = {
        "version": EXTENSION_VERSION,
        "offsets": offsets_id,
        "vertex_scalars": scalar_map,
        "fiber_properties": property_map,
        "metadata": dict(t.metadata),
        "space": t.space,
    }
    tree = {
        "asset": {"version": "2.0", "generator": GENERATOR},
        "extensionsUsed": [EXT_TRACTOGRAM] + ([EXT_COMPRESSED] if config is not None else []),
        "meshes": [
            {
                "primitives": [{"attributes": {"POSITION": 0}, "mode": 0}],
                "extensions": {EXT_TRACTOGRAM: mesh_ext},
            }
        ],
        "accessors": accessors,
    }
    buffer = builder.buffer()
    if buffer:
        tree["bufferViews"] = builder.views
        tree["buffers"] = [{"byteLength": len(buffer)}]
        return TrakoDocument(json_tree=tree, binary_buffers=[buffer])
    return TrakoDocument(json_tree=tree, binary_buffers=[])


def _view_bytes(doc: TrakoDocument, view_id) -> bytes:
    views = doc.json_tree.get("bufferViews", [])
    if not isinstance(view_id, int) or not 0 <= view_id < len(views):
        raise CorruptStream(f"bad bufferView index {view_id!r}")
    view = views[view_id]
    buf_id = view.get("buffer", 0)
    if not 0 <= buf_id < len(doc.binary_buffers):
        raise CorruptStream(f"bufferView {view_id} references missing buffer {buf_id}")
    data = doc.binary_buffers[buf_id]
    start = view.get("byteOffset", 0)
    end = start + view["byteLength"]
    if end > len(data):
        raise CorruptStream(f"bufferView {view_id} overruns its buffer")
    return data[start:end]


def _compressed_of(acc: dict) -> dict | None:
    ext = acc.get("extensions", {}).get(EXT_COMPRESSED)
    if ext is not None and ext.get("version") != EXTENSION_VERSION:
        raise UnsupportedExtensionVersion(
            f"{EXT_COMPRESSED} version {ext.get('version')!r} not supported"
        )
    return ext


def _rebuild_compressed(doc, ext) -> CompressedAttribute:
    payload = _view_bytes(doc, ext["bufferView"]) if "bufferView" in ext else b""
    try:
        params = QuantizationParams(
            bits=ext["bits"],
            min_values=tuple(ext["min_values"]),
            max_values=tuple(ext["max_values"]),
            components=ext["components"],
            count=ext["count"],
        )
        stages = tuple(ext["stages"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptStream(f"malformed {EXT_COMPRESSED} extension: {e}") from e
    return CompressedAttribute(
        payload=payload,
        params=params,
        stages=stages,
        declared_type=ext.get("declared_type", "float32"),
    )


def _raw_values(raw: bytes, dtype) -> np.ndarray:
    """Reinterpret hostile bytes, quietly: signaling NaNs in corrupt
    payloads would otherwise raise FPU warnings during the widening cast."""
    try:
        with np.errstate(invalid="ignore"):
            return np.frombuffer(raw, dtype=dtype).astype(np.float64)
    except ValueError as e:
        raise CorruptStream(f"raw payload does not tile as {dtype}: {e}") from e


def _accessor(doc, acc_id) -> dict:
    accessors = doc.json_tree.get("accessors", [])
    if not isinstance(acc_id, int) or not 0 <= acc_id < len(accessors):
        raise CorruptStream(f"bad accessor index {acc_id!r}")
    return accessors[acc_id]


def _read_attribute(doc, acc_id):
    """Decode one attribute accessor -> (float64 values, dims, declared_type)."""
    acc = _accessor(doc, acc_id)
    ext = _compressed_of(acc)
    if ext is not None:
        ca = _rebuild_compressed(doc, ext)
        return decode_attribute(ca), ca.params.components, ca.declared_type
    extras = acc.get("extras", {})
    declared_type = extras.get("declared_type", "float32")
    dims = int(extras.get("components", _TYPE_COUNTS.get(acc.get("type", "SCALAR"), 1)))
    if declared_type not in DECLARED_DTYPES:
        raise CorruptStream(f"unknown declared_type {declared_type!r}")
    raw = _view_bytes(doc, acc["bufferView"]) if "bufferView" in acc else b""
    values = _raw_values(raw, DECLARED_DTYPES[declared_type])
    expected = extras.get("count")
    if expected is not None and values.size != int(expected) * dims:
        raise CorruptStream(
            f"accessor {acc_id}: {values.size} stored values, expected {expected} x {dims}"
        )
    return values, dims, declared_type


def parse_document(doc: TrakoDocument) -> Tractogram:
    """Inverse of :func:`build_document`."""
    try:
        return _parse_document(doc)
    except (KeyError, IndexError, TypeError, AttributeError, ValueError) as e:
        # an arbitrarily corrupted tree must never escape as a raw crash
        raise CorruptStream(f"malformed document tree: {type(e).__name__}: {e}") from e


def _parse_document(doc: TrakoDocument) -> Tractogram:
    tree = doc.json_tree
    mesh_ext = None
    mesh = None
    meshes = tree.get("meshes", [])
    if not isinstance(meshes, list):
        raise NotATrakoFile("glTF meshes entry is not a list")
    for mesh in meshes:
        if not isinstance(mesh, dict):
            continue
        extensions = mesh.get("extensions", {})
        mesh_ext = extensions.get(EXT_TRACTOGRAM) if isinstance(extensions, dict) else None
        if mesh_ext is not None:
            break
    if mesh_ext is None:
        raise NotATrakoFile(f"no mesh carries the {EXT_TRACTOGRAM} extension")
    if mesh_ext.get("version") != EXTENSION_VERSION:
        raise UnsupportedExtensionVersion(
            f"{EXT_TRACTOGRAM} version {mesh_ext.get('version')!r} not supported"
        )

    try:
        pos_id = mesh["primitives"][0]["attributes"]["POSITION"]
    except (KeyError, IndexError, TypeError):
        raise NotATrakoFile("mesh primitive has no POSITION attribute") from None
    pos_acc = _accessor(doc, pos_id)
    ext = _compressed_of(pos_acc)
    if ext is not None:
        vertices = decode_attribute(_rebuild_compressed(doc, ext))
    else:
        raw = _view_bytes(doc, pos_acc["bufferView"]) if "bufferView" in pos_acc else b""
        vertices = _raw_values(raw, "<f4")
    if vertices.size % 3:
        raise CorruptStream("POSITION payload is not a whole number of triplets")
    vertices = vertices.reshape(-1, 3)
    if vertices.size and not np.isfinite(vertices).all():
        raise CorruptStream("non-finite restored vertex")

    if "offsets" not in mesh_ext:
        raise CorruptStream(f"{EXT_TRACTOGRAM} extension lacks the offsets accessor")
    off_acc = _accessor(doc, mesh_ext["offsets"])
    ext = _compressed_of(off_acc)
    if ext is not None:
        offsets = decode_offsets(_rebuild_compressed(doc, ext))
    else:
        raw = _view_bytes(doc, off_acc["bufferView"]) if "bufferView" in off_acc else b""
        offsets = _raw_values(raw, "<u4").astype(np.int64)
    if len(offsets) == 0 or offsets[0] != 0 or offsets[-1] != len(vertices):
        raise CorruptStream("restored offsets do not cover the vertex array")
    if len(offsets) > 1 and (np.diff(offsets) <= 0).any():
        raise CorruptStream("restored offsets are not strictly increasing")

    n, s = len(vertices), len(offsets) - 1
    vertex_scalars = {}
    for name, acc_id in mesh_ext.get("vertex_scalars", {}).items():
        values, dims, declared_type = _read_attribute(doc, acc_id)
        if values.size != n * dims:
            raise CorruptStream(f"scalar field {name!r} has {values.size} values, expected {n * dims}")
        vertex_scalars[name] = ScalarField(dims, values, declared_type)
    fiber_properties = {}
    for name, acc_id in mesh_ext.get("fiber_properties", {}).items():
        values, dims, declared_type = _read_attribute(doc, acc_id)
        if values.size != s * dims:
            raise CorruptStream(f"property field {name!r} has {values.size} values, expected {s * dims}")
        fiber_properties[name] = PropertyField(dims, values, declared_type)

    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        vertex_scalars=vertex_scalars,
        fiber_properties=fiber_properties,
        metadata={str(k): str(v) for k, v in mesh_ext.get("metadata", {}).items()},
        space=str(mesh_ext.get("space", "unknown")),
    )


def write_tko_json(doc: TrakoDocument) -> bytes:
    """Serialize as glTF JSON with base64 data-URI buffers (deterministic)."""
    tree = dict(doc.json_tree)
    if doc.binary_buffers:
        tree["buffers"] = [
            {
                "byteLength": len(data),
                "uri": _DATA_URI_PREFIX + base64.b64encode(data).decode("ascii"),
            }
            for data in doc.binary_buffers
        ]
    return json.dumps(tree, separators=(",", ":")).encode("utf-8")


def read_tko_json(data: bytes) -> TrakoDocument:
    try:
        tree = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedJson(f"not a JSON document: {e}") from e
    if not isinstance(tree, dict) or "asset" not in tree:
        raise MalformedJson("JSON document lacks a glTF 'asset' object")
    buffers = []
    try:
        for i, buf in enumerate(tree.get("buffers", [])):
            uri = buf.get("uri")
            if uri is None:
                raise MalformedJson(f"buffer {i} has no embedded data URI")
            if not isinstance(uri, str) or not uri.startswith(_DATA_URI_PREFIX):
                raise MalformedJson(f"buffer {i} is not an embedded octet-stream data URI")
            try:
                blob = base64.b64decode(uri[len(_DATA_URI_PREFIX) :], validate=True)
            except Exception as e:
                raise MalformedJson(f"buffer {i}: bad base64 payload: {e}") from e
            if len(blob) != buf.get("byteLength", len(blob)):
                raise MalformedJson(f"buffer {i}: byteLength disagrees with payload")
            buffers.append(blob)
            buf.pop("uri")
    except (TypeError, AttributeError) as e:
        raise MalformedJson(f"malformed buffers entry: {e}") from e
    return TrakoDocument(json_tree=tree, binary_buffers=buffers)


def _pad(data: bytes, fill: bytes) -> bytes:
    return data + fill * ((-len(data)) % 4)


def write_tko_binary(doc: TrakoDocument) -> bytes:
    """Serialize as GLB: header, space-padded JSON chunk, one BIN chunk."""
    if len(doc.binary_buffers) > 1:
        raise ContainerError("GLB can embed a single buffer only")
    json_chunk = _pad(write_tko_json_tree_only(doc), b" ")
    chunks = [struct.pack("<II", len(json_chunk), _CHUNK_JSON), json_chunk]
    if doc.binary_buffers:
        bin_chunk = _pad(doc.binary_buffers[0], b"\x00")
        chunks += [struct.pack("<II", len(bin_chunk), _CHUNK_BIN), bin_chunk]
    body = b"".join(chunks)
    header = GLB_MAGIC + struct.pack("<II", 2, 12 + len(body))
    return header + body


def write_tko_json_tree_only(doc: TrakoDocument) -> bytes:
    """The JSON chunk of the GLB form: buffer 0 has byteLength but no URI."""
    tree = dict(doc.json_tree)
    if doc.binary_buffers:
        tree["buffers"] = [{"byteLength": len(doc.binary_buffers[0])}]
    return json.dumps(tree, separators=(",", ":")).encode("utf-8")


def read_tko_binary(data: bytes) -> TrakoDocument:
    if len(data) < 12:
        raise TruncatedFile("shorter than the 12-byte GLB header")
    if data[:4] != GLB_MAGIC:
        raise BadMagic("missing glTF magic")
    version, total = struct.unpack("<II", data[4:12])
    if version != 2:
        raise BadMagic(f"unsupported GLB container version {version}")
    if total > len(data):
        raise TruncatedFile(f"header declares {total} bytes, file holds {len(data)}")
    if total < len(data):
        raise ChunkLengthMismatch(f"{len(data) - total} trailing bytes after declared length")

    pos = 12
    tree = None
    bin_chunk = None
    while pos < total:
        if pos + 8 > total:
            raise TruncatedFile("EOF inside a chunk header")
        length, ctype = struct.unpack("<II", data[pos : pos + 8])
        pos += 8
        if pos + length > total:
            raise ChunkLengthMismatch("chunk overruns the declared file length")
        chunk = data[pos : pos + length]
        pos += length
        if ctype == _CHUNK_JSON:
            if tree is not None:
                raise ChunkLengthMismatch("more than one JSON chunk")
            try:
                tree = json.loads(chunk.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise MalformedJson(f"bad JSON chunk: {e}") from e
        elif ctype == _CHUNK_BIN:
            if bin_chunk is not None:
                raise ChunkLengthMismatch("more than one BIN chunk")
            bin_chunk = chunk
        # unknown chunk types are skipped per the GLB spec

    if tree is None:
        raise MalformedJson("GLB file has no JSON chunk")
    if not isinstance(tree, dict) or "asset" not in tree:
        raise MalformedJson("JSON chunk lacks a glTF 'asset' object")
    buffers = []
    declared = tree.get("buffers", [])
    if declared:
        try:
            if bin_chunk is None:
                raise ChunkLengthMismatch("JSON declares a buffer but there is no BIN chunk")
            want = declared[0].get("byteLength", len(bin_chunk))
            if not isinstance(want, int) or want > len(bin_chunk):
                raise ChunkLengthMismatch("buffer byteLength exceeds the BIN chunk")
        except (TypeError, AttributeError, IndexError, KeyError) as e:
            raise ChunkLengthMismatch(f"malformed buffers entry: {e}") from e
        buffers.append(bin_chunk[:want])
    return TrakoDocument(json_tree=tree, binary_buffers=buffers)


def check_document(doc: TrakoDocument) -> list[str]:
    """Structural glTF 2.0 core checks; empty list means clean.

    This is the in-process sanity net; release corpora are additionally
    run through the Khronos validator.
    """
    problems = []
    tree = doc.json_tree
    asset = tree.get("asset")
    if not isinstance(asset, dict) or asset.get("version") != "2.0":
        problems.append("asset.version must be '2.0'")
    if EXT_TRACTOGRAM not in tree.get("extensionsUsed", []):
        problems.append(f"extensionsUsed lacks {EXT_TRACTOGRAM}")

    buffers = tree.get("buffers", [])
    for i, buf in enumerate(buffers):
        actual = len(doc.binary_buffers[i]) if i < len(doc.binary_buffers) else None
        if actual is None:
            problems.append(f"buffer {i} has no binary payload")
        elif buf.get("byteLength") != actual:
            problems.append(f"buffer {i} byteLength {buf.get('byteLength')} != {actual}")

    views = tree.get("bufferViews", [])
    for i, view in enumerate(views):
        if view.get("byteLength", 0) < 1:
            problems.append(f"bufferView {i} has zero byteLength")
        b = view.get("buffer", -1)
        if not 0 <= b < len(doc.binary_buffers):
            problems.append(f"bufferView {i} references missing buffer {b}")
        elif view.get("byteOffset", 0) + view.get("byteLength", 0) > len(doc.binary_buffers[b]):
            problems.append(f"bufferView {i} overruns buffer {b}")

    for i, acc in enumerate(tree.get("accessors", [])):
        ctype = acc.get("componentType")
        tcount = _TYPE_COUNTS.get(acc.get("type"))
        if ctype not in _COMPONENT_SIZES or tcount is None:
            problems.append(f"accessor {i} has unknown componentType/type")
            continue
        if "bufferView" in acc:
            v = acc["bufferView"]
            if not 0 <= v < len(views):
                problems.append(f"accessor {i} references missing bufferView {v}")
                continue
            need = acc.get("count", 0) * _COMPONENT_SIZES[ctype] * tcount
            if need + acc.get("byteOffset", 0) > views[v].get("byteLength", 0):
                problems.append(f"accessor {i} overruns bufferView {v}")

    for mesh in tree.get("meshes", []):
        for prim in mesh.get("primitives", []):
            pos = prim.get("attributes", {}).get("POSITION")
            if pos is None:
                problems.append("mesh primitive lacks POSITION")
                continue
            acc = tree.get("accessors", [])[pos]
            if len(acc.get("min", [])) != 3 or len(acc.get("max", [])) != 3:
                problems.append("POSITION accessor lacks 3-component min/max")
    return problems
