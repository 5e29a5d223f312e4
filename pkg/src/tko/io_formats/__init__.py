"""Tractography file formats: detection plus read/write dispatch.

Readers normalize on parse (sentinels stripped, empty streamlines
dropped), so any tractogram they return passes ``model.validate`` with
no violations.  All parsers are stateless single-pass functions.
"""
from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

from ..errors import UnknownFormat
from .tck import read_tck, write_tck
from .trk import read_trk, write_trk
from .vtk import read_vtk, write_vtk

__all__ = [
    "FormatTag",
    "detect_format",
    "read_data",
    "read_file",
    "write_data",
    "write_file",
    "read_tck",
    "write_tck",
    "read_trk",
    "write_trk",
    "read_vtk",
    "write_vtk",
]


class FormatTag(Enum):
    TCK = "tck"
    TRK = "trk"
    VTK_LEGACY_ASCII = "vtk-ascii"
    VTK_LEGACY_BINARY = "vtk-binary"
    TKO_JSON = "tko-json"
    TKO_BINARY = "tko-binary"


_EXTENSION_HINTS = {
    ".tck": FormatTag.TCK,
    ".trk": FormatTag.TRK,
    ".vtk": FormatTag.VTK_LEGACY_ASCII,
    ".tko": FormatTag.TKO_JSON,
    ".glb": FormatTag.TKO_BINARY,
}


def _vtk_mode(leading: bytes) -> FormatTag:
    # the mode keyword sits on the third line; fall back to ASCII
    head = leading[:4096].upper()
    if b"\nBINARY" in head:
        return FormatTag.VTK_LEGACY_BINARY
    return FormatTag.VTK_LEGACY_ASCII


def detect_format(leading_bytes: bytes, filename_hint: str = "") -> FormatTag:
    """Classify a file from its leading bytes (>= 16 recommended).

    Content rules win; the filename extension only breaks remaining
    ties.  Raises :class:`UnknownFormat` when nothing matches.
    """
    b = bytes(leading_bytes)
    if b.startswith(b"mrtrix tracks"):
        return FormatTag.TCK
    if b.startswith(b"TRACK"):
        return FormatTag.TRK
    if b.startswith(b"# vtk DataFile"):
        return _vtk_mode(b)
    if b.startswith(b"glTF"):
        return FormatTag.TKO_BINARY
    stripped = b.lstrip()
    if stripped.startswith(b"{"):
        try:
            tree = json.loads(b.decode("utf-8"))
            if isinstance(tree, dict) and "asset" in tree:
                return FormatTag.TKO_JSON
        except (UnicodeDecodeError, json.JSONDecodeError):
            if b'"asset"' in b:
                return FormatTag.TKO_JSON
    hint = _EXTENSION_HINTS.get(Path(filename_hint).suffix.lower()) if filename_hint else None
    if hint is not None:
        return hint
    raise UnknownFormat("no format rule matched", path=filename_hint or None)


def read_data(data: bytes, tag: FormatTag):
    """Parse raw bytes of a tractography file (not .tko containers)."""
    if tag is FormatTag.TCK:
        return read_tck(data)
    if tag is FormatTag.TRK:
        return read_trk(data)
    if tag in (FormatTag.VTK_LEGACY_ASCII, FormatTag.VTK_LEGACY_BINARY):
        return read_vtk(data)
    raise UnknownFormat(f"no tractogram reader for {tag.value}")


def write_data(t, tag: FormatTag) -> bytes:
    if tag is FormatTag.TCK:
        return write_tck(t)
    if tag is FormatTag.TRK:
        return write_trk(t)
    if tag is FormatTag.VTK_LEGACY_ASCII:
        return write_vtk(t, mode="ascii")
    if tag is FormatTag.VTK_LEGACY_BINARY:
        return write_vtk(t, mode="binary")
    raise UnknownFormat(f"no tractogram writer for {tag.value}")


def read_file(path):
    """Read any supported file (including .tko containers) as a tractogram."""
    from ..container import parse_document, read_tko_binary, read_tko_json

    data = Path(path).read_bytes()
    tag = detect_format(data[:4096] if len(data) > 4096 else data, str(path))
    if tag is FormatTag.TKO_JSON:
        return parse_document(read_tko_json(data))
    if tag is FormatTag.TKO_BINARY:
        return parse_document(read_tko_binary(data))
    try:
        return read_data(data, tag)
    except Exception as e:
        if hasattr(e, "path") and getattr(e, "path", None) is None:
            e.path = str(path)
        raise


def write_file(t, path, tag: FormatTag):
    Path(path).write_bytes(write_data(t, tag))
