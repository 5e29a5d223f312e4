"""Command-line tools: trakofy, untrakofy, tkompare, and gen.

Exit codes are stable: 0 success, 1 parse/corrupt-file failure (stderr
names the file, format, and byte offset when known), 2 bad flags,
3 lossy conversion refused under --strict, 4 topology mismatch.
"""
from __future__ import annotations

import functools
import json
import sys
import time
import warnings
from pathlib import Path

import click

from .codec import CodecConfig
from .container import (
    build_document,
    parse_document,
    read_tko_binary,
    read_tko_json,
    write_tko_binary,
    write_tko_json,
)
from .errors import (
    CodecError,
    ContainerError,
    FormatError,
    LossyConversionRefused,
    MetricsError,
    StreamlineCountMismatch,
    TopologyMismatch,
)
from .generate import generate_tractogram
from .io_formats import FormatTag, detect_format, read_data, write_data
from .metrics import DEFAULT_BINS, compare
from .model import Tractogram, stats

_TKO_TAGS = (FormatTag.TKO_JSON, FormatTag.TKO_BINARY)
_OUTPUT_FORMATS = {
    "tck": FormatTag.TCK,
    "trk": FormatTag.TRK,
    "vtk": FormatTag.VTK_LEGACY_BINARY,
    "vtk-ascii": FormatTag.VTK_LEGACY_ASCII,
}


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TopologyMismatch, StreamlineCountMismatch) as e:
            _fail(4, f"topology mismatch: {e}")
        except LossyConversionRefused as e:
            _fail(3, str(e))
        except (FormatError, ContainerError, CodecError, MetricsError, ValueError) as e:
            _fail(1, str(e))
        except OSError as e:
            _fail(1, str(e))

    return wrapper


def _read_input(path: str):
    data = Path(path).read_bytes()
    try:
        tag = detect_format(data[:4096], path)
    except FormatError as e:
        e.path = path
        raise
    return data, tag


def _parse_tractogram(path: str) -> Tractogram:
    data, tag = _read_input(path)
    if tag in _TKO_TAGS:
        doc = read_tko_json(data) if tag is FormatTag.TKO_JSON else read_tko_binary(data)
        return parse_document(doc)
    try:
        return read_data(data, tag)
    except FormatError as e:
        e.path = path
        raise


def _echo_warnings(caught):
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)


@click.group()
@click.version_option(version="0.1.0", prog_name="tko")
def main():
    """Compressed tractography containers (.tko)."""


@main.command(name="trakofy")
@click.argument("input_path", metavar="INPUT")
@click.option("-o", "--output", metavar="PATH", help="Output file [default: INPUT with .tko suffix].")
@click.option("--bits", type=click.IntRange(1, 31), default=14, show_default=True,
              help="Quantization bits per component.")
@click.option("--level", type=click.IntRange(0, 10), default=10, show_default=True,
              help="Compression level (0 disables the DEFLATE stage).")
@click.option("--binary", is_flag=True, help="Write the GLB binary form instead of JSON.")
@click.option("--no-scalars", is_flag=True, help="Drop per-vertex scalar fields.")
@click.option("--no-properties", is_flag=True, help="Drop per-fiber property fields.")
@click.option("--uncompressed", is_flag=True, help="Store raw payloads (bit-exact restoration).")
@_guarded
def trakofy(input_path, output, bits, level, binary, no_scalars, no_properties, uncompressed):
    """Convert a TCK/TRK/VTK file into a .tko container."""
    data, tag = _read_input(input_path)
    if tag in _TKO_TAGS:
        _fail(1, f"{input_path} is already a .tko container")
    try:
        t = read_data(data, tag)
    except FormatError as e:
        e.path = input_path
        raise
    if no_scalars or no_properties:
        t = Tractogram(
            vertices=t.vertices,
            offsets=t.offsets,
            vertex_scalars={} if no_scalars else t.vertex_scalars,
            fiber_properties={} if no_properties else t.fiber_properties,
            metadata=t.metadata,
            space=t.space,
        )
    config = None if uncompressed else CodecConfig(bits=bits, compression_level=level)

    started = time.perf_counter()
    doc = build_document(t, config)
    blob = write_tko_binary(doc) if binary else write_tko_json(doc)
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    out_path = Path(output) if output else Path(input_path).with_suffix(".tko")
    out_path.write_bytes(blob)

    original = len(data)
    compressed = len(blob)
    ratio = 100.0 * (1.0 - compressed / original)
    factor = original / compressed
    click.echo(
        f"{input_path} ({original} B) -> {out_path} ({compressed} B)  "
        f"ratio {ratio:.2f}%  factor {factor:.3f}x  {elapsed_ms:.0f} ms"
    )


@main.command(name="untrakofy")
@click.argument("input_path", metavar="INPUT.tko")
@click.option("-o", "--output", metavar="PATH", help="Output file [default: INPUT with format suffix].")
@click.option("--format", "fmt", type=click.Choice(sorted(_OUTPUT_FORMATS)), default="tck",
              show_default=True, help="Target tractography format.")
@click.option("--strict", is_flag=True,
              help="Refuse (exit 3) instead of dropping fields the target format cannot hold.")
@_guarded
def untrakofy(input_path, output, fmt, strict):
    """Restore a .tko container to a tractography file."""
    data, tag = _read_input(input_path)
    if tag not in _TKO_TAGS:
        _fail(1, f"{input_path} is not a .tko container (detected {tag.value})")
    started = time.perf_counter()
    doc = read_tko_json(data) if tag is FormatTag.TKO_JSON else read_tko_binary(data)
    t = parse_document(doc)
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    target = _OUTPUT_FORMATS[fmt]
    dropped = list(t.vertex_scalars) + list(t.fiber_properties) if target is FormatTag.TCK else []
    if dropped and strict:
        raise LossyConversionRefused(
            f"TCK cannot hold attached fields ({', '.join(dropped)}); rerun without --strict to drop them",
            dropped=dropped,
        )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        blob = write_data(t, target)
    _echo_warnings(caught)

    suffix = ".vtk" if fmt.startswith("vtk") else f".{fmt}"
    out_path = Path(output) if output else Path(input_path).with_suffix(suffix)
    out_path.write_bytes(blob)
    click.echo(f"{input_path} -> {out_path} ({len(blob)} B)  decode {elapsed_ms:.0f} ms")


def _print_report(report, attribute_names):
    rows = [
        ("original size", f"{report.original_size} B"),
        ("compressed size", f"{report.compressed_size} B"),
        ("ratio", f"{report.ratio:.3f} %"),
        ("factor", f"{report.factor:.3f} x"),
    ]
    for label, stats_ in (("vertex error", report.vertex_errors), ("endpoint error", report.endpoint_errors)):
        rows.append(
            (label, f"min {stats_.min:.6g}  max {stats_.max:.6g}  mean {stats_.mean:.6g} +/- {stats_.std:.6g}")
        )
    for name in attribute_names:
        s = report.attribute_errors[name]
        rows.append((f"  {name}", f"mean {s.mean:.6g} +/- {s.std:.6g}  max {s.max:.6g}"))
    rows.append(("bhattacharyya", f"{report.bhattacharyya:.6f}"))
    if report.decode_ms is not None:
        rows.append(("decode", f"{report.decode_ms:.0f} ms"))
    width = max(len(r[0]) for r in rows)
    for label, value in rows:
        click.echo(f"{label.ljust(width)}  {value}")


@main.command(name="tkompare")
@click.argument("original", metavar="ORIGINAL")
@click.argument("restored", metavar="RESTORED")
@click.option("--bins", type=click.IntRange(2, None), default=DEFAULT_BINS, show_default=True,
              help="Histogram bins for the Bhattacharyya overlap score.")
@click.option("--report", "report_path", metavar="PATH", help="Also write the structured JSON report.")
@_guarded
def tkompare(original, restored, bins, report_path):
    """Compare a restored (or compressed) file against the original."""
    t_orig = _parse_tractogram(original)

    data, tag = _read_input(restored)
    decode_ms = None
    if tag in _TKO_TAGS:
        started = time.perf_counter()
        doc = read_tko_json(data) if tag is FormatTag.TKO_JSON else read_tko_binary(data)
        t_rest = parse_document(doc)
        decode_ms = (time.perf_counter() - started) * 1000.0
    else:
        try:
            t_rest = read_data(data, tag)
        except FormatError as e:
            e.path = restored
            raise

    report = compare(
        t_orig,
        t_rest,
        original_size=Path(original).stat().st_size,
        compressed_size=Path(restored).stat().st_size,
        bins=bins,
        decode_ms=decode_ms,
    )
    _print_report(report, list(report.attribute_errors))
    summary = stats(t_orig)
    if summary.single_point_streamlines:
        click.echo(f"single-point streamlines: {summary.single_point_streamlines}")
    if report_path:
        Path(report_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        click.echo(f"report written to {report_path}")


@main.command(name="gen")
@click.option("--streamlines", "-n", type=click.IntRange(1, None), default=100, show_default=True)
@click.option("--points", "-m", type=click.IntRange(1, None), default=50, show_default=True,
              help="Vertices per streamline.")
@click.option("--box", type=click.FloatRange(1.0, None), default=100.0, show_default=True,
              help="Bounding box edge length in millimeters.")
@click.option("--scalars", type=click.IntRange(0, None), default=0, show_default=True,
              help="Number of per-vertex scalar fields.")
@click.option("--properties", type=click.IntRange(0, None), default=0, show_default=True,
              help="Number of per-fiber property fields.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(sorted(_OUTPUT_FORMATS)), default="trk",
              show_default=True)
@click.option("-o", "--output", metavar="PATH", required=True)
@_guarded
def gen(streamlines, points, box, scalars, properties, seed, fmt, output):
    """Write a deterministic synthetic tractogram for evaluation."""
    if fmt == "tck" and (scalars or properties):
        raise click.UsageError("TCK cannot hold scalar/property fields; use trk or vtk")
    t = generate_tractogram(
        streamlines=streamlines,
        points=points,
        box=box,
        scalars=scalars,
        properties=properties,
        seed=seed,
        float64_fields=fmt.startswith("vtk"),
    )
    blob = write_data(t, _OUTPUT_FORMATS[fmt])
    Path(output).write_bytes(blob)
    click.echo(
        f"wrote {output} ({len(blob)} B): {t.streamline_count} streamlines, "
        f"{t.vertex_count} vertices, {len(t.vertex_scalars)} scalars, "
        f"{len(t.fiber_properties)} properties, seed {seed}"
    )


if __name__ == "__main__":
    main()
