import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_tractogram
from tko.codec import CodecConfig
from tko.container import (
    EXT_COMPRESSED,
    EXT_TRACTOGRAM,
    TrakoDocument,
    build_document,
    check_document,
    parse_document,
    read_tko_binary,
    read_tko_json,
    write_tko_binary,
    write_tko_json,
)
from tko.errors import (
    BadMagic,
    ChunkLengthMismatch,
    CorruptStream,
    MalformedJson,
    NotATrakoFile,
    TruncatedFile,
    UnsupportedExtensionVersion,
)
from tko.model import PropertyField, ScalarField, Tractogram

CFG = CodecConfig(bits=14)


def small_tractogram():
    fa = np.array([0.1, 0.2, 0.3, 0.4, 0.5], np.float32).astype(np.float64)
    return Tractogram(
        vertices=np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [5, 5, 5], [6, 6, 6]], float),
        offsets=[0, 3, 5],
        vertex_scalars={
            "fa": ScalarField(1, fa, "float32"),
            "tensor": ScalarField(9, np.arange(45.0), "float32"),
        },
        fiber_properties={"cluster": PropertyField(1, [3.0, 7.0], "int32")},
        metadata={"origin": "synthetic", "note": "two streamlines"},
        space="world",
    )


class TestBuild:
    def test_accessor_counting(self):
        # POSITION + offsets + 2 scalars + 1 property
        doc = build_document(small_tractogram(), CFG)
        assert len(doc.json_tree["accessors"]) == 5

    def test_document_shape(self):
        doc = build_document(small_tractogram(), CFG)
        tree = doc.json_tree
        assert tree["asset"]["version"] == "2.0"
        assert EXT_TRACTOGRAM in tree["extensionsUsed"]
        assert EXT_COMPRESSED in tree["extensionsUsed"]
        mesh = tree["meshes"][0]
        prim = mesh["primitives"][0]
        assert prim["attributes"]["POSITION"] == 0
        ext = mesh["extensions"][EXT_TRACTOGRAM]
        assert set(ext["vertex_scalars"]) == {"fa", "tensor"}
        assert set(ext["fiber_properties"]) == {"cluster"}
        assert ext["metadata"]["origin"] == "synthetic"

    def test_position_minmax_is_bounding_box(self):
        doc = build_document(small_tractogram(), CFG)
        pos = doc.json_tree["accessors"][0]
        assert pos["type"] == "VEC3" and pos["componentType"] == 5126
        assert pos["min"] == [0.0, 0.0, 0.0]
        assert pos["max"] == [6.0, 6.0, 6.0]

    def test_uncompressed_mode_has_no_compression_extension(self):
        doc = build_document(small_tractogram(), None)
        tree = doc.json_tree
        assert tree["extensionsUsed"] == [EXT_TRACTOGRAM]
        assert json.dumps(tree).find(EXT_COMPRESSED) < 0

    def test_empty_tractogram_builds_valid_document(self):
        for cfg in (None, CFG):
            doc = build_document(Tractogram(np.empty((0, 3)), [0]), cfg)
            assert check_document(doc) == []
            t = parse_document(doc)
            assert t.vertex_count == 0 and t.streamline_count == 0

    def test_internal_checks_clean(self):
        for cfg in (None, CFG):
            assert check_document(build_document(small_tractogram(), cfg)) == []


class TestParse:
    def test_round_trip_restores_everything_structural(self):
        t = small_tractogram()
        t2 = parse_document(build_document(t, CFG))
        assert np.array_equal(t.offsets, t2.offsets)
        assert t2.metadata == t.metadata
        assert t2.space == "world"
        assert list(t2.vertex_scalars) == ["fa", "tensor"]
        assert t2.vertex_scalars["fa"].declared_type == "float32"
        assert t2.vertex_scalars["tensor"].dims == 9
        # integer property takes the lossless path
        assert np.array_equal(t2.fiber_properties["cluster"].values, [3.0, 7.0])

    def test_uncompressed_round_trip_is_bit_exact(self):
        t = small_tractogram()
        assert parse_document(build_document(t, None)) == t

    def test_missing_extension_is_not_a_trako_file(self):
        doc = build_document(small_tractogram(), CFG)
        del doc.json_tree["meshes"][0]["extensions"]
        with pytest.raises(NotATrakoFile):
            parse_document(doc)

    def test_plain_gltf_is_not_a_trako_file(self):
        doc = TrakoDocument(json_tree={"asset": {"version": "2.0"}}, binary_buffers=[])
        with pytest.raises(NotATrakoFile):
            parse_document(doc)

    def test_unsupported_mesh_extension_version(self):
        doc = build_document(small_tractogram(), CFG)
        doc.json_tree["meshes"][0]["extensions"][EXT_TRACTOGRAM]["version"] = 2
        with pytest.raises(UnsupportedExtensionVersion):
            parse_document(doc)

    def test_unsupported_accessor_extension_version(self):
        doc = build_document(small_tractogram(), CFG)
        doc.json_tree["accessors"][0]["extensions"][EXT_COMPRESSED]["version"] = 99
        with pytest.raises(UnsupportedExtensionVersion):
            parse_document(doc)

    def test_corrupt_payload(self):
        doc = build_document(small_tractogram(), CFG)
        doc.binary_buffers[0] = b"\x00" * len(doc.binary_buffers[0])
        with pytest.raises(CorruptStream):
            parse_document(doc)

    def test_truncated_buffer(self):
        doc = build_document(small_tractogram(), CFG)
        doc.binary_buffers[0] = doc.binary_buffers[0][:4]
        with pytest.raises(CorruptStream):
            parse_document(doc)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([7, 10, 14]))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_error_bound(self, seed, bits):
        rng = np.random.default_rng(seed)
        t = make_tractogram(rng, scalar_specs=((2, "float32"),), property_specs=((1, "int32"),))
        t2 = parse_document(build_document(t, CodecConfig(bits=bits)))
        assert np.array_equal(t.offsets, t2.offsets)
        span = t.vertices.max(axis=0) - t.vertices.min(axis=0)
        bound = span / (2 * ((1 << bits) - 1))
        assert (np.abs(t2.vertices - t.vertices) <= bound + 1e-12).all()
        assert np.array_equal(
            t.fiber_properties["fp0_int32"].values, t2.fiber_properties["fp0_int32"].values
        )

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_uncompressed_round_trip_random(self, seed):
        rng = np.random.default_rng(seed)
        t = make_tractogram(
            rng,
            scalar_specs=((1, "float64"), (3, "int32")),
            property_specs=((10, "float64"), (1, "uint8")),
        )
        assert parse_document(build_document(t, None)) == t


class TestJsonForm:
    def test_write_read_identity(self):
        doc = build_document(small_tractogram(), CFG)
        data = write_tko_json(doc)
        doc2 = read_tko_json(data)
        assert parse_document(doc2) == parse_document(doc)

    def test_idempotent_serialization(self):
        doc = build_document(small_tractogram(), CFG)
        first = write_tko_json(doc)
        second = write_tko_json(read_tko_json(first))
        assert first == second

    def test_buffers_are_data_uris(self):
        tree = json.loads(write_tko_json(build_document(small_tractogram(), CFG)))
        assert tree["buffers"][0]["uri"].startswith("data:application/octet-stream;base64,")

    def test_malformed_json(self):
        with pytest.raises(MalformedJson):
            read_tko_json(b"{not json")

    def test_json_without_asset(self):
        with pytest.raises(MalformedJson):
            read_tko_json(b'{"buffers": []}')

    def test_external_buffer_uri_rejected(self):
        doc = build_document(small_tractogram(), CFG)
        tree = json.loads(write_tko_json(doc))
        tree["buffers"][0]["uri"] = "payload.bin"
        with pytest.raises(MalformedJson):
            read_tko_json(json.dumps(tree).encode())


class TestBinaryForm:
    def test_header_magic_and_version(self):
        data = write_tko_binary(build_document(small_tractogram(), CFG))
        assert data[:8].hex() == "676c544602000000"
        assert int.from_bytes(data[8:12], "little") == len(data)

    def test_four_byte_alignment(self):
        data = write_tko_binary(build_document(small_tractogram(), CFG))
        assert len(data) % 4 == 0

    def test_write_read_identity(self):
        doc = build_document(small_tractogram(), CFG)
        assert parse_document(read_tko_binary(write_tko_binary(doc))) == parse_document(doc)

    def test_idempotent_serialization(self):
        doc = build_document(small_tractogram(), CFG)
        first = write_tko_binary(doc)
        second = write_tko_binary(read_tko_binary(first))
        assert first == second

    def test_binary_smaller_than_json(self):
        doc = build_document(small_tractogram(), CFG)
        assert len(write_tko_binary(doc)) < len(write_tko_json(doc))

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            read_tko_binary(b"NOPE" + b"\x00" * 20)

    def test_truncated_file(self):
        data = write_tko_binary(build_document(small_tractogram(), CFG))
        with pytest.raises((TruncatedFile, ChunkLengthMismatch)):
            read_tko_binary(data[:-8])

    def test_trailing_garbage(self):
        data = write_tko_binary(build_document(small_tractogram(), CFG))
        with pytest.raises(ChunkLengthMismatch):
            read_tko_binary(data + b"\x00\x00\x00\x00")

    def test_short_header(self):
        with pytest.raises(TruncatedFile):
            read_tko_binary(b"glTF")

    def test_json_and_binary_decode_identically(self):
        doc = build_document(small_tractogram(), CFG)
        t_json = parse_document(read_tko_json(write_tko_json(doc)))
        t_glb = parse_document(read_tko_binary(write_tko_binary(doc)))
        assert t_json == t_glb


class TestCorruptionRobustness:
    """Random single-byte corruption must surface as a TkoError (or decode
    to some tractogram when the flip lands in slack bytes); it must never
    escape as an IndexError/KeyError/struct.error crash."""

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=120, deadline=None)
    def test_glb_byte_flips(self, seed):
        from tko.errors import TkoError

        rng = np.random.default_rng(seed)
        data = bytearray(write_tko_binary(build_document(small_tractogram(), CFG)))
        pos = int(rng.integers(0, len(data)))
        data[pos] ^= int(rng.integers(1, 256))
        try:
            t = parse_document(read_tko_binary(bytes(data)))
        except TkoError:
            return
        assert isinstance(t, Tractogram)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=120, deadline=None)
    def test_json_byte_flips(self, seed):
        from tko.errors import TkoError

        rng = np.random.default_rng(seed)
        data = bytearray(write_tko_json(build_document(small_tractogram(), CFG)))
        pos = int(rng.integers(0, len(data)))
        data[pos] ^= int(rng.integers(1, 256))
        try:
            t = parse_document(read_tko_json(bytes(data)))
        except TkoError:
            return
        assert isinstance(t, Tractogram)
