import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tko.errors import (
    EmptyTractogram,
    FieldMismatch,
    StreamlineCountMismatch,
    TopologyMismatch,
    ZeroCompressedSize,
    ZeroOriginalSize,
)
from tko.metrics import (
    ComparisonReport,
    ErrorStats,
    attribute_errors,
    bhattacharyya_overlap,
    compare,
    compression_factor,
    compression_ratio,
    endpoint_errors,
    pointwise_error_sum,
    pointwise_errors,
)
from tko.model import PropertyField, ScalarField, Tractogram


def walk(n, shift=0.0, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    verts = np.cumsum(rng.normal(0, 0.5, (n, 3)), axis=0) * scale + shift
    return Tractogram(vertices=verts, offsets=[0, n])


class TestSizes:
    def test_reference_ratio(self):
        # 16.55 MB -> 1.46 MB compresses away 91.18 percent
        assert 91.1 <= compression_ratio(16.55, 1.46) <= 91.3

    def test_reference_factor(self):
        assert 11.3 <= compression_factor(16.55, 1.46) <= 11.4

    def test_equal_sizes(self):
        assert compression_ratio(10, 10) == 0.0
        assert compression_factor(10, 10) == 1.0

    def test_halved(self):
        assert compression_ratio(10, 5) == 50.0
        assert compression_factor(10, 1) == 10.0

    def test_zero_guards(self):
        with pytest.raises(ZeroOriginalSize):
            compression_ratio(0, 1)
        with pytest.raises(ZeroCompressedSize):
            compression_factor(1, 0)

    @given(st.integers(1, 10**9), st.floats(-3.0, 3.0))
    def test_ratio_factor_identity(self, original, log_factor):
        # factors within 1e+/-3; beyond that 100 - C_r cancels below 1e-9
        compressed = max(original / 10.0**log_factor, 1e-6)
        ratio = compression_ratio(original, compressed)
        factor = compression_factor(original, compressed)
        assert factor == pytest.approx(100.0 / (100.0 - ratio), rel=1e-9)


class TestPointwise:
    def test_identical_is_zero(self):
        t = walk(50)
        stats = pointwise_errors(t, t)
        assert stats == ErrorStats(0.0, 0.0, 0.0, 0.0)

    def test_uniform_shift(self):
        t = walk(50)
        shifted = Tractogram(vertices=t.vertices + [0.1, 0.0, 0.0], offsets=t.offsets)
        stats = pointwise_errors(t, shifted)
        assert stats.min == pytest.approx(0.1)
        assert stats.max == pytest.approx(0.1)
        assert stats.mean == pytest.approx(0.1)
        assert stats.std == pytest.approx(0.0, abs=1e-12)

    def test_topology_mismatch(self):
        with pytest.raises(TopologyMismatch):
            pointwise_errors(walk(50), walk(49))

    def test_error_sum_is_vertexwise_l2_total(self):
        t = walk(10)
        shifted = Tractogram(vertices=t.vertices + [0.0, 0.2, 0.0], offsets=t.offsets)
        assert pointwise_error_sum(t, shifted) == pytest.approx(10 * 0.2)


class TestEndpoints:
    def test_identical_is_zero(self):
        t = walk(20)
        assert endpoint_errors(t, t).max == 0.0

    def test_endpoints_only(self):
        verts = np.zeros((4, 3))
        t = Tractogram(vertices=verts, offsets=[0, 4])
        moved = verts.copy()
        moved[1] = [9, 9, 9]  # interior vertex: endpoints unaffected
        t2 = Tractogram(vertices=moved, offsets=[0, 4])
        assert endpoint_errors(t, t2).max == 0.0
        assert pointwise_errors(t, t2).max > 0.0

    def test_single_point_streamline_counts_once(self):
        t = Tractogram(vertices=np.zeros((3, 3)), offsets=[0, 1, 3])
        t2 = Tractogram(vertices=np.ones((3, 3)), offsets=[0, 1, 3])
        stats = endpoint_errors(t, t2)
        # 1 endpoint for the singleton + 2 for the pair
        assert stats.mean == pytest.approx(np.sqrt(3.0))

    def test_streamline_count_mismatch(self):
        a = Tractogram(vertices=np.zeros((2, 3)), offsets=[0, 2])
        b = Tractogram(vertices=np.zeros((2, 3)), offsets=[0, 1, 2])
        with pytest.raises(StreamlineCountMismatch):
            endpoint_errors(a, b)

    def test_endpoint_max_below_pointwise_max(self):
        rng = np.random.default_rng(1)
        t = walk(100, seed=1)
        noisy = Tractogram(
            vertices=t.vertices + rng.normal(0, 0.01, t.vertices.shape), offsets=t.offsets
        )
        assert endpoint_errors(t, noisy).max <= pointwise_errors(t, noisy).max


class TestAttributes:
    def test_identical_fields_zero(self):
        t = Tractogram(
            vertices=np.zeros((2, 3)),
            offsets=[0, 2],
            vertex_scalars={"a": ScalarField(1, [1.0, 2.0])},
            fiber_properties={"b": PropertyField(2, [3.0, 4.0])},
        )
        out = attribute_errors(t, t)
        assert out["a"].max == 0.0
        assert out["b"].max == 0.0

    def test_absolute_differences(self):
        a = Tractogram(
            vertices=np.zeros((2, 3)), offsets=[0, 2],
            vertex_scalars={"s": ScalarField(1, [1.0, 5.0])},
        )
        b = Tractogram(
            vertices=np.zeros((2, 3)), offsets=[0, 2],
            vertex_scalars={"s": ScalarField(1, [2.0, 3.0])},
        )
        stats = attribute_errors(a, b)["s"]
        assert stats.min == 1.0 and stats.max == 2.0 and stats.mean == 1.5

    def test_name_mismatch(self):
        a = Tractogram(vertices=np.zeros((1, 3)), offsets=[0, 1],
                       vertex_scalars={"x": ScalarField(1, [0.0])})
        b = Tractogram(vertices=np.zeros((1, 3)), offsets=[0, 1],
                       vertex_scalars={"y": ScalarField(1, [0.0])})
        with pytest.raises(FieldMismatch):
            attribute_errors(a, b)


class TestBhattacharyya:
    def test_perfect_match(self):
        t = walk(500)
        assert bhattacharyya_overlap(t, t) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_supports(self):
        a = walk(300, shift=-50.0, seed=2)
        b = walk(300, shift=50.0, seed=3)
        assert bhattacharyya_overlap(a, b) == 0.0

    def test_symmetry(self):
        a = walk(200, seed=4)
        b = walk(200, shift=0.5, seed=5)
        assert bhattacharyya_overlap(a, b) == pytest.approx(bhattacharyya_overlap(b, a))

    def test_vertex_permutation_invariance(self):
        t = walk(200, seed=6)
        rng = np.random.default_rng(0)
        perm = rng.permutation(t.vertex_count)
        shuffled = Tractogram(vertices=t.vertices[perm], offsets=t.offsets)
        assert bhattacharyya_overlap(t, shuffled) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_axis(self):
        a = Tractogram(vertices=np.zeros((5, 3)), offsets=[0, 5])
        assert bhattacharyya_overlap(a, a) == 1.0

    def test_empty_rejected(self):
        e = Tractogram(vertices=np.empty((0, 3)), offsets=[0])
        with pytest.raises(EmptyTractogram):
            bhattacharyya_overlap(e, e)

    def test_bins_validated(self):
        t = walk(10)
        with pytest.raises(ValueError):
            bhattacharyya_overlap(t, t, bins=1)

    def test_in_unit_interval(self):
        a = walk(100, seed=7)
        b = walk(100, shift=0.3, seed=8)
        assert 0.0 <= bhattacharyya_overlap(a, b) <= 1.0


class TestCompare:
    def test_identical_report(self):
        t = walk(100)
        report = compare(t, t, original_size=1000, compressed_size=1000)
        assert report.ratio == 0.0
        assert report.factor == 1.0
        assert report.vertex_errors.max == 0.0
        assert report.endpoint_errors.max == 0.0
        assert report.bhattacharyya == pytest.approx(1.0, abs=1e-12)

    def test_report_serialization_round_trip(self):
        t = Tractogram(
            vertices=np.random.default_rng(0).normal(size=(30, 3)),
            offsets=[0, 10, 30],
            vertex_scalars={"fa": ScalarField(1, np.linspace(0, 1, 30))},
        )
        report = compare(t, t, original_size=500, compressed_size=100, encode_ms=12.5)
        blob = report.to_dict()
        assert set(blob) == {
            "original_size", "compressed_size", "ratio", "factor", "vertex_errors",
            "endpoint_errors", "attribute_errors", "bhattacharyya", "encode_ms", "decode_ms",
        }
        assert set(blob["vertex_errors"]) == {"min", "max", "mean", "std"}
        assert ComparisonReport.from_dict(blob) == report

    def test_propagates_topology_mismatch(self):
        with pytest.raises(TopologyMismatch):
            compare(walk(10), walk(11), original_size=1, compressed_size=1)
