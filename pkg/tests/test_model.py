import os

import numpy as np
import pytest

from tko.generate import generate_tractogram
from tko.model import PropertyField, ScalarField, Tractogram, stats, validate


def test_validate_clean_tractogram():
    t = Tractogram(vertices=np.zeros((5, 3)), offsets=[0, 3, 5])
    assert validate(t) == []


def test_validate_nonincreasing_offsets():
    t = Tractogram(vertices=np.zeros((5, 3)), offsets=[0, 5, 3])
    violations = validate(t)
    assert any(v.invariant == "offsets-increasing" and v.index == 2 for v in violations)


def test_validate_scalar_length_mismatch():
    t = Tractogram(
        vertices=np.zeros((5, 3)),
        offsets=[0, 5],
        vertex_scalars={"FA": ScalarField(1, np.zeros(4))},
    )
    violations = validate(t)
    assert len(violations) == 1
    assert violations[0].invariant == "scalar-length"
    assert violations[0].field_name == "FA"


def test_validate_bad_start_end_and_nonfinite():
    t = Tractogram(vertices=[[0, 0, 0], [np.nan, 0, 0]], offsets=[1, 3])
    names = {v.invariant for v in validate(t)}
    assert {"offsets-start", "offsets-end", "vertices-finite"} <= names


def test_validate_property_length_and_dims():
    t = Tractogram(
        vertices=np.zeros((4, 3)),
        offsets=[0, 2, 4],
        fiber_properties={"p": PropertyField(2, np.zeros(3))},
    )
    assert any(v.invariant == "property-length" for v in validate(t))


def test_stats_single_streamline():
    t = Tractogram(vertices=[[0, 0, 0], [1, 0, 0]], offsets=[0, 2])
    s = stats(t)
    assert s.streamline_count == 1
    assert s.vertex_count == 2
    assert s.bbox_min == (0.0, 0.0, 0.0)
    assert s.bbox_max == (1.0, 0.0, 0.0)
    assert s.single_point_streamlines == 0


def test_stats_synthetic_walks():
    t = generate_tractogram(streamlines=100, points=50, seed=3)
    s = stats(t)
    assert s.streamline_count == 100
    assert s.vertex_count == 5000


def test_stats_attribute_ranges():
    t = Tractogram(
        vertices=np.zeros((3, 3)),
        offsets=[0, 3],
        vertex_scalars={"u": ScalarField(1, [2.0, -1.0, 5.0], "float32")},
        fiber_properties={"c": PropertyField(1, [7.0], "int32")},
    )
    s = stats(t)
    assert s.attributes["u"].minimum == -1.0
    assert s.attributes["u"].maximum == 5.0
    assert s.attributes["u"].kind == "vertex_scalar"
    assert s.attributes["c"].declared_type == "int32"


def test_stats_counts_single_point_streamlines():
    t = Tractogram(vertices=np.zeros((3, 3)), offsets=[0, 1, 3])
    assert stats(t).single_point_streamlines == 1


def test_empty_tractogram_is_valid():
    t = Tractogram(vertices=np.empty((0, 3)), offsets=[0])
    assert validate(t) == []
    s = stats(t)
    assert s.streamline_count == 0 and s.vertex_count == 0
    assert s.bbox_min is None


def test_tractogram_is_immutable():
    t = Tractogram(vertices=np.zeros((2, 3)), offsets=[0, 2])
    with pytest.raises(ValueError):
        t.vertices[0, 0] = 1.0
    with pytest.raises(ValueError):
        t.offsets[0] = 5


def test_tractogram_equality():
    a = Tractogram(vertices=np.zeros((2, 3)), offsets=[0, 2], metadata={"k": "v"})
    b = Tractogram(vertices=np.zeros((2, 3)), offsets=[0, 2], metadata={"k": "v"})
    c = Tractogram(vertices=np.ones((2, 3)), offsets=[0, 2], metadata={"k": "v"})
    assert a == b
    assert a != c


def test_from_streamlines_builder():
    t = Tractogram.from_streamlines([np.zeros((2, 3)), np.ones((3, 3))])
    assert t.streamline_count == 2
    assert list(t.lengths) == [2, 3]
    assert np.array_equal(t.streamline(1), np.ones((3, 3)))


@pytest.mark.skipif(
    not os.environ.get("TKO_DATASET_DIR"),
    reason="reference datasets not available (set TKO_DATASET_DIR)",
)
def test_stats_hcp_tracts_golden():
    from tko.io_formats import read_file

    path = os.path.join(os.environ["TKO_DATASET_DIR"], "hcp_tracts.tck")
    s = stats(read_file(path))
    assert s.streamline_count == 7410
    assert s.vertex_count == 364002
