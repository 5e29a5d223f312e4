import numpy as np
import pytest

from tko.model import DECLARED_DTYPES, PropertyField, ScalarField, Tractogram


def make_tractogram(
    rng,
    max_streamlines=8,
    max_points=12,
    scalar_specs=(),
    property_specs=(),
    coord_scale=100.0,
):
    """Random valid tractogram with float32-representable coordinates.

    ``scalar_specs``/``property_specs`` are (dims, declared_type) pairs;
    float-typed fields are rounded to their declared grid so that every
    file format can reproduce them exactly.
    """
    s = int(rng.integers(1, max_streamlines + 1))
    lengths = rng.integers(1, max_points + 1, s)
    n = int(lengths.sum())
    vertices = (
        rng.uniform(-coord_scale, coord_scale, (n, 3)).astype(np.float32).astype(np.float64)
    )
    offsets = np.concatenate([[0], np.cumsum(lengths)])

    def field_values(dims, declared_type, count):
        if declared_type.startswith("float"):
            vals = rng.uniform(-1000.0, 1000.0, count * dims)
            if declared_type == "float32":
                vals = vals.astype(np.float32).astype(np.float64)
            return vals
        info = np.iinfo(DECLARED_DTYPES[declared_type])
        lo, hi = max(info.min, -100), min(info.max, 100)
        return rng.integers(lo, hi + 1, count * dims).astype(np.float64)

    vertex_scalars = {
        f"vs{i}_{dt}": ScalarField(dims, field_values(dims, dt, n), dt)
        for i, (dims, dt) in enumerate(scalar_specs)
    }
    fiber_properties = {
        f"fp{i}_{dt}": PropertyField(dims, field_values(dims, dt, s), dt)
        for i, (dims, dt) in enumerate(property_specs)
    }
    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        vertex_scalars=vertex_scalars,
        fiber_properties=fiber_properties,
    )


def assert_same_data(a, b, geometry_only=False, vertex_tol=0.0):
    """Topology exactly; coordinates and fields exactly unless a
    tolerance is given.  Metadata and space tags are format-owned and
    not compared here."""
    assert np.array_equal(a.offsets, b.offsets), "offsets differ"
    if vertex_tol:
        assert np.abs(a.vertices - b.vertices).max(initial=0.0) <= vertex_tol
    else:
        assert np.array_equal(a.vertices, b.vertices), "vertices differ"
    if geometry_only:
        return
    assert list(a.vertex_scalars) == list(b.vertex_scalars)
    assert list(a.fiber_properties) == list(b.fiber_properties)
    for name, fa in a.vertex_scalars.items():
        fb = b.vertex_scalars[name]
        assert (fa.dims, fa.declared_type) == (fb.dims, fb.declared_type), name
        assert np.array_equal(fa.values, fb.values), name
    for name, fa in a.fiber_properties.items():
        fb = b.fiber_properties[name]
        assert (fa.dims, fa.declared_type) == (fb.dims, fb.declared_type), name
        assert np.array_equal(fa.values, fb.values), name


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
