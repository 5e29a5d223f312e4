"""Seeded synthetic tractogram generator for desk-scale evaluation.

Streamlines are cumulative sums of fixed-length 0.35 mm steps whose
direction performs a slow random walk on the unit sphere (curvature
radius on the order of tens of millimeters, like smooth fiber bundles).
Positions are clamped one percent inside the requested box, so the
coordinate range always sits strictly below the box edge, and rounded
to the float32 grid so written files reproduce the in-memory values
bit-exactly.  Identical seeds give identical tractograms.
"""
from __future__ import annotations

import numpy as np

from .model import PropertyField, ScalarField, Tractogram

STEP_LENGTH_MM = 0.35  # per-step displacement; always <= 1 mm
DIRECTION_DRIFT = 0.005  # sphere random-walk scale per step
BOX_INSET = 0.01  # walks stay within [inset, 1 - inset] * box


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def generate_tractogram(
    streamlines: int = 100,
    points: int = 50,
    box: float = 100.0,
    scalars: int = 0,
    properties: int = 0,
    seed: int = 0,
    float64_fields: bool = False,
) -> Tractogram:
    """Build a deterministic synthetic tractogram.

    ``scalars``/``properties`` attach that many per-vertex/per-fiber
    fields of cycling kinds (float32 dims 1, int32 labels, multi-dim
    float).  ``float64_fields`` switches the multi-dim kind to float64,
    which only VTK can serialize natively.
    """
    if streamlines < 1 or points < 1:
        raise ValueError("streamlines and points must be >= 1")
    rng = np.random.default_rng(seed)
    s, m = streamlines, points

    starts = rng.uniform(0.08 * box, 0.92 * box, (s, 1, 3))
    direction = _unit(rng.normal(size=(s, 3)))
    pts = np.empty((s, m, 3))
    pts[:, 0, :] = starts[:, 0, :]
    for k in range(1, m):
        direction = _unit(direction + DIRECTION_DRIFT * rng.normal(size=(s, 3)))
        pts[:, k, :] = pts[:, k - 1, :] + STEP_LENGTH_MM * direction
    np.clip(pts, BOX_INSET * box, (1.0 - BOX_INSET) * box, out=pts)

    vertices = pts.reshape(-1, 3).astype(np.float32).astype(np.float64)
    offsets = np.arange(0, s * m + 1, m, dtype=np.int64)
    n = len(vertices)

    multi_type = "float64" if float64_fields else "float32"
    vertex_scalars = {}
    for i in range(scalars):
        name = f"scalar_{i:02d}"
        kind = i % 3
        if kind == 0:
            vals = rng.uniform(0.0, 1.0, n).astype(np.float32).astype(np.float64)
            vertex_scalars[name] = ScalarField(1, vals, "float32")
        elif kind == 1:
            vals = rng.integers(0, 40, n).astype(np.float64)
            vertex_scalars[name] = ScalarField(1, vals, "int32")
        else:
            vals = rng.normal(size=3 * n)
            if multi_type == "float32":
                vals = vals.astype(np.float32).astype(np.float64)
            vertex_scalars[name] = ScalarField(3, vals, multi_type)

    fiber_properties = {}
    for j in range(properties):
        name = f"property_{j:02d}"
        kind = j % 3
        if kind == 0:
            vals = rng.uniform(0.0, 100.0, s).astype(np.float32).astype(np.float64)
            fiber_properties[name] = PropertyField(1, vals, "float32")
        elif kind == 1:
            vals = rng.integers(0, 40, s).astype(np.float64)
            fiber_properties[name] = PropertyField(1, vals, "int32")
        else:
            vals = rng.normal(size=10 * s)
            if multi_type == "float32":
                vals = vals.astype(np.float32).astype(np.float64)
            fiber_properties[name] = PropertyField(10, vals, multi_type)

    return Tractogram(
        vertices=vertices,
        offsets=offsets,
        vertex_scalars=vertex_scalars,
        fiber_properties=fiber_properties,
        metadata={"generator": "tko-gen", "seed": str(seed)},
        space="world",
    )
