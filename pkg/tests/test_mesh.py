"""Mesh generation and mesh I/O."""
import logging
import math

import numpy as np
import pytest

from surfcrit import mesh as meshmod
from surfcrit.boundary import ellipse, geodesic_disk, make_family, superellipse
from surfcrit.errors import ParameterError
from surfcrit.mesh import boundary_loop, read_mesh, triangulate, write_mesh
from surfcrit.surface import SPHERE

CURVES = {
    "disk": lambda: geodesic_disk(SPHERE, 1.0, 1024),
    "ellipse": lambda: ellipse(0.8, 0.6, 2048),
    "superellipse": lambda: superellipse(8, 0.5, 2048),
    "star": lambda: make_family(SPHERE, "star", 2048, a=0.5, b=0.03, k=5),
}


@pytest.mark.parametrize("name", sorted(CURVES))
def test_quality(name):
    curve = CURVES[name]()
    m = triangulate(curve, 0.05)
    assert m.angles().min() >= 20.0
    assert np.all(m.areas() > 0)
    # boundary vertices lie on the curve
    b = m.vertices[m.boundary]
    on = curve.evaluate(m.boundary_params)[0]
    assert np.max(np.hypot(*(b - on).T)) < 1e-12
    chords = np.hypot(*(np.roll(b, -1, 0) - b).T)
    assert chords.max() <= 0.05 + 1e-12


def test_total_area_converges():
    # Euclidean area of the chart ellipse is pi a b; polygon error is O(h^2)
    m = triangulate(ellipse(0.8, 0.6, 2048), 0.025)
    assert m.areas().sum() == pytest.approx(math.pi * 0.48, rel=2e-3)


def test_boundary_loop_recovers_order():
    m = triangulate(geodesic_disk(SPHERE, 0.8, 512), 0.08)
    loop = boundary_loop(m.triangles)
    assert len(loop) == len(m.boundary)
    start = int(np.flatnonzero(loop == m.boundary[0])[0])
    assert np.array_equal(np.roll(loop, -start), m.boundary)


def test_deterministic():
    a = triangulate(ellipse(0.8, 0.6, 1024), 0.06)
    b = triangulate(ellipse(0.8, 0.6, 1024), 0.06)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)


def test_bad_h():
    with pytest.raises(ParameterError):
        triangulate(ellipse(0.8, 0.6), 0.0)


def test_anisotropy_warning(monkeypatch, caplog):
    monkeypatch.setattr(meshmod, "ANISOTROPY_WARNING", 1.1)
    with caplog.at_level(logging.WARNING, logger="surfcrit.mesh"):
        triangulate(ellipse(0.8, 0.6, 512), 0.1)
    assert any("anisotropic" in r.message for r in caplog.records)


def test_roundtrip(tmp_path):
    m = triangulate(geodesic_disk(SPHERE, 1.0, 512), 0.1)
    vals = np.sin(m.vertices[:, 0])
    write_mesh(m, tmp_path, vals)
    m2, v2 = read_mesh(tmp_path)
    assert np.array_equal(m2.vertices, m.vertices)
    assert np.array_equal(m2.triangles, m.triangles)
    assert np.array_equal(v2, vals)
    assert set(m2.boundary) == set(m.boundary)
    assert m2.h <= 0.1 + 1e-12


def test_read_missing(tmp_path):
    with pytest.raises(ParameterError):
        read_mesh(tmp_path)
