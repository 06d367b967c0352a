"""Closed-form fields and recovered finite-element derivatives."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcrit.boundary import geodesic_disk
from surfcrit.errors import BoundaryProximityError
from surfcrit.fields import (FEMField, StripTerms, disk_torsion, hemisphere_eigenfunction,
                             strip_torsion)
from surfcrit.mesh import triangulate
from surfcrit.surface import (HYPERBOLIC, SPHERE, Killing, KillingField, killing_eval,
                              metric_factor)

MODELS = [SPHERE, HYPERBOLIC]


def fd_laplacian(fn, p, h=1e-4):
    """Five-point Euclidean Laplacian of a scalar callable."""
    p = np.asarray(p, dtype=float)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return (fn(p + ex) + fn(p - ex) + fn(p + ey) + fn(p - ey) - 4 * fn(p)) / h**2


def lap_g(fn, p, model, h=1e-4):
    return fd_laplacian(fn, p, h) / metric_factor(np.asarray(p), model)


class TestClosedForm:
    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("p", [(0.1, 0.2), (-0.3, 0.05), (0.0, 0.0)])
    def test_disk_torsion_pde(self, model, p):
        u = disk_torsion(model, 1.0)
        assert -lap_g(u.value, p, model) == pytest.approx(1.0, abs=1e-6)

    def test_disk_torsion_formulas(self):
        R = 1.0
        u = disk_torsion(SPHERE, R)
        th = np.linspace(0.0, R, 7)
        p = np.stack([np.tan(th / 2), 0 * th], -1)
        assert np.allclose(u.value(p), np.log((1 + np.cos(th)) / (1 + np.cos(R))), atol=1e-14)
        v = disk_torsion(HYPERBOLIC, R)
        p = np.stack([np.tanh(th / 2), 0 * th], -1)
        assert np.allclose(v.value(p), np.log((1 + np.cosh(R)) / (1 + np.cosh(th))), atol=1e-14)

    @pytest.mark.parametrize("model", MODELS)
    def test_vanishes_on_boundary(self, model):
        c = geodesic_disk(model, 1.0, 64)
        assert np.max(np.abs(disk_torsion(model, 1.0).value(c.p))) < 1e-14

    def test_hemisphere_eigenfunction(self):
        u = hemisphere_eigenfunction()
        for p in [(0.2, 0.1), (0.5, -0.4)]:
            assert -lap_g(u.value, p, SPHERE) == pytest.approx(2 * u.value(np.array(p)), abs=1e-6)
        c = geodesic_disk(SPHERE, math.pi / 2, 64)
        assert np.max(np.abs(u.value(c.p))) < 1e-15

    @pytest.mark.parametrize("model", MODELS)
    def test_strip_pde(self, model):
        u = strip_torsion(model, 0.1)
        assert -lap_g(u.value, (0.3, 0.01), model) == pytest.approx(1.0, abs=1e-5)

    def test_strip_axis_value(self):
        x = np.linspace(-0.5, 0.5, 11)
        for model in MODELS:
            assert np.allclose(StripTerms(model, 0.3).value(np.stack([x, 0 * x], -1)), 0.3)

    @pytest.mark.parametrize("field", [disk_torsion(SPHERE, 1.2), disk_torsion(HYPERBOLIC, 0.8),
                                       hemisphere_eigenfunction(), strip_torsion(SPHERE, 0.2),
                                       strip_torsion(HYPERBOLIC, 0.2)], ids=lambda f: f.name)
    def test_derivatives_match_differences(self, field):
        rng = np.random.default_rng(1)
        p = rng.uniform(-0.25, 0.25, (20, 2))
        h = 1e-6
        for k, e in enumerate(np.eye(2)):
            fd = (field.value(p + h * e) - field.value(p - h * e)) / (2 * h)
            assert np.allclose(field.gradient(p)[:, k], fd, atol=1e-8)
            fd2 = (field.gradient(p + h * e) - field.gradient(p - h * e)) / (2 * h)
            assert np.allclose(field.hessian(p)[:, k, :], fd2, atol=1e-6)


class TestKillingCommutation:
    """The Laplacian commutes with Killing fields: <K, grad u> is harmonic for torsion u."""

    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("which", list(Killing))
    @given(x=st.floats(-0.2, 0.2), y=st.floats(-0.2, 0.2))
    def test_derivative_of_torsion_is_harmonic(self, model, which, x, y):
        u = strip_torsion(model, 0.3)
        k = KillingField(model, which)
        ku = lambda p: np.sum(killing_eval(k, p) * u.gradient(p), axis=-1)
        assert abs(lap_g(ku, (x, y), model, h=1e-3)) < 1e-4


@pytest.fixture(scope="module")
def setup():
    curve = geodesic_disk(SPHERE, 1.0, 512)
    mesh = triangulate(curve, 0.05)
    exact = disk_torsion(SPHERE, 1.0)
    return mesh, exact, FEMField(mesh, exact.value(mesh.vertices), SPHERE)


class TestFEMRecovery:
    def test_nodal_interpolation(self, setup):
        mesh, exact, fem = setup
        assert np.allclose(fem.value(mesh.vertices[mesh.interior]),
                           exact.value(mesh.vertices[mesh.interior]))

    def test_recovered_derivatives(self, setup):
        mesh, exact, fem = setup
        p = np.array([[0.1, 0.05], [-0.2, 0.15], [0.0, 0.0]])
        _, g, hh = fem.derivatives(p)
        assert np.max(np.abs(g - exact.gradient(p))) < 5e-3
        assert np.max(np.abs(hh - exact.hessian(p))) < 5e-2

    def test_boundary_proximity(self, setup):
        mesh, _, fem = setup
        q = mesh.vertices[mesh.boundary[0]] * 0.999
        with pytest.raises(BoundaryProximityError):
            fem.derivatives(q[None, :])

    def test_outside_is_nan(self, setup):
        _, _, fem = setup
        assert np.isnan(fem.value(np.array([[2.0, 2.0]])))[0]
