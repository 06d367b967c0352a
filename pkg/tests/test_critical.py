"""Critical points, winding indices, the boundary identity and the location region."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcrit.boundary import DomainSpec, ellipse, geodesic_disk, make_family
from surfcrit.critical import (boundary_identity_residual, build_V, classify,
                               find_critical_points, location_region, poincare_hopf_audit,
                               stable_winding_index, winding_index)
from surfcrit.errors import NumericalError, PreconditionError
from surfcrit.fields import FEMField, disk_torsion, hemisphere_eigenfunction, strip_torsion
from surfcrit.mesh import triangulate
from surfcrit.pde import solve_torsion
from surfcrit.surface import HYPERBOLIC, SPHERE

MODELS = [SPHERE, HYPERBOLIC]


def as_field(fn):
    return lambda p: np.stack(fn(p[..., 0] + 1j * p[..., 1]), -1)


class TestWinding:
    @pytest.mark.parametrize("fn,want", [
        (lambda z: (z.real, z.imag), 1),
        (lambda z: (z.real, -z.imag), -1),
        (lambda z: ((z * z).real, (z * z).imag), 2),
        (lambda z: ((z ** 3).real, -(z ** 3).imag), -3),
    ])
    def test_model_fields(self, fn, want):
        w = stable_winding_index(as_field(fn), (0.0, 0.0), 0.5)
        assert w.index == want and w.residual < 1e-10

    def test_off_center_is_zero(self):
        assert winding_index(as_field(lambda z: (z.real, z.imag)), (2.0, 0.0), 0.5).index == 0

    def test_anisotropic_field(self):
        # gradient of -(x^2 + 1e-8 y^2): a tiny sample count needs bisection
        f = lambda p: np.stack([-2 * p[..., 0], -2e-8 * p[..., 1]], -1)
        assert winding_index(f, (0.0, 0.0), 1.0).index == 1

    def test_vanishing_on_circle(self):
        with pytest.raises(NumericalError):
            winding_index(lambda p: p - np.array([0.5, 0.0]), (0.0, 0.0), 0.5)

    def test_sample_floor(self):
        with pytest.raises(PreconditionError):
            winding_index(lambda p: p, (0.0, 0.0), 0.5, n=8)

    @given(st.floats(0.05, 1.0), st.floats(-3, 3))
    def test_rotation_invariant(self, rho, angle):
        c, s = math.cos(angle), math.sin(angle)
        f = lambda p: p @ np.array([[c, -s], [s, c]]).T
        assert winding_index(f, (0.0, 0.0), rho).index == 1


class TestClassify:
    def test_kinds(self):
        assert classify(np.diag([-1.0, -2.0]))[0] == "Max"
        assert classify(np.diag([1.0, 2.0]))[0] == "Min"
        assert classify(np.diag([1.0, -2.0]))[0] == "Saddle"
        assert classify(np.diag([1.0, 1e-12]))[0] == "Degenerate"
        assert classify(np.zeros((2, 2)))[0] == "Degenerate"


class TestClosedFormAudits:
    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("R", [0.5, 1.0])
    def test_disk_torsion(self, model, R):
        dom = DomainSpec(model, geodesic_disk(model, R, 512))
        rep = poincare_hopf_audit(dom, disk_torsion(model, R), seeds=16)
        assert rep.unique_maximum
        assert np.hypot(*rep.critical_points[0].p) < 1e-10
        assert rep.identity_residual_max < 1e-8
        assert rep.boundary_transversality_min > 0

    def test_hemisphere(self):
        dom = DomainSpec(SPHERE, geodesic_disk(SPHERE, math.pi / 2, 512))
        rep = poincare_hopf_audit(dom, hemisphere_eigenfunction(), seeds=16)
        assert rep.unique_maximum
        assert rep.identity_residual_max < 1e-8

    @pytest.mark.parametrize("model", MODELS)
    def test_axis_invariant_field_has_trivial_v(self, model):
        # K1 generates translations along the strip axis, so <K1, grad u> and V vanish
        u = strip_torsion(model, 0.2)
        rng = np.random.default_rng(3)
        p = rng.uniform(-0.3, 0.3, (50, 2)) * np.array([1.0, 0.2])
        assert np.max(np.abs(build_V(u, model, p))) < 1e-12
        assert np.max(np.abs(u.gradient(p)[:, 1])) > 0.01


class TestFEMAudit:
    @pytest.mark.parametrize("model", MODELS)
    def test_ellipse_torsion(self, model):
        h = 0.04
        dom = DomainSpec(model, ellipse(0.8, 0.6, 2048))
        u = solve_torsion(triangulate(dom.curve, h), model)
        rep = poincare_hopf_audit(dom, u, seeds=24)
        assert rep.unique_maximum
        assert np.hypot(*rep.critical_points[0].p) < 2 * h
        assert rep.identity_residual_max < 10 * h
        assert rep.boundary_transversality_min > 0

    def test_fem_seed_merging(self):
        dom = DomainSpec(SPHERE, geodesic_disk(SPHERE, 1.0, 1024))
        u = solve_torsion(triangulate(dom.curve, 0.05), SPHERE)
        cps = find_critical_points(u, dom, seeds=32)
        assert len(cps) == 1 and cps[0].kind == "Max"


class TestRegion:
    @pytest.mark.parametrize("R", [0.4, math.pi / 4])
    def test_small_disk_whole(self, R):
        dom = DomainSpec(SPHERE, geodesic_disk(SPHERE, R, 512))
        reg = location_region(dom, grid=65)
        assert np.array_equal(reg.mask, reg.inside)

    def test_intermediate_disk(self):
        R = 1.2
        dom = DomainSpec(SPHERE, geodesic_disk(SPHERE, R, 512))
        reg = location_region(dom, grid=129)
        q = np.stack(np.meshgrid(reg.xs, reg.ys, indexing="xy"), -1)
        r = np.hypot(q[..., 0], q[..., 1])
        rc = math.tan((math.pi / 2 - R) / 2)
        dx = reg.xs[1] - reg.xs[0]
        clear = np.abs(r - rc) > 2 * dx
        assert np.array_equal(reg.mask[clear], (r < rc)[clear])
        assert reg.contains((0.5 * rc, 0.0)) and not reg.contains((1.5 * rc, 0.0))

    def test_hemisphere_is_center(self):
        dom = DomainSpec(SPHERE, geodesic_disk(SPHERE, math.pi / 2, 512))
        reg = location_region(dom, grid=129)
        assert reg.mask.sum() == 1
        assert reg.contains((0.0, 0.0)) and not reg.contains((0.01, 0.0))

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            location_region(DomainSpec(SPHERE, geodesic_disk(SPHERE, 2.0, 512)))
        with pytest.raises(PreconditionError):
            location_region(DomainSpec(HYPERBOLIC, geodesic_disk(HYPERBOLIC, 1.0, 512)))

    def test_fem_maximum_inside(self):
        dom = DomainSpec(SPHERE, ellipse(0.8, 0.6, 1024))
        u = solve_torsion(triangulate(dom.curve, 0.05), SPHERE)
        reg = location_region(dom, grid=65)
        cps = find_critical_points(u, dom, seeds=24)
        assert reg.contains(cps[0].p, tol=0.1)
