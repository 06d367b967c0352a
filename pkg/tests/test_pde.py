"""Finite-element solves against closed forms and against each other."""
import math

import numpy as np
import pytest

from surfcrit.boundary import ellipse, geodesic_disk
from surfcrit.errors import ConvergenceError, ParameterError
from surfcrit.fields import disk_torsion, hemisphere_eigenfunction
from surfcrit.mesh import triangulate
from surfcrit.pde import (TORSION, Assembler, Nonlinearity, linear_nonlinearity,
                          monotone_iteration, power_nonlinearity, semistability_margin,
                          smallest_eigenpair, solve_eigen, solve_semilinear, solve_torsion)
from surfcrit.surface import HYPERBOLIC, SPHERE

MODELS = [SPHERE, HYPERBOLIC]


@pytest.fixture(scope="module")
def disk_mesh():
    return triangulate(geodesic_disk(SPHERE, 1.0, 2048), 0.05)


@pytest.mark.parametrize("model", MODELS)
def test_torsion_second_order(model):
    hs = (0.1, 0.05, 0.025)
    exact = disk_torsion(model, 1.0)
    consts = []
    for h in hs:
        m = triangulate(geodesic_disk(model, 1.0, 4096), h)
        err = np.max(np.abs(solve_torsion(m, model).values - exact.value(m.vertices)))
        consts.append(err / h**2)
    assert max(consts) <= 0.5
    assert max(consts) <= 1.5 * consts[0]


def test_mass_integrates_area():
    # spherical cap of radius R has area 2 pi (1 - cos R)
    m = triangulate(geodesic_disk(SPHERE, 1.0, 4096), 0.025)
    asm = Assembler(m, SPHERE)
    assert asm.qweight.sum() == pytest.approx(2 * math.pi * (1 - math.cos(1.0)), rel=2e-3)


def test_hemisphere_eigenvalue():
    errs = []
    for h in (0.1, 0.05, 0.025):
        m = triangulate(geodesic_disk(SPHERE, math.pi / 2, 4096), h)
        lam, u = solve_eigen(m, SPHERE)
        errs.append(abs(lam - 2.0))
    assert errs[-1] < 1e-2
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)
    exact = hemisphere_eigenfunction().value(m.vertices)
    assert np.max(np.abs(u.values - exact)) < 1e-2


def test_constant_load_scales_torsion(disk_mesh):
    t = solve_torsion(disk_mesh, SPHERE).values
    nl = Nonlinearity(lambda s: np.full_like(s, 3.0), lambda s: np.zeros_like(s), "three")
    u = solve_semilinear(disk_mesh, SPHERE, nl)
    assert np.allclose(u.values, 3 * t, atol=1e-12)


def test_newton_matches_monotone(disk_mesh):
    nl = power_nonlinearity(1.0, 0.5)
    a = solve_semilinear(disk_mesh, SPHERE, nl).values
    b = monotone_iteration(disk_mesh, SPHERE, nl).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_torsion_margin_is_first_eigenvalue(disk_mesh):
    lam, _ = solve_eigen(disk_mesh, SPHERE)
    t = solve_torsion(disk_mesh, SPHERE)
    res = semistability_margin(disk_mesh, SPHERE, t, TORSION)
    assert res.margin == pytest.approx(lam, rel=1e-6)
    assert res.semistable


def test_eigen_margin_vanishes(disk_mesh):
    lam, u = solve_eigen(disk_mesh, SPHERE)
    res = semistability_margin(disk_mesh, SPHERE, u, linear_nonlinearity(lam))
    assert abs(res.margin) < 1e-6
    assert res.semistable


def test_unstable_detected(disk_mesh):
    lam, u = solve_eigen(disk_mesh, SPHERE)
    res = semistability_margin(disk_mesh, SPHERE, u, linear_nonlinearity(lam + 1.0))
    assert res.margin == pytest.approx(-1.0, abs=1e-6)
    assert not res.semistable


def test_eigen_fallback_agrees():
    m = triangulate(ellipse(0.8, 0.6, 1024), 0.08)
    asm = Assembler(m, HYPERBOLIC)
    k, mm = asm.restrict(asm.stiffness()), asm.restrict(asm.mass())
    mu, _, _ = smallest_eigenpair(k, mm)
    mu2, _, it = smallest_eigenpair(k, mm, max_iter=2)
    assert it == 2 and mu2 == pytest.approx(mu, rel=1e-9)
    with pytest.raises(ConvergenceError):
        smallest_eigenpair(k, mm, max_iter=2, fallback=False)


def test_negative_source_rejected():
    with pytest.raises(ParameterError):
        Nonlinearity(lambda s: s - 1.0, lambda s: np.ones_like(s))


def test_pure_square_nonlinearity():
    # -Delta u = u^2: the torsion start falls to u = 0, and the positive solution is unstable
    m = triangulate(geodesic_disk(SPHERE, 0.5, 1024), 0.03)
    nl = power_nonlinearity(0.0, 1.0)
    assert np.max(np.abs(solve_semilinear(m, SPHERE, nl).values)) < 1e-12
    t = solve_torsion(m, SPHERE).values
    u = solve_semilinear(m, SPHERE, nl, u0=20 * t / t.max())
    assert u.values[m.interior].min() > 0
    res = semistability_margin(m, SPHERE, u, nl)
    assert not res.semistable
    lam, _ = solve_eigen(m, SPHERE)
    assert res.margin < -0.5 * lam
