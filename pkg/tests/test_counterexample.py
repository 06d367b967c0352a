"""Closed-form counterexample family with many maxima."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcrit.boundary import radial_cosine
from surfcrit.counterexample import (CounterexampleParams, RootPoly, asymptotic_ordinate,
                                     boundary_ordinate_at_zero, check_admissible, compute_eta,
                                     count_superlevel_components, default_roots,
                                     discover_b_threshold, eval_ub, eval_v, extract_omega_b,
                                     strip_torsion_psi, summarize_sweep, ub_field, verify_family,
                                     xbar_eta)
from surfcrit.errors import AdmissibilityError, ChartDomainError, ParameterError
from surfcrit.surface import HYPERBOLIC, SPHERE, metric_factor

MODELS = [SPHERE, HYPERBOLIC]


def brute_sup(roots, model, samples=10**6):
    """Independent supremum of the admissibility expression by dense sampling."""
    s = model.sigma
    x = np.linspace(-roots[-1], roots[-1], samples)[1:-1]
    f = np.ones_like(x)
    df = np.zeros_like(x)
    for a in roots:
        df = df * (x * x - a * a) + f * 2 * x
        f = f * (x * x - a * a)
    return np.max(f - x * (1 + s * x * x) / (2 * (1 - s * x * x)) * df)


@pytest.fixture(scope="module")
def sphere_two():
    params = CounterexampleParams.build(SPHERE, (0.1, 0.2), 1e-4)
    return params, extract_omega_b(params)


class TestAdmissibility:
    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("roots", [(0.1, 0.2), (0.25, 0.5, 0.75), default_roots(4)])
    def test_sup_matches_brute_force(self, model, roots):
        adm = check_admissible(RootPoly(roots), model)
        assert adm.sup_value == pytest.approx(brute_sup(roots, model), abs=1e-9)
        assert adm.ok

    def test_two_roots_values(self):
        adm = check_admissible(RootPoly((0.1, 0.2)), SPHERE)
        assert adm.f1 == pytest.approx(0.99 * 0.96, rel=1e-15)
        assert 0 < adm.sup_value < 1e-3

    @pytest.mark.parametrize("model", MODELS)
    def test_extreme_roots_rejected(self, model):
        assert not check_admissible(RootPoly((0.5, 0.9, 0.99)), model).ok
        with pytest.raises(AdmissibilityError, match="f\\(1\\)"):
            CounterexampleParams.build(model, (0.5, 0.9, 0.99), 1e-4)

    @pytest.mark.parametrize("roots", [(), (0.2, 0.1), (0.5, 1.2)])
    def test_invalid_roots(self, roots):
        with pytest.raises(ParameterError):
            RootPoly(roots)

    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_eta_and_xbar(self, model, n):
        poly = RootPoly(default_roots(n))
        adm = check_admissible(poly, model)
        eta = compute_eta(poly, model, adm)
        assert adm.sup_value < 1 / eta < adm.f1
        xb = xbar_eta(poly, eta)
        assert poly.roots[-1] < xb < 1
        assert poly.f(xb) * eta == pytest.approx(1.0, abs=1e-10)

    def test_eta_override(self):
        p = CounterexampleParams.build(SPHERE, (0.1, 0.2), 1e-4, eta=1.5)
        assert p.eta == 1.5
        with pytest.raises(AdmissibilityError):
            CounterexampleParams.build(SPHERE, (0.1, 0.2), 1e-4, eta=0.5)


class TestFields:
    def test_v_on_axis(self):
        poly = RootPoly((0.1, 0.3))
        x = np.linspace(-0.9, 0.9, 13)
        assert np.allclose(eval_v(poly, np.stack([x, 0 * x], -1)), poly.f(x), atol=1e-15)

    @given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
    def test_v_harmonic(self, x, y):
        poly = RootPoly(default_roots(3))
        p = np.array([x, y])

        def lap(h):
            e = h * np.eye(2)
            return (sum(eval_v(poly, p + d) + eval_v(poly, p - d) for d in e)
                    - 4 * eval_v(poly, p)) / h**2

        # Richardson extrapolation cancels the h^2 stencil error
        lap = (4 * lap(5e-3) - lap(1e-2)) / 3
        assert abs(lap) < 1e-6 * (1 + abs(eval_v(poly, p)))

    @pytest.mark.parametrize("model", MODELS)
    def test_psi(self, model):
        val, inside = strip_torsion_psi(np.array([[0.4, 0.0], [0.0, 0.9]]), 0.1, model)
        assert val[0] == pytest.approx(0.1) and inside[0]
        assert not inside[1]

    def test_chart_guard(self):
        with pytest.raises(ChartDomainError):
            strip_torsion_psi(np.array([1.2, 0.0]), 0.1, HYPERBOLIC)

    @pytest.mark.parametrize("model", MODELS)
    def test_ub_values(self, model):
        p = CounterexampleParams.build(model, default_roots(3), 1e-4)
        u0 = eval_ub(p, np.array([0.0, 0.0]))[0]
        assert u0 == pytest.approx(p.b * (1 - p.eta * p.poly.f(0.0)), rel=1e-12) and u0 > 0
        ends = eval_ub(p, np.array([[p.xbar, 0.0], [-p.xbar, 0.0]]))[0]
        assert np.max(np.abs(ends)) < 1e-15

    @pytest.mark.parametrize("model", MODELS)
    def test_ub_torsion(self, model):
        p = CounterexampleParams.build(model, default_roots(3), 1e-2)
        u = ub_field(p)
        rng = np.random.default_rng(7)
        pts = np.column_stack([rng.uniform(-0.3, 0.3, 10), rng.uniform(-0.02, 0.02, 10)])
        h = 1e-4
        for q in pts:
            lap = sum(u.value(q + d) for d in (h * np.eye(2), -h * np.eye(2)) for d in d)
            lap = (lap - 4 * u.value(q)) / h**2 / metric_factor(q, model)
            assert -lap == pytest.approx(1.0, abs=1e-5)

    @given(st.floats(-0.5, 0.5), st.floats(-0.05, 0.05))
    def test_symmetry(self, x, y):
        p = CounterexampleParams.build(HYPERBOLIC, default_roots(2), 1e-3)
        v = eval_ub(p, np.array([[x, y], [-x, y], [x, -y], [-x, -y]]))[0]
        assert np.all(v == v[0])


class TestExtraction:
    def test_segment_and_box(self, sphere_two):
        params, omega = sphere_two
        xs = np.linspace(-params.xbar, params.xbar, 502)[1:-1]
        assert np.all(omega.curve.contains(np.column_stack([xs, 0 * xs])))
        assert np.all(np.abs(omega.curve.p[:, 0]) <= params.xbar + 1e-9)
        assert np.abs(omega.curve.p[:, 1]).max() < 0.05

    def test_endpoint_pinning(self):
        base = CounterexampleParams.build(SPHERE, default_roots(2), 1e-3)
        for b in (1e-3, 1e-4):
            om = extract_omega_b(base.with_b(b))
            for sgn in (1, -1):
                d = np.min(np.hypot(om.curve.p[:, 0] - sgn * base.xbar, om.curve.p[:, 1]))
                assert d < 2 * om.dx

    def test_curve_symmetric(self, sphere_two):
        _, omega = sphere_two
        p = omega.curve.p
        for flip in (np.array([-1, 1]), np.array([1, -1])):
            q = p * flip
            d = np.min(np.hypot(q[:, None, 0] - p[None, ::4, 0], q[:, None, 1] - p[None, ::4, 1]),
                       axis=1)
            assert d.max() < 4 * omega.dx

    def test_ordinate_matches_asymptotics(self, sphere_two):
        params, _ = sphere_two
        y0 = boundary_ordinate_at_zero(params)
        want = math.sqrt(params.b / 2 * (1 - params.eta * params.poly.f(0.0)))
        assert float(asymptotic_ordinate(params, 0.0)) == pytest.approx(want, rel=1e-15)
        assert abs(y0 / want - 1) < 0.1

    @pytest.mark.parametrize("model", MODELS)
    def test_collapse_rate(self, model):
        base = CounterexampleParams.build(model, default_roots(2), 1e-3)
        bs = np.array([1e-3, 1e-4, 1e-5])
        ym = np.array([np.abs(extract_omega_b(base.with_b(b)).curve.p[:, 1]).max() for b in bs])
        assert np.all(np.diff(ym) < 0)
        c = np.exp(np.mean(np.log(ym / np.sqrt(bs))))
        assert np.all(np.abs(ym / (c * np.sqrt(bs)) - 1) < 0.05)

    def test_components(self, sphere_two):
        params, omega = sphere_two
        assert count_superlevel_components(params, 0.0, omega) == 1
        assert count_superlevel_components(params, params.b, omega) == 2
        with pytest.raises(ParameterError):
            count_superlevel_components(params, -1.0, omega)

    def test_separating_lines(self, sphere_two):
        params, omega = sphere_two
        u = ub_field(params)
        for xt in params.poly.stationary_points():
            if params.poly.d2f(xt) < 0:  # local maxima of f separate the superlevel pieces
                ys = omega.ys[np.abs(omega.ys) < 0.05]
                vals = u.value(np.column_stack([np.full_like(ys, xt), ys]))
                vals = vals[np.isfinite(vals)]
                assert np.all(vals <= params.b)


class TestVerification:
    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize("n", [2, 3])
    def test_report(self, model, n):
        params = CounterexampleParams.build(model, default_roots(n), 1e-4)
        rep, _ = verify_family(params, seeds=32)
        assert rep.component_count == n
        assert len(rep.maxima) >= n
        assert len(rep.maxima) - rep.saddle_count == 1
        assert rep.index_sum == 1
        assert rep.star_margin > 0
        assert rep.asymptotics_residual < 0.1
        # maxima sit on the axis near the minima of f (the positive lobes of 1 - eta f)
        xs = sorted(x for x, _ in rep.maxima)
        assert all(abs(y) < 1e-8 for _, y in rep.maxima)
        assert xs == pytest.approx(sorted(-x for x in xs), abs=1e-8)

    def test_sweep_bounded(self):
        base = CounterexampleParams.build(SPHERE, default_roots(2), 1e-3)
        reps = [verify_family(base.with_b(b), seeds=16)[0] for b in (1e-3, 1e-4, 1e-5)]
        s = summarize_sweep(reps)
        assert s.fitted_C >= 0 and s.bounded()
        assert all(r.min_G >= -s.fitted_C * math.sqrt(r.b) - 1e-15 for r in reps)

    def test_threshold(self):
        b = discover_b_threshold(SPHERE, (0.1, 0.2))
        assert 0 < b <= 1e-2
        params = CounterexampleParams.build(SPHERE, (0.1, 0.2), b)
        omega = extract_omega_b(params)
        assert count_superlevel_components(params, b, omega) == 2
        assert np.min(radial_cosine(omega.curve)) > 0
