"""Thin domains whose torsion function has many maxima.

Start from the torsion function ``psi_b`` of a strip around the geodesic
``y = 0`` (it equals ``b`` on the axis and vanishes on the strip edges) and
perturb it by a harmonic function: with ``f(x) = prod (x^2 - a_i^2)`` and
``v = Re f(x + iy)``,

    u_b = psi_b - b * eta * v

still solves ``-Delta_g u = 1``. The domain is the component of
``{u_b > 0}`` containing the origin. On the axis ``u_b = b (1 - eta f(x))``,
so ``u_b > b`` exactly where ``f < 0``, giving one superlevel component per
root interval and hence at least ``n`` maxima.

``eta`` must satisfy ``sup S < 1/eta < f(1)`` where
``S(x) = f(x) - x (1 + s x^2) / (2 (1 - s x^2)) f'(x)`` over ``|x| < a_n``
(``s = +1`` sphere, ``-1`` hyperbolic); this makes the domain star-shaped.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import ndimage
from scipy.optimize import bisect, brentq, minimize_scalar
from skimage.measure import find_contours

from .boundary import BoundaryCurve, DomainSpec, radial_cosine
from .critical import find_critical_points, index_critical_points
from .errors import AdmissibilityError, ParameterError, ResolutionError
from .fields import ClosedFormField, StripTerms
from .surface import SPHERE, SurfaceModel, check_chart

log = logging.getLogger(__name__)

X_CELLS = 4096
MIN_CELLS_ACROSS = 256
ENDPOINT_EXCLUSION_CELLS = 10
B_START = 1e-2


@dataclass(frozen=True, eq=False)
class RootPoly:
    """Even polynomial ``f(x) = prod (x^2 - a_i^2)`` with ``0 < a_1 < ... < a_n < 1``."""

    roots: tuple

    def __post_init__(self):
        r = tuple(float(a) for a in self.roots)
        if not r:
            raise ParameterError("at least one root is required")
        if any(not 0 < a < 1 for a in r):
            raise ParameterError("roots must lie in (0, 1)")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ParameterError("roots must be strictly increasing")
        object.__setattr__(self, "roots", r)

    @property
    def n(self) -> int:
        return len(self.roots)

    @property
    def poly(self) -> Polynomial:
        return Polynomial.fromroots([s * a for a in self.roots for s in (1, -1)])

    @property
    def _g(self) -> Polynomial:
        # f(x) = g(x^2); evaluating through x^2 keeps f exactly even
        return Polynomial.fromroots([a * a for a in self.roots])

    def f(self, x):
        return self._g(x * x)

    def df(self, x):
        return 2 * x * self._g.deriv()(x * x)

    def d2f(self, x):
        w = x * x
        return 2 * self._g.deriv()(w) + 4 * w * self._g.deriv(2)(w)

    def stationary_points(self) -> np.ndarray:
        """Real critical points of ``f`` in ``(-a_n, a_n)``, sorted."""
        r = self.poly.deriv().roots()
        r = np.real(r[np.abs(np.imag(r)) < 1e-12])
        return np.sort(r[np.abs(r) < self.roots[-1]])


def default_roots(n: int) -> tuple:
    """Evenly spaced roots ``a_i = i / (2n + 2)``."""
    if n < 1:
        raise ParameterError("n must be positive")
    return tuple(i / (2 * n + 2) for i in range(1, n + 1))


def admissibility_expression(poly: RootPoly, model: SurfaceModel, x):
    s = model.sigma
    x = np.asarray(x, dtype=float)
    return poly.f(x) - x * (1 + s * x * x) / (2 * (1 - s * x * x)) * poly.df(x)


@dataclass(frozen=True)
class Admissibility:
    sup_value: float
    argsup: float
    f1: float
    ok: bool

    def message(self, model: SurfaceModel) -> str:
        factor = "x(1+x^2)/(2(1-x^2))" if model is SPHERE else "x(1-x^2)/(2(1+x^2))"
        rel = ">" if self.ok else "<="
        return (f"f(1) = {self.f1:.17g} {rel} sup_(|x|<a_n) [f(x) - {factor} f'(x)] = "
                f"{self.sup_value:.17g} (attained near x = {self.argsup:.6g})")


def check_admissible(poly: RootPoly, model: SurfaceModel, samples: int = 10_000) -> Admissibility:
    """Dense sampling plus golden-section refinement of the supremum.

    The expression is even in ``x``, so ``[0, a_n)`` suffices.
    """
    an = poly.roots[-1]
    x = np.linspace(0.0, an, samples, endpoint=False)
    vals = admissibility_expression(poly, model, x)
    i = int(np.argmax(vals))
    best_x, best = float(x[i]), float(vals[i])
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, samples - 1)]
    neg = lambda t: -float(admissibility_expression(poly, model, t))
    if 0 < i < samples - 1:
        try:
            res = minimize_scalar(neg, bracket=(lo, best_x, hi), method="golden", tol=1e-12)
            if -res.fun > best and lo <= res.x <= hi:
                best_x, best = float(res.x), float(-res.fun)
        except ValueError:
            pass
    f1 = float(poly.f(1.0))
    return Admissibility(best, best_x, f1, bool(f1 > best))


def compute_eta(poly: RootPoly, model: SurfaceModel, adm: Optional[Admissibility] = None) -> float:
    """Midpoint choice ``eta = (1/f(1) + 1/sup) / 2``.

    When the supremum is not positive every ``eta > 1/f(1)`` is admissible and
    the midpoint formula is meaningless; ``1/eta = f(1)/2`` is used instead.
    """
    adm = adm or check_admissible(poly, model)
    if not adm.ok:
        raise AdmissibilityError(adm.message(model))
    if adm.sup_value <= 0:
        return 2.0 / adm.f1
    return 0.5 * (1.0 / adm.f1 + 1.0 / adm.sup_value)


def xbar_eta(poly: RootPoly, eta: float) -> float:
    """Unique root of ``f(x) = 1/eta`` in ``(a_n, 1)``, by bisection."""
    g = lambda x: float(poly.f(x)) - 1.0 / eta
    an = poly.roots[-1]
    if not (g(an) < 0 < g(1.0)):
        raise AdmissibilityError(
            f"f(x) = 1/eta has no bracketed root in ({an:g}, 1): f(1) = {poly.f(1.0):.6g}, "
            f"1/eta = {1 / eta:.6g}"
        )
    return float(bisect(g, an, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))


@dataclass(frozen=True, eq=False)
class CounterexampleParams:
    model: SurfaceModel
    poly: RootPoly
    eta: float
    b: float
    xbar: float
    admissibility: Admissibility

    @classmethod
    def build(cls, model: SurfaceModel, roots: Sequence[float], b: float,
              eta: Optional[float] = None) -> "CounterexampleParams":
        if not b > 0:
            raise ParameterError("b must be positive")
        poly = RootPoly(tuple(roots))
        adm = check_admissible(poly, model)
        if not adm.ok:
            raise AdmissibilityError(adm.message(model))
        if eta is None:
            eta = compute_eta(poly, model, adm)
        elif not (adm.sup_value < 1.0 / eta < adm.f1):
            raise AdmissibilityError(
                f"1/eta = {1 / eta:.6g} must lie strictly between {adm.sup_value:.6g} and "
                f"f(1) = {adm.f1:.6g}"
            )
        return cls(model, poly, float(eta), float(b), xbar_eta(poly, eta), adm)

    def with_b(self, b: float) -> "CounterexampleParams":
        return dataclasses.replace(self, b=float(b))


# Closed-form fields ----------------------------------------------------------------


def eval_v(poly: RootPoly, p) -> np.ndarray:
    """Harmonic extension ``Re f(x + iy)``."""
    p = np.asarray(p, dtype=float)
    return np.real(poly.f(p[..., 0] + 1j * p[..., 1]))


def _v_derivatives(poly: RootPoly, p):
    z = p[..., 0] + 1j * p[..., 1]
    d1 = poly.df(z)
    d2 = poly.d2f(z)
    grad = np.stack([np.real(d1), -np.imag(d1)], -1)
    hxx, hxy = np.real(d2), -np.imag(d2)
    hess = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, -hxx], -1)], -2)
    return grad, hess


def strip_torsion_psi(p, b: float, model: SurfaceModel):
    """Strip torsion value and an inside-the-strip flag."""
    p = check_chart(p, model)
    val = StripTerms(model, b).value(p)
    return val, val > 0


def ub_field(params: CounterexampleParams) -> ClosedFormField:
    """``u_b = psi_b - b eta v`` with analytic gradient and Hessian."""
    strip = StripTerms(params.model, params.b)
    poly, c = params.poly, params.b * params.eta

    def value(p):
        return strip.value(p) - c * eval_v(poly, p)

    def grad(p):
        return strip.gradient(p) - c * _v_derivatives(poly, p)[0]

    def hess(p):
        return strip.hessian(p) - c * _v_derivatives(poly, p)[1]

    return ClosedFormField(value, grad, hess, f"u_b(b={params.b:g})", lambda p: value(p) > 0)


def eval_ub(params: CounterexampleParams, p):
    """Value, gradient and Hessian of ``u_b`` at ``p``."""
    p = check_chart(p, params.model)
    return ub_field(params).derivatives(p)


def asymptotic_ordinate(params: CounterexampleParams, x) -> np.ndarray:
    """Leading-order boundary ordinate ``sqrt(b/2 (1 - eta f(x))) (1 + s x^2)``."""
    x = np.asarray(x, dtype=float)
    inner = np.maximum(1.0 - params.eta * params.poly.f(x), 0.0)
    return np.sqrt(params.b / 2.0 * inner) * (1.0 + params.model.sigma * x * x)


# Extraction ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OmegaB:
    params: CounterexampleParams
    curve: BoundaryCurve
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    component: np.ndarray
    dx: float
    dy: float

    @property
    def domain(self) -> DomainSpec:
        return DomainSpec(self.params.model, self.curve)


def _grid(params: CounterexampleParams, x_cells: int, min_across: int, y_pad: float):
    xb = params.xbar
    dx = 2 * xb / x_cells
    xs = -xb - 8 * dx + dx * np.arange(x_cells + 17)
    xx = np.linspace(-xb, xb, 2001)
    ymax = float(asymptotic_ordinate(params, xx).max())
    y0 = float(asymptotic_ordinate(params, 0.0))
    half = y_pad * ymax
    cells = 2 * int(math.ceil(min_across * half / (2 * y0)))
    cells = max(cells, 2 * min_across)
    ys = np.linspace(-half, half, cells + 1)
    return xs, ys, dx, float(ys[1] - ys[0])


def _implicit_frame(u: ClosedFormField, p):
    """Unit outer normal and Euclidean curvature of the level set through ``p``."""
    g = u.gradient(p)
    h = u.hessian(p)
    gx, gy = g[:, 0], g[:, 1]
    n = np.hypot(gx, gy)
    kappa = -(h[:, 0, 0] * gy**2 - 2 * h[:, 0, 1] * gx * gy + h[:, 1, 1] * gx**2) / n**3
    nu = -g / n[:, None]
    return nu, kappa


def _project(u: ClosedFormField, p, steps: int = 4):
    for _ in range(steps):
        val = u.value(p)
        g = u.gradient(p)
        p = p - (val / np.sum(g * g, axis=-1))[:, None] * g
    return p


def extract_omega_b(params: CounterexampleParams, x_cells: int = X_CELLS,
                    min_cells_across: int = MIN_CELLS_ACROSS, y_pad: float = 1.3) -> OmegaB:
    """Contour the component of ``{u_b > 0}`` containing the origin.

    The grid has ``x_cells`` cells across ``(-xbar, xbar)`` (plus a margin)
    and enough rows to put ``min_cells_across`` cells across the thickness at
    ``x = 0``. Contour vertices are projected back onto ``u_b = 0``; the
    returned curve is parametrized by arc length with exact tangent and
    curvature vectors from the implicit function.
    """
    check_chart(np.array([[params.xbar, 0.0]]), params.model)
    u = ub_field(params)
    for attempt in range(3):
        xs, ys, dx, dy = _grid(params, x_cells, min_cells_across, y_pad)
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        pts = np.stack([X, Y], -1)
        if params.model is not SPHERE and np.any(np.sum(pts * pts, -1) >= 1):
            raise ResolutionError("extraction grid leaves the Poincare disk; b is too large")
        vals = u.value(pts)
        labels, _ = ndimage.label(np.nan_to_num(vals, nan=-1.0) > 0)
        i0, j0 = len(ys) // 2, int(np.argmin(np.abs(xs)))
        lab = labels[i0, j0]
        if lab == 0:
            raise ResolutionError(
                f"origin not inside {{u_b > 0}} for b={params.b:g}; try halving b"
            )
        comp = labels == lab
        if comp[0].any() or comp[-1].any():
            y_pad *= 2
            continue
        if comp[:, 0].any() or comp[:, -1].any():
            raise ResolutionError(
                f"component reaches the x-margin for b={params.b:g}; try halving b"
            )
        break
    else:
        raise ResolutionError(f"could not enclose Omega_b for b={params.b:g}; try halving b")
    masked = np.where(ndimage.binary_dilation(comp), vals, -1.0)
    masked = np.nan_to_num(masked, nan=-1.0)
    contours = find_contours(masked, 0.0)
    closed = [c for c in contours if len(c) > 8 and np.allclose(c[0], c[-1])]
    if not closed:
        raise ResolutionError("no closed contour around the origin; refine the grid")
    best = max(closed, key=len)
    p = np.column_stack([np.interp(best[:-1, 1], np.arange(len(xs)), xs),
                         np.interp(best[:-1, 0], np.arange(len(ys)), ys)])
    p = _project(u, p)
    area = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
    if area < 0:
        p = p[::-1]
    seg = np.hypot(*np.diff(np.vstack([p, p[:1]]), axis=0).T)
    keep = seg > 1e-14
    p = p[keep]
    seg = np.hypot(*np.diff(np.vstack([p, p[:1]]), axis=0).T)
    t = np.concatenate([[0.0], np.cumsum(seg[:-1])])
    nu, kappa = _implicit_frame(u, p)
    tangent = np.stack([-nu[:, 1], nu[:, 0]], -1)
    normal_in = -nu
    try:
        curve = BoundaryCurve(t, p, tangent, kappa[:, None] * normal_in, closed=True,
                              period=float(np.sum(seg)), name=f"omega_b(b={params.b:g})")
    except Exception as exc:
        raise ResolutionError(f"extracted boundary is not a simple curve: {exc}") from exc
    if curve.winding_number((0.0, 0.0)) != 1:
        raise ResolutionError("extracted contour does not enclose the origin")
    return OmegaB(params, curve, xs, ys, vals, comp, dx, dy)


def count_superlevel_components(params: CounterexampleParams, level: float,
                                omega: Optional[OmegaB] = None) -> int:
    """Connected components of ``{u_b > level}`` inside the extracted domain."""
    if level < 0:
        raise ParameterError("level must be nonnegative")
    omega = omega or extract_omega_b(params)
    region = omega.component & (np.nan_to_num(omega.values, nan=-1.0) > level)
    _, count = ndimage.label(region)
    return int(count)


def boundary_condition_values(omega: OmegaB):
    """Chart condition along the extracted boundary, from the implicit curvature."""
    params = omega.params
    u = ub_field(params)
    p = omega.curve.p
    nu, kappa = _implicit_frame(u, p)
    s = params.model.sigma
    rho2 = np.sum(p * p, axis=-1)
    return (1 - s * rho2) / 2 * kappa + s * np.sum(nu * p, axis=-1)


def boundary_ordinate_at_zero(params: CounterexampleParams) -> float:
    """Upper boundary crossing of the axis ``x = 0``."""
    u = ub_field(params)
    g = lambda y: float(u.value(np.array([0.0, y])))
    hi = 2.0 * float(asymptotic_ordinate(params, 0.0))
    while g(hi) > 0:
        hi *= 2
    return float(brentq(g, 0.0, hi, xtol=1e-16, rtol=1e-14))


# Verification ----------------------------------------------------------------------


@dataclass
class CounterexampleReport:
    surface: str
    roots: tuple
    b: float
    eta: float
    xbar: float
    component_count: int
    maxima: list
    saddle_count: int
    index_sum: int
    star_margin: float
    min_G: float
    asymptotics_residual: float
    boundary_ordinate: float
    predicted_ordinate: float
    curve_samples: int

    @property
    def min_G_over_sqrt_b(self) -> float:
        return self.min_G / math.sqrt(self.b)

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "roots": list(self.roots),
            "b": self.b,
            "eta": self.eta,
            "xBarEta": self.xbar,
            "componentCount": self.component_count,
            "maxima": [[x, y] for x, y in self.maxima],
            "maxCount": len(self.maxima),
            "saddleCount": self.saddle_count,
            "indexSum": self.index_sum,
            "starMargin": self.star_margin,
            "minG": self.min_G,
            "minGOverSqrtB": self.min_G_over_sqrt_b,
            "asymptoticsResidual": self.asymptotics_residual,
            "boundaryOrdinateAtZero": self.boundary_ordinate,
            "predictedOrdinateAtZero": self.predicted_ordinate,
            "curveSamples": self.curve_samples,
        }


def verify_family(params: CounterexampleParams, omega: Optional[OmegaB] = None,
                  seeds: int = 64):
    """Run the full check of one member of the family.

    Returns
    -------
    report : CounterexampleReport
    omega : OmegaB
        The extracted domain (for output bundles).
    """
    omega = omega or extract_omega_b(params)
    u = ub_field(params)
    domain = omega.domain
    axis_seeds = np.column_stack([np.linspace(-params.xbar, params.xbar, 4 * seeds + 2)[1:-1],
                                  np.zeros(4 * seeds)])
    cps = find_critical_points(u, domain, seeds, extra_seeds=axis_seeds)
    cps = index_critical_points(u, domain, cps, with_v=False)
    maxima = [(c.x, c.y) for c in cps if c.kind == "Max"]
    saddles = sum(c.kind == "Saddle" for c in cps)
    index_sum = sum(c.index_grad for c in cps if c.index_grad is not None)
    p = omega.curve.p
    keep = np.abs(p[:, 0]) < params.xbar - ENDPOINT_EXCLUSION_CELLS * omega.dx
    g = boundary_condition_values(omega)
    y0 = boundary_ordinate_at_zero(params)
    pred = float(asymptotic_ordinate(params, 0.0))
    report = CounterexampleReport(
        surface=params.model.value,
        roots=params.poly.roots,
        b=params.b,
        eta=params.eta,
        xbar=params.xbar,
        component_count=count_superlevel_components(params, params.b, omega),
        maxima=maxima,
        saddle_count=int(saddles),
        index_sum=int(index_sum),
        star_margin=float(np.min(radial_cosine(omega.curve))),
        min_G=float(np.min(g[keep])),
        asymptotics_residual=abs(y0 / pred - 1.0),
        boundary_ordinate=y0,
        predicted_ordinate=pred,
        curve_samples=len(omega.curve),
    )
    return report, omega


@dataclass(frozen=True)
class SweepSummary:
    bs: tuple
    min_G_over_sqrt_b: tuple
    fitted_C: float

    def bounded(self, growth: float = 2.0) -> bool:
        """``min_G >= -C sqrt(b)`` holds with the fitted ``C`` and the ratio does not blow up."""
        r = np.asarray(self.min_G_over_sqrt_b)
        neg = -np.minimum(r, 0.0)
        return bool(np.all(r >= -self.fitted_C - 1e-15) and neg.max() <= growth * max(neg.min(), 0)
                    + 1e-12 or np.all(r >= 0))

    def to_dict(self) -> dict:
        return {"b": list(self.bs), "minGOverSqrtB": list(self.min_G_over_sqrt_b),
                "fittedC": self.fitted_C, "bounded": self.bounded()}


def summarize_sweep(reports: Sequence[CounterexampleReport]) -> SweepSummary:
    ratios = tuple(r.min_G_over_sqrt_b for r in reports)
    c = max(0.0, max(-x for x in ratios))
    return SweepSummary(tuple(r.b for r in reports), ratios, c)


def discover_b_threshold(model: SurfaceModel, roots: Sequence[float], start: float = B_START,
                         max_halvings: int = 20) -> float:
    """Largest ``start / 2^k`` for which extraction succeeds and the checks pass.

    Checks: ``n`` superlevel components, positive star margin, the axis
    segment ``|x| < xbar`` inside the domain.
    """
    base = CounterexampleParams.build(model, roots, start)
    b = start
    for _ in range(max_halvings + 1):
        params = base.with_b(b)
        try:
            omega = extract_omega_b(params)
            ok = (count_superlevel_components(params, b, omega) == params.poly.n
                  and np.min(radial_cosine(omega.curve)) > 0)
            xs = np.linspace(-params.xbar, params.xbar, 203)[1:-1]
            ok = ok and bool(np.all(omega.curve.contains(np.column_stack([xs, 0 * xs]))))
            if ok:
                return b
        except ResolutionError as exc:
            log.info("b=%g rejected: %s", b, exc)
        b /= 2
    raise ResolutionError(f"no admissible b found after {max_halvings} halvings")
