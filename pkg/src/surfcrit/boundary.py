"""Boundary curves, example domain families and the boundary conditions.

A :class:`BoundaryCurve` stores samples of a closed chart curve together with
exact (or finite-difference) first and second parameter derivatives. The
condition functions evaluate, sample by sample, the curvature quantities that
decide whether the uniqueness theorem applies:

* sphere: ``cos(theta) kappa + sin(theta) <nu, e_theta>``
* hyperbolic plane: ``cosh(r) kappa - sinh(r) <nu, e_r>``

together with their chart forms ``(1 - s rho^2)/2 kappa_E + s <nu_E, p>``.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from matplotlib.path import Path as MplPath
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.signal import savgol_filter
from shapely.geometry import LinearRing

from .errors import (
    DegenerateCurveError,
    InputError,
    ParameterError,
    PreconditionError,
)
from .surface import (
    HYPERBOLIC,
    SPHERE,
    SurfaceModel,
    chart_modulus,
    check_chart,
    geodesic_radius,
    Recentering,
    metric_factor,
    recenter,
)

log = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2048
# Condition values below this are not accepted as "strictly positive".
POSITIVITY_TOL = 1e-6
_REGULARITY_TOL = 1e-12

Evaluator = Callable[[np.ndarray], tuple]


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Sampled chart curve with first and second parameter derivatives.

    Attributes
    ----------
    t : ndarray, shape (N,)
        Parameter values, increasing.
    p, d1, d2 : ndarray, shape (N, 2)
        Position, first and second derivative with respect to ``t``.
    closed : bool
        Whether the curve closes up with parameter period ``period``.
    evaluator : callable, optional
        ``t -> (p, d1, d2)`` for off-sample evaluation. Built from periodic
        cubic splines when absent.
    """

    t: np.ndarray
    p: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    closed: bool = True
    period: Optional[float] = None
    evaluator: Optional[Evaluator] = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for key in ("t", "p", "d1", "d2"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float))
        n = self.t.shape[0]
        if self.p.shape != (n, 2) or self.d1.shape != (n, 2) or self.d2.shape != (n, 2):
            raise InputError("curve arrays have inconsistent shapes")
        if n < 4:
            raise DegenerateCurveError("a curve needs at least 4 samples")
        speed = np.hypot(self.d1[:, 0], self.d1[:, 1])
        if np.any(speed < _REGULARITY_TOL):
            i = int(np.argmin(speed))
            raise DegenerateCurveError(f"degenerate parametrization at t={self.t[i]:.6g}")
        if self.closed:
            if self.period is None:
                object.__setattr__(self, "period", float(self.t[-1] - self.t[0]) * n / (n - 1))
            if not LinearRing(self.p).is_simple:
                raise DegenerateCurveError("curve is not simple")
            if self.signed_area() <= 0:
                raise DegenerateCurveError("curve must be oriented counter-clockwise")

    def __len__(self):
        return self.t.shape[0]

    def signed_area(self) -> float:
        x, y = self.p[:, 0], self.p[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def evaluate(self, t) -> tuple:
        """Position and derivatives at arbitrary parameters."""
        t = np.asarray(t, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(t)
        if "spline" not in self._cache:
            self._cache["spline"] = _periodic_splines(self)
        sp, s1, s2 = self._cache["spline"]
        tt = self.t[0] + np.mod(t - self.t[0], self.period) if self.closed else t
        return sp(tt), s1(tt), s2(tt)

    def resample(self, n: int) -> "BoundaryCurve":
        """Samples at ``n`` uniformly spaced parameter values over one period."""
        if not self.closed:
            raise PreconditionError("only closed curves can be resampled")
        if n == len(self):
            return self
        t = self.t[0] + self.period * np.arange(n) / n
        p, d1, d2 = self.evaluate(t)
        return BoundaryCurve(t, p, d1, d2, True, self.period, self.evaluator, self.name)

    def path(self) -> MplPath:
        if "path" not in self._cache:
            self._cache["path"] = MplPath(np.vstack([self.p, self.p[:1]]), closed=True)
        return self._cache["path"]

    def contains(self, points) -> np.ndarray:
        """Inside test against the sampled polygon."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.path().contains_points(pts)

    def winding_number(self, q) -> int:
        """Winding number of the sampled polygon about ``q``."""
        z = (self.p[:, 0] - q[0]) + 1j * (self.p[:, 1] - q[1])
        if np.any(np.abs(z) == 0):
            raise PreconditionError("point lies on the curve")
        turn = np.angle(np.roll(z, -1) / z)
        return int(round(float(np.sum(turn)) / (2 * np.pi)))

    def mapped(self, iso) -> "BoundaryCurve":
        """Image under a conformal map ``iso`` with an ``apply`` method."""
        p, d1, d2 = iso.apply(self.p, self.d1, self.d2)
        ev = None
        if self.evaluator is not None:
            inner_ev = self.evaluator

            def ev(t, inner_ev=inner_ev, iso=iso):
                return iso.apply(*inner_ev(t))

        return BoundaryCurve(self.t, p, d1, d2, self.closed, self.period, ev, self.name)

    def metric_length(self, model: SurfaceModel) -> float:
        """Length in the surface metric (periodic trapezoid rule)."""
        if not self.closed:
            raise PreconditionError("metric length is defined for closed curves")
        speed = np.sqrt(metric_factor(self.p, model)) * np.hypot(*self.d1.T)
        return float(np.sum(speed) * self.period / len(self))


def _periodic_splines(c: BoundaryCurve):
    if c.closed:
        tt = np.append(c.t, c.t[0] + c.period)
        close = lambda a: np.vstack([a, a[:1]])
        kw = {"bc_type": "periodic"}
        return tuple(CubicSpline(tt, close(a), axis=0, **kw) for a in (c.p, c.d1, c.d2))
    return tuple(CubicSpline(c.t, a, axis=0) for a in (c.p, c.d1, c.d2))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Simply connected chart domain, star center at the origin."""

    model: SurfaceModel
    curve: BoundaryCurve
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.curve.closed:
            raise PreconditionError("a domain needs a closed boundary curve")
        check_chart(self.curve.p, self.model)
        if self.curve.winding_number((0.0, 0.0)) != 1:
            raise PreconditionError("the chart origin must lie strictly inside the domain")

    def contains(self, points) -> np.ndarray:
        return self.curve.contains(points)


# Families ----------------------------------------------------------------------


def _polar_curve(rho_fn, n: int, name: str) -> BoundaryCurve:
    """Curve ``rho(s) (cos s, sin s)`` from ``rho_fn(s) -> (rho, rho', rho'')``."""

    def ev(s):
        s = np.asarray(s, dtype=float)
        r, r1, r2 = rho_fn(s)
        c, sn = np.cos(s), np.sin(s)
        radial = np.stack([c, sn], axis=-1)
        tangential = np.stack([-sn, c], axis=-1)
        p = r[..., None] * radial
        d1 = r1[..., None] * radial + r[..., None] * tangential
        d2 = (r2 - r)[..., None] * radial + 2.0 * r1[..., None] * tangential
        return p, d1, d2

    t = 2.0 * np.pi * np.arange(n) / n
    return BoundaryCurve(t, *ev(t), closed=True, period=2.0 * np.pi, evaluator=ev, name=name)


def geodesic_disk(model: SurfaceModel, radius: float, n: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Boundary of the geodesic disk of given radius about the origin."""
    if not radius > 0:
        raise ParameterError("disk radius must be positive")
    if model is SPHERE and not radius < np.pi:
        raise ParameterError("spherical disk radius must be below pi")
    rho = float(chart_modulus(radius, model))
    const = lambda s: (np.full_like(s, rho), np.zeros_like(s), np.zeros_like(s))
    return _polar_curve(const, n, f"disk(R={radius:g})")


def superellipse(p_exp: int, half_width: float = 0.5, n: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Boundary of ``|x|^p + |y|^p < half_width^p`` (``p`` even)."""
    if int(p_exp) != p_exp or p_exp < 2 or p_exp % 2:
        raise ParameterError("superellipse exponent must be an even integer >= 2")
    if not half_width > 0:
        raise ParameterError("superellipse half width must be positive")
    q = int(p_exp)

    def rho(s):
        c, sn = np.cos(s), np.sin(s)
        g = c**q + sn**q
        g1 = q * (-(c ** (q - 1)) * sn + sn ** (q - 1) * c)
        g2 = q * (
            (q - 1) * c ** (q - 2) * sn**2 - c**q + (q - 1) * sn ** (q - 2) * c**2 - sn**q
        )
        r = half_width * g ** (-1.0 / q)
        r1 = -(half_width / q) * g ** (-1.0 / q - 1.0) * g1
        r2 = -(half_width / q) * (
            (-1.0 / q - 1.0) * g ** (-1.0 / q - 2.0) * g1**2 + g ** (-1.0 / q - 1.0) * g2
        )
        return r, r1, r2

    return _polar_curve(rho, n, f"superellipse(p={q})")


def star_domain(a: float, b: float, k: int, n: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Boundary ``(a + b sin(k s)) (cos s, sin s)``."""
    if not a > 0 or not 0 <= b < a:
        raise ParameterError("star domain needs a > 0 and 0 <= b < a")
    if int(k) != k or k < 1:
        raise ParameterError("star domain frequency k must be a positive integer")

    def rho(s):
        return a + b * np.sin(k * s), b * k * np.cos(k * s), -b * k * k * np.sin(k * s)

    return _polar_curve(rho, n, f"star(a={a:g},b={b:g},k={int(k)})")


def ellipse(a: float, b: float, n: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Boundary ``(a cos s, b sin s)`` with ``0 < b <= a < 1``."""
    if not 0 < b <= a < 1:
        raise ParameterError("ellipse needs 0 < b <= a < 1")

    def ev(s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        p = np.stack([a * c, b * sn], axis=-1)
        return p, np.stack([-a * sn, b * c], axis=-1), -p

    t = 2.0 * np.pi * np.arange(n) / n
    return BoundaryCurve(t, *ev(t), closed=True, period=2.0 * np.pi, evaluator=ev,
                         name=f"ellipse(a={a:g},b={b:g})")


def strip_arc_circle(b: float, model: SurfaceModel) -> tuple:
    """Center ordinate and radius of the chart circle carrying the upper strip edge.

    The edge of the strip ``{psi_b > 0}`` around the geodesic ``y = 0`` is an
    equidistant curve, hence a chart circle symmetric about the y axis.
    """
    if not b > 0:
        raise ParameterError("strip half-width parameter b must be positive")
    if model is SPHERE:
        c = math.sqrt(-math.expm1(-2.0 * b))
        return 1.0 / c, math.sqrt(1.0 / c**2 - 1.0)
    k = math.sqrt(math.expm1(2.0 * b))
    return -1.0 / k, math.sqrt(1.0 + 1.0 / k**2)


def strip_edge(b: float, model: SurfaceModel, x) -> np.ndarray:
    """Ordinate of the upper strip edge above abscissa ``x``."""
    yc, r = strip_arc_circle(b, model)
    x = np.asarray(x, dtype=float)
    if model is SPHERE:
        return yc - np.sqrt(r * r - x * x)
    return yc + np.sqrt(r * r - x * x)


def strip_arc(b: float, model: SurfaceModel, half_length: float,
              n: int = DEFAULT_SAMPLES) -> BoundaryCurve:
    """Open upper edge of the strip over ``|x| <= half_length``, traversed right to left.

    Right-to-left traversal makes the strip lie on the left, i.e. the outward
    normal points away from the axis, matching the closed-curve convention.
    """
    yc, r = strip_arc_circle(b, model)
    if not 0 < half_length < r:
        raise ParameterError("strip arc half length exceeds the edge circle")
    sgn = -1.0 if model is SPHERE else 1.0

    def ev(t):
        x = -np.asarray(t, dtype=float)
        w = np.sqrt(r * r - x * x)
        y = yc + sgn * w
        yx = -sgn * x / w
        yxx = -sgn * r * r / w**3
        p = np.stack([x, y], axis=-1)
        d1 = np.stack([-np.ones_like(x), -yx], axis=-1)
        d2 = np.stack([np.zeros_like(x), yxx], axis=-1)
        return p, d1, d2

    t = np.linspace(-half_length, half_length, n)
    return BoundaryCurve(t, *ev(t), closed=False, evaluator=ev, name=f"strip-edge(b={b:g})")


def strip_polygon(b: float, model: SurfaceModel, half_length: float,
                  n_arc: int = 2000) -> np.ndarray:
    """Closed polygon of the strip truncated at ``|x| = half_length``.

    Each end is closed by a chart circle arc centred on the axis and tangent
    to both edges, so the polygon is tangent-continuous. The caps are for
    display and meshing only; they are not part of the strip.
    """
    yc, r = strip_arc_circle(b, model)
    x = np.linspace(half_length, -half_length, n_arc)
    top = np.stack([x, strip_edge(b, model, x)], axis=-1)
    bottom = np.stack([x[::-1], -strip_edge(b, model, x[::-1])], axis=-1)
    # the edge normal at (L, y_L) passes through the edge circle centre (0, yc)
    y_end = float(strip_edge(b, model, half_length))
    xc = half_length * (1.0 - y_end / (y_end - yc))
    rad = math.hypot(half_length - xc, y_end)
    ang = math.atan2(y_end, half_length - xc)
    n_cap = max(16, int(n_arc * rad * (np.pi - ang) / half_length))
    a = np.linspace(-ang, ang, n_cap)[1:-1]
    right = np.stack([xc + rad * np.cos(a), rad * np.sin(a)], axis=-1)
    left = np.stack([-right[:, 0], -right[:, 1]], axis=-1)
    return np.vstack([bottom, right, top, left])


def polyline_curve(points, n: Optional[int] = None, smooth: bool = True,
                   name: str = "polyline") -> BoundaryCurve:
    """Closed curve through ``points`` with finite-difference derivatives.

    The polygon is resampled uniformly in chord length, smoothed by a local
    quadratic least-squares fit over a 7-sample window, and differentiated by
    periodic 5-point stencils. The parameter is chord length.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise InputError("polyline needs at least 4 points [[x, y], ...]")
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    if area < 0:
        pts = pts[::-1]
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    if np.any(seg == 0):
        keep = np.append(seg > 0, True)[:-1]
        pts = pts[keep]
        closed = np.vstack([pts, pts[:1]])
        seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(s[-1])
    n = int(n or max(len(pts), 256))
    t = total * np.arange(n) / n
    p = np.stack([np.interp(t, s, closed[:, 0]), np.interp(t, s, closed[:, 1])], axis=-1)
    if smooth:
        p = savgol_filter(p, 7, 2, axis=0, mode="wrap")
    dt = total / n
    roll = lambda k: np.roll(p, -k, axis=0)
    d1 = (-roll(2) + 8 * roll(1) - 8 * roll(-1) + roll(-2)) / (12 * dt)
    d2 = (-roll(2) + 16 * roll(1) - 30 * p + 16 * roll(-1) - roll(-2)) / (12 * dt * dt)
    return BoundaryCurve(t, p, d1, d2, closed=True, period=total, name=name)


# Local geometry ------------------------------------------------------------------


def _samples(c: BoundaryCurve, t=None):
    if t is None:
        return c.p, c.d1, c.d2
    p, d1, d2 = c.evaluate(t)
    speed = np.hypot(d1[..., 0], d1[..., 1])
    if np.any(speed < _REGULARITY_TOL):
        raise DegenerateCurveError("degenerate parametrization")
    return p, d1, d2


def outward_normal(c: BoundaryCurve, t=None) -> np.ndarray:
    """Euclidean unit outer normal ``(y', -x') / |gamma'|`` of a ccw curve."""
    _, d1, _ = _samples(c, t)
    speed = np.hypot(d1[..., 0], d1[..., 1])
    return np.stack([d1[..., 1], -d1[..., 0]], axis=-1) / speed[..., None]


def euclid_curvature(c: BoundaryCurve, t=None) -> np.ndarray:
    """Signed Euclidean curvature, positive for a ccw circle."""
    _, d1, d2 = _samples(c, t)
    cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    return cross / np.hypot(d1[..., 0], d1[..., 1]) ** 3


def geodesic_curvature(c: BoundaryCurve, model: SurfaceModel, t=None) -> np.ndarray:
    """Curvature in the surface metric via the conformal change rule.

    ``kappa = (1 + s rho^2)/2 kappa_E - s <nu_E, p>`` with ``s = sigma``.
    """
    p, _, _ = _samples(c, t)
    check_chart(p, model)
    s = model.sigma
    rho2 = np.sum(p * p, axis=-1)
    nu = outward_normal(c, t)
    return (1.0 + s * rho2) / 2.0 * euclid_curvature(c, t) - s * np.sum(nu * p, axis=-1)


def radial_cosine(c: BoundaryCurve, t=None) -> np.ndarray:
    """``<nu_E, p/|p|>``, the cosine between outer normal and radial direction."""
    p, _, _ = _samples(c, t)
    rho = np.hypot(p[..., 0], p[..., 1])
    if np.any(rho == 0):
        raise PreconditionError("curve passes through the star center")
    return np.sum(outward_normal(c, t) * p, axis=-1) / rho


def star_margin(c: BoundaryCurve) -> float:
    """Smallest radial cosine over the samples; positive means star-shaped."""
    return float(np.min(radial_cosine(c)))


def condition_G(c: BoundaryCurve, model: SurfaceModel, t=None) -> np.ndarray:
    """Boundary condition evaluated from intrinsic quantities.

    Uses the geodesic curvature, the distance from the center and the angle
    between normal and radial direction (angles are conformal invariants).
    """
    p, _, _ = _samples(c, t)
    rad = geodesic_radius(p, model)
    kappa = geodesic_curvature(c, model, t)
    cos_nr = radial_cosine(c, t)
    if model is SPHERE:
        return np.cos(rad) * kappa + np.sin(rad) * cos_nr
    return np.cosh(rad) * kappa - np.sinh(rad) * cos_nr


def condition_G_chart(c: BoundaryCurve, model: SurfaceModel, t=None) -> np.ndarray:
    """Chart form ``(1 - s rho^2)/2 kappa_E + s <nu_E, p>`` of the condition."""
    p, _, _ = _samples(c, t)
    check_chart(p, model)
    s = model.sigma
    rho2 = np.sum(p * p, axis=-1)
    nu = outward_normal(c, t)
    return (1.0 - s * rho2) / 2.0 * euclid_curvature(c, t) + s * np.sum(nu * p, axis=-1)


def tangency_F(c: BoundaryCurve, model: SurfaceModel, t=None) -> np.ndarray:
    """Tangency function whose zeros are the boundary points where ``K1`` is tangent.

    Derivatives are normalized by the metric speed, which is the arc-length
    reparametrization; the sign pattern does not depend on it because ``F``
    is homogeneous of degree one in the derivatives.
    """
    p, d1, _ = _samples(c, t)
    x, y = p[..., 0], p[..., 1]
    speed = np.sqrt(metric_factor(p, model)) * np.hypot(d1[..., 0], d1[..., 1])
    dx, dy = d1[..., 0] / speed, d1[..., 1] / speed
    if model is SPHERE:
        rho2 = x * x + y * y
        rho = np.sqrt(rho2)
        theta = 2.0 * np.arctan(rho)
        phi = np.arctan2(y, x)
        dtheta = 2.0 / (1.0 + rho2) * (x * dx + y * dy) / rho
        dphi = (x * dy - y * dx) / rho2
        return dtheta * np.sin(phi) / np.tan(theta) + dphi * np.cos(phi)
    return dx * x * y + dy * (1.0 - x * x + y * y) / 2.0


def count_sign_changes(values) -> int:
    """Cyclic sign changes; each run of exact zeros counts as one change."""
    s = np.sign(np.asarray(values, dtype=float))
    if np.all(s == 0):
        raise PreconditionError("function vanishes identically on the samples")
    start = int(np.flatnonzero(s)[0])
    s = np.roll(s, -start)
    changes, prev, in_zero = 0, s[0], False
    for v in s[1:].tolist() + [s[0]]:
        if v == 0:
            in_zero = True
            continue
        if in_zero or v != prev:
            changes += 1
        prev, in_zero = v, False
    return changes


def count_sign_changes_F(c: BoundaryCurve, model: SurfaceModel) -> int:
    if star_margin(c) <= 0:
        raise PreconditionError("star margin is not positive; angular monotonicity fails")
    return count_sign_changes(tangency_F(c, model))


# Report --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    surface: str
    samples: int
    star_margin: float
    min_G: float
    argmin_G: float
    argmin_point: tuple
    min_geodesic_curvature: float
    horoconvex: bool
    sign_changes_F: Optional[int]
    chart_intrinsic_gap: float

    @property
    def passes(self) -> bool:
        return self.min_G > POSITIVITY_TOL and self.star_margin > 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["argmin_point"] = list(self.argmin_point)
        d["passes"] = self.passes
        camel = lambda k: k.split("_")[0] + "".join(w[:1].upper() + w[1:] for w in k.split("_")[1:])
        return {camel(k): v for k, v in d.items()}


def refine_minimum(fn, c: BoundaryCurve, values: np.ndarray) -> tuple:
    """Golden-section refinement of a sampled minimum; returns ``(t, value)``."""
    i = int(np.argmin(values))
    t0, v0 = float(c.t[i]), float(values[i])
    n = len(c)
    if c.closed:
        lo = c.t[i - 1] if i > 0 else c.t[-1] - c.period
        hi = c.t[i + 1] if i + 1 < n else c.t[0] + c.period
    else:
        if i == 0 or i == n - 1:
            return t0, v0
        lo, hi = c.t[i - 1], c.t[i + 1]
    g = lambda s: float(np.asarray(fn(np.array([s])))[0])
    try:
        res = minimize_scalar(g, bracket=(float(lo), t0, float(hi)), method="golden",
                              tol=1e-10)
        if res.fun < v0 and lo <= res.x <= hi:
            return float(res.x), float(res.fun)
    except ValueError:
        pass
    return t0, v0


def condition_report(domain: DomainSpec, n: int = DEFAULT_SAMPLES) -> ConditionReport:
    """Evaluate the boundary hypotheses of the uniqueness theorem on ``n`` samples."""
    c = domain.curve.resample(n) if domain.curve.evaluator is not None else domain.curve
    m = domain.model
    g_chart = condition_G_chart(c, m)
    g_intr = condition_G(c, m)
    gap = float(np.max(np.abs(g_chart - g_intr)))
    t_min, g_min = refine_minimum(lambda s: condition_G_chart(c, m, s), c, g_chart)
    _, star = refine_minimum(lambda s: radial_cosine(c, s), c, radial_cosine(c))
    _, kappa_min = refine_minimum(lambda s: geodesic_curvature(c, m, s), c,
                                  geodesic_curvature(c, m))
    changes = count_sign_changes_F(c, m) if star > 0 else None
    p_min = c.evaluate(np.array([t_min]))[0][0]
    return ConditionReport(
        surface=m.value,
        samples=len(c),
        star_margin=star,
        min_G=g_min,
        argmin_G=t_min,
        argmin_point=(float(p_min[0]), float(p_min[1])),
        min_geodesic_curvature=kappa_min,
        horoconvex=bool(kappa_min >= 1.0),
        sign_changes_F=changes,
        chart_intrinsic_gap=gap,
    )


# Construction from parameters and files --------------------------------------------

FAMILY_KEYS = {
    "disk": ("R",),
    "superellipse": ("p",),
    "star": ("a", "b", "k"),
    "ellipse": ("a", "b"),
    "strip": ("b",),
    "polyline": ("points",),
}


def make_family(model: SurfaceModel, kind: str, n: int = DEFAULT_SAMPLES, **params) -> BoundaryCurve:
    """Build a boundary curve of a named family.

    Parameters
    ----------
    model : SurfaceModel
        Needed for geodesic disks and strips, and for the chart-domain check.
    kind : str
        One of ``disk`` (``R``), ``superellipse`` (``p``, optional
        ``half_width``), ``star`` (``a``, ``b``, ``k``), ``ellipse``
        (``a``, ``b``), ``strip`` (``b``, optional ``half_length``) or
        ``polyline`` (``points``).
    n : int
        Number of samples.
    """
    kind = str(kind).lower()
    if kind not in FAMILY_KEYS:
        raise ParameterError(f"unknown family kind {kind!r}")
    missing = [k for k in FAMILY_KEYS[kind] if k not in params]
    if missing:
        raise ParameterError(f"family {kind!r} is missing key {missing[0]!r}")
    try:
        if kind == "disk":
            c = geodesic_disk(model, float(params["R"]), n)
        elif kind == "superellipse":
            c = superellipse(params["p"], float(params.get("half_width", 0.5)), n)
        elif kind == "star":
            c = star_domain(float(params["a"]), float(params["b"]), params["k"], n)
        elif kind == "ellipse":
            c = ellipse(float(params["a"]), float(params["b"]), n)
        elif kind == "strip":
            b = float(params["b"])
            _, r = strip_arc_circle(b, model)
            half = float(params.get("half_length", 0.5 * min(r, 1.0)))
            poly = strip_polygon(b, model, half)
            c = polyline_curve(poly, n=max(n, 2048), name=f"strip(b={b:g})")
        else:
            c = polyline_curve(params["points"], n=params.get("samples"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise ParameterError(f"bad parameters for family {kind!r}: {exc}") from exc
    check_chart(c.p, model)
    return c


def load_domain(source, n: int = DEFAULT_SAMPLES) -> DomainSpec:
    """Read a domain description (path, JSON text or dict) into a :class:`DomainSpec`.

    The expected layout is
    ``{"surface": ..., "family": {"kind": ..., ...}, "center": [cx, cy]}``.
    """
    if isinstance(source, dict):
        spec = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read domain file {source}: {exc}") from exc
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"domain file is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise InputError("domain file must hold a JSON object")
    for key in ("surface", "family"):
        if key not in spec:
            raise InputError(f"domain file is missing key {key!r}")
    model = SurfaceModel.parse(spec["surface"])
    fam = spec["family"]
    if not isinstance(fam, dict) or "kind" not in fam:
        raise InputError("domain key 'family' must be an object with key 'kind'")
    params = {k: v for k, v in fam.items() if k != "kind"}
    curve = make_family(model, fam["kind"], n=n, **params)
    center = spec.get("center", [0.0, 0.0])
    try:
        center = np.asarray(center, dtype=float).reshape(2)
    except (TypeError, ValueError):
        raise InputError("domain key 'center' must be a pair [cx, cy]") from None
    if np.any(center != 0):
        check_chart(center, model)
        if not curve.contains(center[None, :])[0]:
            raise InputError("domain key 'center' is not inside the curve")
        iso = Recentering(complex(center[0], center[1]), model)
        return DomainSpec(model, curve.mapped(iso))
    return DomainSpec(model, curve)


__all__ = [
    "BoundaryCurve", "DomainSpec", "ConditionReport", "make_family", "load_domain",
    "geodesic_disk", "superellipse", "star_domain", "ellipse", "strip_arc",
    "strip_edge", "strip_polygon", "polyline_curve", "euclid_curvature",
    "geodesic_curvature", "star_margin", "radial_cosine", "condition_G",
    "condition_G_chart", "tangency_F", "count_sign_changes", "count_sign_changes_F",
    "condition_report", "outward_normal", "recenter", "HYPERBOLIC", "SPHERE",
]
