"""Conformal chart models of the round sphere and the hyperbolic plane.

Both surfaces are represented in a single planar chart with metric
``lam(x, y) * (dx^2 + dy^2)`` where ``lam = 4 / (1 + sigma*(x^2 + y^2))^2``.
For the sphere (``sigma = +1``) the chart is stereographic projection from
the south pole; for the hyperbolic plane (``sigma = -1``) it is the Poincare
disk. Points are plain arrays whose last axis has length 2, so every function
here is vectorized over leading axes.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError, PreconditionError

# Sphere points beyond this chart modulus sit in a tiny cap around the south
# pole; none of the supported domains reach it.
SPHERE_CHART_LIMIT = 10.0


class SurfaceModel(enum.Enum):
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"

    @property
    def sigma(self) -> int:
        return 1 if self is SurfaceModel.SPHERE else -1

    @classmethod
    def parse(cls, name: str) -> "SurfaceModel":
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ChartDomainError(
                f"unknown surface {name!r}; expected 'sphere' or 'hyperbolic'"
            ) from None


SPHERE = SurfaceModel.SPHERE
HYPERBOLIC = SurfaceModel.HYPERBOLIC


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return p


def check_chart(p, model: SurfaceModel) -> np.ndarray:
    """Return ``p`` as an array, raising if any point is off the chart."""
    p = _as_points(p)
    r2 = np.sum(p * p, axis=-1)
    if model is HYPERBOLIC:
        bad = ~(r2 < 1.0)
    else:
        bad = ~(r2 <= SPHERE_CHART_LIMIT**2)
    if np.any(bad):
        where = p[bad][0] if p.ndim > 1 else p
        raise ChartDomainError(
            f"point {tuple(np.round(where, 12))} lies outside the {model.value} chart"
        )
    return p


def metric_factor(p, model: SurfaceModel) -> np.ndarray:
    """Conformal factor ``4 / (1 + sigma |p|^2)^2``."""
    p = check_chart(p, model)
    r2 = np.sum(p * p, axis=-1)
    return 4.0 / (1.0 + model.sigma * r2) ** 2


def geodesic_radius(p, model: SurfaceModel) -> np.ndarray:
    """Geodesic distance from the chart origin to ``p``."""
    p = check_chart(p, model)
    rho = np.hypot(p[..., 0], p[..., 1])
    if model is SPHERE:
        return 2.0 * np.arctan(rho)
    return 2.0 * np.arctanh(rho)


def chart_modulus(radius, model: SurfaceModel) -> np.ndarray:
    """Inverse of :func:`geodesic_radius`: chart modulus at a given distance."""
    radius = np.asarray(radius, dtype=float)
    if model is SPHERE:
        if np.any((radius < 0) | (radius >= np.pi)):
            raise ChartDomainError("spherical radius must lie in [0, pi)")
        return np.tan(radius / 2.0)
    if np.any(radius < 0):
        raise ChartDomainError("hyperbolic radius must be nonnegative")
    return np.tanh(radius / 2.0)


def geodesic_distance(p, q, model: SurfaceModel) -> np.ndarray:
    """Geodesic distance between chart points, via the recentering map at ``p``."""
    p = check_chart(p, model)
    q = check_chart(q, model)
    zp = p[..., 0] + 1j * p[..., 1]
    zq = q[..., 0] + 1j * q[..., 1]
    w = np.abs(zq - zp) / np.abs(1.0 + model.sigma * np.conj(zp) * zq)
    if model is SPHERE:
        return 2.0 * np.arctan(w)
    return 2.0 * np.arctanh(np.minimum(w, 1.0))


def log_factor_gradient(p, model: SurfaceModel) -> np.ndarray:
    """Gradient of ``phi = log(lam) / 2``, the conformal exponent."""
    p = _as_points(p)
    r2 = np.sum(p * p, axis=-1)
    return -2.0 * model.sigma * p / (1.0 + model.sigma * r2)[..., None]


def christoffel(p, model: SurfaceModel) -> np.ndarray:
    """Christoffel symbols ``G[..., k, i, j]`` of the conformal metric.

    For ``g = exp(2 phi) delta`` one has
    ``G^k_ij = delta_ik d_j phi + delta_jk d_i phi - delta_ij d_k phi``.
    """
    dphi = log_factor_gradient(p, model)
    eye = np.eye(2)
    return (
        eye[:, :, None] * dphi[..., None, None, :]
        + eye[:, None, :] * dphi[..., None, :, None]
        - eye[None, :, :] * dphi[..., :, None, None]
    )


# Tangent vectors -------------------------------------------------------------


@dataclass(frozen=True)
class TangentVector:
    """Chart components ``(vx, vy)`` of a tangent vector at ``base``."""

    base: tuple
    vx: float
    vy: float
    model: SurfaceModel = SPHERE

    @property
    def components(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))


def _same_base(u: TangentVector, v: TangentVector):
    if u.model is not v.model or not np.allclose(u.base, v.base, rtol=0, atol=0):
        raise PreconditionError("tangent vectors live at different base points")


def inner(u: TangentVector, v: TangentVector) -> float:
    """Metric inner product ``lam(base) * (u . v)``."""
    _same_base(u, v)
    lam = float(metric_factor(np.asarray(u.base, float), u.model))
    return lam * (u.vx * v.vx + u.vy * v.vy)


def perp(v: TangentVector) -> TangentVector:
    """Counter-clockwise quarter turn; an isometry because the chart is conformal."""
    return dataclasses.replace(v, vx=-v.vy, vy=v.vx)


def metric_inner(p, a, b, model: SurfaceModel) -> np.ndarray:
    """Vectorized inner product of chart vectors ``a``, ``b`` based at ``p``."""
    return metric_factor(p, model) * np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def rotate_ccw(v) -> np.ndarray:
    """Vectorized counter-clockwise quarter turn of chart components."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# Killing fields --------------------------------------------------------------


class Killing(enum.Enum):
    K1 = 1
    K2 = 2


@dataclass(frozen=True)
class KillingField:
    """One of the two Killing fields generating isometries that move the origin.

    In the chart both surfaces share the closed form
    ``K1 = ((1 + s(x^2 - y^2))/2, s x y)`` and
    ``K2 = (s x y, (1 - s(x^2 - y^2))/2)`` with ``s = sigma``. On the sphere
    these are the stereographic images of the rotation fields
    ``z d_x - x d_z`` and ``z d_y - y d_z``.
    """

    model: SurfaceModel
    which: Killing

    def __call__(self, p) -> np.ndarray:
        return killing_eval(self, p)

    def jacobian(self, p) -> np.ndarray:
        return killing_jacobian(self, p)


def killing_eval(k: KillingField, p) -> np.ndarray:
    p = check_chart(p, k.model)
    s = k.model.sigma
    x, y = p[..., 0], p[..., 1]
    d = x * x - y * y
    if k.which is Killing.K1:
        return np.stack([(1.0 + s * d) / 2.0, s * x * y], axis=-1)
    return np.stack([s * x * y, (1.0 - s * d) / 2.0], axis=-1)


def killing_jacobian(k: KillingField, p) -> np.ndarray:
    """``J[..., i, j] = d K^i / d x_j`` in chart coordinates."""
    p = check_chart(p, k.model)
    s = k.model.sigma
    x, y = p[..., 0], p[..., 1]
    if k.which is Killing.K1:
        rows = [[s * x, -s * y], [s * y, s * x]]
    else:
        rows = [[s * y, s * x], [-s * x, s * y]]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def killing_pair(model: SurfaceModel):
    return KillingField(model, Killing.K1), KillingField(model, Killing.K2)


def signed_area_A(p, model: SurfaceModel) -> np.ndarray:
    """Signed metric area spanned by ``K1`` and ``K2``.

    With the orthonormal frame ``e_i = d_i / sqrt(lam)`` this is
    ``lam * det[K1 K2]``, which equals ``cos(theta)`` on the sphere and
    ``cosh(r)`` on the hyperbolic plane.
    """
    k1, k2 = killing_pair(model)
    a, b = killing_eval(k1, p), killing_eval(k2, p)
    det = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return metric_factor(p, model) * det


# Recentering isometries ------------------------------------------------------


@dataclass(frozen=True)
class Recentering:
    """Isometry ``T(z) = (z - a) / (1 + sigma conj(a) z)`` sending ``a`` to 0.

    For the sphere this is the rotation taking ``a`` to the north pole, read in
    the stereographic chart; for the Poincare disk it is the usual disk
    automorphism.
    """

    center: complex
    model: SurfaceModel

    def _den(self, z):
        return 1.0 + self.model.sigma * np.conj(self.center) * z

    def __call__(self, z):
        return (z - self.center) / self._den(z)

    def derivative(self, z):
        a = self.center
        return (1.0 + self.model.sigma * abs(a) ** 2) / self._den(z) ** 2

    def second_derivative(self, z):
        a, s = self.center, self.model.sigma
        return -2.0 * s * np.conj(a) * (1.0 + s * abs(a) ** 2) / self._den(z) ** 3

    def apply(self, p, d1=None, d2=None):
        """Map points and, when given, first and second curve derivatives."""
        z = _to_complex(p)
        w = self(z)
        out = [_to_points(w)]
        if d1 is not None:
            z1 = _to_complex(d1)
            t1 = self.derivative(z)
            out.append(_to_points(t1 * z1))
            if d2 is not None:
                z2 = _to_complex(d2)
                out.append(_to_points(self.second_derivative(z) * z1 * z1 + t1 * z2))
        return out[0] if len(out) == 1 else tuple(out)


def _to_complex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1]


def _to_points(z) -> np.ndarray:
    return np.stack([np.real(z), np.imag(z)], axis=-1)


def recenter(domain, new_center):
    """Move ``new_center`` to the chart origin by an isometry of the surface.

    Parameters
    ----------
    domain : DomainSpec
        Domain whose boundary curve is transformed sample by sample.
    new_center : array_like
        Chart point strictly inside the domain.

    Returns
    -------
    DomainSpec
        The transformed domain with ``center`` reset to the origin.
    """
    c = check_chart(np.asarray(new_center, dtype=float), domain.model)
    if not domain.curve.contains(c[None, :])[0]:
        raise PreconditionError(f"new center {tuple(c)} is not inside the domain")
    if np.all(c == 0.0):
        return domain
    iso = Recentering(complex(c[0], c[1]), domain.model)
    curve = domain.curve.mapped(iso)
    return dataclasses.replace(domain, curve=curve, center=(0.0, 0.0))
