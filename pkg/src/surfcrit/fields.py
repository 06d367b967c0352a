"""Scalar fields with access to chart gradient and Hessian.

Two kinds exist: :class:`ClosedFormField`, built from analytic formulas, and
:class:`FEMField`, a piecewise-linear finite-element function whose first and
second derivatives are recovered by local quadratic least squares.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from matplotlib.tri import Triangulation
from scipy.spatial import cKDTree

from .errors import BoundaryProximityError
from .surface import SPHERE, SurfaceModel, chart_modulus

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClosedFormField:
    """Field given by vectorized callables on point arrays of shape ``(..., 2)``."""

    value_fn: Callable
    gradient_fn: Callable
    hessian_fn: Callable
    name: str = "closed-form"
    inside_fn: Optional[Callable] = None

    def value(self, p):
        return self.value_fn(np.asarray(p, dtype=float))

    def gradient(self, p):
        return self.gradient_fn(np.asarray(p, dtype=float))

    def hessian(self, p):
        return self.hessian_fn(np.asarray(p, dtype=float))

    def derivatives(self, p):
        return self.value(p), self.gradient(p), self.hessian(p)

    def usable(self, p) -> np.ndarray:
        """Points where derivatives may be evaluated."""
        p = np.asarray(p, dtype=float)
        if self.inside_fn is None:
            return np.ones(p.shape[:-1], dtype=bool)
        return self.inside_fn(p)

    def newton_jacobian(self, p):
        return self.hessian(p)


def _outer(p):
    return p[..., :, None] * p[..., None, :]


def disk_torsion(model: SurfaceModel, radius: float) -> ClosedFormField:
    """Torsion function of the geodesic disk of given radius about the origin.

    ``u = sigma (log(2 / (1 + C(R))) - log(1 + sigma rho^2))`` with ``C = cos``
    on the sphere and ``cosh`` on the hyperbolic plane, i.e.
    ``log((1 + cos th)/(1 + cos R))`` and ``log((1 + cosh R)/(1 + cosh r))``.
    """
    s = model.sigma
    c_r = np.cos(radius) if model is SPHERE else np.cosh(radius)
    const = np.log(2.0 / (1.0 + c_r))
    rho_b = float(chart_modulus(radius, model))

    def value(p):
        r2 = np.sum(p * p, axis=-1)
        return s * (const - np.log1p(s * r2))

    def grad(p):
        r2 = np.sum(p * p, axis=-1)
        return -2.0 * p / (1.0 + s * r2)[..., None]

    def hess(p):
        w = 1.0 + s * np.sum(p * p, axis=-1)
        return -2.0 * np.eye(2) / w[..., None, None] + 4.0 * s * _outer(p) / (w**2)[..., None, None]

    inside = lambda p: np.sum(p * p, axis=-1) < rho_b**2
    return ClosedFormField(value, grad, hess, f"disk-torsion({model.value},R={radius:g})", inside)


def hemisphere_eigenfunction() -> ClosedFormField:
    """``cos(theta) = (1 - rho^2)/(1 + rho^2)``, first eigenfunction with eigenvalue 2."""

    def value(p):
        r2 = np.sum(p * p, axis=-1)
        return (1.0 - r2) / (1.0 + r2)

    def grad(p):
        w = 1.0 + np.sum(p * p, axis=-1)
        return -4.0 * p / (w**2)[..., None]

    def hess(p):
        w = 1.0 + np.sum(p * p, axis=-1)
        return -4.0 * np.eye(2) / (w**2)[..., None, None] + 16.0 * _outer(p) / (w**3)[..., None, None]

    inside = lambda p: np.sum(p * p, axis=-1) < 1.0
    return ClosedFormField(value, grad, hess, "hemisphere-eigenfunction", inside)


class StripTerms:
    """Closed form of the strip torsion function and its derivatives.

    With ``s = 1 + sigma rho^2`` and ``Q = s^2 - 4 sigma y^2`` the function is
    ``sigma (log(Q)/2 - log(s)) + b``, which reduces to
    ``log(1 - 4y^2/s^2)/2 + b`` on the sphere and
    ``-log(1 + 4y^2/s^2)/2 + b`` on the hyperbolic plane.
    """

    def __init__(self, model: SurfaceModel, b: float):
        self.model = model
        self.b = float(b)

    def _sq(self, p):
        sg = self.model.sigma
        x, y = p[..., 0], p[..., 1]
        s = 1.0 + sg * (x * x + y * y)
        q = s * s - 4.0 * sg * y * y
        return sg, x, y, s, q

    def value(self, p):
        sg, _, _, s, q = self._sq(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            return sg * (0.5 * np.log(q) - np.log(s)) + self.b

    def gradient(self, p):
        sg, x, y, s, q = self._sq(p)
        qx = 4.0 * sg * x * s
        qy = 4.0 * sg * y * s - 8.0 * sg * y
        gx = sg * (qx / (2 * q) - 2 * sg * x / s)
        gy = sg * (qy / (2 * q) - 2 * sg * y / s)
        return np.stack([gx, gy], axis=-1)

    def hessian(self, p):
        sg, x, y, s, q = self._sq(p)
        qx = 4.0 * sg * x * s
        qy = 4.0 * sg * y * s - 8.0 * sg * y
        qxx = 8.0 * x * x + 4.0 * sg * s
        qxy = 8.0 * x * y
        qyy = 8.0 * y * y + 4.0 * sg * s - 8.0 * sg
        sx, sy = 2.0 * sg * x, 2.0 * sg * y

        def term(qa, qb, qab, sa, sb, sab):
            return sg * (qab / (2 * q) - qa * qb / (2 * q * q) - sab / s + sa * sb / (s * s))

        hxx = term(qx, qx, qxx, sx, sx, 2.0 * sg)
        hxy = term(qx, qy, qxy, sx, sy, 0.0)
        hyy = term(qy, qy, qyy, sy, sy, 2.0 * sg)
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def strip_torsion(model: SurfaceModel, b: float) -> ClosedFormField:
    """Torsion function of the strip of points within a fixed distance of ``y = 0``."""
    terms = StripTerms(model, b)
    inside = lambda p: terms.value(p) > 0
    return ClosedFormField(terms.value, terms.gradient, terms.hessian,
                           f"strip-torsion({model.value},b={b:g})", inside)


# Finite-element fields -------------------------------------------------------------


def _two_ring(n_vertices: int, triangles: np.ndarray):
    rows = np.concatenate([triangles[:, i] for i in (0, 1, 1, 2, 2, 0)])
    cols = np.concatenate([triangles[:, i] for i in (1, 0, 2, 1, 0, 2)])
    adj = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_vertices,) * 2).tocsr()
    adj.data[:] = 1.0
    ring = (adj + adj @ adj).tocsr()
    ring.setdiag(0)
    ring.eliminate_zeros()
    ring.sort_indices()
    return ring


@dataclass(eq=False)
class FEMField:
    """Piecewise-linear field on a mesh with recovered derivatives.

    Nodal gradients and Hessians come from a least-squares quadratic fit over
    each vertex's two-ring (value pinned at the vertex). Off the nodes these
    nodal quantities are interpolated linearly, which gives continuous
    derivative fields suitable for Newton iteration and winding numbers.
    """

    mesh: "object"
    values: np.ndarray
    model: SurfaceModel
    name: str = "fem"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    # recovery ------------------------------------------------------------------
    @property
    def recovered(self):
        if "rec" not in self._cache:
            self._cache["rec"] = self._recover()
        return self._cache["rec"]

    def _recover(self):
        verts = self.mesh.vertices
        ring = _two_ring(len(verts), self.mesh.triangles)
        scale = self.mesh.h
        grads = np.zeros((len(verts), 2))
        hess = np.zeros((len(verts), 2, 2))
        u = self.values
        for i in range(len(verts)):
            nb = ring.indices[ring.indptr[i]:ring.indptr[i + 1]]
            d = (verts[nb] - verts[i]) / scale
            a = np.column_stack([d[:, 0], d[:, 1], 0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1],
                                 0.5 * d[:, 1] ** 2])
            coef = np.linalg.lstsq(a, u[nb] - u[i], rcond=None)[0]
            grads[i] = coef[:2] / scale
            hess[i] = np.array([[coef[2], coef[3]], [coef[3], coef[4]]]) / scale**2
        return grads, hess

    # geometry helpers ----------------------------------------------------------
    @property
    def triangulation(self) -> Triangulation:
        if "tri" not in self._cache:
            v = self.mesh.vertices
            tri = Triangulation(v[:, 0], v[:, 1], self.mesh.triangles)
            self._cache["tri"] = (tri, tri.get_trifinder())
            # barycentric gradients per triangle
            pts = v[self.mesh.triangles]
            e1 = pts[:, 1] - pts[:, 0]
            e2 = pts[:, 2] - pts[:, 0]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            g1 = np.stack([e2[:, 1], -e2[:, 0]], -1) / det[:, None]
            g2 = np.stack([-e1[:, 1], e1[:, 0]], -1) / det[:, None]
            self._cache["bary"] = np.stack([-g1 - g2, g1, g2], axis=1)
        return self._cache["tri"][0]

    def _locate(self, p):
        self.triangulation
        finder = self._cache["tri"][1]
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, 2)
        tri = finder(flat[:, 0], flat[:, 1])
        return flat, tri

    def _bary(self, flat, tri):
        gb = self._cache["bary"][tri]
        base = self.mesh.vertices[self.mesh.triangles[tri, 0]]
        d = flat - base
        l1 = np.sum(gb[:, 1] * d, axis=-1)
        l2 = np.sum(gb[:, 2] * d, axis=-1)
        return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)

    def boundary_distance(self, p) -> np.ndarray:
        if "bdtree" not in self._cache:
            b = self.mesh.vertices[self.mesh.boundary]
            nxt = np.roll(b, -1, axis=0)
            frac = np.linspace(0.0, 1.0, 16, endpoint=False)
            dense = (b[:, None, :] + frac[None, :, None] * (nxt - b)[:, None, :]).reshape(-1, 2)
            self._cache["bdtree"] = cKDTree(dense)
        p = np.asarray(p, dtype=float)
        d, _ = self._cache["bdtree"].query(p.reshape(-1, 2))
        return d.reshape(p.shape[:-1])

    def usable(self, p, margin: Optional[float] = None) -> np.ndarray:
        """Inside the mesh and farther than ``margin`` (default ``h``) from its boundary."""
        margin = self.mesh.h if margin is None else margin
        flat, tri = self._locate(p)
        ok = tri >= 0
        ok[ok] = self.boundary_distance(flat[ok]) > margin
        return ok.reshape(np.asarray(p).shape[:-1])

    # evaluation ----------------------------------------------------------------
    def _interp(self, p, nodal):
        flat, tri = self._locate(p)
        out = np.full((flat.shape[0],) + nodal.shape[1:], np.nan)
        ok = tri >= 0
        if np.any(ok):
            lam = self._bary(flat[ok], tri[ok])
            idx = self.mesh.triangles[tri[ok]]
            out[ok] = np.einsum("ka,ka...->k...", lam, nodal[idx])
        return out.reshape(np.asarray(p).shape[:-1] + nodal.shape[1:])

    def value(self, p):
        return self._interp(p, self.values)

    def gradient(self, p):
        return self._interp(p, self.recovered[0])

    def hessian(self, p):
        return self._interp(p, self.recovered[1])

    def derivatives(self, p, check: bool = True):
        if check and not np.all(self.usable(p)):
            raise BoundaryProximityError(
                "derivative recovery requested within one mesh size of the boundary"
            )
        return self.value(p), self.gradient(p), self.hessian(p)

    def newton_jacobian(self, p):
        """Exact Jacobian of the interpolated gradient field (constant per triangle)."""
        flat, tri = self._locate(p)
        out = np.full((flat.shape[0], 2, 2), np.nan)
        ok = tri >= 0
        if np.any(ok):
            g = self.recovered[0][self.mesh.triangles[tri[ok]]]
            gb = self._cache["bary"][tri[ok]]
            out[ok] = np.einsum("kai,kaj->kij", g, gb)
        return out.reshape(np.asarray(p).shape[:-1] + (2, 2))

    def nodal_derivatives(self, idx):
        g, h = self.recovered
        return self.values[idx], g[idx], h[idx]
