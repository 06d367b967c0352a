"""Critical points, winding indices and the Poincare-Hopf audit.

The auxiliary field is built from the two Killing fields ``K1``, ``K2``:
with ``Z_i = <K_i, grad u>`` one forms ``W = Z1 grad Z2 - Z2 grad Z1`` and
``V`` is ``W`` turned by a quarter turn. At a nondegenerate critical point of
``u`` the field ``V`` has index one; on the boundary
``<V, nu> = |grad u|^2 G`` where ``G`` is the boundary condition. With the
counter-clockwise quarter turn this product comes out with the opposite sign,
so ``V`` uses the clockwise turn, which points it outward on admissible
domains. The two choices differ by ``V -> -V``, which preserves every index
in the plane.

Morse types are read off the chart Hessian: at a critical point the
covariant Hessian equals the chart Hessian (the Christoffel terms multiply
the vanishing gradient), and the metric is a positive multiple of the
identity, so signature and degeneracy agree.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .boundary import DomainSpec, condition_G_chart, geodesic_curvature, outward_normal
from .errors import NumericalError, PreconditionError
from .fields import FEMField
from .surface import (
    SPHERE,
    SurfaceModel,
    geodesic_distance,
    killing_eval,
    killing_jacobian,
    killing_pair,
    metric_factor,
    rotate_ccw,
)

log = logging.getLogger(__name__)

DEFAULT_SEEDS = 64
NEWTON_ITERS = 60
DEGENERACY_RATIO = 1e-8
WINDING_MIN_SAMPLES = 64
WINDING_MAX_DEPTH = 14
REGION_TOL = 1e-9


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    y: float
    kind: str
    hessian_eigs: tuple
    index_grad: Optional[int] = None
    index_V: Optional[int] = None
    winding_residual: Optional[float] = None

    @property
    def p(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "kind": self.kind,
            "indexGrad": self.index_grad,
            "indexV": self.index_V,
            "hessEigs": list(self.hessian_eigs),
        }


def eval_derivatives(u, p):
    """Value, chart gradient and chart Hessian of ``u`` at ``p``.

    Finite-element fields refuse points within one mesh size of the boundary.
    """
    return u.derivatives(np.asarray(p, dtype=float))


def classify(hess) -> tuple:
    """Morse type from a chart Hessian; returns ``(kind, eigenvalues)``."""
    hs = 0.5 * (np.asarray(hess) + np.asarray(hess).T)
    eig = np.linalg.eigvalsh(hs)
    frob2 = float(np.sum(hs * hs))
    if frob2 == 0 or abs(eig[0] * eig[1]) < DEGENERACY_RATIO * frob2:
        return "Degenerate", (float(eig[0]), float(eig[1]))
    if eig[1] < 0:
        return "Max", (float(eig[0]), float(eig[1]))
    if eig[0] > 0:
        return "Min", (float(eig[0]), float(eig[1]))
    return "Saddle", (float(eig[0]), float(eig[1]))


def _usable(u, domain: DomainSpec, p):
    p = np.asarray(p, dtype=float)
    ok = domain.contains(p.reshape(-1, 2)).reshape(p.shape[:-1])
    return ok & u.usable(p)


def _diameter(domain: DomainSpec) -> float:
    span = domain.curve.p.max(axis=0) - domain.curve.p.min(axis=0)
    return float(np.hypot(*span))


def find_critical_points(u, domain: DomainSpec, seeds: int = DEFAULT_SEEDS,
                         merge_radius: Optional[float] = None,
                         extra_seeds=None) -> list:
    """Multistart Newton on the gradient from a uniform interior seed grid.

    Parameters
    ----------
    u : ClosedFormField or FEMField
    domain : DomainSpec
    seeds : int
        Seeds per axis of the bounding-box grid.
    merge_radius : float, optional
        Converged points closer than this are merged. Defaults to ``1e-6``
        for closed forms and half a mesh size for FEM fields.
    extra_seeds : array_like, optional
        Additional seed points (e.g. for very thin domains).

    Returns
    -------
    list of CriticalPoint
        Sorted by ``(x, y)``; indices are not yet computed.
    """
    is_fem = isinstance(u, FEMField)
    if merge_radius is None:
        merge_radius = 0.5 * u.mesh.h if is_fem else 1e-6
    lo, hi = domain.curve.p.min(axis=0), domain.curve.p.max(axis=0)
    xs = np.linspace(lo[0], hi[0], seeds + 2)[1:-1]
    ys = np.linspace(lo[1], hi[1], seeds + 2)[1:-1]
    pts = np.stack(np.meshgrid(xs, ys, indexing="xy"), -1).reshape(-1, 2)
    if extra_seeds is not None:
        pts = np.vstack([pts, np.asarray(extra_seeds, float).reshape(-1, 2)])
    pts = pts[_usable(u, domain, pts)]
    if len(pts) == 0:
        log.warning("no usable seeds inside the domain")
        return []
    diam = _diameter(domain)
    max_step = 0.25 * diam
    alive = np.ones(len(pts), dtype=bool)
    done = np.zeros(len(pts), dtype=bool)
    for _ in range(NEWTON_ITERS):
        act = alive & ~done
        if not np.any(act):
            break
        p = pts[act]
        g = u.gradient(p)
        jac = u.newton_jacobian(p)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        scale = np.sum(jac * jac, axis=(1, 2))
        good = np.isfinite(det) & (np.abs(det) > 1e-300) & (det * det > 1e-28 * scale * scale)
        step = np.zeros_like(p)
        jg, gg = jac[good], g[good]
        dg = det[good]
        step[good, 0] = -(jg[:, 1, 1] * gg[:, 0] - jg[:, 0, 1] * gg[:, 1]) / dg
        step[good, 1] = -(-jg[:, 1, 0] * gg[:, 0] + jg[:, 0, 0] * gg[:, 1]) / dg
        norm = np.hypot(step[:, 0], step[:, 1])
        big = norm > max_step
        step[big] *= (max_step / norm[big])[:, None]
        new = p + step
        ok = good & _usable(u, domain, new)
        idx = np.flatnonzero(act)
        alive[idx[~ok]] = False
        pts[idx[ok]] = new[ok]
        conv = ok & (norm <= 1e-12 * (1.0 + diam))
        if is_fem:
            conv |= ok & (norm <= 1e-10 * u.mesh.h)
        done[idx[conv]] = True
    found = pts[alive & done]
    if len(found) == 0:
        log.warning("Newton search found no critical points")
        return []
    order = np.lexsort((found[:, 1], found[:, 0]))
    found = found[order]
    reps: list = []
    for q in found:
        if not any(np.hypot(*(q - r)) < merge_radius for r in reps):
            reps.append(q)
    out = []
    for q in reps:
        kind, eig = classify(u.hessian(q[None, :])[0])
        out.append(CriticalPoint(float(q[0]), float(q[1]), kind, eig))
    return out


# Winding numbers -------------------------------------------------------------------


@dataclass(frozen=True)
class WindingResult:
    index: int
    residual: float
    radius: float
    samples: int


def _angle(v):
    return np.arctan2(v[..., 1], v[..., 0])


def winding_index(vf: Callable, p, rho: float, n: int = WINDING_MIN_SAMPLES) -> WindingResult:
    """Degree of ``vf / |vf|`` on the circle of radius ``rho`` about ``p``.

    Angle increments larger than a quarter turn are resolved by bisecting the
    arc, so strongly anisotropic fields are handled without a huge ``n``.
    """
    if n < WINDING_MIN_SAMPLES:
        raise PreconditionError(f"winding needs at least {WINDING_MIN_SAMPLES} samples")
    p = np.asarray(p, dtype=float)
    circle = lambda a: p + rho * np.stack([np.cos(a), np.sin(a)], -1)
    a = 2 * np.pi * np.arange(n + 1) / n
    v = vf(circle(a))
    mag = np.hypot(v[:, 0], v[:, 1])
    if not np.all(np.isfinite(mag)) or mag.min() <= 1e-14 * max(mag.max(), 1e-300):
        raise NumericalError("vector field vanishes (or is undefined) on the circle")
    total = 0.0
    evaluations = n
    stack = [(a[i], a[i + 1], v[i], v[i + 1], 0) for i in range(n)]
    while stack:
        a0, a1, v0, v1, depth = stack.pop()
        d = np.angle(complex(*v1) / complex(*v0))
        if abs(d) > np.pi / 2 and depth < WINDING_MAX_DEPTH:
            am = 0.5 * (a0 + a1)
            vm = vf(circle(np.array([am])))[0]
            evaluations += 1
            if not np.all(np.isfinite(vm)) or np.hypot(*vm) == 0:
                raise NumericalError("vector field vanishes on the circle")
            stack.append((a0, am, v0, vm, depth + 1))
            stack.append((am, a1, vm, v1, depth + 1))
        else:
            total += d
    w = total / (2 * np.pi)
    k = int(round(w))
    return WindingResult(k, float(abs(w - k)), float(rho), evaluations)


def stable_winding_index(vf: Callable, p, rho: float, n: int = WINDING_MIN_SAMPLES,
                         retries: int = 3) -> WindingResult:
    """Winding index checked at ``(rho, n)`` and ``(rho/2, 2n)``.

    A radius on which the field vanishes is halved up to ``retries`` times.
    Raises if the two evaluations disagree.
    """
    last = None
    for _ in range(retries + 1):
        try:
            first = winding_index(vf, p, rho, n)
            second = winding_index(vf, p, rho / 2, 2 * n)
        except NumericalError as exc:
            last = exc
            rho /= 2
            continue
        if first.index != second.index:
            raise NumericalError(
                f"winding index unstable: {first.index} at rho={rho:g}, "
                f"{second.index} at rho={rho / 2:g}"
            )
        return WindingResult(first.index, max(first.residual, second.residual), rho,
                             first.samples + second.samples)
    raise NumericalError(f"no admissible winding radius: {last}")


# Auxiliary field V -------------------------------------------------------------------


def killing_derivative(u, model: SurfaceModel, which: int, p, check: bool = True):
    """``Z = <K, grad u>`` (metric pairing) and its chart differential at ``p``."""
    k = killing_pair(model)[which - 1]
    p = np.asarray(p, dtype=float)
    _, g, h = u.derivatives(p, check=check) if isinstance(u, FEMField) else u.derivatives(p)
    kv = killing_eval(k, p)
    jac = killing_jacobian(k, p)
    z = np.sum(kv * g, axis=-1)
    dz = np.einsum("...ij,...i->...j", jac, g) + np.einsum("...ij,...j->...i", h, kv)
    return z, dz


def _v_from_derivatives(p, g, h, model):
    k1, k2 = killing_pair(model)
    a, b = killing_eval(k1, p), killing_eval(k2, p)
    ja, jb = killing_jacobian(k1, p), killing_jacobian(k2, p)
    z1, z2 = np.sum(a * g, -1), np.sum(b * g, -1)
    dz1 = np.einsum("...ij,...i->...j", ja, g) + np.einsum("...ij,...j->...i", h, a)
    dz2 = np.einsum("...ij,...i->...j", jb, g) + np.einsum("...ij,...j->...i", h, b)
    lam = metric_factor(p, model)
    w = (z1[..., None] * dz2 - z2[..., None] * dz1) / lam[..., None]
    return -rotate_ccw(w)


def build_V(u, model: SurfaceModel, p, check: bool = True) -> np.ndarray:
    """Chart components of the auxiliary field ``V`` at ``p`` (vectorized).

    ``grad Z`` has chart components ``dZ / lam``; ``dZ = (DK)^T du + D^2u K``.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(u, FEMField):
        _, g, h = u.derivatives(p, check=check)
    else:
        _, g, h = u.derivatives(p)
    return _v_from_derivatives(p, g, h, model)


@dataclass(frozen=True)
class IdentityResult:
    residual_max: float
    transversality_min: float
    samples: int


def boundary_identity_residual(domain: DomainSpec, u, samples: int = 512) -> IdentityResult:
    """Compare ``<V, nu>`` with ``|grad u|^2 G`` along the boundary.

    Closed-form fields are evaluated at ``samples`` uniform curve parameters.
    FEM fields use the boundary vertices of their mesh with one-sided
    recovered derivatives and the analytic curve normal.
    """
    curve, model = domain.curve, domain.model
    if isinstance(u, FEMField):
        t = u.mesh.boundary_params
        _, g, h = u.nodal_derivatives(u.mesh.boundary)
        p = u.mesh.vertices[u.mesh.boundary]
    else:
        t = curve.t[0] + curve.period * np.arange(samples) / samples
        p = curve.evaluate(t)[0]
        _, g, h = u.derivatives(p)
    nu = outward_normal(curve, t)
    G = condition_G_chart(curve, model, t)
    lam = metric_factor(p, model)
    v = _v_from_derivatives(p, g, h, model)
    v_nu = np.sqrt(lam) * np.sum(v * nu, axis=-1)
    grad2 = np.sum(g * g, axis=-1) / lam
    res = np.abs(v_nu - grad2 * G) / (1.0 + grad2**1.5)
    return IdentityResult(float(res.max()), float(v_nu.min()), int(len(t)))


# Audit ------------------------------------------------------------------------------


@dataclass
class AuditReport:
    critical_points: list
    sum_index_grad: int
    sum_index_V: Optional[int]
    boundary_transversality_min: float
    identity_residual_max: float
    equator_zero_count: Optional[int]
    seed_density: int
    equator_indices: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def count(self, kind: str) -> int:
        return sum(c.kind == kind for c in self.critical_points)

    @property
    def unique_maximum(self) -> bool:
        cps = self.critical_points
        return (len(cps) == 1 and cps[0].kind == "Max" and cps[0].index_grad == 1
                and self.sum_index_grad == 1)

    def to_dict(self) -> dict:
        return {
            "criticalPoints": [c.to_dict() for c in self.critical_points],
            "sumIndexGrad": self.sum_index_grad,
            "sumIndexV": self.sum_index_V,
            "minBoundaryTransversality": self.boundary_transversality_min,
            "identityResidualMax": self.identity_residual_max,
            "equatorZeroCount": self.equator_zero_count,
            "equatorIndices": list(self.equator_indices),
            "seedDensity": self.seed_density,
            "uniqueMaximum": self.unique_maximum,
            "warnings": list(self.warnings),
        }


def _boundary_distance(domain: DomainSpec, p) -> float:
    c = domain.curve.p
    return float(np.min(np.hypot(c[:, 0] - p[0], c[:, 1] - p[1])))


def _index_radius(u, domain, q, others):
    dist_b = _boundary_distance(domain, q)
    if isinstance(u, FEMField):
        dist_b -= u.mesh.h
    rho = min(0.5 * dist_b, 0.02 * _diameter(domain))
    if others:
        rho = min(rho, 0.25 * min(np.hypot(*(q - o)) for o in others))
    return rho


def _grad_field(u, check=False):
    if isinstance(u, FEMField):
        return lambda pts: u.gradient(pts)
    return lambda pts: u.gradient(pts)


def index_critical_points(u, domain: DomainSpec, cps: list, with_v: bool = True,
                          warnings: Optional[list] = None) -> list:
    """Attach gradient and ``V`` winding indices to nondegenerate critical points."""
    warnings = [] if warnings is None else warnings
    model = domain.model
    out = []
    pts = [c.p for c in cps]
    gfield = _grad_field(u)
    vfield = lambda q: build_V(u, model, q, check=False)
    for i, c in enumerate(cps):
        if c.kind == "Degenerate":
            warnings.append(f"degenerate critical point at ({c.x:.6g}, {c.y:.6g}); index skipped")
            out.append(c)
            continue
        others = pts[:i] + pts[i + 1:]
        rho = _index_radius(u, domain, c.p, others)
        if rho <= 0:
            warnings.append(f"critical point at ({c.x:.6g}, {c.y:.6g}) too close to the boundary")
            out.append(c)
            continue
        wg = stable_winding_index(gfield, c.p, rho)
        iv = None
        if with_v:
            far = True
            if isinstance(u, FEMField):
                far = _boundary_distance(domain, c.p) > 3 * u.mesh.h
            if far:
                iv = stable_winding_index(vfield, c.p, rho).index
        out.append(CriticalPoint(c.x, c.y, c.kind, c.hessian_eigs, wg.index, iv, wg.residual))
    return out


def equator_zeros(u, domain: DomainSpec, n: int = 4096) -> list:
    """Zeros of ``V`` on the part of the chart unit circle inside the domain.

    On the equator ``V`` vanishes exactly where ``<grad u, e_theta> = 0``,
    i.e. where the radial chart derivative changes sign along an inside arc.
    """
    if domain.model is not SPHERE:
        return []
    phi = 2 * np.pi * np.arange(n) / n
    circ = np.stack([np.cos(phi), np.sin(phi)], -1)
    inside = _usable(u, domain, circ)
    if isinstance(u, FEMField):
        inside &= u.usable(circ, margin=3 * u.mesh.h)
    if not np.any(inside):
        return []
    radial = lambda a: float(np.sum(np.array([np.cos(a), np.sin(a)]) *
                                    u.gradient(np.array([[np.cos(a), np.sin(a)]]))[0]))
    vals = np.full(n, np.nan)
    vals[inside] = np.sum(circ[inside] * u.gradient(circ[inside]), axis=-1)
    roots = []
    for i in range(n):
        j = (i + 1) % n
        if not (inside[i] and inside[j]):
            continue
        if vals[i] == 0:
            roots.append(phi[i])
        elif vals[i] * vals[j] < 0:
            b = phi[j] if j else 2 * np.pi
            roots.append(brentq(radial, phi[i], b, xtol=1e-14))
    return roots


def poincare_hopf_audit(domain: DomainSpec, u, seeds: int = DEFAULT_SEEDS,
                        with_v: bool = True, extra_seeds=None) -> AuditReport:
    """Find, classify and index all interior critical points and audit the boundary.

    Parameters
    ----------
    domain : DomainSpec
    u : ClosedFormField or FEMField
    seeds : int
        Seed grid density per axis.
    with_v : bool
        Also index the auxiliary field at each critical point and on the
        equator arcs (sphere).

    Returns
    -------
    AuditReport
    """
    warnings: list = []
    cps = find_critical_points(u, domain, seeds, extra_seeds=extra_seeds)
    if not cps:
        warnings.append("no critical points found although u > 0 forces a maximum")
    cps = index_critical_points(u, domain, cps, with_v, warnings)
    indexed = [c for c in cps if c.index_grad is not None]
    sum_grad = int(sum(c.index_grad for c in indexed))
    sum_v = None
    eq_count = None
    eq_idx: list = []
    if with_v:
        v_idx = [c.index_V for c in indexed if c.index_V is not None]
        sum_v = int(sum(v_idx))
        if domain.model is SPHERE:
            roots = equator_zeros(u, domain)
            eq_count = len(roots)
            vfield = lambda q: build_V(u, domain.model, q, check=False)
            for a in roots:
                q = np.array([np.cos(a), np.sin(a)])
                rho = _index_radius(u, domain, q, [c.p for c in cps])
                try:
                    eq_idx.append(stable_winding_index(vfield, q, rho).index)
                except NumericalError as exc:
                    warnings.append(f"equator zero at angle {a:.6g}: {exc}")
            sum_v += int(sum(eq_idx))
    ident = boundary_identity_residual(domain, u)
    return AuditReport(cps, sum_grad, sum_v, ident.transversality_min, ident.residual_max,
                       eq_count, seeds, eq_idx, warnings)


# Location region ---------------------------------------------------------------------


@dataclass(frozen=True)
class RegionResult:
    xs: np.ndarray
    ys: np.ndarray
    inside: np.ndarray
    mask: np.ndarray
    max_distance: np.ndarray
    antipode_inside: int
    domain: DomainSpec
    boundary: np.ndarray
    tol: float = REGION_TOL

    def contains(self, q, tol: Optional[float] = None) -> bool:
        """Membership test for one chart point.

        ``tol`` loosens the distance bound, e.g. to the discretization error
        of a computed maximum; the default is the rounding tolerance.
        """
        q = np.asarray(q, dtype=float).reshape(2)
        if not self.domain.contains(q[None, :])[0]:
            return False
        d = geodesic_distance(q[None, :], self.boundary, SPHERE)
        if d.max() > np.pi / 2 + (self.tol if tol is None else tol):
            return False
        r2 = float(q @ q)
        return not (r2 > 0 and self.domain.contains((-q / r2)[None, :])[0])


def location_region(domain: DomainSpec, grid: int = 129, boundary_samples: int = 512,
                    convexity_tol: float = 1e-9, tol: float = REGION_TOL) -> RegionResult:
    """Points within distance ``pi/2`` of the whole domain (sphere, convex).

    A point ``q`` belongs to the region iff every point of the domain lies in
    the closed hemisphere centred at ``q``. For a convex domain the farthest
    point from ``q`` is on the boundary unless the antipode of ``q`` is
    inside, which is checked separately. ``tol`` absorbs rounding in the
    distance comparison.
    """
    if domain.model is not SPHERE:
        raise PreconditionError("the location region is defined on the sphere")
    if np.min(geodesic_curvature(domain.curve, SPHERE)) < -convexity_tol:
        raise PreconditionError("the location region needs a convex domain (min curvature < 0)")
    c = domain.curve.resample(boundary_samples) if domain.curve.evaluator else domain.curve
    lo, hi = c.p.min(axis=0), c.p.max(axis=0)
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    q = np.stack(np.meshgrid(xs, ys, indexing="xy"), -1)
    inside = domain.contains(q.reshape(-1, 2)).reshape(grid, grid)
    maxd = np.full((grid, grid), np.nan)
    qi = q[inside]
    d = geodesic_distance(qi[:, None, :], c.p[None, :, :], SPHERE)
    maxd[inside] = d.max(axis=1)
    r2 = np.sum(qi * qi, axis=-1)
    anti = np.zeros(len(qi), dtype=bool)
    nz = r2 > 0
    anti[nz] = domain.contains(-qi[nz] / r2[nz, None])
    mask = np.zeros((grid, grid), dtype=bool)
    mask[inside] = (maxd[inside] <= np.pi / 2 + tol) & ~anti
    return RegionResult(xs, ys, inside, mask, maxd, int(anti.sum()), domain, c.p, tol)
