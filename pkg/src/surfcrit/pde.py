"""Finite-element solution of ``-Delta_g u = f(u)`` with zero boundary values.

In a conformal chart the Dirichlet energy is the flat one, so the stiffness
matrix is the Euclidean P1 stiffness for both surfaces. The metric only enters
through the mass and load, which are integrated against the conformal factor
with a degree-4 rule.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConvergenceError, NumericalError, ParameterError
from .fields import FEMField
from .mesh import Mesh
from .surface import SurfaceModel, check_chart, metric_factor

log = logging.getLogger(__name__)

EIGEN_TOL = 1e-10
EIGEN_MAX_ITER = 500
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
MAX_HALVINGS = 30

# Symmetric 6-point rule, exact for degree 4 (barycentric points, weights sum to 1).
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
QUAD_POINTS = np.array([
    [_B1, _A1, _A1], [_A1, _B1, _A1], [_A1, _A1, _B1],
    [_B2, _A2, _A2], [_A2, _B2, _A2], [_A2, _A2, _B2],
])
QUAD_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)


@dataclass(frozen=True)
class Nonlinearity:
    """Right-hand side ``f`` and its derivative."""

    f: Callable
    fprime: Callable
    name: str = "custom"

    def __post_init__(self):
        f0 = float(np.asarray(self.f(np.zeros(1)))[0])
        if f0 < 0:
            raise ParameterError("the nonlinearity must satisfy f(0) >= 0")


TORSION = Nonlinearity(lambda s: np.ones_like(s), lambda s: np.zeros_like(s), "torsion")


def linear_nonlinearity(lam: float) -> Nonlinearity:
    return Nonlinearity(lambda s: lam * s, lambda s: np.full_like(s, lam), f"linear({lam:g})")


def power_nonlinearity(c0: float, c2: float) -> Nonlinearity:
    """``f(s) = c0 + c2 s^2``."""
    return Nonlinearity(lambda s: c0 + c2 * s * s, lambda s: 2.0 * c2 * s,
                        f"{c0:g}+{c2:g}s^2")


class Assembler:
    """Per-mesh matrices: stiffness, weighted mass and load vectors."""

    def __init__(self, mesh: Mesh, model: SurfaceModel):
        self.mesh = mesh
        self.model = model
        v = mesh.vertices
        check_chart(v, model)
        tri = mesh.triangles
        p = v[tri]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise NumericalError("mesh has degenerate or inverted triangles")
        self.area = 0.5 * det
        g1 = np.stack([e2[:, 1], -e2[:, 0]], -1) / det[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], -1) / det[:, None]
        self.grads = np.stack([-g1 - g2, g1, g2], axis=1)
        qp = np.einsum("qa,tai->tqi", QUAD_POINTS, p)
        self.qweight = self.area[:, None] * QUAD_WEIGHTS[None, :] * metric_factor(qp, model)
        self.n = len(v)
        self.interior = mesh.interior
        self._rows = np.repeat(tri, 3, axis=1).ravel()
        self._cols = np.tile(tri, (1, 3)).ravel()

    def _sparse(self, local):
        m = sp.coo_matrix((local.ravel(), (self._rows, self._cols)), shape=(self.n, self.n))
        return m.tocsr()

    def stiffness(self):
        local = self.area[:, None, None] * np.einsum("tai,tbi->tab", self.grads, self.grads)
        return self._sparse(local)

    def mass(self, weight_q: Optional[np.ndarray] = None):
        """``int w lam phi_a phi_b`` with ``w`` given at quadrature points."""
        w = self.qweight if weight_q is None else self.qweight * weight_q
        local = np.einsum("tq,qa,qb->tab", w, QUAD_POINTS, QUAD_POINTS)
        return self._sparse(local)

    def at_quadrature(self, nodal):
        return np.einsum("qa,ta->tq", QUAD_POINTS, np.asarray(nodal)[self.mesh.triangles])

    def load(self, values_q: np.ndarray):
        """``int g lam phi_a`` with ``g`` given at quadrature points."""
        local = np.einsum("tq,qa->ta", self.qweight * values_q, QUAD_POINTS)
        out = np.zeros(self.n)
        np.add.at(out, self.mesh.triangles.ravel(), local.ravel())
        return out

    def restrict(self, mat):
        i = self.interior
        return mat[i][:, i].tocsc()


def _factor(mat):
    try:
        return splu(mat)
    except RuntimeError as exc:
        raise NumericalError(f"singular system: {exc}") from exc


def _full(n, interior, vals):
    out = np.zeros(n)
    out[interior] = vals
    return out


def solve_torsion(mesh: Mesh, model: SurfaceModel) -> FEMField:
    """Solve ``-Delta_g u = 1``, ``u = 0`` on the boundary."""
    asm = Assembler(mesh, model)
    k = asm.restrict(asm.stiffness())
    rhs = asm.load(np.ones_like(asm.qweight))[asm.interior]
    u = _factor(k).solve(rhs)
    return FEMField(mesh, _full(asm.n, asm.interior, u), model, "torsion")


def smallest_eigenpair(a, m, tol: float = EIGEN_TOL, max_iter: int = EIGEN_MAX_ITER,
                       start: Optional[np.ndarray] = None, fallback: bool = True):
    """Smallest eigenpair of ``a x = mu m x`` (``a`` positive definite) by inverse iteration.

    Stops when ``|a x - mu m x| <= tol |a x|``. Inverse iteration contracts
    like ``mu_1 / mu_2``, which is close to 1 on thin domains; if the cap is
    reached and ``fallback`` is set, shift-invert Lanczos (ARPACK) is started
    from the last iterate and its result is held to the same residual test.

    Returns
    -------
    mu : float
    x : ndarray
        Normalized to unit ``m``-norm.
    iterations : int
    """
    lu = _factor(a)
    x = np.ones(a.shape[0]) if start is None else np.asarray(start, float).copy()
    history = []

    def residual(y):
        ay = a @ y
        mu = float(y @ ay)
        return mu, float(np.linalg.norm(ay - mu * (m @ y)) / np.linalg.norm(ay))

    for it in range(1, max_iter + 1):
        y = lu.solve(m @ x)
        y /= np.sqrt(y @ (m @ y))
        mu, res = residual(y)
        history.append(res)
        x = y
        if res <= tol:
            return mu, x, it
    if fallback:
        log.warning("inverse iteration reached %d steps (residual %.2e); "
                    "switching to shift-invert Lanczos", max_iter, history[-1])
        op = LinearOperator(a.shape, matvec=lambda v: lu.solve(v), dtype=float)
        try:
            vals, vecs = eigsh(a, k=1, M=m, sigma=0.0, which="LM", OPinv=op, v0=x,
                               tol=tol * 1e-2, maxiter=20 * max_iter)
        except ArpackNoConvergence as exc:
            raise ConvergenceError(f"shift-invert Lanczos failed: {exc}", last_iterate=x,
                                   history=history) from exc
        y = vecs[:, 0]
        y /= np.sqrt(y @ (m @ y))
        mu, res = residual(y)
        history.append(res)
        if res <= tol:
            return mu, y, max_iter
        x = y
    raise ConvergenceError(f"inverse iteration did not reach tol {tol:g} in {max_iter} steps",
                           last_iterate=x, history=history)


def solve_eigen(mesh: Mesh, model: SurfaceModel, tol: float = EIGEN_TOL):
    """First Dirichlet eigenpair; eigenfunction positive with maximum 1."""
    asm = Assembler(mesh, model)
    k = asm.restrict(asm.stiffness())
    m = asm.restrict(asm.mass())
    lam, x, _ = smallest_eigenpair(k, m, tol)
    if x.sum() < 0:
        x = -x
    x /= np.max(x)
    return lam, FEMField(mesh, _full(asm.n, asm.interior, x), model, "eigen")


def _residual(asm, kfull, u, nl):
    fq = nl.f(asm.at_quadrature(u))
    load = asm.load(fq)
    i = asm.interior
    return (kfull @ u - load)[i], load[i]


def solve_semilinear(mesh: Mesh, model: SurfaceModel, nl: Nonlinearity,
                     u0=None, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> FEMField:
    """Damped Newton for ``K u - M_lam f(u) = 0``.

    The step is halved until the residual norm decreases (at most 30 times).
    Convergence means residual norm below ``tol`` times the load norm.
    ``u0`` defaults to the torsion solution scaled to unit maximum.
    """
    asm = Assembler(mesh, model)
    kfull = asm.stiffness()
    i = asm.interior
    if u0 is None:
        t = solve_torsion(mesh, model).values
        u = t / t.max()
    else:
        u = np.asarray(getattr(u0, "values", u0), dtype=float).copy()
        u[mesh.boundary] = 0.0
    res, load = _residual(asm, kfull, u, nl)
    history = []
    for _ in range(max_iter + 1):
        rn = np.linalg.norm(res)
        scale = max(np.linalg.norm(load), np.linalg.norm((kfull @ u)[i]), 1e-300)
        history.append(rn / scale)
        if rn <= tol * scale:
            return FEMField(mesh, u, model, f"semilinear[{nl.name}]")
        dfq = nl.fprime(asm.at_quadrature(u))
        jac = asm.restrict(kfull - asm.mass(dfq))
        step = _full(asm.n, i, _factor(jac).solve(-res))
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + alpha * step
            tres, tload = _residual(asm, kfull, trial, nl)
            if np.linalg.norm(tres) < rn:
                break
            alpha *= 0.5
        else:
            raise ConvergenceError("damped Newton failed to reduce the residual",
                                   last_iterate=u, history=history)
        u, res, load = trial, tres, tload
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations",
                           last_iterate=u, history=history)


@dataclass(frozen=True)
class SemistabilityResult:
    margin: float
    tolerance: float

    @property
    def semistable(self) -> bool:
        return self.margin >= -self.tolerance


def semistability_margin(mesh: Mesh, model: SurfaceModel, u, nl: Nonlinearity,
                         tol: float = EIGEN_TOL) -> SemistabilityResult:
    """Smallest ``mu`` with ``(K - M_{lam f'(u)}) v = mu M_lam v``.

    The pencil is shifted by ``max f'(u)`` (when positive) so that inverse
    iteration runs on a positive definite operator.
    """
    asm = Assembler(mesh, model)
    values = np.asarray(getattr(u, "values", u), dtype=float)
    dfq = nl.fprime(asm.at_quadrature(values))
    shift = max(0.0, float(np.max(dfq)))
    kfull = asm.stiffness()
    a = asm.restrict(kfull - asm.mass(dfq) + shift * asm.mass())
    m = asm.restrict(asm.mass())
    mu, _, _ = smallest_eigenpair(a, m, tol)
    kscale = float(abs(kfull).sum(axis=1).max())
    return SemistabilityResult(mu - shift, 1e-8 * kscale)


def monotone_iteration(mesh: Mesh, model: SurfaceModel, nl: Nonlinearity,
                       tol: float = 1e-12, max_iter: int = 500) -> FEMField:
    """Picard iteration ``K u_{k+1} = M_lam f(u_k)`` from ``u_0 = 0``.

    For nondecreasing ``f`` the iterates increase to the minimal solution.
    """
    asm = Assembler(mesh, model)
    lu = _factor(asm.restrict(asm.stiffness()))
    u = np.zeros(asm.n)
    for _ in range(max_iter):
        new = _full(asm.n, asm.interior,
                    lu.solve(asm.load(nl.f(asm.at_quadrature(u)))[asm.interior]))
        if np.max(np.abs(new - u)) <= tol * max(np.max(np.abs(new)), 1e-300):
            return FEMField(mesh, new, model, f"monotone[{nl.name}]")
        u = new
    raise ConvergenceError("monotone iteration did not settle", last_iterate=u)
