"""Lagrange finite element spaces on structured triangulations.

Degrees of freedom sit on the principal lattice of each cell.  For the
structured meshes built by :mod:`wavext.mesh` every lattice node lands on a
global fine grid with (nx*p + 1) x (ny*p + 1) points, so DOF identification
across cells is pure integer arithmetic.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import reference
from .errors import OutOfDomainError
from .linalg import solve_spd


class LagrangeSpace:
    """Continuous degree-p Lagrange space on a structured mesh."""

    def __init__(self, mesh, degree):
        if not 1 <= degree <= 10:
            raise ValueError(f"polynomial degree must be in [1, 10], got {degree}")
        self.mesh = mesh
        self.degree = int(degree)

        p = self.degree
        nx, ny = mesh.nx, mesh.ny
        x_min, x_max, y_min, y_max = mesh.bbox
        ndx, ndy = nx * p, ny * p
        gx = np.linspace(x_min, x_max, ndx + 1)
        gy = np.linspace(y_min, y_max, ndy + 1)
        GX, GY = np.meshgrid(gx, gy)
        self.dof_coords = np.column_stack([GX.ravel(), GY.ravel()])
        self.n_dofs = (ndx + 1) * (ndy + 1)

        # cell -> global DOF map through integer lattice coordinates
        multi = reference.lattice_multi_indices(p)
        vx = np.rint((mesh.vertices[:, 0] - x_min) / (x_max - x_min) * nx).astype(np.int64)
        vy = np.rint((mesh.vertices[:, 1] - y_min) / (y_max - y_min) * ny).astype(np.int64)
        ax = (vx[mesh.cells] * p)  # fine-grid coords of cell vertices, (nc, 3)
        ay = (vy[mesh.cells] * p)
        ga = ax @ multi.T // p  # exact: multi rows sum to p
        gb = ay @ multi.T // p
        self.cell_dofs = (gb * (ndx + 1) + ga).astype(np.int64)

        on_b = (GX.ravel() == gx[0]) | (GX.ravel() == gx[-1]) | \
               (GY.ravel() == gy[0]) | (GY.ravel() == gy[-1])
        self.boundary_dofs = np.flatnonzero(on_b)
        self.interior_dofs = np.flatnonzero(~on_b)

        # affine geometry, one entry per cell
        pts = mesh.vertices[mesh.cells]
        jac = np.empty((mesh.n_cells, 2, 2))
        jac[:, :, 0] = pts[:, 1] - pts[:, 0]
        jac[:, :, 1] = pts[:, 2] - pts[:, 0]
        self.cell_origin = pts[:, 0]
        self.jac = jac
        self.detjac = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        self.jacinv = np.empty_like(jac)
        self.jacinv[:, 0, 0] = jac[:, 1, 1] / self.detjac
        self.jacinv[:, 1, 1] = jac[:, 0, 0] / self.detjac
        self.jacinv[:, 0, 1] = -jac[:, 0, 1] / self.detjac
        self.jacinv[:, 1, 0] = -jac[:, 1, 0] / self.detjac

        self._rule_cache = {}

    @property
    def n_local(self):
        p = self.degree
        return (p + 1) * (p + 2) // 2

    def norm_degree(self):
        """Quadrature degree used for norms, projections and load vectors."""
        return max(2 * self.degree + 2, 6)

    def quad_data(self, degree, order=1):
        """Cached quadrature bundle at the given exactness degree.

        Returns a dict with reference tables and per-cell physical arrays:
        pts (nc, nq, 2), wdet (nc, nq), val (nq, nloc), grad (nc, nq, nloc, 2)
        and, when order >= 2, lap (nc, nq, nloc).
        """
        key = (int(degree), order >= 2)
        if key in self._rule_cache:
            return self._rule_cache[key]
        rs, w = reference.triangle_rule(int(degree))
        val, gref, href = reference.tabulate(self.degree, rs, order=2 if order >= 2 else 1)
        pts = self.cell_origin[:, None, :] + np.einsum("ckm,qm->cqk", self.jac, rs)
        wdet = np.outer(self.detjac, w)
        grad = np.einsum("cmk,qim->cqik", self.jacinv, gref)
        data = {"rs": rs, "w": w, "pts": pts, "wdet": wdet, "val": val, "grad": grad}
        if order >= 2:
            G = np.einsum("cka,cma->ckm", self.jacinv, self.jacinv)
            data["lap"] = np.einsum("ckm,qikm->cqi", G, href)
        self._rule_cache[key] = data
        return data


@dataclass
class FEFunction:
    """Finite element function: a space plus one coefficient per DOF."""

    space: LagrangeSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.n_dofs,):
            raise ValueError("coefficient vector length does not match the space")


def build_space(mesh, p):
    """Degree-p Lagrange space with DOFs shared across cell interfaces."""
    return LagrangeSpace(mesh, p)


def _coefficient_samples(coefficient, pts):
    if coefficient is None:
        return 1.0
    if callable(coefficient):
        return np.broadcast_to(coefficient(pts[..., 0], pts[..., 1]), pts.shape[:-1])
    return float(coefficient)


def local_matrices(space, kind, coefficient=None):
    """Per-cell element matrices, shape (nc, nloc, nloc)."""
    p = space.degree
    if kind == "mass":
        qd = space.quad_data(2 * p)
        loc = np.einsum("q,qi,qj->ij", qd["w"], qd["val"], qd["val"])
        return space.detjac[:, None, None] * loc
    if kind == "stiffness":
        degree = 2 * p - 2 if not callable(coefficient) else 2 * p + 2
        qd = space.quad_data(max(degree, 0))
        csq = _coefficient_samples(coefficient, qd["pts"])
        if callable(coefficient):
            if np.any(csq <= 0):
                raise ValueError("wavespeed coefficient must be strictly positive")
            csq = csq ** 2
        else:
            if csq <= 0:
                raise ValueError("wavespeed coefficient must be strictly positive")
            csq = csq ** 2
        w = csq * qd["wdet"]
        return np.einsum("cq,cqik,cqjk->cij", np.broadcast_to(w, qd["wdet"].shape),
                         qd["grad"], qd["grad"])
    raise ValueError(f"unknown operator kind {kind!r}")


def assemble(space, kind, coefficient=None):
    """Assemble the global mass or (wavespeed-weighted) stiffness matrix.

    Parameters
    ----------
    kind : "mass" for (phi_i, phi_j) or "stiffness" for (c^2 grad phi_i, grad phi_j).
    coefficient : wavespeed c(x, y) as a positive callable or scalar
        (stiffness only; the weight used is c squared).
    """
    loc = local_matrices(space, kind, coefficient)
    rows = np.repeat(space.cell_dofs, space.n_local, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, space.n_local)).ravel()
    A = sparse.coo_matrix((loc.ravel(), (rows, cols)),
                          shape=(space.n_dofs, space.n_dofs)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def load_vector(space, g, degree=None):
    """Moment vector (g, phi_i) for a spatial callback g(x, y)."""
    qd = space.quad_data(degree if degree is not None else space.norm_degree())
    gv = np.broadcast_to(g(qd["pts"][..., 0], qd["pts"][..., 1]), qd["wdet"].shape)
    loc = np.einsum("cq,qi->ci", gv * qd["wdet"], qd["val"])
    return np.bincount(space.cell_dofs.ravel(), weights=loc.ravel(),
                       minlength=space.n_dofs)


def interpolate_nodal(space, f):
    """Lagrange interpolant: coefficients are f sampled at the DOF nodes."""
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = np.broadcast_to(f(x, y), (space.n_dofs,)).astype(float).copy()
    return FEFunction(space, vals)


def ritz_project(space, f, grad_f, c=1.0, stiffness=None):
    """Stiffness-orthogonal projection with nodally interpolated boundary values.

    Boundary coefficients are f at the boundary nodes; interior coefficients
    solve (c^2 grad R f, grad z) = (c^2 grad f, grad z) for all interior z,
    which requires the gradient callback grad_f(x, y) -> (df/dx, df/dy).
    """
    if grad_f is None:
        raise ValueError("ritz_project needs a gradient callback for the right-hand side")
    K = assemble(space, "stiffness", c) if stiffness is None else stiffness
    qd = space.quad_data(space.norm_degree())
    gx, gy = grad_f(qd["pts"][..., 0], qd["pts"][..., 1])
    csq = _coefficient_samples(c, qd["pts"])
    csq = csq ** 2 if not np.isscalar(csq) else float(csq) ** 2
    w = qd["wdet"] * csq
    loc = np.einsum("cq,cqi->ci", np.broadcast_to(gx, qd["wdet"].shape) * w, qd["grad"][..., 0])
    loc += np.einsum("cq,cqi->ci", np.broadcast_to(gy, qd["wdet"].shape) * w, qd["grad"][..., 1])
    rhs = np.bincount(space.cell_dofs.ravel(), weights=loc.ravel(), minlength=space.n_dofs)

    I, B = space.interior_dofs, space.boundary_dofs
    out = np.zeros(space.n_dofs)
    xb, yb = space.dof_coords[B, 0], space.dof_coords[B, 1]
    out[B] = np.broadcast_to(f(xb, yb), B.shape)
    rhs_I = rhs[I] - K[np.ix_(I, B)] @ out[B]
    out[I] = solve_spd(K[np.ix_(I, I)].tocsr(), rhs_I)
    return FEFunction(space, out)


def l2_project_interior(space, f, mass=None):
    """L2-orthogonal projection onto the zero-trace subspace.

    Boundary coefficients are zero; interior coefficients solve the interior
    mass system against the moments of f.  f may be a callback or an
    FEFunction (whose moments are then computed exactly).
    """
    M = assemble(space, "mass") if mass is None else mass
    if isinstance(f, FEFunction):
        rhs = M @ f.values
    else:
        rhs = load_vector(space, f)
    I = space.interior_dofs
    out = np.zeros(space.n_dofs)
    out[I] = solve_spd(M[np.ix_(I, I)].tocsr(), rhs[I])
    return FEFunction(space, out)


# ---------------------------------------------------------------------------
# point evaluation


def _locate(mesh, pts):
    """Map physical points to (cell index, reference coords)."""
    x_min, x_max, y_min, y_max = mesh.bbox
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tol = 1e-12 * max(x_max - x_min, y_max - y_min)
    if np.any(pts[:, 0] < x_min - tol) or np.any(pts[:, 0] > x_max + tol) or \
       np.any(pts[:, 1] < y_min - tol) or np.any(pts[:, 1] > y_max + tol):
        raise OutOfDomainError("point outside the meshed rectangle")
    fx = np.clip((pts[:, 0] - x_min) / (x_max - x_min) * mesh.nx, 0.0, mesh.nx)
    fy = np.clip((pts[:, 1] - y_min) / (y_max - y_min) * mesh.ny, 0.0, mesh.ny)
    ix = np.minimum(fx.astype(np.int64), mesh.nx - 1)
    iy = np.minimum(fy.astype(np.int64), mesh.ny - 1)
    xi = fx - ix
    eta = fy - iy
    lower = eta <= xi
    cell = 2 * (iy * mesh.nx + ix) + np.where(lower, 0, 1)
    rs = np.empty_like(pts)
    rs[:, 0] = np.where(lower, xi - eta, xi)
    rs[:, 1] = np.where(lower, eta, eta - xi)
    return cell, rs


def evaluate(fn, points):
    """Evaluate an FEFunction at one point or an array of points."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    cell, rs = _locate(fn.space.mesh, pts)
    vals, _, _ = reference.tabulate(fn.space.degree, rs, order=0)
    out = np.einsum("pi,pi->p", fn.values[fn.space.cell_dofs[cell]], vals)
    return float(out[0]) if single else out


def evaluate_on_cell(fn, cell, points):
    """Evaluate the local polynomial of one cell (no containment check)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    space = fn.space
    rs = np.einsum("km,pm->pk", space.jacinv[cell], pts - space.cell_origin[cell])
    vals, _, _ = reference.tabulate(space.degree, rs, order=0)
    return vals @ fn.values[space.cell_dofs[cell]]


# ---------------------------------------------------------------------------
# broken (elementwise) Laplacian


class BrokenField:
    """Per-cell polynomial field Delta(fn|_K), scaled by a constant weight."""

    def __init__(self, fn, weight=1.0):
        self.fn = fn
        self.weight = float(weight)

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        space = self.fn.space
        cell, rs = _locate(space.mesh, pts)
        _, _, hess = reference.tabulate(space.degree, rs, order=2)
        G = np.einsum("cka,cma->ckm", space.jacinv[cell], space.jacinv[cell])
        lap = np.einsum("pkm,pikm->pi", G, hess)
        return self.weight * np.einsum("pi,pi->p", self.fn.values[space.cell_dofs[cell]], lap)

    def l2_norm(self):
        space = self.fn.space
        qd = space.quad_data(space.norm_degree(), order=2)
        coeffs = self.fn.values[space.cell_dofs]
        vals = np.einsum("ci,cqi->cq", coeffs, qd["lap"])
        return abs(self.weight) * float(np.sqrt(np.sum(qd["wdet"] * vals ** 2)))


def broken_laplacian(fn, csq=1.0):
    """Elementwise Laplacian of an FE function times the constant csq."""
    if fn.space.degree < 2:
        warnings.warn("broken Laplacian of a degree-1 space is identically zero",
                      stacklevel=2)
    return BrokenField(fn, csq)


# ---------------------------------------------------------------------------
# norms


def spatial_norm(space, kind, fe=None, exact=None, exact_grad=None, c=1.0):
    """L2 norm or weighted H1 seminorm of (exact - fe) over the domain.

    Parameters
    ----------
    kind : "l2" or "h1c" (the latter is sqrt(int c^2 |grad .|^2)).
    fe : coefficient vector or FEFunction, or None.
    exact : callback exact(x, y), or None; the norm is of the difference.
    exact_grad : callback (x, y) -> (dx, dy), required for "h1c" with exact.
    """
    qd = space.quad_data(space.norm_degree())
    coeffs = None
    if fe is not None:
        coeffs = fe.values if isinstance(fe, FEFunction) else np.asarray(fe, dtype=float)
    if kind == "l2":
        diff = 0.0
        if exact is not None:
            diff = diff + np.broadcast_to(exact(qd["pts"][..., 0], qd["pts"][..., 1]),
                                          qd["wdet"].shape)
        if coeffs is not None:
            diff = diff - np.einsum("ci,qi->cq", coeffs[space.cell_dofs], qd["val"])
        return float(np.sqrt(np.sum(qd["wdet"] * np.square(diff))))
    if kind == "h1c":
        dx = 0.0
        dy = 0.0
        if exact is not None:
            if exact_grad is None:
                raise ValueError("h1c norm against a callback needs exact_grad")
            gx, gy = exact_grad(qd["pts"][..., 0], qd["pts"][..., 1])
            dx = dx + np.broadcast_to(gx, qd["wdet"].shape)
            dy = dy + np.broadcast_to(gy, qd["wdet"].shape)
        if coeffs is not None:
            dx = dx - np.einsum("ci,cqi->cq", coeffs[space.cell_dofs], qd["grad"][..., 0])
            dy = dy - np.einsum("ci,cqi->cq", coeffs[space.cell_dofs], qd["grad"][..., 1])
        csq = _coefficient_samples(c, qd["pts"])
        csq = csq ** 2 if not np.isscalar(csq) else float(csq) ** 2
        return float(np.sqrt(np.sum(qd["wdet"] * csq * (np.square(dx) + np.square(dy)))))
    raise ValueError(f"unknown norm kind {kind!r}")
