"""Slab-marching solver for the coupled first-order space-time formulation.

Each slab carries trial expansions u = sum_j sigma_j(t) U_j(x) and likewise
v, with sigma the integrated-Legendre basis of :mod:`wavext.timebasis`.  The
sigma_0 coefficients are pinned by continuity with the previous slab and the
boundary rows by the Dirichlet lifting, so the unknowns per slab are the
interior rows of U_j, V_j for j = 1..q.  Testing against L_i phi_k
(i < q, phi_k interior) gives, per temporal test index i,

    sum_j N[i,j] (C V_j)_k - sum_j D[i,j] (C U_j)_k = 0
    sum_j D[i,j] (M V_j)_k + sum_j N[i,j] (K U_j)_k = int (f, L_i phi_k) dt

with C = K for the gradient coupling and C = M for the mass coupling.
Known terms move to the right-hand side; nothing is enforced by penalties,
so interface continuity and boundary traces hold exactly.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, SolverFailure
from .fem import (FEFunction, assemble, interpolate_nodal, load_vector,
                  ritz_project)
from .linalg import Factorization, solve_spd
from .timebasis import (endpoint_exact_project, gauss_rule, graded_gauss_rule,
                        lagrange_time_interp, legendre_matrix,
                        slab_temporal_matrices, to_normalized, trial_matrix,
                        trial_to_legendre)


@dataclass
class SpaceTimeSolution:
    """Per-slab trial-coefficient tensors of shape (n_slabs, degree+1, n_dofs).

    ``v`` may be None for derived fields that only carry a u-component (the
    postprocessed approximation).  Values at the right slab endpoint are the
    sum of the first two coefficient rows; at the left endpoint, row 0.
    """

    space: object
    partition: object
    degree: int
    u: np.ndarray
    v: Optional[np.ndarray] = None
    method: str = "gradient"
    bc_mode: str = "projection"

    def coeffs_on_slab(self, n, xnorm, component="u"):
        """Spatial coefficient vectors at normalized times on slab n,
        shape (len(xnorm), n_dofs)."""
        tensor = self.u if component == "u" else self.v
        sig = trial_matrix(self.degree, np.asarray(xnorm, dtype=float))
        return np.tensordot(sig, tensor[n], axes=(0, 0))

    def coeffs_at(self, t, component="u"):
        n = self.partition.containing_slab(float(t))
        x = to_normalized(self.partition.slab(n), float(t))
        return self.coeffs_on_slab(n, np.asarray([x]), component)[0]

    def endpoint(self, n, component="u"):
        """Coefficients at partition node t_n, n = 0..n_slabs."""
        tensor = self.u if component == "u" else self.v
        if n == 0:
            return tensor[0, 0]
        return tensor[n - 1, 0] + tensor[n - 1, 1]

    def legendre_coeffs(self, n, component="u"):
        tensor = self.u if component == "u" else self.v
        return np.tensordot(trial_to_legendre(self.degree), tensor[n], axes=(1, 0))


@dataclass
class Lifting:
    """Boundary-DOF trajectories in per-slab trial coefficients,
    shape (n_slabs, q+1, n_boundary_dofs) for each field."""

    u_trial: np.ndarray
    v_trial: np.ndarray


def build_lifting(problem, space, partition, q, bc_mode):
    """Dirichlet lifting trajectories for u and v at the boundary DOFs.

    "projection" runs the endpoint-exact temporal projection on each
    boundary-node trajectory of g_d (and of dt g_d for the v-lifting);
    "interpolation" interpolates each trajectory at q+1 uniform nodes per
    slab.  Returns None for homogeneous data.
    """
    if problem.g_d is None:
        return None
    if problem.dt_g_d is None:
        raise ConfigurationError("nonhomogeneous data needs dt_g_d for the v-lifting")
    B = space.boundary_dofs
    xb = space.dof_coords[B, 0]
    yb = space.dof_coords[B, 1]

    def traj(g):
        return lambda ts: np.asarray(g(xb[None, :], yb[None, :],
                                       np.asarray(ts, dtype=float)[:, None]))

    project = endpoint_exact_project if bc_mode == "projection" else \
        (lambda qq, ff, pp: lagrange_time_interp(qq, ff, pp))
    poly_u = project(q, traj(problem.g_d), partition)
    poly_v = project(q, traj(problem.dt_g_d), partition)
    u_trial = np.stack([poly_u.trial_coeffs(n) for n in range(partition.n_slabs)])
    v_trial = np.stack([poly_v.trial_coeffs(n) for n in range(partition.n_slabs)])
    return Lifting(u_trial, v_trial)


def discrete_initial_data(problem, space, lifting=None, initial_mode="projection",
                          mass=None, stiffness=None):
    """Discrete initial fields compatible with the boundary lifting.

    In projection mode u starts from the Dirichlet-aware Ritz projection of
    u0 and v from nodal boundary values of v0 plus the interior L2 projection
    of v0 minus the lifting velocity at t = 0.  Interpolation mode takes
    plain nodal interpolants of both.
    """
    B = space.boundary_dofs
    xb, yb = space.dof_coords[B, 0], space.dof_coords[B, 1]
    u0b = np.broadcast_to(problem.u0(xb, yb), B.shape)
    if problem.g_d is not None:
        gap = np.max(np.abs(np.broadcast_to(problem.g_d(xb, yb, 0.0), B.shape) - u0b))
        if gap > 1e-8 * (1.0 + np.max(np.abs(u0b))):
            raise ConfigurationError(
                f"initial/boundary data incompatible: |g_d(.,0) - u0| = {gap:.3e} on the boundary")
        if problem.check_v_compatibility:
            v0b = np.broadcast_to(problem.v0(xb, yb), B.shape)
            gap = np.max(np.abs(np.broadcast_to(problem.dt_g_d(xb, yb, 0.0), B.shape) - v0b))
            if gap > 1e-8 * (1.0 + np.max(np.abs(v0b))):
                raise ConfigurationError(
                    f"initial/boundary data incompatible: |dt g_d(.,0) - v0| = {gap:.3e}")

    if initial_mode == "interpolation":
        return interpolate_nodal(space, problem.u0), interpolate_nodal(space, problem.v0)

    u0h = ritz_project(space, problem.u0, problem.grad_u0, problem.c,
                       stiffness=stiffness)
    M = assemble(space, "mass") if mass is None else mass
    lift_v0 = np.zeros(space.n_dofs)
    if lifting is not None:
        lift_v0[B] = lifting.v_trial[0, 0]
    v0h = np.zeros(space.n_dofs)
    v0h[B] = np.broadcast_to(problem.v0(xb, yb), B.shape)
    # interior L2 projection of (v0 - lifting velocity at t = 0)
    rhs = load_vector(space, problem.v0) - M @ lift_v0
    I = space.interior_dofs
    v0h[I] = solve_spd(M[np.ix_(I, I)].tocsr(), rhs[I])
    return u0h, FEFunction(space, v0h)


class SlabWorkspace:
    """Assembled operators, temporal matrices, and reusable factorizations."""

    def __init__(self, problem, disc):
        space = disc.space
        self.problem = problem
        self.disc = disc
        self.space = space
        self.partition = disc.partition
        self.q = disc.q
        self.M = assemble(space, "mass")
        self.K = assemble(space, "stiffness", problem.c)
        self.C = self.K if disc.method == "gradient" else self.M
        I, B = space.interior_dofs, space.boundary_dofs
        self.I, self.B = I, B
        self.M_II = self.M[np.ix_(I, I)].tocsr()
        self.K_II = self.K[np.ix_(I, I)].tocsr()
        self.C_II = self.K_II if disc.method == "gradient" else self.M_II
        self.M_IB = self.M[np.ix_(I, B)].tocsr()
        self.K_IB = self.K[np.ix_(I, B)].tocsr()
        self.C_IB = self.K_IB if disc.method == "gradient" else self.M_IB
        self._systems = {}

    def system(self, tau):
        key = round(float(tau), 14)
        if key not in self._systems:
            Nm, Dm = slab_temporal_matrices(self.q, (0.0, float(tau)))
            A = self._build_matrix(Nm, Dm)
            self._systems[key] = (Nm, Dm, Factorization(A, tol=1e-11))
        return self._systems[key]

    def _build_matrix(self, Nm, Dm):
        q = self.q
        drop = 1e-14 * max(np.abs(Nm).max(), np.abs(Dm).max())
        blocks = [[None] * (2 * q) for _ in range(2 * q)]

        def put(r, c, scalar, op):
            if abs(scalar) <= drop:
                return
            blocks[r][c] = scalar * op if blocks[r][c] is None else blocks[r][c] + scalar * op

        for i in range(q):
            for j in range(1, q + 1):
                cu, cv = 2 * (j - 1), 2 * (j - 1) + 1
                put(2 * i, cu, -Dm[i, j], self.C_II)
                put(2 * i, cv, Nm[i, j], self.C_II)
                put(2 * i + 1, cu, Nm[i, j], self.K_II)
                put(2 * i + 1, cv, Dm[i, j], self.M_II)
        return sparse.bmat(blocks, format="csr")

    def load_moments(self, n):
        """Temporal moments of the interior load: (q, n_interior) array of
        int (f, L_i phi_k) dt over slab n, or None for a zero source."""
        problem, disc = self.problem, self.disc
        if problem.f is None:
            return None
        slab = self.partition.slab(n)
        npts = disc.rhs_time_points()
        if problem.singular_at_zero and n == 0:
            ts, ws = graded_gauss_rule(npts, slab)
        else:
            ts, ws = gauss_rule(npts, slab)
        tst = legendre_matrix(self.q - 1, to_normalized(slab, ts))
        loads = np.empty((len(ts), len(self.I)))
        for k, t in enumerate(ts):
            loads[k] = load_vector(self.space,
                                   lambda xx, yy: problem.f(xx, yy, t))[self.I]
        return (tst * ws) @ loads


def solve_slab(prev_u, prev_v, n, problem, disc, lifting=None, workspace=None):
    """Advance one slab from the endpoint state (prev_u, prev_v) at t_{n-1}.

    Returns the full trial-coefficient tensors (q+1, n_dofs) for u and v on
    slab n.  The previous state must agree with the lifting on the boundary.
    """
    ws = workspace if workspace is not None else SlabWorkspace(problem, disc)
    if lifting is None and problem.g_d is not None:
        lifting = build_lifting(problem, ws.space, ws.partition, ws.q, disc.bc_mode)
    q, I, B = ws.q, ws.I, ws.B
    nI = len(I)
    tau = float(ws.partition.lengths[n])
    Nm, Dm, fact = ws.system(tau)

    nB = len(B)
    UB = lifting.u_trial[n] if lifting is not None else np.zeros((q + 1, nB))
    VB = lifting.v_trial[n] if lifting is not None else np.zeros((q + 1, nB))
    for prev, traj, label in ((prev_u, UB, "u"), (prev_v, VB, "v")):
        scale = 1.0 + max(np.abs(traj[0]).max(initial=0.0), np.abs(prev).max(initial=0.0))
        if np.abs(prev[B] - traj[0]).max(initial=0.0) > 1e-10 * scale:
            raise ConfigurationError(
                f"slab {n + 1}: previous {label} state disagrees with the "
                "lifting at the left endpoint")

    KU0 = (ws.K @ prev_u)[I]
    CV0 = (ws.C @ prev_v)[I]
    MV0 = (ws.M @ prev_v)[I]
    CU0 = (ws.C @ prev_u)[I]
    KUB = ws.K_IB @ UB[1:].T  # (nI, q)
    CUB = ws.C_IB @ UB[1:].T
    CVB = ws.C_IB @ VB[1:].T
    MVB = ws.M_IB @ VB[1:].T
    F = ws.load_moments(n)

    rhs = np.zeros(2 * q * nI)
    for i in range(q):
        r1 = -Nm[i, 0] * CV0 + Dm[i, 0] * CU0
        r2 = -Nm[i, 0] * KU0 - Dm[i, 0] * MV0
        for j in range(1, q + 1):
            r1 += Dm[i, j] * CUB[:, j - 1] - Nm[i, j] * CVB[:, j - 1]
            r2 -= Nm[i, j] * KUB[:, j - 1] + Dm[i, j] * MVB[:, j - 1]
        if F is not None:
            r2 += F[i]
        rhs[2 * i * nI:(2 * i + 1) * nI] = r1
        rhs[(2 * i + 1) * nI:(2 * i + 2) * nI] = r2

    try:
        X = fact.solve(rhs)
    except SolverFailure as exc:
        raise SolverFailure(f"slab {n + 1}: {exc}", residual=exc.residual) from exc

    U = np.zeros((q + 1, ws.space.n_dofs))
    V = np.zeros((q + 1, ws.space.n_dofs))
    U[0], V[0] = prev_u, prev_v
    for j in range(1, q + 1):
        U[j, I] = X[2 * (j - 1) * nI:(2 * j - 1) * nI]
        V[j, I] = X[(2 * j - 1) * nI:2 * j * nI]
        U[j, B] = UB[j]
        V[j, B] = VB[j]
    return U, V


def solve(problem, disc):
    """March all slabs and return the space-time solution."""
    space, partition, q = disc.space, disc.partition, disc.q
    ws = SlabWorkspace(problem, disc)
    lifting = build_lifting(problem, space, partition, q, disc.bc_mode)
    u0h, v0h = discrete_initial_data(problem, space, lifting, disc.initial_mode,
                                     mass=ws.M, stiffness=ws.K)
    N = partition.n_slabs
    U = np.zeros((N, q + 1, space.n_dofs))
    V = np.zeros((N, q + 1, space.n_dofs))
    prev_u, prev_v = u0h.values.copy(), v0h.values.copy()
    for n in range(N):
        U[n], V[n] = solve_slab(prev_u, prev_v, n, problem, disc, lifting, ws)
        prev_u = U[n, 0] + U[n, 1]
        prev_v = V[n, 0] + V[n, 1]
    sol = SpaceTimeSolution(space, partition, q, U, V,
                            method=disc.method, bc_mode=disc.bc_mode)
    sol._mass = ws.M
    sol._stiffness = ws.K
    return sol
