"""Constant-free a posteriori error bound for the time discretization.

The bound controls the max-in-time L2 error of u through slabwise temporal
defects of the computed fields: the top-Legendre-mode remainders of v, of
the source, and of the elementwise Laplacians of u and v.  It applies under
homogeneous Dirichlet data and a constant wavespeed, with the spatial
discretization resolved far beyond the temporal one (degree >= 2 so the
elementwise Laplacian is meaningful).

All explicit constants are closed-form; no term hides a generic C.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fem import FEFunction, assemble, broken_laplacian
from .postprocess import postprocessed_solution
from .timebasis import (abs_legendre_integral, gauss_rule, graded_gauss_rule,
                        legendre_matrix, to_normalized)


def gap_constant(q):
    """Constant in the slabwise gap bound between the reconstruction and u:
    1/pi for q = 1, 1/(2 sqrt((q-1) q)) for q > 1."""
    if q < 1:
        raise ValueError("temporal degree must be >= 1")
    return 1.0 / math.pi if q == 1 else 1.0 / (2.0 * math.sqrt((q - 1) * q))


def best_approx_constant(s):
    """Best-uniform-approximation constant: 1/sqrt(pi) for s <= 2, else
    1/((s-2) pi)."""
    if s < 0:
        raise ValueError("degree must be >= 0")
    return math.pi ** -0.5 if s in (0, 1, 2) else 1.0 / ((s - 2) * math.pi)


def estimator_constants(q, s):
    """The three constant ingredients: the gap constant for degree q, the
    best-approximation constant for degree s, and the summation-weight
    factory (a function of slab index n and peak slab m, which for q = 1
    depends on the distance t_m - t_{n-1})."""

    def weight(n, m, partition):
        if q == 1:
            return float(partition.nodes[m + 1] - partition.nodes[n])
        return best_approx_constant(q - 2) * float(partition.lengths[n]) / 2.0

    return gap_constant(q), best_approx_constant(s), weight


@dataclass
class EstimatorBreakdown:
    """Estimator value and its per-term decomposition.

    m_star is the 0-based index of the slab where the gap between the
    reconstruction and u peaks.  total = eta + osc_f exactly; osc_f collects
    the two source-oscillation terms (the only data-dependent ones).
    """

    m_star: int
    term_post: float
    term_f: float
    term_lap_v: float
    term_lap_u: float
    eta: float
    osc_f: float
    total: float
    per_slab: dict = field(default_factory=dict)


def _source_defects(sol, f, singular_at_zero):
    """Per-slab L1-in-time norms of the spatial L2 norm of (f - its slabwise
    degree-(q-1) temporal L2 projection)."""
    space = sol.space
    q = sol.degree
    qd = space.quad_data(space.norm_degree())
    X = qd["pts"][..., 0].ravel()
    Y = qd["pts"][..., 1].ravel()
    wsp = qd["wdet"].ravel()
    out = np.zeros(sol.partition.n_slabs)
    n_outer = max(q + 4, 8)
    for n in range(sol.partition.n_slabs):
        slab = sol.partition.slab(n)
        tau = slab[1] - slab[0]
        graded = singular_at_zero and n == 0
        tp, wp = (graded_gauss_rule(q + 6, slab) if graded
                  else gauss_rule(q + 6, slab))
        fv_p = np.stack([np.broadcast_to(f(X, Y, t), X.shape) for t in tp])
        Pp = legendre_matrix(q - 1, to_normalized(slab, tp))
        scale = (2.0 * np.arange(q) + 1.0) / tau
        proj = scale[:, None] * ((Pp * wp) @ fv_p)  # (q, n_space_pts)
        to_, wo = (graded_gauss_rule(n_outer, slab) if graded
                   else gauss_rule(n_outer, slab))
        Po = legendre_matrix(q - 1, to_normalized(slab, to_))
        acc = 0.0
        for k, t in enumerate(to_):
            defect = np.broadcast_to(f(X, Y, t), X.shape) - Po[:, k] @ proj
            acc += wo[k] * math.sqrt(float(np.sum(wsp * defect ** 2)))
        out[n] = acc
    return out


def compute_estimator(sol, f=None, c=1.0, samples_per_slab=11,
                      singular_at_zero=False):
    """Evaluate the a posteriori bound on a computed solution.

    Parameters
    ----------
    sol : solution with both fields, homogeneous Dirichlet data.
    f : source callback f(x, y, t) or None for a zero source.
    c : constant wavespeed.
    samples_per_slab : sampling density used to locate the peak-gap slab.

    Returns an :class:`EstimatorBreakdown`; its ``total`` bounds the
    max-in-time L2 error of u (up to spatial resolution).
    """
    if np.ndim(c) != 0 or callable(c):
        raise ConfigurationError("the estimator requires a constant wavespeed")
    if sol.space.degree < 2:
        raise ConfigurationError("the estimator needs spatial degree >= 2")
    if sol.v is None:
        raise ConfigurationError("the estimator needs both solution fields")
    B = sol.space.boundary_dofs
    bscale = 1.0 + np.abs(sol.u).max()
    if max(np.abs(sol.u[:, :, B]).max(), np.abs(sol.v[:, :, B]).max()) > 1e-9 * bscale:
        raise ConfigurationError("the estimator applies to homogeneous Dirichlet data")

    space = sol.space
    partition = sol.partition
    q = sol.degree
    N = partition.n_slabs
    csq = float(c) ** 2
    M = getattr(sol, "_mass", None)
    if M is None:
        M = assemble(space, "mass")

    star = postprocessed_solution(sol)
    xs = np.linspace(-1.0, 1.0, samples_per_slab)
    gap = np.zeros(N)
    for n in range(N):
        d = star.coeffs_on_slab(n, xs, "u") - sol.coeffs_on_slab(n, xs, "u")
        gap[n] = float(np.sqrt(np.maximum(np.einsum("sd,ds->s", d, M @ d.T), 0.0)).max())
    m = int(np.argmax(gap))

    v_defect = np.zeros(N)
    lap_u = np.zeros(N)
    lap_v = np.zeros(N)
    for n in range(N):
        tau = float(partition.lengths[n])
        v_top = sol.legendre_coeffs(n, "v")[q]
        u_top = sol.legendre_coeffs(n, "u")[q]
        v_defect[n] = math.sqrt(max(tau / (2 * q + 1) * float(v_top @ (M @ v_top)), 0.0))
        wgt = abs_legendre_integral(q, tau)
        lap_u[n] = broken_laplacian(FEFunction(space, u_top)).l2_norm() * wgt
        lap_v[n] = broken_laplacian(FEFunction(space, v_top)).l2_norm() * wgt

    f_defect = _source_defects(sol, f, singular_at_zero) if f is not None else np.zeros(N)

    cq = gap_constant(q)
    cpi = best_approx_constant(q - 1)
    lengths = partition.lengths
    term_post = float(np.max(np.sqrt(cq * lengths) * v_defect))
    tau_m = float(lengths[m])

    term_f = 2.0 * tau_m * f_defect[m]
    # the peak-slab Laplacian-of-v term carries tau_m squared: one factor from
    # the L1 gap bound between the reconstruction and u, one from the weight
    term_lap_v = 2.0 * csq * tau_m ** 2 * lap_v[m]
    term_lap_u = 2.0 * csq * tau_m * lap_u[m]
    for n in range(m):
        tau_n = float(lengths[n])
        term_f += 2.0 * cpi * tau_n * f_defect[n]
        if q == 1:
            bullet = float(partition.nodes[m + 1] - partition.nodes[n])
        else:
            bullet = best_approx_constant(q - 2) * tau_n / 2.0
        term_lap_v += 2.0 * csq * bullet * tau_n * lap_v[n]
        term_lap_u += 2.0 * csq * cpi * tau_n * lap_u[n]

    eta = term_post + term_lap_v + term_lap_u
    osc = term_f
    return EstimatorBreakdown(
        m_star=m,
        term_post=term_post,
        term_f=term_f,
        term_lap_v=term_lap_v,
        term_lap_u=term_lap_u,
        eta=eta,
        osc_f=osc,
        total=eta + osc,
        per_slab={"gap": gap, "v_defect": v_defect, "f_defect": f_defect,
                  "lap_u": lap_u, "lap_v": lap_v},
    )


def effectivity_index(eta, error):
    """Ratio of the estimator to the measured error; NaN flags a zero error."""
    if error <= 0.0:
        return float("nan")
    return float(eta) / float(error)
