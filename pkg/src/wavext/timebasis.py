"""Temporal polynomial machinery on a partition of (0, T).

Per slab (t_{n-1}, t_n) two bases appear:

* the test basis: Legendre polynomials L_0..L_{q-1} shifted to the slab and
  normalized so that L_s(t_n) = 1, hence L_s(t_{n-1}) = (-1)^s and
  int L_i L_j dt = delta_ij * tau_n / (2i + 1);
* the trial basis: sigma_0 = 1 and, for j >= 1, the scaled antiderivatives
  sigma_j(t) = (2j - 1)/tau_n * int_{t_{n-1}}^t L_{j-1} ds, which vanish at
  the left endpoint so slab-to-slab continuity pins a single coefficient.

In the normalized coordinate x = 2(t - t_{n-1})/tau_n - 1 the trial basis is
slab-independent: sigma_1 = (x + 1)/2 and sigma_j = (P_j - P_{j-2})/2 for
j >= 2. A handy consequence: the time derivative of a trial expansion has
Legendre coefficient k equal to (2k + 1)/tau_n times trial coefficient k+1.

Vector-valued callbacks are supported throughout: a time callback may return
shape (nt,) or (nt, n_channels), and projections preserve the channel axis.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import OutOfDomainError


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing time nodes t_0 = 0 < t_1 < ... < t_N = T."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise ValueError("a time partition needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("time partitions start at t = 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must be strictly increasing")

    @property
    def n_slabs(self):
        return len(self.nodes) - 1

    @property
    def lengths(self):
        return np.diff(self.nodes)

    @property
    def tau_max(self):
        return float(np.max(self.lengths))

    @property
    def t_final(self):
        return float(self.nodes[-1])

    def slab(self, n):
        return float(self.nodes[n]), float(self.nodes[n + 1])

    def containing_slab(self, t):
        return int(np.clip(np.searchsorted(self.nodes, t, side="right") - 1,
                           0, self.n_slabs - 1))


def uniform_time_partition(t_final, n_slabs):
    return TimePartition(np.linspace(0.0, float(t_final), int(n_slabs) + 1))


def to_normalized(slab, t):
    a, b = slab
    return 2.0 * (np.asarray(t, dtype=float) - a) / (b - a) - 1.0


def legendre_eval(s, slab, t, derivative_order=0):
    """Shifted Legendre polynomial L_s on the slab (value or d/dt)."""
    a, b = slab
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * (b - a)
    if np.any(t < a - tol) or np.any(t > b + tol):
        raise OutOfDomainError(f"time outside slab [{a}, {b}]")
    x = to_normalized(slab, t)
    c = np.zeros(s + 1)
    c[s] = 1.0
    if derivative_order == 0:
        return npleg.legval(x, c)
    if derivative_order == 1:
        return npleg.legval(x, npleg.legder(c)) * 2.0 / (b - a)
    raise ValueError("only values and first derivatives are provided")


def legendre_matrix(deg, x, derivative=0):
    """Values of P_0..P_deg at normalized coords x, shape (deg+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((deg + 1,) + x.shape)
    for s in range(deg + 1):
        c = np.zeros(s + 1)
        c[s] = 1.0
        if derivative:
            out[s] = npleg.legval(x, npleg.legder(c)) if s else 0.0
        else:
            out[s] = npleg.legval(x, c)
    return out


def trial_matrix(q, x, derivative=0):
    """Values of the trial basis sigma_0..sigma_q at normalized coords x.

    With derivative=1 the result is d sigma_j/dx; chain with 2/tau for d/dt.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((q + 1,) + x.shape)
    if derivative == 0:
        out[0] = 1.0
        if q >= 1:
            out[1] = 0.5 * (x + 1.0)
        if q >= 2:
            P = legendre_matrix(q, x)
            for j in range(2, q + 1):
                out[j] = 0.5 * (P[j] - P[j - 2])
    else:
        P = legendre_matrix(max(q - 1, 0), x)
        for j in range(1, q + 1):
            out[j] = 0.5 * (2 * j - 1) * P[j - 1]
    return out


@lru_cache(maxsize=None)
def trial_to_legendre(q):
    """Matrix T with (Legendre coeffs) = T @ (trial coeffs); slab-independent."""
    T = np.zeros((q + 1, q + 1))
    T[0, 0] = 1.0
    if q >= 1:
        T[0, 1] = 0.5
        T[1, 1] = 0.5
    for j in range(2, q + 1):
        T[j, j] = 0.5
        T[j - 2, j] = -0.5
    return T


def legendre_to_trial(coeffs):
    """Invert trial_to_legendre along the leading (mode) axis."""
    coeffs = np.asarray(coeffs, dtype=float)
    q = coeffs.shape[0] - 1
    flat = coeffs.reshape(q + 1, -1)
    return np.linalg.solve(trial_to_legendre(q), flat).reshape(coeffs.shape)


def gauss_rule(npts, slab):
    """Gauss-Legendre nodes and weights on a slab; exact to degree 2*npts - 1."""
    if not 1 <= npts <= 30:
        raise ValueError(f"gauss_rule supports 1..30 points, got {npts}")
    a, b = slab
    x, w = npleg.leggauss(int(npts))
    return a + (x + 1.0) * (b - a) / 2.0, w * (b - a) / 2.0


def graded_gauss_rule(npts, slab, levels=10, ratio=0.15):
    """Composite Gauss rule geometrically graded toward the left endpoint.

    For data with an algebraic singularity at the left end of the slab, where
    a single Gauss rule loses accuracy.
    """
    a, b = slab
    cuts = [a] + [a + (b - a) * ratio ** k for k in range(levels, 0, -1)] + [b]
    ts, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        t, w = gauss_rule(npts, (lo, hi))
        ts.append(t)
        ws.append(w)
    return np.concatenate(ts), np.concatenate(ws)


def l2_project_time(r, f, slab, npts=None, rule=None):
    """Legendre coefficients of the slabwise L2 projection onto degree r.

    Coefficient k is (2k+1)/tau * int f L_k dt.  The default Gauss rule uses
    r + 6 points; pass ``rule`` = (nodes, weights) to override entirely.
    """
    a, b = slab
    tau = b - a
    if rule is None:
        ts, ws = gauss_rule(npts if npts is not None else r + 6, slab)
    else:
        ts, ws = rule
    fv = np.asarray(f(ts), dtype=float)
    P = legendre_matrix(r, to_normalized(slab, ts))
    moments = np.tensordot(P * ws, fv, axes=(1, 0))
    scale = (2.0 * np.arange(r + 1) + 1.0) / tau
    return moments * scale.reshape((r + 1,) + (1,) * (fv.ndim - 1))


@dataclass
class SlabPoly:
    """Piecewise polynomial in time stored as per-slab Legendre coefficients.

    coeffs has shape (n_slabs, deg+1) or (n_slabs, deg+1, n_channels).
    """

    partition: TimePartition
    coeffs: np.ndarray

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    def eval_slab(self, n, t):
        P = legendre_matrix(self.degree, to_normalized(self.partition.slab(n), t))
        return np.tensordot(P, self.coeffs[n], axes=(0, 0))

    def __call__(self, t):
        n = self.partition.containing_slab(float(t))
        return self.eval_slab(n, float(t))

    def trial_coeffs(self, n):
        """Slab-n coefficients in the trial (integrated Legendre) basis."""
        return legendre_to_trial(self.coeffs[n])

    def left_values(self, n):
        signs = (-1.0) ** np.arange(self.degree + 1)
        return np.tensordot(signs, self.coeffs[n], axes=(0, 0))

    def right_values(self, n):
        return self.coeffs[n].sum(axis=0)


def endpoint_exact_project(q, f, partition, npts=None):
    """Continuous piecewise degree-q projection matching f at every partition
    node, with slabwise defect L2-orthogonal to polynomials of degree q - 2.

    On each slab the result is the degree-(q-2) L2 projection of f plus
    explicit corrections along L_{q-1} and L_q fixed by the two endpoint
    conditions; for q = 1 it reduces to nodal interpolation.
    """
    if q < 1:
        raise ValueError("temporal degree must be >= 1")
    probe = np.asarray(f(np.asarray([partition.nodes[0]])), dtype=float)
    channels = probe.shape[1:]
    coeffs = np.zeros((partition.n_slabs, q + 1) + channels)
    sgn = (-1.0) ** q
    signs = (-1.0) ** np.arange(q + 1)
    for n in range(partition.n_slabs):
        slab = partition.slab(n)
        low = np.zeros((q + 1,) + channels)
        if q >= 2:
            low[: q - 1] = l2_project_time(q - 2, f, slab,
                                           npts=npts if npts is not None else q + 6)
        f_left = np.asarray(f(np.asarray([slab[0]])), dtype=float)[0]
        f_right = np.asarray(f(np.asarray([slab[1]])), dtype=float)[0]
        delta_left = f_left - np.tensordot(signs, low, axes=(0, 0))
        delta_right = f_right - low.sum(axis=0)
        alpha = (sgn * delta_right - delta_left) / (2.0 * sgn)
        beta = (sgn * delta_right + delta_left) / (2.0 * sgn)
        coeffs[n] = low
        coeffs[n, q - 1] += alpha
        coeffs[n, q] += beta
    return SlabPoly(partition, coeffs)


def lagrange_time_interp(q, f, partition):
    """Slabwise interpolation of f at q+1 uniformly spaced nodes (endpoints
    included), expressed as per-slab Legendre coefficients."""
    if q < 1:
        raise ValueError("temporal degree must be >= 1")
    xs = np.linspace(-1.0, 1.0, q + 1)
    Vinv = np.linalg.inv(legendre_matrix(q, xs).T)
    probe = np.asarray(f(np.asarray([partition.nodes[0]])), dtype=float)
    coeffs = np.zeros((partition.n_slabs, q + 1) + probe.shape[1:])
    for n in range(partition.n_slabs):
        a, b = partition.slab(n)
        fv = np.asarray(f(a + (xs + 1.0) * (b - a) / 2.0), dtype=float)
        coeffs[n] = np.tensordot(Vinv, fv, axes=(1, 0))
    return SlabPoly(partition, coeffs)


@dataclass(frozen=True)
class SlabBasis:
    """Trial/test basis bundle for one slab."""

    index: int
    slab: tuple
    q: int

    @property
    def tau(self):
        return self.slab[1] - self.slab[0]

    def trial_values(self, t, derivative_order=0):
        x = to_normalized(self.slab, t)
        vals = trial_matrix(self.q, x, derivative=derivative_order)
        return vals * (2.0 / self.tau) if derivative_order else vals

    def test_values(self, t):
        return legendre_matrix(self.q - 1, to_normalized(self.slab, t))


def slab_temporal_matrices(q, slab):
    """Temporal coupling matrices N[i,j] = int sigma_j L_i dt and
    D[i,j] = int sigma_j' L_i dt for i < q, j <= q (Gauss, exact)."""
    if q < 1:
        raise ValueError("temporal degree must be >= 1")
    a, b = slab
    tau = b - a
    x, w = npleg.leggauss(q + 1)
    wt = w * tau / 2.0
    sig = trial_matrix(q, x)
    dsig = trial_matrix(q, x, derivative=1) * (2.0 / tau)
    tst = legendre_matrix(q - 1, x)
    N = np.einsum("g,ig,jg->ij", wt, tst, sig)
    D = np.einsum("g,ig,jg->ij", wt, tst, dsig)
    return N, D


def abs_legendre_integral(q, tau):
    """Exact int over a slab of |L_q(t)| dt via signwise antiderivatives."""
    if q == 0:
        return float(tau)
    breaks = np.concatenate([[-1.0], np.sort(npleg.leggauss(q)[0]), [1.0]])

    def antider(x):
        cp = np.zeros(q + 2)
        cp[q + 1] = 1.0
        cm = np.zeros(q)
        cm[q - 1] = 1.0
        return (npleg.legval(x, cp) - npleg.legval(x, cm)) / (2 * q + 1)

    total = sum(abs(antider(breaks[k + 1]) - antider(breaks[k]))
                for k in range(len(breaks) - 1))
    return float(total * tau / 2.0)
