"""Reference-triangle machinery: nodal basis tables and quadrature.

The reference cell is the unit triangle {(r, s): r, s >= 0, r + s <= 1}.
Nodal Lagrange bases on the principal lattice are evaluated through a
Bernstein backing basis, whose lattice collocation matrix stays well
conditioned up to degree 10.
"""

from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial.legendre import leggauss


def lattice_multi_indices(p):
    """Barycentric integer triples (c1, c2, c3) with c1+c2+c3 = p.

    The ordering (outer loop over c3, inner over c2) fixes the local DOF
    numbering used everywhere else.
    """
    out = []
    for c3 in range(p + 1):
        for c2 in range(p + 1 - c3):
            out.append((p - c2 - c3, c2, c3))
    return np.asarray(out, dtype=np.int64)


def lattice_points(p):
    """Principal lattice nodes in reference (r, s) coordinates."""
    multi = lattice_multi_indices(p)
    return multi[:, 1:].astype(float) / p


def _bernstein_tables(p, rs, order):
    """Bernstein values (and derivatives up to ``order``) at points ``rs``.

    Returns (vals, grads, hessians); entries beyond ``order`` are None.
    vals has shape (npts, nb); grads (npts, nb, 2); hessians (npts, nb, 2, 2).
    """
    rs = np.asarray(rs, dtype=float)
    npts = rs.shape[0]
    lam = np.empty((npts, 3))
    lam[:, 0] = 1.0 - rs[:, 0] - rs[:, 1]
    lam[:, 1] = rs[:, 0]
    lam[:, 2] = rs[:, 1]

    # lam powers 0..p, guarded so that 0**0 == 1 and negative powers never occur
    pw = np.ones((3, p + 1, npts))
    for k in range(1, p + 1):
        pw[:, k] = pw[:, k - 1] * lam.T

    multi = lattice_multi_indices(p)
    nb = len(multi)
    coef = np.array([factorial(p) / (factorial(a) * factorial(b) * factorial(c))
                     for a, b, c in multi])

    def mono(e):
        """prod_k lam_k**e_k with the convention that a negative exponent kills
        the term (caller multiplies by the exponent, which is then zero)."""
        out = np.ones(npts)
        for k in range(3):
            ek = e[k]
            if ek < 0:
                return np.zeros(npts)
            out = out * pw[k, ek]
        return out

    vals = np.empty((npts, nb))
    for i, e in enumerate(multi):
        vals[:, i] = coef[i] * mono(e)

    grads = None
    hess = None
    if order >= 1:
        dlam = np.empty((npts, nb, 3))
        for i, e in enumerate(multi):
            for k in range(3):
                dlam[:, i, k] = coef[i] * e[k] * mono(e - np.eye(3, dtype=int)[k])
        # chain rule: lam = (1-r-s, r, s)
        grads = np.empty((npts, nb, 2))
        grads[:, :, 0] = dlam[:, :, 1] - dlam[:, :, 0]
        grads[:, :, 1] = dlam[:, :, 2] - dlam[:, :, 0]
    if order >= 2:
        d2 = np.empty((npts, nb, 3, 3))
        eye = np.eye(3, dtype=int)
        for i, e in enumerate(multi):
            for k in range(3):
                for m in range(3):
                    fac = e[k] * (e[k] - 1) if k == m else e[k] * e[m]
                    d2[:, i, k, m] = coef[i] * fac * mono(e - eye[k] - eye[m])
        hess = np.empty((npts, nb, 2, 2))
        hess[:, :, 0, 0] = d2[:, :, 1, 1] - 2 * d2[:, :, 0, 1] + d2[:, :, 0, 0]
        hess[:, :, 1, 1] = d2[:, :, 2, 2] - 2 * d2[:, :, 0, 2] + d2[:, :, 0, 0]
        hess[:, :, 0, 1] = d2[:, :, 1, 2] - d2[:, :, 0, 1] - d2[:, :, 0, 2] + d2[:, :, 0, 0]
        hess[:, :, 1, 0] = hess[:, :, 0, 1]
    return vals, grads, hess


@lru_cache(maxsize=None)
def _nodal_transform(p):
    """Inverse of the Bernstein collocation matrix at the lattice nodes."""
    nodes = lattice_points(p)
    vals, _, _ = _bernstein_tables(p, nodes, order=0)
    return np.linalg.inv(vals)


def tabulate(p, rs, order=1):
    """Nodal basis values/derivatives at reference points ``rs``.

    Returns (vals, grads, hessians): vals (npts, nloc); grads (npts, nloc, 2);
    hessians (npts, nloc, 2, 2) or None when ``order`` < 2.
    """
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    bvals, bgrads, bhess = _bernstein_tables(p, rs, order)
    A = _nodal_transform(p)
    vals = bvals @ A
    grads = np.einsum("pbk,bn->pnk", bgrads, A) if order >= 1 else None
    hess = np.einsum("pbkm,bn->pnkm", bhess, A) if order >= 2 else None
    return vals, grads, hess


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Quadrature on the reference triangle, exact for polynomials of
    total degree <= ``degree``.

    Built from a Gauss-Legendre product rule under the collapsed map
    r = xi*(1 - eta), s = eta; the (1 - eta) Jacobian raises the required
    eta-direction degree by one.
    """
    n_xi = (degree + 2) // 2
    n_eta = (degree + 3) // 2
    x1, w1 = leggauss(n_xi)
    x2, w2 = leggauss(n_eta)
    xi = (x1 + 1.0) / 2.0
    eta = (x2 + 1.0) / 2.0
    w1 = w1 / 2.0
    w2 = w2 / 2.0
    R = np.outer(xi, 1.0 - eta)
    S = np.broadcast_to(eta, R.shape)
    W = np.outer(w1, w2 * (1.0 - eta))
    pts = np.column_stack([R.ravel(), S.ravel()])
    return pts, W.ravel()
