"""Problem data, discretization choices, and the built-in benchmark presets.

All spatial and space-time callbacks are vectorized: they accept numpy
arrays for x, y (and t) and broadcast.  Exact solutions, when present, enable
error studies; the solver itself only consumes data fields.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .fem import LagrangeSpace
from .timebasis import TimePartition


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _zero_grad(x, y):
    z = np.zeros(np.broadcast(x, y).shape)
    return z, z


@dataclass
class ProblemData:
    """Wave problem data on a rectangle: wavespeed, source, boundary and
    initial data, plus optional exact solution for error studies.

    The Dirichlet datum g_d and its time derivative dt_g_d are callbacks of
    (x, y, t) evaluated at boundary nodes; g_d = None means homogeneous.
    ``singular_at_zero`` marks sources with an algebraic singularity at t = 0
    so time quadrature on the first slab switches to a graded rule.
    """

    name: str = "custom"
    bbox: tuple = (0.0, 1.0, 0.0, 1.0)
    t_final: float = 1.0
    c: float = 1.0
    f: Optional[Callable] = None
    g_d: Optional[Callable] = None
    dt_g_d: Optional[Callable] = None
    u0: Callable = field(default=_zero)
    grad_u0: Optional[Callable] = field(default=_zero_grad)
    v0: Callable = field(default=_zero)
    exact_u: Optional[Callable] = None
    exact_v: Optional[Callable] = None
    exact_grad_u: Optional[Callable] = None
    singular_at_zero: bool = False
    check_v_compatibility: bool = True

    def has_exact(self):
        return self.exact_u is not None


@dataclass
class Discretization:
    """Space-time discretization choices.

    method: "gradient" couples the two fields through the stiffness inner
    product; "mass" uses the L2 inner product (equivalent only for
    homogeneous Dirichlet data).
    bc_mode: "projection" builds boundary trajectories with the
    endpoint-exact temporal projection; "interpolation" uses slabwise
    Lagrange interpolation in time (the naive treatment).
    initial_mode: "projection" takes Ritz/L2 projections of the initial
    data; "interpolation" takes nodal interpolants.
    """

    space: LagrangeSpace
    partition: TimePartition
    q: int
    method: str = "gradient"
    bc_mode: str = "projection"
    initial_mode: str = "projection"
    time_quad_points: Optional[int] = None

    def __post_init__(self):
        if self.space.degree < 1 or self.q < 1:
            raise ConfigurationError("spatial and temporal degrees must be >= 1")
        if self.method not in ("gradient", "mass"):
            raise ConfigurationError(f"unknown coupling method {self.method!r}")
        if self.bc_mode not in ("projection", "interpolation"):
            raise ConfigurationError(f"unknown bc_mode {self.bc_mode!r}")
        if self.initial_mode not in ("projection", "interpolation"):
            raise ConfigurationError(f"unknown initial_mode {self.initial_mode!r}")

    def rhs_time_points(self):
        return self.time_quad_points if self.time_quad_points is not None \
            else max(self.q + 3, 6)


# ---------------------------------------------------------------------------
# presets


def dirichlet_cos():
    """Standing wave with nonhomogeneous Dirichlet data on (0,1)^2 x (0,1):
    u = cos(sqrt(2) pi t) cos(pi x) sin(pi y); the source vanishes."""
    rt2pi = np.sqrt(2.0) * np.pi

    def u(x, y, t):
        return np.cos(rt2pi * t) * np.cos(np.pi * x) * np.sin(np.pi * y)

    def v(x, y, t):
        return -rt2pi * np.sin(rt2pi * t) * np.cos(np.pi * x) * np.sin(np.pi * y)

    def grad_u(x, y, t):
        co = np.cos(rt2pi * t)
        return (-np.pi * co * np.sin(np.pi * x) * np.sin(np.pi * y),
                np.pi * co * np.cos(np.pi * x) * np.cos(np.pi * y))

    return ProblemData(
        name="dirichlet-cos",
        bbox=(0.0, 1.0, 0.0, 1.0),
        t_final=1.0,
        c=1.0,
        f=None,
        g_d=u,
        dt_g_d=v,
        u0=lambda x, y: u(x, y, 0.0),
        grad_u0=lambda x, y: grad_u(x, y, 0.0),
        v0=_zero,
        exact_u=u,
        exact_v=v,
        exact_grad_u=grad_u,
    )


def standing_wave():
    """Homogeneous standing wave on (0,1)^2 x (0,1):
    u = cos(sqrt(2) pi t) sin(pi x) sin(pi y); zero source and boundary data."""
    rt2pi = np.sqrt(2.0) * np.pi

    def u(x, y, t):
        return np.cos(rt2pi * t) * np.sin(np.pi * x) * np.sin(np.pi * y)

    def v(x, y, t):
        return -rt2pi * np.sin(rt2pi * t) * np.sin(np.pi * x) * np.sin(np.pi * y)

    def grad_u(x, y, t):
        co = np.cos(rt2pi * t)
        return (np.pi * co * np.cos(np.pi * x) * np.sin(np.pi * y),
                np.pi * co * np.sin(np.pi * x) * np.cos(np.pi * y))

    return ProblemData(
        name="standing-wave",
        bbox=(0.0, 1.0, 0.0, 1.0),
        t_final=1.0,
        c=1.0,
        f=None,
        g_d=None,
        dt_g_d=None,
        u0=lambda x, y: u(x, y, 0.0),
        grad_u0=lambda x, y: grad_u(x, y, 0.0),
        v0=_zero,
        exact_u=u,
        exact_v=v,
        exact_grad_u=grad_u,
    )


_PSI_TABLE = {
    "cos4t": (
        lambda t: np.cos(4.0 * t),
        lambda t: -4.0 * np.sin(4.0 * t),
        lambda t: -16.0 * np.cos(4.0 * t),
        False,
    ),
}


def _power_psi(alpha):
    def psi(t):
        return np.power(np.maximum(t, 0.0), alpha)

    def dpsi(t):
        return alpha * np.power(np.maximum(t, 0.0), alpha - 1.0)

    def ddpsi(t):
        return alpha * (alpha - 1.0) * np.power(np.maximum(t, 0.0), alpha - 2.0)

    return psi, dpsi, ddpsi, True


def estimator_poly(psi="cos4t"):
    """Separable solution on (-1,1)^2 x (0,1) with polynomial spatial profile:
    u = psi(t) (1 - x^2)(1 - y^2), which degree >= 4 spaces represent exactly.

    psi is "cos4t" or "t<alpha>" for a power-law time profile (for example
    "t2.25"), whose source is singular at t = 0.
    """
    key = psi.replace("^", "")
    if key in _PSI_TABLE:
        psi_f, dpsi_f, ddpsi_f, singular = _PSI_TABLE[key]
    elif key.startswith("t"):
        try:
            alpha = float(key[1:])
        except ValueError as exc:
            raise ConfigurationError(f"unknown time profile {psi!r}") from exc
        if alpha <= 1.0:
            raise ConfigurationError("power-law exponent must exceed 1")
        psi_f, dpsi_f, ddpsi_f, singular = _power_psi(alpha)
    else:
        raise ConfigurationError(f"unknown time profile {psi!r}")

    def zeta(x, y):
        return (1.0 - x ** 2) * (1.0 - y ** 2)

    def u(x, y, t):
        return psi_f(t) * zeta(x, y)

    def v(x, y, t):
        return dpsi_f(t) * zeta(x, y)

    def grad_u(x, y, t):
        ps = psi_f(t)
        return (-2.0 * x * (1.0 - y ** 2) * ps, -2.0 * y * (1.0 - x ** 2) * ps)

    def f(x, y, t):
        # dtt u - lap u with c = 1
        return ddpsi_f(t) * zeta(x, y) + 2.0 * psi_f(t) * ((1.0 - y ** 2) + (1.0 - x ** 2))

    return ProblemData(
        name=f"estimator-poly-{key}",
        bbox=(-1.0, 1.0, -1.0, 1.0),
        t_final=1.0,
        c=1.0,
        f=f,
        g_d=None,
        dt_g_d=None,
        u0=lambda x, y: u(x, y, 0.0),
        grad_u0=lambda x, y: grad_u(x, y, 0.0),
        v0=lambda x, y: v(x, y, 0.0),
        exact_u=u,
        exact_v=v,
        exact_grad_u=grad_u,
        singular_at_zero=singular,
    )


def inline_problem(u_expr, c=1.0, bbox=(0.0, 1.0, 0.0, 1.0), t_final=1.0):
    """Manufacture a problem from a symbolic expression for u(x, y, t).

    The companion field, source, boundary and initial data are derived by
    symbolic differentiation (v = du/dt, f = dtt u - c^2 lap u).
    """
    import sympy as sp

    x, y, t = sp.symbols("x y t")
    u_sym = sp.sympify(u_expr, locals={"x": x, "y": y, "t": t})
    v_sym = sp.diff(u_sym, t)
    f_sym = sp.diff(u_sym, t, 2) - float(c) ** 2 * (sp.diff(u_sym, x, 2) + sp.diff(u_sym, y, 2))
    ux_sym = sp.diff(u_sym, x)
    uy_sym = sp.diff(u_sym, y)

    def lam3(expr):
        fn = sp.lambdify((x, y, t), expr, "numpy")
        return lambda xx, yy, tt: np.broadcast_to(
            np.asarray(fn(xx, yy, tt), dtype=float), np.broadcast(xx, yy, tt).shape)

    u_f, v_f, f_f = lam3(u_sym), lam3(v_sym), lam3(f_sym)
    ux_f, uy_f = lam3(ux_sym), lam3(uy_sym)

    return ProblemData(
        name="inline",
        bbox=tuple(map(float, bbox)),
        t_final=float(t_final),
        c=float(c),
        f=None if f_sym == 0 else f_f,
        g_d=u_f,
        dt_g_d=v_f,
        u0=lambda xx, yy: u_f(xx, yy, 0.0),
        grad_u0=lambda xx, yy: (ux_f(xx, yy, 0.0), uy_f(xx, yy, 0.0)),
        v0=lambda xx, yy: v_f(xx, yy, 0.0),
        exact_u=u_f,
        exact_v=v_f,
        exact_grad_u=lambda xx, yy, tt: (ux_f(xx, yy, tt), uy_f(xx, yy, tt)),
    )


PRESETS = {
    "dirichlet-cos": dirichlet_cos,
    "standing-wave": standing_wave,
    "estimator-poly": estimator_poly,
}


def make_preset(name, psi=None):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown problem preset {name!r}")
    if name == "estimator-poly":
        return estimator_poly(psi or "cos4t")
    if psi is not None:
        raise ConfigurationError(f"preset {name!r} takes no psi option")
    return PRESETS[name]()
