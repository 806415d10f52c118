import numpy as np
import pytest

import wavext as wx


@pytest.fixture(scope="session")
def unit_square_p2():
    mesh = wx.build_structured_mesh(2, 2)
    return wx.build_space(mesh, 2)


def txy_problem():
    """Probe with exact solution u = t*x*y (zero source, linear data)."""
    shape = lambda *a: np.broadcast(*a).shape
    return wx.ProblemData(
        name="txy",
        bbox=(0.0, 1.0, 0.0, 1.0),
        t_final=1.0,
        g_d=lambda x, y, t: t * x * y,
        dt_g_d=lambda x, y, t: x * y * np.ones(shape(x, y, t)),
        u0=lambda x, y: np.zeros(shape(x, y)),
        grad_u0=lambda x, y: (np.zeros(shape(x, y)), np.zeros(shape(x, y))),
        v0=lambda x, y: x * y,
        exact_u=lambda x, y, t: t * x * y,
        exact_v=lambda x, y, t: x * y * np.ones(shape(x, y, t)),
        exact_grad_u=lambda x, y, t: (t * y * np.ones(shape(x, y, t)),
                                      t * x * np.ones(shape(x, y, t))),
    )


def small_homogeneous_run(q=2, n_slabs=8, nx=4, p=2, method="gradient"):
    prob = wx.standing_wave()
    space = wx.build_space(wx.build_structured_mesh(nx, nx, prob.bbox), p)
    disc = wx.Discretization(space, wx.uniform_time_partition(1.0, n_slabs),
                             q=q, method=method)
    return prob, wx.solve(prob, disc)
