import numpy as np
import pytest

import wavext as wx
from conftest import small_homogeneous_run, txy_problem
from wavext.estimator import gap_constant
from wavext.postprocess import postprocessed_solution
from wavext.solver import SpaceTimeSolution
from wavext.timebasis import gauss_rule, legendre_eval, to_normalized


def test_reconstruction_constant_when_velocity_vanishes():
    space = wx.build_space(wx.build_structured_mesh(2, 2), 1)
    part = wx.uniform_time_partition(1.0, 3)
    rng = np.random.default_rng(0)
    u0 = rng.normal(size=space.n_dofs)
    U = np.zeros((3, 2, space.n_dofs))
    U[:, 0] = u0
    sol = SpaceTimeSolution(space, part, 1, U, np.zeros_like(U))
    star = postprocessed_solution(sol)
    for t in (0.0, 0.3, 0.99):
        assert np.abs(star.coeffs_at(t) - u0).max() <= 1e-14


def test_reconstruction_derivative_identity():
    # d/dt of the reconstruction equals v coefficientwise (exact by design)
    _, sol = small_homogeneous_run(q=2, n_slabs=4)
    star = postprocessed_solution(sol)
    assert star.degree == sol.degree + 1
    for n in range(sol.partition.n_slabs):
        tau = sol.partition.lengths[n]
        v_leg = sol.legendre_coeffs(n, "v")
        for k in range(sol.degree + 1):
            lhs = (2 * k + 1) / tau * star.u[n, k + 1]
            scale = max(1.0, np.abs(v_leg).max())
            assert np.abs(lhs - v_leg[k]).max() <= 1e-13 * scale
    assert np.abs(star.u[0, 0] - sol.u[0, 0]).max() == 0.0


def test_reconstruction_matches_solution_at_nodes():
    prob, sol = small_homogeneous_run(q=2, n_slabs=8)
    star = postprocessed_solution(sol)
    M = wx.assemble(sol.space, "mass")
    for n in range(sol.partition.n_slabs + 1):
        d = star.endpoint(n) - sol.endpoint(n)
        assert np.sqrt(d @ (M @ d)) <= 1e-10


def test_slab_gap_bounds():
    # per-slab sup and L1 bounds of the reconstruction gap by the top mode of v
    prob, sol = small_homogeneous_run(q=2, n_slabs=6)
    star = postprocessed_solution(sol)
    M = wx.assemble(sol.space, "mass")
    q = sol.degree
    for n in range(sol.partition.n_slabs):
        slab = sol.partition.slab(n)
        tau = slab[1] - slab[0]
        v_top = sol.legendre_coeffs(n, "v")[q]
        defect_l2_sq = tau / (2 * q + 1) * float(v_top @ (M @ v_top))
        ts, ws = gauss_rule(20, slab)
        xs = to_normalized(slab, ts)
        gaps = []
        for x, t in zip(xs, ts):
            d = star.coeffs_on_slab(n, np.array([x]))[0] - \
                sol.coeffs_on_slab(n, np.array([x]))[0]
            gaps.append(np.sqrt(max(d @ (M @ d), 0.0)))
        gaps = np.asarray(gaps)
        sup_bound = np.sqrt(gap_constant(q) * tau) * np.sqrt(defect_l2_sq)
        assert gaps.max() <= sup_bound * (1 + 1e-10)
        l1_gap = float(np.sum(ws * gaps))
        defect_l1 = float(np.sum(ws * np.abs(legendre_eval(q, slab, ts))
                                 * np.sqrt(max(v_top @ (M @ v_top), 0.0))))
        assert l1_gap <= tau * defect_l1 * (1 + 1e-10)


def test_error_sampling_consistency():
    # sampling a solution against itself gives zero up to the quadrature floor
    prob, sol = small_homogeneous_run(q=1, n_slabs=2, nx=2, p=1)
    space = sol.space

    def exact(x, y, t):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        fn = wx.FEFunction(space, sol.coeffs_at(float(np.ravel(t)[0])))
        return wx.evaluate(fn, pts).reshape(np.shape(x))

    err, per_slab = wx.error_C0(sol, exact, "l2", samples_per_slab=5)
    assert err <= 1e-12
    assert per_slab.shape == (2,)


def test_error_sampling_monotone_in_nested_samples():
    prob, sol = small_homogeneous_run(q=2, n_slabs=4)
    e3, _ = wx.error_C0(sol, prob.exact_u, "l2", samples_per_slab=3)
    e5, _ = wx.error_C0(sol, prob.exact_u, "l2", samples_per_slab=5)
    assert e5 >= e3 - 1e-15


def test_error_sampling_validation():
    prob, sol = small_homogeneous_run(q=1, n_slabs=2, nx=2, p=1)
    with pytest.raises(wx.ConfigurationError):
        wx.error_C0(sol, None)
    with pytest.raises(wx.ConfigurationError):
        wx.error_C0(sol, prob.exact_u, samples_per_slab=2)


def test_error_report_requires_exact_solution():
    prob, sol = small_homogeneous_run(q=1, n_slabs=2, nx=2, p=1)
    anon = wx.ProblemData()
    with pytest.raises(wx.ConfigurationError):
        wx.compute_error_report(sol, anon)


def test_energy_trace_values():
    space = wx.build_space(wx.build_structured_mesh(2, 2), 1)
    part = wx.uniform_time_partition(1.0, 2)
    zero = SpaceTimeSolution(space, part, 1,
                             np.zeros((2, 2, space.n_dofs)),
                             np.zeros((2, 2, space.n_dofs)))
    assert np.abs(wx.energy_trace(zero)).max() == 0.0

    prob, sol = small_homogeneous_run(q=2, n_slabs=4)
    M = wx.assemble(sol.space, "mass")
    K = wx.assemble(sol.space, "stiffness", 1.0)
    E = wx.energy_trace(sol, 1.0)
    u0, v0 = sol.endpoint(0), sol.endpoint(0, "v")
    assert E[0] == pytest.approx(0.5 * (v0 @ (M @ v0) + u0 @ (K @ u0)), rel=1e-13)
    assert np.abs(E - E[0]).max() <= 1e-10 * E[0]


def test_convergence_rates_basics():
    assert wx.convergence_rates([1.0, 0.5], [1.0, 0.25]) == [pytest.approx(2.0)]
    rates = wx.convergence_rates([1.0, 0.5, 0.25], [0.4, 0.2, 0.1])
    assert rates == [pytest.approx(1.0), pytest.approx(1.0)]
    assert wx.convergence_rates([1.0, 0.5], [1.0, 0.0]) == [None]
    with pytest.raises(ValueError):
        wx.convergence_rates([1.0], [1.0])
    with pytest.raises(ValueError):
        wx.convergence_rates([0.5, 1.0], [1.0, 2.0])


def test_galerkin_probe_error_report():
    prob = txy_problem()
    space = wx.build_space(wx.build_structured_mesh(2, 2), 2)
    disc = wx.Discretization(space, wx.uniform_time_partition(1.0, 2), q=1)
    rep = wx.compute_error_report(wx.solve(prob, disc), prob, 5)
    assert max(rep.err_u, rep.err_ustar, rep.err_v, rep.err_gradu) <= 1e-9
