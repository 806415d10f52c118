"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The runs mirror the benchmark studies at desk scale; shared solves are cached
in session fixtures.  Criterion 6 documents a negative empirical finding (see
the assertion message) and currently fails.
"""

import csv
import math

import numpy as np
import pytest

import wavext as wx
from test_timebasis import _assemble_global_endpoint_projection
from wavext.cli import parse_config, run_experiment
from wavext.estimator import gap_constant
from wavext.timebasis import gauss_rule, legendre_eval, to_normalized


def report(criterion, ok, detail):
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
    return ok


def last_rate(resolutions, errors):
    return wx.convergence_rates(resolutions, errors)[-1]


# ---------------------------------------------------------------------------
# shared runs


@pytest.fixture(scope="session")
def tau_study():
    """q in {1,2,3} x tau in {1/4, 1/8, 1/16}; degree-8 space on the 4x4 mesh
    with the projection lifting (the gradient coupling)."""
    prob = wx.dirichlet_cos()
    space = wx.build_space(wx.build_structured_mesh(4, 4, prob.bbox), 8)
    out = {}
    for q in (1, 2, 3):
        for n_slabs in (4, 8, 16):
            disc = wx.Discretization(space, wx.uniform_time_partition(1.0, n_slabs),
                                     q=q, method="gradient", bc_mode="projection")
            sol = wx.solve(prob, disc)
            out[(q, n_slabs)] = (sol, wx.compute_error_report(sol, prob, 11))
    return prob, space, out


@pytest.fixture(scope="session")
def h_study(tmp_path_factory):
    """Criterion 4 run matrix executed twice through the CLI layer."""
    base = tmp_path_factory.mktemp("hconv")
    cfg_path = base / "crit4.cfg"
    cfg_path.write_text(
        "problem = dirichlet-cos\n"
        "p = 1\np = 2\nq = 4\n"
        "mesh = 4\nmesh = 8\nmesh = 16\n"
        "tau = 0.03125\n")
    outputs = []
    for tag in ("a", "b"):
        cfg = parse_config(str(cfg_path), "converge-h")
        cfg.out = str(base / tag)
        assert run_experiment(cfg) == 0
        outputs.append((base / tag / "results.csv").read_bytes())
    with open(base / "a" / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    return rows, outputs


# ---------------------------------------------------------------------------
# criteria


def test_criterion_1_energy_conservation():
    prob = wx.standing_wave()
    space = wx.build_space(wx.build_structured_mesh(8, 8, prob.bbox), 2)
    disc = wx.Discretization(space, wx.uniform_time_partition(1.0, 32), q=2,
                             initial_mode="interpolation")
    sol = wx.solve(prob, disc)
    E = wx.energy_trace(sol, prob.c)
    drift = float(np.abs(E - E[0]).max() / E[0])
    ok = drift <= 1e-10
    assert report(1, ok, f"energy drift {drift:.3e} (tolerance 1e-10)")


def test_criterion_2_galerkin_exactness():
    from conftest import txy_problem

    prob = txy_problem()
    space = wx.build_space(wx.build_structured_mesh(3, 3), 2)
    disc = wx.Discretization(space, wx.uniform_time_partition(1.0, 4), q=1)
    rep = wx.compute_error_report(wx.solve(prob, disc), prob, 11)
    worst = max(rep.err_u, rep.err_ustar, rep.err_v, rep.err_gradu)
    ok = worst <= 1e-9
    assert report(2, ok, f"u = t*x*y probe, worst error {worst:.3e} (tolerance 1e-9)")


def test_criterion_3_discrete_velocity_identity():
    prob = wx.standing_wave()
    space = wx.build_space(wx.build_structured_mesh(4, 4, prob.bbox), 2)
    worst = 0.0
    for method in ("gradient", "mass"):
        for q in (1, 2, 3):
            disc = wx.Discretization(space, wx.uniform_time_partition(1.0, 4),
                                     q=q, method=method)
            sol = wx.solve(prob, disc)
            for n in range(sol.partition.n_slabs):
                tau = sol.partition.lengths[n]
                v_leg = sol.legendre_coeffs(n, "v")
                scale = max(1.0, np.abs(v_leg).max())
                for k in range(q):
                    gap = np.abs(v_leg[k] - (2 * k + 1) / tau * sol.u[n, k + 1]).max()
                    worst = max(worst, gap / scale)
    ok = worst <= 1e-10
    assert report(3, ok, f"max coefficient defect {worst:.3e} over q in (1,2,3), "
                         f"both couplings (tolerance 1e-10)")


def test_criterion_4_h_convergence(h_study):
    rows, _ = h_study
    failures = []
    details = []
    for p in (1, 2):
        group = [r for r in rows if int(r["p"]) == p]
        hs = [float(r["h"]) for r in group]
        for key, target in (("err_u", p + 1), ("err_ustar", p + 1),
                            ("err_v", p + 1), ("err_gradu", p)):
            rate = last_rate(hs, [float(r[key]) for r in group])
            details.append(f"p{p}:{key}={rate:.2f}")
            if abs(rate - target) > 0.25:
                failures.append(f"p={p} {key} rate {rate:.3f} vs {target}+-0.25")
    ok = not failures
    assert report(4, ok, "; ".join(details) + (f" | {failures}" if failures else ""))


def test_criterion_5_tau_convergence(tau_study):
    _, _, runs = tau_study
    taus = [0.25, 0.125, 0.0625]
    failures = []
    details = []
    for q in (1, 2, 3):
        reports = [runs[(q, n)][1] for n in (4, 8, 16)]
        checks = [("err_u", q + 1, 0.3), ("err_v", q + 1, 0.3),
                  ("err_gradu", q + 1, 0.3)]
        if q > 1:
            checks.append(("err_ustar", q + 2, 0.3))
        for key, target, tol in checks:
            rate = last_rate(taus, [getattr(r, key) for r in reports])
            details.append(f"q{q}:{key}={rate:.2f}")
            if abs(rate - target) > tol:
                failures.append(f"q={q} {key} rate {rate:.3f} vs {target}+-{tol}")
    ok = not failures
    assert report(5, ok, "; ".join(details) + (f" | {failures}" if failures else ""))


def test_criterion_6_bc_degradation(tau_study):
    prob, space, runs = tau_study
    taus = [0.25, 0.125, 0.0625]
    naive_rates = {}
    for q in (2, 3):
        errs = []
        for n_slabs in (4, 8, 16):
            disc = wx.Discretization(space, wx.uniform_time_partition(1.0, n_slabs),
                                     q=q, method="mass", bc_mode="interpolation")
            rep = wx.compute_error_report(wx.solve(prob, disc), prob, 11)
            errs.append(rep.err_u)
        naive_rates[q] = last_rate(taus, errs)
    ptau_rates = {q: last_rate(taus, [runs[(q, n)][1].err_u for n in (4, 8, 16)])
                  for q in (2, 3)}
    degraded = [q for q in (2, 3)
                if naive_rates[q] <= (q + 1) - 0.5 and abs(ptau_rates[q] - (q + 1)) <= 0.3]
    detail = ("naive err_u rates " + ", ".join(f"q{q}={naive_rates[q]:.3f}" for q in (2, 3))
              + "; projection-lifting rates "
              + ", ".join(f"q{q}={ptau_rates[q]:.3f}" for q in (2, 3)))
    ok = bool(degraded)
    report(6, ok, detail)
    assert ok, (
        "no rate degradation for the mass coupling with the interpolated lifting: "
        + detail + ". Empirical finding: with both boundary trajectories "
        "interpolated at q+1 uniform slab nodes, the interpolant agrees with the "
        "endpoint-exact projection to leading order (identical leading error "
        "polynomial at q = 2) and the mass-coupled u-component is insensitive to "
        "the v-lifting, so the documented degradation cannot be reproduced under "
        "this realization of the naive treatment.")


def test_criterion_7_projection_oracles(tau_study):
    # (i) local vs global characterization of the endpoint-exact projection
    part = wx.uniform_time_partition(1.0, 4)
    f = lambda t: np.sin(3.0 * t)
    local = wx.endpoint_exact_project(3, f, part)
    ref = _assemble_global_endpoint_projection(3, f, lambda t: 3 * np.cos(3 * t), part)
    gap_i = float(np.abs(local.coeffs - ref).max())

    # (ii) weighted Legendre identity
    gap_ii = 0.0
    for q in range(1, 6):
        for tau in (1.0, 0.3):
            slab = (0.0, tau)
            ts, ws = gauss_rule(q + 4, slab)
            val = np.sum(ws * (ts - slab[0]) * legendre_eval(q, slab, ts)
                         * legendre_eval(q, slab, ts, 1))
            gap_ii = max(gap_ii, abs(val - tau * q / (2 * q + 1)))

    # (iii) reconstruction gap bounds on every slab of the tau study
    _, space, runs = tau_study
    M = wx.assemble(space, "mass")
    worst_by_q = {}
    for (q, n_slabs), (sol, _) in runs.items():
        star = wx.postprocessed_solution(sol)
        for n in range(sol.partition.n_slabs):
            slab = sol.partition.slab(n)
            tau = slab[1] - slab[0]
            v_top = sol.legendre_coeffs(n, "v")[q]
            top_norm = math.sqrt(max(float(v_top @ (M @ v_top)), 0.0))
            defect_l2 = math.sqrt(tau / (2 * q + 1)) * top_norm
            ts, ws = gauss_rule(12, slab)
            xs = to_normalized(slab, ts)
            d = star.coeffs_on_slab(n, xs) - sol.coeffs_on_slab(n, xs)
            gaps = np.sqrt(np.maximum(np.einsum("sd,ds->s", d, M @ d.T), 0.0))
            sup_bound = math.sqrt(gap_constant(q) * tau) * defect_l2
            l1_gap = float(np.sum(ws * gaps))
            l1_bound = tau * float(np.sum(
                ws * np.abs(legendre_eval(q, slab, ts)))) * top_norm
            worst = worst_by_q.get(q, 0.0)
            if sup_bound > 0:
                worst = max(worst, gaps.max() / sup_bound)
            if l1_bound > 0:
                worst = max(worst, l1_gap / l1_bound)
            worst_by_q[q] = worst
    worst_iii = max(worst_by_q.values())
    ratios = ", ".join(f"q{q}={v:.3f}" for q, v in sorted(worst_by_q.items()))
    ok = gap_i <= 1e-11 and gap_ii <= 1e-12 and worst_iii <= 1.0 + 1e-10
    report(7, ok, f"projection oracle gap {gap_i:.2e} (tol 1e-11); "
                  f"Legendre identity defect {gap_ii:.2e} (tol 1e-12); "
                  f"gap-to-bound ratios {ratios} (each <= 1)")
    assert ok, (
        f"reconstruction gap bounds violated on the nonhomogeneous study: "
        f"ratios {ratios}. The bounds presuppose the discrete velocity "
        "identity, which the endpoint-exact lifting preserves for q >= 2 "
        "(slabwise means of the boundary velocity survive the projection) but "
        "not for q = 1, where the projection is plain endpoint interpolation; "
        "with nonhomogeneous data the q = 1 bound fails by an order of "
        "magnitude while q in (2, 3) satisfy it with margin.")


@pytest.fixture(scope="session")
def estimator_smooth_study():
    prob = wx.estimator_poly("cos4t")
    space = wx.build_space(wx.build_structured_mesh(2, 2, prob.bbox), 4)
    out = {}
    for q in (1, 2):
        for n_slabs in (8, 16, 32, 64):
            disc = wx.Discretization(space, wx.uniform_time_partition(1.0, n_slabs), q=q)
            sol = wx.solve(prob, disc)
            err, _ = wx.error_C0(sol, prob.exact_u, "l2", 11)
            br = wx.compute_estimator(sol, prob.f, prob.c)
            out[(q, n_slabs)] = (err, br)
    return out


def test_criterion_8_estimator_reliability(estimator_smooth_study):
    failures = []
    ratios = []
    for q in (1, 2):
        effs = []
        for n_slabs in (8, 16, 32, 64):
            err, br = estimator_smooth_study[(q, n_slabs)]
            if err > br.eta + br.osc_f:
                failures.append(f"q={q} N={n_slabs}: error {err:.3e} exceeds "
                                f"eta+osc {br.eta + br.osc_f:.3e}")
            effs.append(wx.effectivity_index(br.eta, err))
        ratio = max(effs) / min(effs)
        ratios.append(f"q{q}:{ratio:.3f}")
        if ratio > 3.0:
            failures.append(f"q={q}: effectivity max/min {ratio:.3f} > 3")
    ok = not failures
    assert report(8, ok, "reliable at all cells; effectivity max/min "
                         + ", ".join(ratios) + (f" | {failures}" if failures else ""))


def test_criterion_9_estimator_rate_tracking():
    prob = wx.estimator_poly("t2.25")
    space = wx.build_space(wx.build_structured_mesh(2, 2, prob.bbox), 4)
    taus = [0.125, 0.0625, 0.03125, 0.015625]
    errs, etas = [], []
    for n_slabs in (8, 16, 32, 64):
        disc = wx.Discretization(space, wx.uniform_time_partition(1.0, n_slabs), q=2)
        sol = wx.solve(prob, disc)
        err, _ = wx.error_C0(sol, prob.exact_u, "l2", 11)
        br = wx.compute_estimator(sol, prob.f, prob.c,
                                  singular_at_zero=prob.singular_at_zero)
        errs.append(err)
        etas.append(br.eta)
    err_rate = last_rate(taus, errs)
    eta_rate = last_rate(taus, etas)
    ok = abs(err_rate - 2.25) <= 0.2 and abs(eta_rate - 2.25) <= 0.2
    assert report(9, ok, f"err rate {err_rate:.3f}, eta rate {eta_rate:.3f} "
                         f"(target 2.25 +- 0.2)")


def test_criterion_10_determinism(h_study):
    _, outputs = h_study
    ok = outputs[0] == outputs[1]
    assert report(10, ok, f"results.csv byte-identical across reruns "
                          f"({len(outputs[0])} bytes)")
