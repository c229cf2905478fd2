import json

import numpy as np
import pytest

import acceptance as acc
from auxinbif.continuation import (
    BifurcationEvent,
    Branch,
    ContinuationConfig,
    ContinuationProblem,
    NullSpaceDegenerate,
    SwitchFailed,
    arclength_step,
    continue_branch,
    continue_in_omega,
    detect_bifurcations,
    make_point,
    solutions_at,
    stability_losses,
    switch_branch,
    tangent,
)
from auxinbif.model import CellRow, preset, trivial_solution
from auxinbif.numerics import eigenvalues


def pitchfork():
    return ContinuationProblem(lambda u, lam: lam * u - u**3)


def fold():
    return ContinuationProblem(lambda u, lam: lam - u**2)


def hopf_normal_form():
    def f(u, lam):
        x, y = u
        r2 = x * x + y * y
        return np.array([lam * x - y - r2 * x, x + lam * y - r2 * y])

    return ContinuationProblem(f)


# -- toy problems ----------------------------------------------------------------


def test_pitchfork_branch_point_and_switch():
    problem = pitchfork()
    start = make_point(problem, np.array([0.0]), -1.0)
    branch = continue_branch(problem, start, (-1.0, 1.0))
    assert [e.kind for e in branch.events] == ["BranchPoint"]
    ev = branch.events[0]
    assert abs(ev.lam) <= 1e-6
    assert ev.augmented_deficiency >= 1
    starters = switch_branch(problem, ev)
    assert len(starters) == 2
    for s in starters:
        assert s.u[0] ** 2 == pytest.approx(s.lam, abs=1e-10)
    assert starters[0].u[0] * starters[1].u[0] < 0


def test_fold_is_a_limit_point():
    problem = fold()
    start = make_point(problem, np.array([1.0]), 1.0)
    branch = continue_branch(problem, start, (-0.5, 1.5))
    assert [e.kind for e in branch.events] == ["LimitPoint"]
    ev = branch.events[0]
    assert abs(ev.lam) <= 1e-6
    assert abs(ev.point.dlambda_ds) <= 1e-6
    assert ev.augmented_deficiency == 0
    # lambda falls and then rises again along the branch
    lam = branch.lambdas
    k = int(np.argmin(lam))
    assert 0 < k < len(lam) - 1
    with pytest.raises(ValueError):
        switch_branch(problem, ev)


def test_hopf_normal_form():
    problem = hopf_normal_form()
    start = make_point(problem, np.zeros(2), -0.5)
    branch = continue_branch(problem, start, (-0.5, 0.5))
    assert [e.kind for e in branch.events] == ["Hopf"]
    ev = branch.events[0]
    assert abs(ev.lam) <= 1e-6
    assert ev.beta == pytest.approx(1.0, abs=1e-6)
    assert stability_losses(branch) == [ev]


def test_degenerate_null_space_is_reported():
    with pytest.raises(NullSpaceDegenerate):
        tangent(pitchfork(), np.array([0.0]), 0.0)


# -- tangent and single steps on the trivial branch --------------------------------


@pytest.fixture(scope="module")
def m1():
    row, prm, problem = acc.trivial_problem("M1")
    return row, prm, problem


def test_trivial_tangent_points_along_t(m1):
    row, prm, problem = m1
    u = trivial_solution(row, prm)
    t = tangent(problem, u, 0.5)
    assert abs(t[-1]) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(t[:-1])) <= 1e-8
    assert t[-1] > 0
    flipped = tangent(problem, u, 0.5, previous_tangent=-t)
    assert np.allclose(flipped, -t)


def test_arclength_step_on_flat_branch(m1):
    row, prm, problem = m1
    start = make_point(problem, trivial_solution(row, prm), 0.5)
    up = arclength_step(problem, start, 0.01)
    assert up.lam == pytest.approx(0.51, abs=1e-12)
    assert np.max(np.abs(up.u - start.u)) <= 1e-10
    down = arclength_step(problem, start, -0.01)
    assert down.lam == pytest.approx(0.49, abs=1e-12)
    with pytest.raises(ValueError):
        arclength_step(problem, start, 0.0)


def test_window_and_start_checks(m1):
    row, prm, problem = m1
    start = make_point(problem, trivial_solution(row, prm), 0.5)
    with pytest.raises(ValueError):
        continue_branch(problem, start, (1.0, 0.5))
    with pytest.raises(ValueError):
        continue_branch(problem, start, (1.0, 2.0))


# -- full branches (shared with the acceptance checks) ------------------------------


@pytest.fixture(scope="module")
def m1_branch():
    return acc.trivial_branch("M1")


@pytest.fixture(scope="module")
def m1_switched(m1_branch):
    return acc.switched_branch("M1", 20, acc.first_loss(m1_branch[1]).lam)


def _check_branch_invariants(branch: Branch, window, ds_max=ContinuationConfig().ds_max):
    lo, hi = window
    for p in branch.points:
        assert p.residual_norm <= 1e-10
        assert np.linalg.norm(p.tangent) == pytest.approx(1.0, abs=1e-12)
        assert lo - ds_max <= p.lam <= hi + ds_max
    dots = [float(a.tangent @ b.tangent) for a, b in zip(branch.points[:-1], branch.points[1:])]
    assert min(dots) > 0


def test_m1_trivial_branch(m1_branch):
    _, branch = m1_branch
    _check_branch_invariants(branch, acc.WINDOW)
    assert np.ptp(np.array([p.u for p in branch.points]), axis=0).max() <= 1e-10
    ev = acc.first_loss(branch)
    assert ev.kind == "BranchPoint"
    assert ev.lam == pytest.approx(0.8983, abs=0.01)
    assert ev.point.sigma_min <= 1e-6
    assert ev.bracket_width <= 1e-6
    assert ev.null_directions.shape == (2, 41)


def test_m2_first_event_is_hopf():
    _, branch = acc.trivial_branch("M2")
    ev = branch.events[0]
    assert ev.kind == "Hopf"
    assert ev.beta > 1e-3
    crit = ev.point.spectrum.eigenvalues
    crit = crit[np.abs(crit.imag) > 1e-8]
    assert np.min(np.abs(crit.real)) <= 1e-6
    assert ev.lam == pytest.approx(3.3113, abs=0.02)
    bps = [e.lam for e in branch.events if e.kind == "BranchPoint"]
    assert min(abs(b - 5.4047) for b in bps) <= 0.05


def test_m3_hopf():
    _, branch = acc.trivial_branch("M3", window=(1.0, 30.0))
    ev = acc.first_loss(branch)
    assert ev.kind == "Hopf"
    assert ev.lam == pytest.approx(22.7384, abs=0.2)


def test_every_branch_point_carries_a_singular_jacobian(m1_branch):
    _, branch = m1_branch
    for ev in branch.events:
        if ev.kind == "BranchPoint":
            assert ev.point.sigma_min <= 1e-6
            assert ev.augmented_deficiency >= 1
        if ev.kind == "Hopf":
            w = ev.point.spectrum.eigenvalues
            w = w[np.abs(w.imag) >= 1e-3]
            assert np.min(np.abs(w.real)) <= 1e-6


def test_half_step_relocates_events(m1):
    _, coarse = acc.trivial_branch("M1")
    row, prm, problem = m1
    config = ContinuationConfig(ds0=0.005)
    start = make_point(problem, trivial_solution(row, prm), prm.t, config=config)
    fine = continue_branch(problem, start, acc.WINDOW, config)
    for ev in coarse.events:
        same = [e for e in fine.events if e.kind == ev.kind]
        assert min(abs(e.lam - ev.lam) for e in same) <= 1e-5


def test_switched_branch_reaches_simulated_pattern(m1_switched):
    problem, branch = m1_switched
    _check_branch_invariants(branch, acc.WINDOW)
    _, u = acc.m1_pattern()
    sols = solutions_at(problem, branch, 3.5)
    assert min(np.max(np.abs(s - u)) for s in sols) <= 1e-6


def test_switched_branch_folds(m1_switched):
    _, branch = m1_switched
    folds = [e for e in branch.events if e.kind == "LimitPoint"]
    assert folds
    for ev in folds:
        assert abs(ev.point.dlambda_ds) <= 1e-6
    signs = np.sign([p.dlambda_ds for p in branch.points])
    assert np.any(signs[:-1] != signs[1:])


def test_switch_starters_are_mirrored(m1_branch):
    problem, branch = m1_branch
    ev = acc.first_loss(branch)
    plus, minus = switch_branch(problem, ev)
    d_plus, d_minus = plus.x - ev.point.x, minus.x - ev.point.x
    # pitchfork-like: the two starters sit opposite each other to first order
    assert np.linalg.norm(d_plus + d_minus) <= 0.1 * np.linalg.norm(d_plus - d_minus)


def test_switch_fails_off_a_branch_point(m1):
    row, prm, problem = m1
    point = make_point(problem, trivial_solution(row, prm), 0.5)
    fake = BifurcationEvent("BranchPoint", point)
    with pytest.raises(SwitchFailed):
        switch_branch(problem, fake, ContinuationConfig(switch_delta_max=2e-2))


def test_m2_pattern_branch_gains_stability_at_hopf():
    _, trivial = acc.trivial_branch("M2")
    bp = acc.nearest_event(trivial, "BranchPoint", 5.4047)
    _, pattern = acc.switched_branch("M2", 20, bp.lam)
    hopfs = [e for e in stability_losses(pattern) if e.kind == "Hopf"]
    assert hopfs
    k = hopfs[0].interval
    pts = pattern.points
    assert pts[k].stability.stable != pts[k + 1].stability.stable


def test_tau_sweep_moves_branch_point_right():
    locs = [acc.first_loss(acc.trivial_branch("M1", tau=tau)[1]).lam for tau in (0.5, 1.0, 1.5, 2.0)]
    assert np.all(np.diff(locs) > 0)


def test_omega_trivial_branch_is_flat():
    row = CellRow(20)
    prm = preset("M1").with_(t=1.5)
    u0 = trivial_solution(row, prm)
    _, trivial = acc.omega_branches()
    assert trivial.lambdas.min() <= 0.0 + 0.1 and trivial.lambdas.max() >= 1.0 - 0.1
    assert max(np.max(np.abs(p.u - u0)) for p in trivial.points) <= 1e-10
    assert acc.first_loss(trivial).lam == pytest.approx(0.2371, abs=0.01)


def test_omega_pattern_turning_point():
    pattern, _ = acc.omega_branches()
    lps = [e for e in pattern.events if e.kind == "LimitPoint"]
    assert min(abs(e.lam - 0.1424) for e in lps) <= 0.01


def test_continue_in_omega_walks_down_from_one():
    row = CellRow(4)
    prm = preset("M2")
    branch = continue_in_omega(row, prm, trivial_solution(row, prm), window=(0.5, 1.0))
    assert branch.lambdas.min() < 0.6 and branch.lambdas.max() == pytest.approx(1.0)


def test_detect_on_two_point_branch(m1):
    row, prm, problem = m1
    a = make_point(problem, trivial_solution(row, prm), 0.85)
    b = make_point(problem, trivial_solution(row, prm), 0.95)
    events = detect_bifurcations(problem, Branch([a, b], "t"))
    assert any(e.kind == "BranchPoint" and abs(e.lam - 0.8983) <= 1e-3 for e in events)


def test_event_and_table_export(m1_branch):
    _, branch = m1_branch
    d = json.loads(json.dumps(branch.events[0].to_dict()))
    assert d["kind"] == "BranchPoint" and len(d["u"]) == 40 and d["beta"] is None
    rows = branch.table(6)
    assert len(rows) == len(branch)
    assert rows[0][1] == branch.points[0].lam
    assert np.array_equal(branch.probe(6), np.array([p.u[25] for p in branch.points]))


def test_solutions_at_toy_fold():
    problem = fold()
    branch = continue_branch(problem, make_point(problem, np.array([1.0]), 1.0), (-0.5, 1.5))
    sols = sorted(float(s[0]) for s in solutions_at(problem, branch, 0.25))
    assert sols == pytest.approx([-0.5, 0.5], abs=1e-10)


def test_unstable_count_matches_spectrum(m1_branch):
    problem, branch = m1_branch
    p = branch.points[-1]
    jac = problem.jac_u(p.u, p.lam, ContinuationConfig().numerics)
    w = eigenvalues(jac).eigenvalues
    assert p.stability.unstable_count == int(np.sum(w.real > 1e-8))
