from functools import lru_cache

import numpy as np
import pytest

from hamindex import SearchConfig, build_spectral_model, multi_start_search, newton_solve, qform_indices, verify_theorem
from hamindex.index import index, nullity
from hamindex.problems import build_problem, lift_second_order
from hamindex.search import Divergence, classify, deduplicate, sandwich_check, start_points
from support import (
    arctan_force,
    arctan_model,
    arctan_problem,
    example_spec,
    first_order_model,
    first_order_problem,
    shooting_solutions,
    shooting_trajectory,
)

T = np.linspace(0.0, 1.0, 401)


@lru_cache(maxsize=None)
def arctan_search():
    return multi_start_search(arctan_model(), arctan_problem(), SearchConfig(starts=64, seed=42))


def test_search_finds_symmetric_pair():
    res = arctan_search()
    nontriv = res.nontrivial(1e-4)
    assert len(nontriv) >= 2
    for cp in nontriv:
        # the gradient is odd, so -u is critical as well
        assert any(np.linalg.norm(cp.ustar + other.ustar) <= 1e-4 for other in nontriv)
        assert cp.gradnorm <= 1e-10


def test_every_point_converged_with_small_residual():
    for cp in arctan_search().points:
        assert cp.gradnorm <= 1e-10
        assert cp.residual <= 1e-8


def test_points_match_shooting_oracle():
    res = arctan_search()
    slopes = shooting_solutions(arctan_force())
    assert len(slopes) == 2
    for s in slopes:
        ref = shooting_trajectory(arctan_force(), s, T)
        errs = [np.abs(cp.point.trajectory(T)[:, 0] - ref).max() for cp in res.nontrivial(1e-4)]
        assert min(errs) <= 1e-6


def test_morse_data_at_origin_matches_index_engine():
    model, prob = arctan_model(), arctan_problem()
    theta = next(cp for cp in arctan_search().points if cp.is_trivial(1e-4))
    B = prob.hessian_at_zero()
    assert theta.morse_index == qform_indices(model, B).i_beta
    assert theta.nullity == nullity(prob.op, B)


def test_seed_determinism():
    a = multi_start_search(arctan_model(), arctan_problem(), SearchConfig(starts=16, seed=3))
    b = multi_start_search(arctan_model(), arctan_problem(), SearchConfig(starts=16, seed=3))
    assert [p.to_dict() for p in a.points] == [p.to_dict() for p in b.points]


def test_start_points_layout():
    model = arctan_model()
    s = start_points(model, SearchConfig(starts=12, seed=1))
    assert np.all(s[0] == 0.0)
    assert s.shape[1] == model.E.size
    assert np.array_equal(s, start_points(model, SearchConfig(starts=12, seed=1)))
    assert not np.array_equal(s, start_points(model, SearchConfig(starts=12, seed=2)))


def test_zero_problem_only_origin():
    spec = example_spec("zero")
    prob = build_problem(spec)
    model = build_spectral_model(prob.op, bound=1.0)
    res = multi_start_search(model, prob, SearchConfig(starts=8))
    assert len(res.points) == 1 and res.points[0].is_trivial(1e-4)


def test_newton_reports_divergence():
    model, prob = arctan_model(), arctan_problem()
    out = newton_solve(model, prob, np.full(model.E.size, 1e6), SearchConfig(max_newton_iters=1))
    assert isinstance(out, Divergence)


def test_deduplicate_orders_by_value():
    pts = list(arctan_search().points)
    again = deduplicate(pts + pts, 1e-4)
    assert [p.value for p in again] == sorted(p.value for p in pts)
    assert len(again) == len(pts)


def test_classify_counts_signs():
    model, prob = arctan_model(), arctan_problem()
    from hamindex import ReducedPoint

    m, nu, eigs = classify(ReducedPoint(model, prob, np.zeros(model.E.size)))
    assert m == int(np.sum(eigs < 0)) and nu == 0


def test_theorem_report_for_arctan():
    rep = verify_theorem(arctan_model(), arctan_problem(), search=arctan_search())
    assert rep.hypotheses_hold
    assert rep.item("(iii)").passed
    assert rep.item("(iv)").passed
    assert rep.item("(iv')").passed
    assert rep.predicted == 2 and rep.found >= 2
    assert rep.passed
    d = rep.to_dict()
    assert d["conclusion"] == "found >= predicted"


def test_theorem_report_negative_case():
    prob = build_problem(example_spec("quadratic_gap"))
    model = build_spectral_model(prob.op, bound=prob.M)
    rep = verify_theorem(model, prob, cfg=SearchConfig(starts=8))
    assert not rep.hypotheses_hold
    assert not rep.item("(iii)").passed
    assert rep.predicted == 0


def test_sandwich_check():
    prob = arctan_problem()
    lo, hi, ok = sandwich_check(prob, prob.B1, prob.B2)
    assert ok and lo >= 0 and hi >= 0
    _, _, bad = sandwich_check(prob, prob.B1 + 10.0, prob.B2)
    assert not bad


def test_first_order_search_converges():
    model, prob = first_order_model(), first_order_problem()
    res = multi_start_search(model, prob, SearchConfig(starts=8, seed=0))
    assert res.points
    theta = next(cp for cp in res.points if cp.is_trivial(1e-4))
    q = qform_indices(model, prob.hessian_at_zero())
    assert (theta.morse_index, theta.nullity) == (q.i_beta, q.nu_beta)
    for cp in res.points:
        assert cp.gradnorm <= 1e-10 and cp.residual <= 1e-8


@pytest.mark.slow
def test_direct_and_lifted_trajectories_agree():
    """Second-order solution versus the first-order lift.

    The lifted model has several hundred modes, so instead of a full search a
    Newton iteration is started from the projection of the direct solution.
    """
    prob = arctan_problem()
    direct = max(arctan_search().nontrivial(1e-4), key=lambda c: c.ustar[0])
    lifted = lift_second_order(prob)
    lm = build_spectral_model(lifted.op, bound=lifted.M)
    t = lm.nodes
    h = 1e-6
    tp, tm = np.clip(t + h, 0, 1), np.clip(t - h, 0, 1)
    xdot = (direct.point.trajectory(tp) - direct.point.trajectory(tm)) / (tp - tm)[:, None]
    # x1 = x, x2 = -x'
    X = np.concatenate([direct.point.trajectory(t), -xdot], axis=1)
    start = (lm.project(X) / lm.scale)[lm.E]
    cp = newton_solve(lm, lifted, start, SearchConfig())
    assert cp.gradnorm <= 1e-10
    assert np.abs(cp.point.trajectory(T)[:, 0] - direct.point.trajectory(T)[:, 0]).max() <= 1e-6
    assert cp.value == pytest.approx(direct.value, abs=1e-6)
    # index of the lifted problem at the origin agrees with the direct one
    assert index(lifted.op, lifted.hessian_at_zero()).i == index(prob.op, prob.hessian_at_zero()).i
