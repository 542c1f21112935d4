"""Acceptance criteria 1-11, one test each.

Every test records a ``PASS``/``FAIL`` line, printed at the end of the run
(and to standard output when the test runs).
Run on its own with ``python3 -m pytest -q tests/test_acceptance.py``.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE
from hamindex import (
    Bolza,
    MatrixPath,
    ReducedPoint,
    SearchConfig,
    build_operator,
    build_spectral_model,
    dirichlet,
    fundamental_matrix,
    homotopy_nullity_sum,
    index,
    multi_start_search,
    nullity,
    qform_indices,
    reduced_gradient,
    reduced_hessian,
    reduced_value,
    relative_index,
    verify_theorem,
)
from hamindex.cli import builtin_battery
from hamindex.index import qform_matrix
from hamindex.operator import symplectic_form
from hamindex.problems import build_problem
from support import (
    arctan_force,
    arctan_model,
    arctan_problem,
    dirichlet_count,
    example_spec,
    first_order_model,
    first_order_problem,
    model_for,
    nonlinear_battery,
    ops,
    qform_battery,
    shooting_solutions,
    shooting_trajectory,
)

PI = np.pi
BOLZA = build_operator(Bolza(0.0, PI), "first", 1)
D2 = dirichlet(2)


@contextmanager
def criterion(k: int, title: str):
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        line = f"FAIL criterion {k:2d}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        ACCEPTANCE[k] = line
        print(line)
        raise
    extra = ", ".join(f"{a}={b}" for a, b in detail.items())
    line = f"PASS criterion {k:2d}: {title} [{time.perf_counter() - t0:.1f} s{', ' + extra if extra else ''}]"
    ACCEPTANCE[k] = line
    print(line)


def rand_sym(rng, d, lo, hi):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    B = Q @ np.diag(rng.uniform(lo, hi, d)) @ Q.T
    return 0.5 * (B + B.T)


def rand_path(rng, d, lo, hi):
    """Constant or ``B0 + sin(3t) B1`` with a small random ``B1``."""
    B0 = rand_sym(rng, d, lo, hi)
    if rng.random() < 0.5:
        return MatrixPath.constant(B0)
    B1 = rand_sym(rng, d, -2.0, 2.0)
    return MatrixPath(lambda t: B0[None] + np.sin(3.0 * np.asarray(t))[:, None, None] * B1[None], d)


def test_c01_dirichlet_index_table():
    with criterion(1, "Dirichlet index table and nullity at pi^2"):
        t0 = time.perf_counter()
        D1 = dirichlet(1)
        for c, want in [(5.0, 0), (15.0, 1), (50.0, 2), (100.0, 3)]:
            rep = index(D1, c)
            assert rep.i == want == dirichlet_count(c), (c, rep.i)
            assert rep.nu == 0
        assert index(D1, PI**2).nu == 1
        assert time.perf_counter() - t0 <= 10.0


def test_c02_first_order_lift():
    with criterion(2, "first-order lift diag{B, I} reproduces second-order index and nullity") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2)
        for k in range(20):
            n = 1 + k % 2
            B = MatrixPath.constant(rand_sym(rng, n, -20.0, 150.0))
            s = index(dirichlet(n), B)
            f = index(build_operator(Bolza(0.0, PI), "first", n), MatrixPath.block_diag(B, MatrixPath.scalar(1.0, n)))
            assert (f.i, f.nu) == (s.i, s.nu), (k, s.i, s.nu, f.i, f.nu)
        assert time.perf_counter() - t0 <= 60.0
        d["cases"] = 20


def test_c03_qform_nullity_battery():
    with criterion(3, "quadratic-form nullity equals shooting nullity on 20 paths") as d:
        battery, o = qform_battery()
        assert len(battery) == 20
        nonzero = 0
        for name, B, note in battery:
            m = model_for(name, max(8.0, float(np.ceil(B.supnorm)) + 2.0))
            nq, ns = qform_indices(m, B).nu_beta, nullity(o[name], B)
            assert nq == ns, (name, note, nq, ns)
            nonzero += ns > 0
        d["with_kernel"] = nonzero


def test_c04_additivity_and_monotonicity():
    with criterion(4, "additivity on 10 triples and monotonicity on 20 pairs"):
        rng = np.random.default_rng(4)
        cases = [(D2, 2), (BOLZA, 2)]
        for k in range(10):
            op, d = cases[k % 2]
            B1, B2, B3 = (rand_path(rng, d, -10.0, 60.0) for _ in range(3))
            lhs = relative_index(op, B1, B2) + relative_index(op, B2, B3)
            assert lhs == relative_index(op, B1, B3), k
        for k in range(20):
            op, d = cases[k % 2]
            B1 = rand_path(rng, d, -10.0, 40.0)
            G = rng.normal(size=(d, d if k % 4 < 2 else 1))
            B2 = B1 + MatrixPath.constant(3.0 * G @ G.T)
            r1, r2 = index(op, B1), index(op, B2)
            assert r1.i <= r2.i and r1.i + r1.nu <= r2.i + r2.nu, k


def test_c05_crossing_sum_equals_relative_index():
    with criterion(5, "crossing sum equals relative index on 10 strict pairs"):
        rng = np.random.default_rng(5)
        cases = [(D2, 2), (BOLZA, 2), (ops()["robin2"], 2), (dirichlet(1), 1)]
        for k in range(10):
            op, d = cases[k % len(cases)]
            B1 = rand_path(rng, d, -5.0, 30.0)
            B2 = B1 + MatrixPath.constant(rand_sym(rng, d, 1.0, 40.0))
            assert homotopy_nullity_sum(op, B1, B2) == relative_index(op, B1, B2), k


def test_c06_contraction():
    with criterion(6, "Picard contraction factor within M/beta, converged within 200 iterations") as d:
        worst = 0.0
        for label, prob, model in nonlinear_battery():
            q = prob.M / model.beta
            assert q <= 0.1, label
            rng = np.random.default_rng(6)
            for _ in range(10):
                u = rng.normal(0.0, 3.0 / np.sqrt(model.E.size), model.E.size)
                p = ReducedPoint(model, prob, u, fp_tol=1e-12)
                assert p.contraction_factor <= q, label
                assert p.iterations <= 200, label
                # a step below the roundoff floor of the minus block also counts as converged
                floor = 1e3 * np.finfo(float).eps * max(1.0, np.linalg.norm(p.uminus))
                assert p.fp_residual <= max(1e-12, floor), (label, p.fp_residual)
                worst = max(worst, p.contraction_factor / q if q else 0.0)
        d["max_factor_over_bound"] = f"{worst:.3f}"


def test_c07_derivative_checks():
    with criterion(7, "reduced gradient and Hessian against finite differences") as d:
        worst_g = worst_h = 0.0
        for label, prob, model in nonlinear_battery():
            rng = np.random.default_rng(7)
            n = model.E.size
            for _ in range(10):
                u = rng.normal(0.0, 3.0 / np.sqrt(n), n)
                g = reduced_gradient(model, prob, u)
                H = reduced_hessian(model, prob, u)
                g_fd, H_fd = np.empty(n), np.empty((n, n))
                for j in range(n):
                    e = np.zeros(n)
                    e[j] = 1e-5
                    g_fd[j] = (reduced_value(model, prob, u + e) - reduced_value(model, prob, u - e)) / 2e-5
                    e[j] = 1e-6
                    H_fd[:, j] = (reduced_gradient(model, prob, u + e) - reduced_gradient(model, prob, u - e)) / 2e-6
                eg = np.linalg.norm(g_fd - g) / max(np.linalg.norm(g), 1e-300)
                eh = np.linalg.norm(H_fd - H) / max(np.linalg.norm(H), 1e-300)
                assert eg <= 1e-6, (label, eg)
                assert eh <= 1e-5, (label, eh)
                worst_g, worst_h = max(worst_g, eg), max(worst_h, eh)
        d["grad"] = f"{worst_g:.1e}"
        d["hess"] = f"{worst_h:.1e}"


def test_c08_hessian_form_link():
    with criterion(8, "reduced Hessian at the origin equals I - form operator; Morse index equals i_beta(B0)"):
        for label, prob, model in nonlinear_battery():
            H0 = reduced_hessian(model, prob, np.zeros(model.E.size))
            ref = np.eye(model.E.size) - qform_matrix(model, prob.hessian_at_zero())
            assert np.abs(H0 - ref).max() <= 1e-9, label
            eig = np.linalg.eigvalsh(0.5 * (H0 + H0.T))
            assert int(np.sum(eig < -1e-7)) == qform_indices(model, prob.hessian_at_zero()).i_beta, label


def test_c09_existence_experiment():
    with criterion(9, "arctan spring: hypotheses hold, 64-start search finds the shooting +/- pair") as d:
        t0 = time.perf_counter()
        prob = build_problem(example_spec("arctan_spring"))
        model = build_spectral_model(prob.op, bound=prob.M)
        rep = verify_theorem(model, prob, cfg=SearchConfig(starts=64, seed=42))
        elapsed = time.perf_counter() - t0
        assert rep.hypotheses_hold and rep.item("(iii)").passed and rep.item("(iv)").passed
        nontriv = rep.search.nontrivial(1e-4)
        assert len(nontriv) >= 2
        for cp in nontriv:
            assert any(np.linalg.norm(cp.ustar + o.ustar) <= 1e-4 for o in nontriv)
            assert cp.residual <= 1e-8
        t = np.linspace(0.0, 1.0, 401)
        slopes = shooting_solutions(arctan_force())
        errs = []
        for s in slopes:
            ref = shooting_trajectory(arctan_force(), s, t)
            errs.append(min(np.abs(cp.point.trajectory(t)[:, 0] - ref).max() for cp in nontriv))
        assert len(slopes) == 2 and max(errs) <= 1e-6, errs
        assert elapsed <= 60.0
        d["found"] = len(nontriv)
        d["sup_err"] = f"{max(errs):.1e}"


def test_c10_symplecticity():
    with criterion(10, "fundamental matrices symplectic to 1e-9 on the full battery") as d:
        rng = np.random.default_rng(10)
        battery, o = qform_battery()
        cases = [(o[name], B) for name, B, _ in battery]
        cases += [(op, B) for _, op, B in builtin_battery()]
        for k in range(20):
            n = 1 + k % 2
            B = MatrixPath.constant(rand_sym(rng, n, -20.0, 150.0))
            cases.append((dirichlet(n), B))
            cases.append((build_operator(Bolza(0.0, PI), "first", n), MatrixPath.block_diag(B, MatrixPath.scalar(1.0, n))))
        for label, prob, _ in nonlinear_battery():
            cases.append((prob.op, prob.hessian_at_zero()))
        worst = 0.0
        for op, B in cases:
            psi = fundamental_matrix(op, B)
            J = symplectic_form(op.n)
            defect = np.abs(psi.T @ J @ psi - J).max()
            worst = max(worst, defect)
            assert defect <= 1e-9
        d["cases"] = len(cases)
        d["max_defect"] = f"{worst:.1e}"


def _critical_values(model, prob, starts):
    res = multi_start_search(model, prob, SearchConfig(starts=starts, seed=42))
    return np.sort([cp.value for cp in res.points])


def test_c11_beta_and_window_stability():
    with criterion(11, "index differences and critical values stable under 2 beta and 2 window"):
        battery, _ = qform_battery()
        for name in sorted({n for n, _, _ in battery}):
            paths = [B for n, B, _ in battery if n == name]
            bound = max(8.0, max(float(np.ceil(B.supnorm)) + 2.0 for B in paths))
            ref = None
            for scales in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)]:
                m = model_for(name, bound, *scales)
                diffs = np.diff([qform_indices(m, B).i_beta for B in paths]).tolist()
                ref = diffs if ref is None else ref
                assert diffs == ref, (name, scales)
        problems = [(arctan_problem(), arctan_model, 64), (first_order_problem(), first_order_model, 16)]
        for prob, make, starts in problems:
            base = _critical_values(make(), prob, starts)
            for scales in [(2.0, 1.0), (1.0, 2.0)]:
                vals = _critical_values(make(*scales), prob, starts)
                assert vals.shape == base.shape, (prob.name, scales)
                assert np.abs(vals - base).max() <= 1e-6, (prob.name, scales)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
