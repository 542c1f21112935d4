"""Independent oracles, shared batteries and cached models for the test suite."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from hamindex import Bolza, MatrixPath, PPeriodic, SturmLiouville, build_operator, build_spectral_model, dirichlet
from hamindex.problems import build_problem, parse_problem

PI = np.pi


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------
def dirichlet_count(mu: float) -> int:
    """``#{k >= 1 : (k pi)^2 < mu}``."""
    if mu <= PI**2:
        return 0
    k = int(np.floor(np.sqrt(mu) / PI))
    return k - 1 if (k * PI) ** 2 >= mu else k


def dirichlet_index_constant(B: np.ndarray) -> tuple[int, int]:
    """Index and nullity of a constant symmetric ``B`` under Dirichlet conditions.

    The system decouples along the eigenvectors of ``B``; each eigenvalue
    ``mu`` contributes ``#{(k pi)^2 < mu}`` to the index and one to the
    nullity when ``mu = (k pi)^2``.
    """
    mus = np.linalg.eigvalsh(np.atleast_2d(B))
    i = sum(dirichlet_count(m) for m in mus)
    nu = sum(int(m > 0 and abs(np.sqrt(m) / PI - round(np.sqrt(m) / PI)) < 1e-12 and round(np.sqrt(m) / PI) >= 1) for m in mus)
    return i, nu


def dirichlet_eigenvalues(hi: float) -> list[float]:
    return [(k * PI) ** 2 for k in range(1, 200) if (k * PI) ** 2 <= hi]


def neumann_eigenvalues(hi: float) -> list[float]:
    return [(k * PI) ** 2 for k in range(0, 200) if (k * PI) ** 2 <= hi]


def bolza_first_order_eigenvalues(alpha: float, beta: float, lo: float, hi: float) -> list[float]:
    """``-J x' = lam x`` rotates the state by angle ``lam t``; the line of
    admissible initial states must land on the terminal line."""
    base = beta - alpha
    ks = np.arange(int(np.floor((lo - base) / PI)) - 1, int(np.ceil((hi - base) / PI)) + 2)
    return [base + k * PI for k in ks if lo <= base + k * PI <= hi]


# ---------------------------------------------------------------------------
# nonlinear shooting oracle for -x'' = V'(x) with Dirichlet conditions
# ---------------------------------------------------------------------------
def _shoot(Vp, s: float, t_eval=None):
    return solve_ivp(
        lambda t, y: [y[1], -Vp(y[0])], (0.0, 1.0), [0.0, s], method="DOP853", rtol=1e-13, atol=1e-13, t_eval=t_eval
    )


def shooting_solutions(Vp, s_max: float = 30.0, samples: int = 601) -> list[float]:
    """Initial slopes ``x'(0)`` of all nontrivial solutions with ``|x'(0)| <= s_max``."""
    s = np.linspace(-s_max, s_max, samples)
    end = np.array([_shoot(Vp, v).y[0, -1] for v in s])
    roots = []
    for a, b, fa, fb in zip(s[:-1], s[1:], end[:-1], end[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(lambda v: _shoot(Vp, v).y[0, -1], a, b, xtol=1e-15, rtol=1e-15))
    return [r for r in roots if abs(r) > 1e-8]


def shooting_trajectory(Vp, s: float, t: np.ndarray) -> np.ndarray:
    return _shoot(Vp, s, t_eval=t).y[0]


def arctan_force(a: float = 25.0, b: float = 20.0):
    return lambda x: a * x - b * np.arctan(x)


# ---------------------------------------------------------------------------
# batteries
# ---------------------------------------------------------------------------
def diag_t(d: int, base: float, slope: float) -> MatrixPath:
    return MatrixPath(lambda t: np.einsum("k,ij->kij", base + slope * np.asarray(t), np.eye(d)), d, name=f"({base}+{slope}t)I")


def ops():
    return {
        "dirichlet1": dirichlet(1),
        "dirichlet2": dirichlet(2),
        "robin2": build_operator(SturmLiouville(0.3, 2.0), "second", 2),
        "neumann1": build_operator(SturmLiouville(PI / 2, PI / 2), "second", 1),
        "bolza1": build_operator(Bolza(0.0, PI), "first", 1),
        "bolza_tilt": build_operator(Bolza(0.4, 2.5), "first", 1),
        "periodic1": build_operator(PPeriodic(np.eye(2)), "first", 1),
    }


def qform_battery():
    """Twenty ``(operator name, path, note)`` entries with varied nullities."""
    o = ops()
    d2 = np.array([[4.0, 1.0], [1.0, 30.0]])
    return [
        ("dirichlet1", MatrixPath.scalar(5.0, 1), "constant"),
        ("dirichlet1", MatrixPath.scalar(PI**2, 1), "eigenvalue"),
        ("dirichlet1", MatrixPath.scalar(PI**2 + 1e-6, 1), "near eigenvalue above"),
        ("dirichlet1", MatrixPath.scalar(PI**2 - 1e-6, 1), "near eigenvalue below"),
        ("dirichlet1", MatrixPath.scalar(4 * PI**2, 1), "second eigenvalue"),
        ("dirichlet1", diag_t(1, 10.0, 5.0), "diag(t)"),
        ("dirichlet1", MatrixPath(lambda t: (20.0 + 5.0 * np.cos(3.0 * t))[:, None, None], 1), "cosine"),
        ("dirichlet2", MatrixPath.constant(np.diag([PI**2, 4 * PI**2])), "two eigenvalues"),
        ("dirichlet2", MatrixPath.constant(np.diag([PI**2, PI**2])), "double eigenvalue"),
        ("dirichlet2", MatrixPath.constant(d2), "coupled"),
        ("dirichlet2", diag_t(2, 3.0, 4.0), "diag(t) n=2"),
        ("robin2", MatrixPath.constant(d2), "robin coupled"),
        ("neumann1", MatrixPath.zeros(1), "neumann kernel"),
        ("neumann1", MatrixPath.scalar(PI**2, 1), "neumann eigenvalue"),
        ("bolza1", MatrixPath.scalar(PI, 2), "rotation"),
        ("bolza1", MatrixPath.scalar(PI + 1e-6, 2), "near rotation"),
        ("bolza1", MatrixPath.zeros(2), "zero"),
        ("bolza1", diag_t(2, 0.0, 2.0), "diag(2t)"),
        ("bolza_tilt", MatrixPath.scalar(2.1, 2), "tilted eigenvalue"),
        ("periodic1", MatrixPath.zeros(2), "periodic kernel"),
    ], o


@lru_cache(maxsize=None)
def model_for(name: str, bound: float, beta_scale: float = 1.0, window_scale: float = 1.0):
    """Spectral model of battery operator ``name``, optionally with scaled ``beta`` / window."""
    op = ops()[name]
    base = build_spectral_model(op, bound=bound)
    if beta_scale == 1.0 and window_scale == 1.0:
        return base
    beta = base.beta * beta_scale
    return build_spectral_model(op, eps=base.epsilon, beta=_gap_beta(base, beta), window=base.window * beta_scale * window_scale)


def _gap_beta(model, beta: float) -> float:
    """Nudge ``beta`` off the spectrum of ``A_eps``."""
    from hamindex.spectral import eigen_scan

    lams = np.array([p.lam for p in eigen_scan(model.op, (-beta - model.epsilon - 10.0, -beta - model.epsilon + 10.0))])
    lams = lams + model.epsilon
    if lams.size and np.abs(lams + beta).min() < 1e-3:
        beta += 0.5
    return beta


# ---------------------------------------------------------------------------
# nonlinear problems
# ---------------------------------------------------------------------------
def example_text(name: str) -> str:
    return resources.files("hamindex.problems").joinpath("examples", f"{name}.json").read_text()


def example_spec(name: str):
    return parse_problem(example_text(name))


@lru_cache(maxsize=None)
def arctan_problem():
    return build_problem(example_spec("arctan_spring"))


@lru_cache(maxsize=None)
def arctan_model(beta_scale: float = 1.0, window_scale: float = 1.0):
    prob = arctan_problem()
    base = build_spectral_model(prob.op, bound=prob.M)
    if beta_scale == 1.0 and window_scale == 1.0:
        return base
    return build_spectral_model(prob.op, eps=base.epsilon, beta=base.beta * beta_scale, window=base.window * beta_scale * window_scale)


FIRST_ORDER_DOC = {
    "name": "coupled_bolza",
    "order": "first",
    "n": 1,
    "bc": {"type": "bolza", "alpha": 0.0, "beta": PI},
    "hamiltonian": {
        "H": "0.5*(2+cos(3*t))*x1^2 + 0.5*x2^2 + 0.3*x1*x2 + 0.5*log(1+x1^2)",
        "gradH": ["(2+cos(3*t))*x1 + 0.3*x2 + x1/(1+x1^2)", "x2 + 0.3*x1"],
        "hessH": [["2+cos(3*t) + (1-x1^2)/(1+x1^2)^2", "0.3"], ["0.3", "1"]],
        "M": 4.3,
    },
}


@lru_cache(maxsize=None)
def first_order_problem():
    return build_problem(parse_problem(json.dumps(FIRST_ORDER_DOC)))


@lru_cache(maxsize=None)
def first_order_model(beta_scale: float = 1.0, window_scale: float = 1.0):
    prob = first_order_problem()
    base = build_spectral_model(prob.op, bound=prob.M)
    if beta_scale == 1.0 and window_scale == 1.0:
        return base
    return build_spectral_model(
        prob.op, eps=base.epsilon, beta=_gap_beta(base, base.beta * beta_scale), window=base.window * beta_scale * window_scale
    )


@lru_cache(maxsize=None)
def expression_problem():
    return build_problem(example_spec("expression_spring"))


@lru_cache(maxsize=None)
def expression_model():
    prob = expression_problem()
    return build_spectral_model(prob.op, bound=prob.M)


def nonlinear_battery():
    """``(label, problem, model)`` for every nonlinear test problem."""
    return [
        ("arctan_spring", arctan_problem(), arctan_model()),
        ("expression_spring", expression_problem(), expression_model()),
        ("coupled_bolza", first_order_problem(), first_order_model()),
    ]


def bolza_crossings_constant(B: np.ndarray, k: float) -> list[float]:
    """Crossings of ``(1 - s) B + s k I`` for ``s`` in ``[0, 1)`` under Bolza(0, pi), ``n = 1``.

    ``J C`` is traceless, so ``expm(J C) = cosh(mu) I + sinh(mu)/mu J C`` with
    ``mu^2 = -det C``; the kernel condition ``Psi(1)[0, 1] = 0`` becomes
    ``C22 = 0`` or ``det C = (m pi)^2`` for some ``m >= 1``. Both are
    polynomial in ``s`` and solved exactly.
    """
    B = np.asarray(B, dtype=float)
    D = k * np.eye(2) - B
    # det(B + s D) = a s^2 + b s + c
    a = np.linalg.det(D)
    c = np.linalg.det(B)
    b = B[0, 0] * D[1, 1] + D[0, 0] * B[1, 1] - 2.0 * B[0, 1] * D[0, 1]
    roots = []
    top = max(abs(c), abs(a + b + c), abs(c - b * b / (4 * a)) if a else 0.0)
    for m in range(1, int(np.sqrt(top) / PI) + 2):
        for r in np.roots([a, b, c - (m * PI) ** 2]):
            if abs(r.imag) < 1e-12 and 0.0 <= r.real < 1.0:
                roots.append(float(r.real))
    if D[1, 1] != 0.0:
        r = -B[1, 1] / D[1, 1]
        if 0.0 <= r < 1.0:
            roots.append(float(r))
    return sorted(roots)
