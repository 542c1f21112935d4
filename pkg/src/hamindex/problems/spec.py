"""JSON problem files: schema validation and construction of runtime objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from ..operator import Bolza, OperatorSpec, PPeriodic, SpecError, SturmLiouville
from ..paths import MatrixPath
from ..reduction import NonlinearProblem
from .builtins import REGISTRY, builtin
from .expr import ExprError, compile_expr


def load_schema() -> dict:
    return json.loads(resources.files("hamindex.problems").joinpath("schema.json").read_text())


class ProblemError(SpecError):
    """Malformed or inconsistent problem file; ``errors`` lists ``(path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass
class ProblemSpec:
    order: str
    n: int
    bc: dict
    hamiltonian: dict | None = None
    linear: dict | None = None
    comparison: dict | None = None
    numerics: dict = field(default_factory=dict)
    homotopy: dict | None = None
    expect: dict | None = None
    name: str | None = None

    KEYS = ("name", "order", "n", "bc", "hamiltonian", "linear", "comparison", "numerics", "homotopy", "expect")

    def to_json(self) -> dict:
        out = {}
        for k in self.KEYS:
            v = getattr(self, k)
            if v is None or (k == "numerics" and not v):
                continue
            out[k] = copy.deepcopy(v)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @property
    def dim(self) -> int:
        return 2 * self.n if self.order == "first" else self.n


def serialize(spec: ProblemSpec) -> str:
    return spec.dumps()


def _path_str(err) -> str:
    return err.json_path


def parse_problem(text) -> ProblemSpec:
    """Validate a problem document (JSON text or already-decoded dict)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemError([("$", f"malformed JSON: {exc}")]) from None
    else:
        doc = copy.deepcopy(text)
    validator = jsonschema.Draft202012Validator(load_schema())
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errs:
        raise ProblemError([(_path_str(e), e.message) for e in errs])
    spec = ProblemSpec(**{k: doc.get(k) for k in ProblemSpec.KEYS if k in doc})
    if spec.numerics is None:
        spec.numerics = {}
    _semantic_checks(spec)
    return spec


def _semantic_checks(spec: ProblemSpec) -> None:
    errors = []
    try:
        build_op(spec)
    except SpecError as exc:
        errors.append(("$.bc", str(exc)))
    d = spec.dim
    h = spec.hamiltonian or {}
    if "builtin" in h:
        if h["builtin"] not in REGISTRY:
            errors.append(("$.hamiltonian.builtin", f"unknown builtin {h['builtin']!r}"))
    elif h:
        errors += _check_expr(h["H"], d, "$.hamiltonian.H")
        if len(h["gradH"]) != d:
            errors.append(("$.hamiltonian.gradH", f"expected {d} components, got {len(h['gradH'])}"))
        errors += [e for i, g in enumerate(h["gradH"]) for e in _check_expr(g, d, f"$.hamiltonian.gradH[{i}]")]
        errors += _check_matrix(h["hessH"], d, "$.hamiltonian.hessH", d)
        if "M" not in h:
            errors.append(("$.hamiltonian.M", "a Hessian bound M is required for expression Hamiltonians"))
    if spec.linear:
        errors += _check_matrix(spec.linear["B"], d, "$.linear.B", 0)
    for key in ("B0", "B1", "B2"):
        if spec.comparison and key in spec.comparison:
            errors += _check_matrix(spec.comparison[key], d, f"$.comparison.{key}", 0)
    for key in ("from", "to"):
        if spec.homotopy and key in spec.homotopy:
            errors += _check_matrix(spec.homotopy[key], d, f"$.homotopy.{key}", 0)
    if errors:
        raise ProblemError(errors)


def _check_expr(e, dim, where):
    if isinstance(e, (int, float)):
        return []
    try:
        compile_expr(e, dim)
    except ExprError as exc:
        return [(where, str(exc))]
    return []


def _check_matrix(m, d, where, xdim):
    if isinstance(m, (int, float, str)):
        return _check_expr(m, xdim, where)
    if len(m) != d or any(len(row) != d for row in m):
        return [(where, f"expected a {d}x{d} matrix")]
    return [e for i, row in enumerate(m) for j, v in enumerate(row) for e in _check_expr(v, xdim, f"{where}[{i}][{j}]")]


# ---------------------------------------------------------------------------
# runtime objects
# ---------------------------------------------------------------------------
def build_bc(bc: dict):
    kind = bc["type"]
    if kind == "bolza":
        return Bolza(float(bc.get("alpha", 0.0)), float(bc.get("beta", np.pi)))
    if kind == "sturm_liouville":
        return SturmLiouville(float(bc.get("alpha", 0.0)), float(bc.get("beta", np.pi)))
    if kind == "dirichlet":
        return SturmLiouville(0.0, np.pi)
    if kind == "neumann":
        return SturmLiouville(np.pi / 2, np.pi / 2)
    return PPeriodic(np.array(bc["P"], dtype=float))


def build_op(spec: ProblemSpec, grid: int | None = None) -> OperatorSpec:
    g = grid or spec.numerics.get("grid", 1024)
    return OperatorSpec(spec.order, int(spec.n), build_bc(spec.bc), int(g))


def matrix_path(m, d: int) -> MatrixPath:
    """A matrix path from a number, an expression in ``t`` (times ``I``) or a ``d x d`` array."""
    if isinstance(m, (int, float)):
        return MatrixPath.scalar(float(m), d)
    if isinstance(m, str):
        f = compile_expr(m, 0)
        return MatrixPath(lambda t: f(t)[:, None, None] * np.eye(d), d, name=m)
    if all(isinstance(v, (int, float)) for row in m for v in row):
        return MatrixPath.constant(np.array(m, dtype=float))
    fs = [[compile_expr(v, 0) for v in row] for row in m]

    def func(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.stack([f(t) for f in row], axis=-1) for row in fs], axis=-2)

    return MatrixPath(func, d)


def _expr_problem(op: OperatorSpec, h: dict, comparison: dict) -> NonlinearProblem:
    d = op.dim
    fH = compile_expr(h["H"], d)
    fg = [compile_expr(g, d) for g in h["gradH"]]
    hess = h["hessH"]
    if isinstance(hess, (int, float, str)):
        fh = compile_expr(hess, d)
        fhs = [[fh if i == j else compile_expr(0, d) for j in range(d)] for i in range(d)]
    else:
        fhs = [[compile_expr(v, d) for v in row] for row in hess]

    def H(t, x):
        return fH(t, x)

    def gradH(t, x):
        return np.stack([f(t, x) for f in fg], axis=-1)

    def hessH(t, x):
        return np.stack([np.stack([f(t, x) for f in row], axis=-1) for row in fhs], axis=-2)

    return NonlinearProblem(op, H, gradH, hessH, float(h["M"]), name="expression", odd=bool(h.get("odd", False)), **comparison)


def build_problem(spec: ProblemSpec, grid: int | None = None) -> NonlinearProblem | None:
    """The Hamiltonian of ``spec`` with its comparison data, or ``None`` if it has none."""
    op = build_op(spec, grid)
    comparison = comparison_paths(spec)
    h = spec.hamiltonian
    if not h:
        return None
    if "builtin" in h:
        return builtin(h["builtin"], op, h.get("params", {}), **comparison)
    return _expr_problem(op, h, comparison)


def comparison_paths(spec: ProblemSpec) -> dict:
    out = {}
    c = spec.comparison or {}
    for key in ("B0", "B1", "B2"):
        if key in c:
            out[key] = matrix_path(c[key], spec.dim)
    if "r" in c:
        out["r"] = float(c["r"])
    return out


def linear_path(spec: ProblemSpec) -> MatrixPath | None:
    if spec.linear and "B" in spec.linear:
        return matrix_path(spec.linear["B"], spec.dim)
    return None
