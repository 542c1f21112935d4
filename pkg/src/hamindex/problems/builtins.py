"""Registry of built-in Hamiltonians."""

from __future__ import annotations

import numpy as np

from ..operator import Bolza, OperatorSpec
from ..paths import MatrixPath
from ..reduction import NonlinearProblem


class UnknownBuiltin(KeyError):
    pass


def _diag_stack(v: np.ndarray) -> np.ndarray:
    """``(k, d)`` -> ``(k, d, d)`` diagonal matrices."""
    k, d = v.shape
    out = np.zeros((k, d, d))
    idx = np.arange(d)
    out[:, idx, idx] = v
    return out


def arctan_spring(op: OperatorSpec, a: float = 25.0, b: float = 20.0, **comparison) -> NonlinearProblem:
    """Componentwise ``V(x) = a x^2/2 - b (x atan x - log(1 + x^2)/2)``.

    ``V'(x) = a x - b atan x`` and ``V''(x) = a - b / (1 + x^2)`` takes values
    between ``a - b`` (at 0) and ``a`` (at infinity).
    """
    a, b = float(a), float(b)

    def H(t, x):
        return np.sum(0.5 * a * x**2 - b * (x * np.arctan(x) - 0.5 * np.log1p(x**2)), axis=-1)

    def gradH(t, x):
        return a * x - b * np.arctan(x)

    def hessH(t, x):
        return _diag_stack(a - b / (1.0 + x**2))

    M = max(abs(a), abs(a - b))
    return NonlinearProblem(op, H, gradH, hessH, M, name="arctan_spring", odd=True, **comparison)


def zero(op: OperatorSpec, **comparison) -> NonlinearProblem:
    """``H = 0``."""
    d = op.dim
    return NonlinearProblem(
        op,
        lambda t, x: np.zeros(np.shape(x)[0]),
        lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        lambda t, x: np.zeros((np.shape(x)[0], d, d)),
        0.0,
        name="zero",
        odd=True,
        **comparison,
    )


def quadratic(op: OperatorSpec, K=None, **comparison) -> NonlinearProblem:
    """``H = (K x, x) / 2`` for a constant symmetric ``K``."""
    d = op.dim
    K = np.zeros((d, d)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape == (1, 1) and d > 1:
        K = K[0, 0] * np.eye(d)
    if K.shape != (d, d):
        raise ValueError(f"K must be {d}x{d}, got {K.shape}")
    if np.abs(K - K.T).max() > 1e-12:
        raise ValueError("K must be symmetric")

    def H(t, x):
        return 0.5 * np.einsum("ka,ab,kb->k", x, K, x)

    return NonlinearProblem(
        op,
        H,
        lambda t, x: np.asarray(x, dtype=float) @ K.T,
        lambda t, x: np.broadcast_to(K, (np.shape(x)[0], d, d)).copy(),
        float(np.linalg.norm(K, 2)),
        name="quadratic",
        odd=True,
        **comparison,
    )


REGISTRY = {"arctan_spring": arctan_spring, "zero": zero, "quadratic": quadratic}


def builtin(name: str, op: OperatorSpec, params: dict | None = None, **comparison) -> NonlinearProblem:
    """Instantiate a registered Hamiltonian on ``op``."""
    if name not in REGISTRY:
        raise UnknownBuiltin(f"unknown builtin {name!r}; known: {sorted(REGISTRY)}")
    try:
        return REGISTRY[name](op, **(params or {}), **comparison)
    except TypeError as exc:
        raise ValueError(f"invalid params for {name}: {exc}") from None


def lift_comparison(B: MatrixPath | None, n: int) -> MatrixPath | None:
    """``diag{B, I_n}``."""
    if B is None:
        return None
    return MatrixPath.block_diag(B, MatrixPath.scalar(1.0, n))


def lift_second_order(prob: NonlinearProblem) -> NonlinearProblem:
    """First-order form of ``-x'' = V'(t, x)`` with ``H = V(t, x1) + |x2|^2/2``.

    Uses ``x1 = x``, ``x2 = -x'`` and the Bolza conditions with the same
    angles; comparison matrices become ``diag{B, I_n}``.
    """
    op = prob.op
    if op.order != "second":
        raise ValueError("lift_second_order expects a second-order problem")
    n = op.n
    lifted_op = OperatorSpec("first", n, Bolza(op.bc.alpha, op.bc.beta), op.grid)

    def H(t, x):
        return prob.H(t, x[..., :n]) + 0.5 * np.sum(x[..., n:] ** 2, axis=-1)

    def gradH(t, x):
        return np.concatenate([prob.gradH(t, x[..., :n]), x[..., n:]], axis=-1)

    def hessH(t, x):
        k = np.shape(x)[0]
        out = np.zeros((k, 2 * n, 2 * n))
        out[:, :n, :n] = prob.hessH(t, x[..., :n])
        out[:, n:, n:] = np.eye(n)
        return out

    return NonlinearProblem(
        lifted_op,
        H,
        gradH,
        hessH,
        max(prob.M, 1.0),
        prob.r,
        lift_comparison(prob.B0, n),
        lift_comparison(prob.B1, n),
        lift_comparison(prob.B2, n),
        name=f"{prob.name}[lifted]",
        odd=prob.odd,
    )
