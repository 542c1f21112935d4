"""Time-dependent symmetric matrix paths B(t) on [0, 1]."""

from __future__ import annotations

from functools import cached_property
from typing import Callable

import numpy as np

SYMMETRY_TOL = 1e-12

# Nodes used for pointwise checks (symmetry, ordering, sup-norm) of
# non-constant paths.
CHECK_NODES = np.linspace(0.0, 1.0, 257)


class MatrixPath:
    """A symmetric ``d x d`` matrix-valued function of ``t`` in [0, 1].

    Parameters
    ----------
    func : callable
        Vectorised evaluator. Called with a 1-D array of times of length
        ``k`` it must return an array of shape ``(k, d, d)``.
    dim : int
        Matrix dimension ``d``.
    constant : ndarray, optional
        If given, the path is the constant matrix and ``func`` is ignored.
    """

    def __init__(self, func: Callable | None, dim: int, constant=None, name: str | None = None):
        self.dim = int(dim)
        self.name = name
        if constant is not None:
            constant = np.array(constant, dtype=float).reshape(self.dim, self.dim)
            if np.abs(constant - constant.T).max() > SYMMETRY_TOL:
                raise ValueError("matrix path is not symmetric")
            self._const = constant
            self._func = None
        else:
            if func is None:
                raise ValueError("either func or constant is required")
            self._const = None
            self._func = func
            vals = self(CHECK_NODES)
            if vals.shape != (CHECK_NODES.size, self.dim, self.dim):
                raise ValueError(f"evaluator returned shape {vals.shape}, expected (k, {dim}, {dim})")
            asym = np.abs(vals - np.swapaxes(vals, 1, 2)).max()
            if asym > SYMMETRY_TOL:
                raise ValueError(f"matrix path is not symmetric (defect {asym:.3e})")

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, K, name=None) -> "MatrixPath":
        K = np.atleast_2d(np.asarray(K, dtype=float))
        return cls(None, K.shape[0], constant=K, name=name)

    @classmethod
    def scalar(cls, c: float, dim: int) -> "MatrixPath":
        return cls.constant(c * np.eye(dim), name=f"{c:g}*I")

    @classmethod
    def zeros(cls, dim: int) -> "MatrixPath":
        return cls.constant(np.zeros((dim, dim)), name="0")

    @classmethod
    def block_diag(cls, upper: "MatrixPath", lower: "MatrixPath") -> "MatrixPath":
        """``diag{upper, lower}``."""
        d1, d2 = upper.dim, lower.dim
        if upper.is_constant and lower.is_constant:
            K = np.zeros((d1 + d2, d1 + d2))
            K[:d1, :d1] = upper.value
            K[d1:, d1:] = lower.value
            return cls.constant(K)

        def func(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros((t.size, d1 + d2, d1 + d2))
            out[:, :d1, :d1] = upper(t)
            out[:, d1:, d1:] = lower(t)
            return out

        return cls(func, d1 + d2)

    # -- evaluation -------------------------------------------------------
    @property
    def is_constant(self) -> bool:
        return self._const is not None

    @property
    def value(self) -> np.ndarray:
        if self._const is None:
            raise AttributeError("path is not constant")
        return self._const

    def __call__(self, t):
        """Evaluate at scalar ``t`` (-> ``(d, d)``) or array ``t`` (-> ``(k, d, d)``)."""
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self._const is not None:
            out = np.broadcast_to(self._const, (tt.size, self.dim, self.dim)).copy()
        else:
            out = np.asarray(self._func(tt), dtype=float).reshape(tt.size, self.dim, self.dim)
        return out[0] if scalar else out

    @cached_property
    def supnorm(self) -> float:
        if self._const is not None:
            return float(np.linalg.norm(self._const, 2))
        return float(np.linalg.norm(self(CHECK_NODES), 2, axis=(1, 2)).max())

    def max_eigenvalue(self) -> float:
        """``sup_t lambda_max(B(t))`` over the check nodes."""
        if self._const is not None:
            return float(np.linalg.eigvalsh(self._const)[-1])
        return float(np.linalg.eigvalsh(self(CHECK_NODES))[:, -1].max())

    def samples(self, nodes) -> np.ndarray:
        return self(np.asarray(nodes, dtype=float))

    # -- arithmetic -------------------------------------------------------
    def _combine(self, other: "MatrixPath", a: float, b: float) -> "MatrixPath":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if self.is_constant and other.is_constant:
            return MatrixPath.constant(a * self._const + b * other._const)
        return MatrixPath(lambda t: a * self(t) + b * other(t), self.dim)

    def __add__(self, other):
        if np.isscalar(other):
            return self._combine(MatrixPath.scalar(float(other), self.dim), 1.0, 1.0)
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        if np.isscalar(other):
            return self._combine(MatrixPath.scalar(float(other), self.dim), 1.0, -1.0)
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c):
        c = float(c)
        if self.is_constant:
            return MatrixPath.constant(c * self._const)
        return MatrixPath(lambda t: c * self(t), self.dim)

    __rmul__ = __mul__

    def interpolate(self, other: "MatrixPath", lam: float) -> "MatrixPath":
        """``(1 - lam) * self + lam * other``."""
        return self._combine(other, 1.0 - lam, lam)

    # -- partial order ------------------------------------------------------
    def _gap_eigs(self, other: "MatrixPath", nodes=None) -> np.ndarray:
        diff = other - self
        if diff.is_constant:
            return np.linalg.eigvalsh(diff.value)[None, :]
        nodes = CHECK_NODES if nodes is None else nodes
        return np.linalg.eigvalsh(diff(nodes))

    def leq(self, other: "MatrixPath", tol: float = 1e-12, nodes=None) -> bool:
        """``self <= other``: ``other(t) - self(t)`` positive semidefinite at every node."""
        return bool(self._gap_eigs(other, nodes).min() >= -tol)

    def lt(self, other: "MatrixPath", tol: float = 1e-12, fraction: float = 0.01, nodes=None) -> bool:
        """``self < other``: ``self <= other`` and positive definite on at least
        ``fraction`` of the nodes."""
        eigs = self._gap_eigs(other, nodes)
        if eigs.min() < -tol:
            return False
        definite = eigs.min(axis=1) > tol
        return bool(definite.mean() >= fraction)

    def equals(self, other: "MatrixPath", tol: float = 0.0) -> bool:
        if self is other:
            return True
        if self.dim != other.dim:
            return False
        if self.is_constant and other.is_constant:
            return bool(np.abs(self._const - other._const).max() <= tol)
        return bool(np.abs(self(CHECK_NODES) - other(CHECK_NODES)).max() <= tol)

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.is_constant:
            return " ".join(np.array2string(self._const, precision=6, separator=",").split())
        return f"<path d={self.dim}>"

    def __repr__(self):
        return f"MatrixPath({self.describe()})"


def as_path(B, dim: int | None = None) -> MatrixPath:
    """Coerce a scalar, array or :class:`MatrixPath` into a :class:`MatrixPath`."""
    if isinstance(B, MatrixPath):
        if dim is not None and B.dim != dim:
            raise ValueError(f"matrix path has dimension {B.dim}, expected {dim}")
        return B
    arr = np.asarray(B, dtype=float)
    if arr.ndim == 0:
        if dim is None:
            raise ValueError("dimension needed to expand a scalar")
        return MatrixPath.scalar(float(arr), dim)
    path = MatrixPath.constant(arr)
    if dim is not None and path.dim != dim:
        raise ValueError(f"matrix has dimension {path.dim}, expected {dim}")
    return path
