"""Boundary-condition families and the operator specification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

SYMPLECTIC_TOL = 1e-12


class SpecError(ValueError):
    """Invalid operator or problem specification."""


def symplectic_form(n: int) -> np.ndarray:
    """Standard ``J = [[0, -I], [I, 0]]`` on ``R^{2n}``."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def _check_angles(alpha: float, beta: float) -> None:
    if not 0.0 <= alpha < np.pi:
        raise SpecError(f"alpha out of [0,π): {alpha!r}")
    if not 0.0 < beta <= np.pi:
        raise SpecError(f"beta out of (0,π]: {beta!r}")


@dataclass(frozen=True)
class Bolza:
    """Separated conditions ``x1(0) cos a + x2(0) sin a = 0``, ``x1(1) cos b + x2(1) sin b = 0``."""

    alpha: float
    beta: float

    def __post_init__(self):
        _check_angles(self.alpha, self.beta)


@dataclass(frozen=True)
class SturmLiouville:
    """``x(0) cos a - x'(0) sin a = 0`` and ``x(1) cos b - x'(1) sin b = 0``."""

    alpha: float
    beta: float

    def __post_init__(self):
        _check_angles(self.alpha, self.beta)


@dataclass(frozen=True, eq=False)
class PPeriodic:
    """``x(1) = P x(0)`` with ``P`` symplectic."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] % 2:
            raise SpecError(f"P must be a 2n x 2n matrix, got shape {P.shape}")
        J = symplectic_form(P.shape[0] // 2)
        defect = np.abs(P.T @ J @ P - J).max()
        if defect > SYMPLECTIC_TOL:
            raise SpecError(f"P is not symplectic (|P^T J P - J| = {defect:.3e})")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    def __eq__(self, other):
        return isinstance(other, PPeriodic) and np.array_equal(self.P, other.P)

    def __hash__(self):
        return hash(self.P.tobytes())


BoundaryCondition = Union[Bolza, SturmLiouville, PPeriodic]


@dataclass(frozen=True)
class OperatorSpec:
    """The self-adjoint operator ``A``: ``-J x'`` (first order) or ``-x''`` (second order).

    ``dim`` is the dimension of the values of functions in ``L^2`` (``2n`` for
    first order, ``n`` for second order); ``state_dim`` is always ``2n`` and is
    the size of the fundamental matrix.
    """

    order: str
    n: int
    bc: BoundaryCondition
    grid: int = 1024
    _bmaps: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order not in ("first", "second"):
            raise SpecError(f"order must be 'first' or 'second', got {self.order!r}")
        if int(self.n) != self.n or self.n < 1:
            raise SpecError(f"n must be a positive integer, got {self.n!r}")
        if self.grid < 64:
            raise SpecError(f"grid must be >= 64, got {self.grid}")
        if self.grid % 4:
            raise SpecError(f"grid must be a multiple of 4 (4 Gauss points per panel), got {self.grid}")
        if self.order == "first" and not isinstance(self.bc, (Bolza, PPeriodic)):
            raise SpecError("first-order operators take Bolza or P-periodic conditions")
        if self.order == "second" and not isinstance(self.bc, SturmLiouville):
            raise SpecError("second-order operators take Sturm-Liouville conditions")
        if isinstance(self.bc, PPeriodic) and self.bc.P.shape[0] != 2 * self.n:
            raise SpecError(f"P has shape {self.bc.P.shape}, expected {2 * self.n}x{2 * self.n}")
        object.__setattr__(self, "_bmaps", _boundary_matrices(self))

    @property
    def dim(self) -> int:
        return 2 * self.n if self.order == "first" else self.n

    @property
    def state_dim(self) -> int:
        return 2 * self.n

    @property
    def periodic(self) -> bool:
        return isinstance(self.bc, PPeriodic)

    @property
    def bounded_below(self) -> bool:
        return self.order == "second"

    @property
    def max_nullity(self) -> int:
        return 2 * self.n if self.periodic else self.n

    @property
    def left_map(self) -> np.ndarray:
        """Columns span the admissible initial states (``2n x n``); identity if periodic."""
        return self._bmaps[0]

    @property
    def right_map(self) -> np.ndarray:
        """Rows encode the terminal condition (``n x 2n``)."""
        return self._bmaps[1]

    def generator(self, B: np.ndarray) -> np.ndarray:
        """Matrix ``K`` of the linear flow ``y' = K y`` for ``(A - B) x = 0``.

        ``B`` may carry leading batch axes.
        """
        n = self.n
        B = np.asarray(B, dtype=float)
        if self.order == "first":
            return symplectic_form(n) @ B
        K = np.zeros(B.shape[:-2] + (2 * n, 2 * n))
        K[..., :n, n:] = np.eye(n)
        K[..., n:, :n] = -B
        return K

    def generator_linear(self, B: np.ndarray) -> np.ndarray:
        """Linear part of :meth:`generator` (they differ only for second order)."""
        if self.order == "first":
            return self.generator(B)
        n = self.n
        B = np.asarray(B, dtype=float)
        K = np.zeros(B.shape[:-2] + (2 * n, 2 * n))
        K[..., n:, :n] = -B
        return K

    def with_grid(self, grid: int) -> "OperatorSpec":
        return OperatorSpec(self.order, self.n, self.bc, grid)


def _boundary_matrices(op: OperatorSpec):
    n = op.n
    I = np.eye(n)
    if op.periodic:
        return np.eye(2 * n), None
    a, b = op.bc.alpha, op.bc.beta
    if op.order == "first":
        # x1 cos a + x2 sin a = 0 at t = 0 and the analogue with b at t = 1.
        L0 = np.vstack([-np.sin(a) * I, np.cos(a) * I])
        C1 = np.hstack([np.cos(b) * I, np.sin(b) * I])
    else:
        # companion state y = (x, x'); x cos a - x' sin a = 0.
        L0 = np.vstack([np.sin(a) * I, np.cos(a) * I])
        C1 = np.hstack([np.cos(b) * I, -np.sin(b) * I])
    return L0, C1


def build_operator(bc: BoundaryCondition, order: str, n: int, grid: int = 1024) -> OperatorSpec:
    """Validate an (order, boundary condition) pairing and return the operator."""
    return OperatorSpec(order=order, n=int(n), bc=bc, grid=int(grid))


def dirichlet(n: int = 1, grid: int = 1024) -> OperatorSpec:
    """Second-order Dirichlet operator ``-x''`` with ``x(0) = x(1) = 0``."""
    return build_operator(SturmLiouville(0.0, np.pi), "second", n, grid)
