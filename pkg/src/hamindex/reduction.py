"""Saddle-point reduction of the Hamiltonian functional onto the plus and zero modes.

Coefficients ``c`` live on the modes of a :class:`SpectralModel`; the
trajectory is ``x = sum_j c_j s_j e_j``. The strongly negative block
``c_M`` is eliminated by a contraction fixed point, leaving a finite
dimensional functional ``a(c_E)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .operator import OperatorSpec
from .paths import MatrixPath
from .spectral import SpectralModel, gram_matrix

log = logging.getLogger(__name__)

FP_TOL = 1e-12
MAX_PICARD = 200


class ContractionError(RuntimeError):
    """The minus-block fixed-point iteration cannot be guaranteed or did not converge."""


@dataclass(eq=False)
class NonlinearProblem:
    """Hamiltonian ``H(t, x)`` with its gradient and Hessian.

    All three evaluators are vectorised: ``t`` has shape ``(k,)`` and ``x``
    shape ``(k, d)``; they return ``(k,)``, ``(k, d)`` and ``(k, d, d)``.
    ``M`` bounds the operator norm of the Hessian everywhere and ``r`` is the
    radius beyond which the comparison sandwich ``B1 <= hessH <= B2`` holds.
    """

    op: OperatorSpec
    H: Callable
    gradH: Callable
    hessH: Callable
    M: float
    r: float = 0.0
    B0: MatrixPath | None = None
    B1: MatrixPath | None = None
    B2: MatrixPath | None = None
    name: str = "custom"
    odd: bool = False

    @property
    def dim(self) -> int:
        return self.op.dim

    def energy(self, t, x) -> np.ndarray:
        """``H(t, x) - H(t, 0)``."""
        return self.H(t, x) - self.H(t, np.zeros_like(x))

    def hessian_at_zero(self) -> MatrixPath:
        d = self.dim
        return MatrixPath(lambda t: self.hessH(t, np.zeros((np.size(t), d))), d, name="hessH(t,0)")

    def with_op(self, op: OperatorSpec) -> "NonlinearProblem":
        return NonlinearProblem(
            op, self.H, self.gradH, self.hessH, self.M, self.r, self.B0, self.B1, self.B2, self.name, self.odd
        )


def contraction_bound(model: SpectralModel, prob: NonlinearProblem) -> float:
    """Lipschitz bound ``(M + eps) / beta`` of the minus-block map."""
    return (prob.M + model.epsilon) / model.beta


class ReducedPoint:
    """The reduced functional and its derivatives at one ``ustar``.

    ``ustar`` has one entry per mode in ``model.E``. Construction solves for
    the minus coefficients; value, gradient and Hessian are cached.
    """

    def __init__(
        self,
        model: SpectralModel,
        prob: NonlinearProblem,
        ustar,
        fp_tol: float = FP_TOL,
        max_iter: int = MAX_PICARD,
        guess=None,
    ):
        ustar = np.asarray(ustar, dtype=float)
        if ustar.shape != (model.E.size,):
            raise ValueError(f"ustar must have {model.E.size} entries, got shape {ustar.shape}")
        self.model, self.prob = model, prob
        self.ustar = ustar
        self.fp_tol = fp_tol
        c = np.zeros(model.size)
        c[model.E] = ustar
        self.uminus, self.iterations, self.contraction_factor, self.fp_residual = _picard(
            model, prob, c, fp_tol, max_iter, guess
        )
        c[model.minus] = self.uminus
        self.coeffs = c
        self.x = model.synthesize(c * model.scale)

    # -- building blocks ----------------------------------------------------
    @cached_property
    def _force(self) -> np.ndarray:
        """``(H'(x) + eps x, e_j)`` for every mode."""
        m = self.model
        return m.project(self.prob.gradH(m.nodes, self.x) + m.epsilon * self.x)

    @cached_property
    def value(self) -> float:
        m, c = self.model, self.coeffs
        quad = 0.5 * (np.sum(c[m.plus] ** 2) - np.sum(c[m.zero] ** 2) - np.sum(c[m.minus] ** 2))
        w = m.weights
        pot = w @ self.prob.energy(m.nodes, self.x) + 0.5 * m.epsilon * w @ np.sum(self.x**2, axis=1)
        return float(quad - pot)

    @cached_property
    def gradient(self) -> np.ndarray:
        m = self.model
        E = m.E
        return m.sign[E] * self.ustar - m.scale[E] * self._force[E]

    @cached_property
    def _T(self) -> np.ndarray:
        m = self.model
        G = gram_matrix(m, self.prob.hessH(m.nodes, self.x), m.epsilon)
        return m.scale[:, None] * G * m.scale[None, :]

    @cached_property
    def minus_condition(self) -> float:
        M = self.model.minus
        if not M.size:
            return 1.0
        return float(np.linalg.cond(np.eye(M.size) + self._T[np.ix_(M, M)]))

    @cached_property
    def hessian(self) -> np.ndarray:
        m, T = self.model, self._T
        E, M = m.E, m.minus
        out = np.diag(m.sign[E]) - T[np.ix_(E, E)]
        if M.size:
            TEM = T[np.ix_(E, M)]
            out = out + TEM @ np.linalg.solve(np.eye(M.size) + T[np.ix_(M, M)], TEM.T)
        return 0.5 * (out + out.T)

    @property
    def gradnorm(self) -> float:
        return float(np.linalg.norm(self.gradient))

    # -- recovered solution -------------------------------------------------
    @cached_property
    def galerkin_residual(self) -> np.ndarray:
        """``lam_j x_j - (H'(x), e_j)`` on every truncated mode."""
        m = self.model
        xj = self.coeffs * m.scale
        return m.lam * xj - (self._force - m.epsilon * xj)

    @cached_property
    def tail_estimate(self) -> float:
        m = self.model
        edge = np.abs(m.lamp).max() if m.size else 1.0
        xnorm = np.sqrt(m.weights @ np.sum(self.x**2, axis=1))
        return float(self.prob.M * xnorm / edge)

    def trajectory(self, t=None) -> np.ndarray:
        """Recovered ``x`` on the model nodes, or at times ``t``."""
        if t is None:
            return self.x
        return self.model.synthesize(self.coeffs * self.model.scale, t)


def _picard(model, prob, c, fp_tol, max_iter, guess):
    M = model.minus
    if not M.size:
        return np.zeros(0), 0, 0.0, 0.0
    q = contraction_bound(model, prob)
    if q >= 1.0:
        raise ContractionError(f"(M + eps)/beta = {q:.3g} >= 1; the minus block is not a contraction")
    sM = model.scale[M]
    basisM = model.basis[M]
    wts = model.weights
    cm = np.zeros(M.size) if guess is None else np.array(guess, dtype=float)
    cs = c * model.scale
    cs[M] = 0.0
    x_fixed = model.synthesize(cs)
    stop = fp_tol * (1.0 - q)
    factor, prev, step = 0.0, None, np.inf
    for it in range(1, max_iter + 1):
        x = x_fixed + np.einsum("j,jkd->kd", cm * sM, basisM)
        f = prob.gradH(model.nodes, x) + model.epsilon * x
        new = -sM * np.einsum("jkd,k,kd->j", basisM, wts, f)
        step = float(np.linalg.norm(new - cm))
        cm = new
        # rates from steps at roundoff level carry no information
        floor = 1e3 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(cm)))
        if prev is not None and prev > floor and step > floor:
            factor = max(factor, step / prev)
        prev = step
        if step <= max(stop, floor):
            return cm, it, factor, step
    raise ContractionError(f"minus-block iteration did not converge in {max_iter} steps (last step {step:.3e})")


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------
def reduce_point(model, prob, ustar, fp_tol: float = FP_TOL) -> ReducedPoint:
    return ReducedPoint(model, prob, ustar, fp_tol)


def solve_minus(model: SpectralModel, prob: NonlinearProblem, ustar, fp_tol: float = FP_TOL) -> np.ndarray:
    """Fixed point ``c_M = -s_M (H'(x) + eps x, e_M)`` for the given plus/zero coefficients."""
    return ReducedPoint(model, prob, ustar, fp_tol).uminus


def reduced_value(model, prob, ustar, fp_tol: float = FP_TOL) -> float:
    return ReducedPoint(model, prob, ustar, fp_tol).value


def reduced_gradient(model, prob, ustar, fp_tol: float = FP_TOL) -> np.ndarray:
    return ReducedPoint(model, prob, ustar, fp_tol).gradient


def reduced_hessian(model, prob, ustar, fp_tol: float = FP_TOL) -> np.ndarray:
    return ReducedPoint(model, prob, ustar, fp_tol).hessian


@dataclass
class Recovery:
    x: np.ndarray
    residual: float
    tail: float
    t: np.ndarray = field(repr=False, default=None)


def recover_solution(model, prob, ustar, fp_tol: float = FP_TOL) -> Recovery:
    """Trajectory on the model nodes with its Galerkin residual and truncation tail estimate."""
    p = ReducedPoint(model, prob, ustar, fp_tol)
    return Recovery(p.x, float(np.linalg.norm(p.galerkin_residual)), p.tail_estimate, model.nodes)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def decompose_gradient(prob: NonlinearProblem, x_probe, t: float, B1: MatrixPath, delta: float):
    """Split ``H'(t, x) = B(t, x) x + C(t, x)``.

    ``B(t, x)`` is the averaged Hessian ``int_0^1 H''(t, theta x) dtheta`` when
    ``|x| >= r / delta`` and ``B1(t)`` otherwise.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    x = np.asarray(x_probe, dtype=float).reshape(-1)
    tt = np.array([float(t)])
    if np.any(x) and np.linalg.norm(x) >= prob.r / delta:
        pts = _GL_X[:, None] * x[None, :]
        Bpart = np.einsum("k,kab->ab", _GL_W, prob.hessH(np.full(_GL_X.size, float(t)), pts))
    else:
        Bpart = B1(float(t))
    C = prob.gradH(tt, x[None, :])[0] - Bpart @ x
    return Bpart, C
