"""Eigenpairs of ``A`` and the shifted, split spectral model of ``A + eps I``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .flow import (
    CROSSING_TOL,
    boundary_stats,
    kernel_initial_states,
    scalar_flow,
    scan_crossings,
)
from .operator import OperatorSpec
from .paths import MatrixPath

log = logging.getLogger(__name__)

GAP_TOL = 1e-6
BETA_FACTOR = 10.0
WINDOW_FACTOR = 4.0
# Gauss-Legendre panels are sized so that the fastest oscillation in a
# Gram integrand advances at most this many radians per panel.
PANEL_PHASE = 0.75
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


class SpectralGapError(ValueError):
    """A requested shift or splitting level lies on (or too near) the spectrum."""


def quadrature(nodes: int):
    """Composite 4-point Gauss-Legendre rule with ``nodes // 4`` uniform panels."""
    panels = nodes // 4
    h = 1.0 / panels
    left = np.arange(panels) * h
    t = (left[:, None] + 0.5 * h * (_GAUSS_X + 1.0)[None, :]).ravel()
    w = np.tile(0.5 * h * _GAUSS_W, panels)
    return t, w


def _component(op: OperatorSpec, states: np.ndarray) -> np.ndarray:
    """Function values from flow states (drop the velocity half for second order)."""
    return states if op.order == "first" else states[..., : op.n]


@dataclass(eq=False)
class EigenPair:
    """Eigenvalue of ``A`` with an ``L^2``-orthonormal basis of its eigenspace.

    ``initial`` holds the initial flow states (one row per eigenfunction), so
    eigenfunctions can be evaluated at any ``t`` in closed form.
    """

    lam: float
    multiplicity: int
    initial: np.ndarray
    op: OperatorSpec = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    eigenfunctions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = self.evaluate(self.nodes)
        G = np.einsum("akd,k,bkd->ab", vals, self.weights, vals)
        L = np.linalg.cholesky(G)
        Linv = np.linalg.inv(L)
        self.initial = Linv @ self.initial
        self.eigenfunctions = np.einsum("ab,bkd->akd", Linv, vals)

    def evaluate(self, t) -> np.ndarray:
        """Eigenfunction values, shape ``(multiplicity, len(t), dim)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        psi = scalar_flow(self.op, self.lam, t)  # (k, D, D)
        states = np.einsum("kij,aj->aki", psi, self.initial)
        return _component(self.op, states)

    def derivative(self, t) -> np.ndarray:
        """Exact time derivative of :meth:`evaluate`."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        psi = scalar_flow(self.op, self.lam, t)
        K = self.op.generator(self.lam * np.eye(self.op.dim))
        states = np.einsum("ij,kjl,al->aki", K, psi, self.initial)
        return _component(self.op, states)


def _sample_grid(op: OperatorSpec, lo: float, hi: float) -> np.ndarray:
    step = 0.02
    if op.order == "first":
        n = int(np.ceil((hi - lo) / step)) + 1
        return np.linspace(lo, hi, max(n, 64))
    # second order: sample uniformly in sign(l) sqrt|l|, where roots are ~pi apart
    f = lambda x: np.sign(x) * np.sqrt(abs(x))
    a, b = f(lo), f(hi)
    n = int(np.ceil((b - a) / step)) + 1
    s = np.linspace(a, b, max(n, 64))
    g = np.sign(s) * s * s
    g[0], g[-1] = lo, hi
    return g


def _scalar_stats(op: OperatorSpec):
    return lambda lam: boundary_stats(op, scalar_flow(op, lam, 1.0), with_map=True)


def eigen_scan(op: OperatorSpec, window, tol: float = CROSSING_TOL) -> list[EigenPair]:
    """All eigenvalues of ``A`` in ``window`` with orthonormal eigenfunctions.

    Eigenvalues are the ``lam`` with ``nullity(op, lam * I) > 0``. Window
    endpoints sitting on an eigenvalue are nudged outwards.
    """
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    stats = _scalar_stats(op)
    while stats(np.array([lo]))[0][0] < 1e-6:
        lo -= 1e-6
    while stats(np.array([hi]))[0][0] < 1e-6:
        hi += 1e-6
    trace = scan_crossings(stats, _sample_grid(op, lo, hi), include_lo=True, include_hi=True, tol=tol)
    nodes, weights = quadrature(op.grid)
    pairs = []
    for c in trace.crossings:
        psi1 = scalar_flow(op, c.lam, 1.0)
        y0 = kernel_initial_states(op, psi1, c.nullity)
        pairs.append(EigenPair(c.lam, c.nullity, y0, op, nodes, weights))
    return pairs


def grid_for_frequency(op: OperatorSpec, lam_max: float) -> int:
    """Quadrature node count that resolves products of eigenfunctions up to ``lam_max``."""
    freq = lam_max if op.order == "first" else np.sqrt(max(lam_max, 0.0))
    panels = int(np.ceil(2.0 * freq / PANEL_PHASE))
    return max(op.grid, 4 * panels)


@dataclass(eq=False)
class SpectralModel:
    """Truncated eigen-decomposition of ``A_eps = A + eps I`` split at ``0`` and ``-beta``.

    Mode ``j`` has eigenvalue ``lam[j]`` of ``A`` and ``lamp[j] = lam[j] + eps``
    of ``A_eps``; modes are sorted by ``lamp``. ``basis`` holds the
    orthonormal eigenfunctions on the quadrature nodes, shape
    ``(modes, nodes, dim)``.
    """

    op: OperatorSpec
    epsilon: float
    beta: float
    window: float
    lam: np.ndarray
    basis: np.ndarray = field(repr=False)
    initial: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    pairs: list = field(repr=False, default_factory=list)

    def __post_init__(self):
        self.lamp = self.lam + self.epsilon
        self.scale = np.abs(self.lamp) ** -0.5
        self.plus = np.flatnonzero(self.lamp > 0)
        self.zero = np.flatnonzero((self.lamp < 0) & (self.lamp > -self.beta))
        self.minus = np.flatnonzero(self.lamp < -self.beta)
        self.E = np.flatnonzero(self.lamp > -self.beta)
        # +1 on the positive block, -1 on the (-beta, 0) block
        self.sign = np.where(self.lamp > 0, 1.0, -1.0)
        for a in (self.lam, self.lamp, self.scale, self.basis, self.nodes, self.weights):
            a.setflags(write=False)

    @property
    def size(self) -> int:
        return self.lam.size

    @property
    def grid(self) -> int:
        return self.nodes.size

    def synthesize(self, coeffs: np.ndarray, t=None) -> np.ndarray:
        """``sum_j coeffs[j] e_j`` on the nodes (or at times ``t``), shape ``(k, dim)``."""
        if t is None:
            return np.einsum("j,jkd->kd", coeffs, self.basis)
        return np.einsum("j,jkd->kd", coeffs, self.basis_at(t))

    def project(self, values: np.ndarray) -> np.ndarray:
        """``(f, e_j)`` for function values ``f`` on the nodes, shape ``(k, dim)``."""
        return np.einsum("jkd,k,kd->j", self.basis, self.weights, values)

    def basis_at(self, t) -> np.ndarray:
        """Eigenfunctions at arbitrary times, shape ``(modes, len(t), dim)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self.size, t.size, self.op.dim))
        for j in range(self.size):
            psi = scalar_flow(self.op, self.lam[j], t)
            out[j] = _component(self.op, psi @ self.initial[j])
        return out


def _eigenvalues(op, lo, hi):
    return [p.lam for p in eigen_scan(op, (lo, hi))]


def default_epsilon(op: OperatorSpec) -> float:
    """``eps = min(1, dist(0, spec(A) minus {0})) / 2``."""
    lams = np.array(_eigenvalues(op, -2.0, 2.0))
    nonzero = np.abs(lams[np.abs(lams) > GAP_TOL]) if lams.size else np.empty(0)
    d0 = nonzero.min() if nonzero.size else 2.0
    return 0.5 * min(1.0, d0)


def _snap_beta(op: OperatorSpec, eps: float, beta0: float) -> float:
    """Midpoint of the nearest spectral gap of ``A_eps`` at or below ``-beta0``."""
    span = 8.0
    while True:
        lams = np.array(_eigenvalues(op, -beta0 - eps - span, -beta0 - eps + GAP_TOL)) + eps
        below = np.unique(np.round(lams[lams <= -beta0], 12))
        if below.size >= 2:
            return float(-(below[-1] + below[-2]) / 2.0)
        if op.bounded_below and span > 4 * beta0 + 64:
            if below.size == 1:
                return float(-(below[-1] - 1.0))
            return beta0
        span *= 2.0


def build_spectral_model(
    op: OperatorSpec,
    eps: float | None = None,
    beta: float | None = None,
    window: float | None = None,
    bound: float = 0.0,
    gap_tol: float = GAP_TOL,
) -> SpectralModel:
    """Assemble the spectral model of ``A_eps``.

    Parameters
    ----------
    op : OperatorSpec
    eps : float, optional
        Shift making ``A + eps I`` invertible. Defaults to
        ``min(1, dist(0, spec(A) minus {0})) / 2``.
    beta : float, optional
        Splitting level. Defaults to ``10 * (bound + eps)`` moved to the
        middle of the nearest spectral gap of ``A_eps`` below it.
    window : float, optional
        Keep eigenvalues of ``A_eps`` in ``[-window, window]``; default
        ``4 * beta``.
    bound : float
        Sup-norm bound of the Hessian (or comparison matrix) the model will
        be used with.
    """
    if eps is None:
        eps = default_epsilon(op)
    elif eps <= 0:
        raise SpectralGapError("epsilon must be positive")
    else:
        near = np.array(_eigenvalues(op, -eps - 4 * gap_tol - 1e-3, -eps + 4 * gap_tol + 1e-3))
        if near.size and np.abs(near + eps).min() <= gap_tol:
            raise SpectralGapError(f"-epsilon={-eps} in spectrum of A")

    if beta is None:
        beta = _snap_beta(op, eps, BETA_FACTOR * (bound + eps))
    elif beta <= 0:
        raise SpectralGapError("beta must be positive")

    if window is None:
        window = WINDOW_FACTOR * beta
    if window < 1.05 * beta + 1.0:
        raise SpectralGapError(f"window {window} too small to contain beta={beta} with margin")

    op_q = op.with_grid(grid_for_frequency(op, window + eps))
    pairs = eigen_scan(op_q, (-window - eps, window - eps))
    lam = np.concatenate([[p.lam] * p.multiplicity for p in pairs]) if pairs else np.empty(0)
    lamp = lam + eps
    if lamp.size and np.abs(lamp).min() <= gap_tol:
        raise SpectralGapError("eigenvalue of A_eps too close to 0 (-epsilon in spectrum)")
    if lamp.size and np.abs(lamp + beta).min() <= gap_tol:
        raise SpectralGapError(f"beta in spectrum: -beta={-beta} is an eigenvalue of A_eps")

    basis = np.concatenate([p.eigenfunctions for p in pairs]) if pairs else np.empty((0, op_q.grid, op.dim))
    initial = np.concatenate([p.initial for p in pairs]) if pairs else np.empty((0, op.state_dim))
    nodes, weights = quadrature(op_q.grid)
    log.debug("spectral model: eps=%g beta=%g window=%g modes=%d grid=%d", eps, beta, window, lam.size, op_q.grid)
    return SpectralModel(op, float(eps), float(beta), float(window), lam, basis, initial, nodes, weights, pairs)


def gram_matrix(model: SpectralModel, B, shift: float = 0.0) -> np.ndarray:
    """``G_ij = int ((B(t) + shift I) e_j(t), e_i(t)) dt`` over the model's modes.

    ``B`` is a :class:`MatrixPath` or an array of samples on the model nodes
    with shape ``(nodes, dim, dim)``.
    """
    d = model.op.dim
    if isinstance(B, MatrixPath):
        if B.dim != d:
            raise ValueError(f"B has dimension {B.dim}, model expects {d}")
        if B.is_constant:
            Bk = None
            K = B.value + shift * np.eye(d)
        else:
            Bk = B(model.nodes)
    else:
        Bk = np.asarray(B, dtype=float)
        if Bk.shape != (model.grid, d, d):
            raise ValueError(f"B samples have shape {Bk.shape}, model grid needs {(model.grid, d, d)}")
    m, N = model.size, model.grid
    E = model.basis
    if Bk is None:
        F = np.einsum("ab,jkb->jka", K, E)
    else:
        Bk = Bk + shift * np.eye(d)
        F = np.einsum("kab,jkb->jka", Bk, E)
    Ew = E * model.weights[None, :, None]
    G = Ew.reshape(m, N * d) @ F.reshape(m, N * d).T
    return 0.5 * (G + G.T)
