"""Fundamental matrices, boundary maps and crossing detection.

Nullities of the linear boundary value problem ``(A - B) x = 0`` are kernel
dimensions of a boundary map assembled from the fundamental matrix
``Psi(1)``. Crossings along one-parameter families ``B_s`` are located as
zeros of the smallest singular value of that map.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.ndimage import maximum_filter1d

from .operator import OperatorSpec, symplectic_form
from .paths import MatrixPath

RTOL = 1e-12
ATOL = 1e-12
NULL_REL = 1e-8
CROSSING_TOL = 1e-10
MERGE_TOL = 1e-8
HOMOTOPY_SAMPLES = 512


class IntegrationError(RuntimeError):
    """The ODE integrator failed (step-size collapse or similar)."""


class CrossingClusterError(RuntimeError):
    """A crossing cluster could not be resolved at the requested tolerance."""


# ---------------------------------------------------------------------------
# fundamental matrices
# ---------------------------------------------------------------------------
def _integrate(K_of_t: Callable[[float], np.ndarray], shape, t_eval) -> np.ndarray:
    """Integrate ``Psi' = K(t) Psi``, ``Psi(0) = I`` for a batch of systems.

    ``K_of_t(t)`` returns an array of shape ``shape = (m, D, D)``.
    Returns ``Psi`` at ``t_eval`` with shape ``(len(t_eval), m, D, D)``.
    """
    m, D, _ = shape
    y0 = np.broadcast_to(np.eye(D), (m, D, D)).ravel()

    def rhs(t, y):
        return np.matmul(K_of_t(t), y.reshape(m, D, D)).ravel()

    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(t_eval.max()) if t_eval.size else 0.0
    if t_end == 0.0:
        return np.broadcast_to(np.eye(D), (t_eval.size, m, D, D)).copy()
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=RTOL, atol=ATOL, t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y.T.reshape(t_eval.size, m, D, D)


def fundamental_matrix(op: OperatorSpec, B: MatrixPath, t=1.0) -> np.ndarray:
    """Fundamental matrix ``Psi(t)`` of ``(A - B) x = 0`` with ``Psi(0) = I``.

    For first-order operators ``Psi' = J B(t) Psi``; for second-order ones the
    companion system in ``y = (x, x')`` is used. Constant paths are handled
    by the matrix exponential, others by an embedded Runge-Kutta pair of order
    8 (local tolerance 1e-12).
    """
    if B.dim != op.dim:
        raise ValueError(f"B has dimension {B.dim}, operator expects {op.dim}")
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0) or np.any(ts > 1):
        raise ValueError("t must lie in [0, 1]")
    if B.is_constant:
        K = op.generator(B.value)
        out = expm(ts[:, None, None] * K)
    else:
        order = np.argsort(ts)
        D = op.state_dim
        res = _integrate(lambda s: op.generator(B(s))[None], (1, D, D), ts[order])[:, 0]
        out = np.empty_like(res)
        out[order] = res
    return out[0] if scalar else out


def scalar_flow(op: OperatorSpec, lam, t) -> np.ndarray:
    """Closed-form ``Psi(t)`` for ``B = lam * I``.

    ``lam`` and ``t`` broadcast against each other; the result has shape
    ``broadcast(lam, t).shape + (2n, 2n)``.
    """
    lam, t = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(t, dtype=float))
    n = op.n
    I = np.eye(n)
    if op.order == "first":
        c = np.cos(lam * t)[..., None, None]
        s = np.sin(lam * t)[..., None, None]
        return c * np.eye(2 * n) + s * symplectic_form(n)
    # companion of -x'' = lam x
    w = np.sqrt(np.abs(lam))
    wt = w * t
    C = np.where(lam >= 0, np.cos(wt), np.cosh(wt))
    small = wt < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        S_pos = np.where(small, t * (1 - lam * t * t / 6), np.sin(wt) / np.where(w > 0, w, 1))
        S_neg = np.where(small, t * (1 - lam * t * t / 6), np.sinh(wt) / np.where(w > 0, w, 1))
    S = np.where(lam >= 0, S_pos, S_neg)
    # d/dt C = -lam * S
    out = np.zeros(lam.shape + (2 * n, 2 * n))
    out[..., :n, :n] = C[..., None, None] * I
    out[..., :n, n:] = S[..., None, None] * I
    out[..., n:, :n] = (-lam * S)[..., None, None] * I
    out[..., n:, n:] = C[..., None, None] * I
    return out


class AffineFamily:
    """The family ``B_s = Ba + s * Bb`` and its terminal fundamental matrices."""

    def __init__(self, op: OperatorSpec, Ba: MatrixPath, Bb: MatrixPath):
        if Ba.dim != op.dim or Bb.dim != op.dim:
            raise ValueError("matrix path dimension does not match the operator")
        self.op, self.Ba, self.Bb = op, Ba, Bb
        self.constant = Ba.is_constant and Bb.is_constant
        if self.constant:
            self.K0 = op.generator(Ba.value)
            self.K1 = op.generator_linear(Bb.value)

    def path(self, s: float) -> MatrixPath:
        return self.Ba + self.Bb * s

    def generators(self, s: np.ndarray) -> Callable[[float], np.ndarray]:
        """``t -> K_s(t)`` stacked over the parameters ``s``."""
        if self.constant:
            K = self.K0[None] + s[:, None, None] * self.K1[None]
            return lambda t: K
        op = self.op

        def K_of_t(t):
            K0 = op.generator(self.Ba(t))
            K1 = op.generator_linear(self.Bb(t))
            return K0[None] + s[:, None, None] * K1[None]

        return K_of_t

    def psi1(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.constant:
            return expm(self.K0[None] + s[:, None, None] * self.K1[None])
        D = self.op.state_dim
        return _integrate(self.generators(s), (s.size, D, D), [1.0])[0]


# ---------------------------------------------------------------------------
# boundary maps
# ---------------------------------------------------------------------------
def boundary_map(op: OperatorSpec, psi1: np.ndarray) -> np.ndarray:
    """Square boundary matrix whose kernel is the solution space of the BVP."""
    if op.periodic:
        return psi1 - op.bc.P
    return op.right_map @ psi1 @ op.left_map


def _orth_rows(R: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the row space of a full-rank ``R``."""
    q, _ = np.linalg.qr(R.T)
    return q.T


def _subspace_pair(op: OperatorSpec, psi1: np.ndarray):
    """``(X, R)``: columns of ``X`` span the propagated initial subspace, rows of ``R`` annihilate the terminal one.

    A solution exists exactly when ``R`` annihilates a vector in the span of ``X``.
    P-periodic conditions are read on the graph ``{(x, Psi x)}`` against ``{(x, P x)}``.
    """
    if op.periodic:
        d = op.state_dim
        eye = np.broadcast_to(np.eye(d), psi1.shape)
        X = np.concatenate([eye, psi1], axis=-2)
        R = _orth_rows(np.hstack([op.bc.P, -np.eye(d)]))
    else:
        X = psi1 @ op.left_map
        R = _orth_rows(op.right_map)
    return X, R


def boundary_stats(op: OperatorSpec, psi1: np.ndarray, null_rel: float = NULL_REL, with_map: bool = False):
    """Crossing indicator and kernel dimension.

    The indicator is the smallest singular value of ``R Q`` with ``Q`` an
    orthonormal basis of the propagated initial subspace: the sine of the
    smallest principal angle to the terminal subspace. It lies in ``[0, 1]``
    whatever the growth of ``Psi``. The kernel dimension counts singular
    values below ``null_rel``. With ``with_map`` the matrices ``R Q Q^T``
    are returned as well; they are smooth in the parameter and the
    indicator is 1-Lipschitz in them, which the crossing scan uses to
    bound its slope.
    """
    psi1 = np.asarray(psi1, dtype=float)
    X, R = _subspace_pair(op, psi1)
    Q, _ = np.linalg.qr(X)
    RQ = R @ Q
    sv = np.linalg.svd(RQ, compute_uv=False)
    indicator = sv[..., -1]
    nullity = (sv < null_rel).sum(axis=-1)
    if with_map:
        return indicator, nullity, RQ @ np.swapaxes(Q, -1, -2)
    return indicator, nullity


def kernel_initial_states(op: OperatorSpec, psi1: np.ndarray, k: int) -> np.ndarray:
    """Initial states (``k x 2n``) spanning the ``k``-dimensional solution space."""
    M = boundary_map(op, psi1)
    _, _, vt = np.linalg.svd(M)
    v = vt[-k:]
    if op.periodic:
        return v
    return v @ op.left_map.T


# ---------------------------------------------------------------------------
# Lagrangian phase counts
# ---------------------------------------------------------------------------
PHASE_RTOL = 1e-9


class PhaseCounter:
    """Integer crossing count for a monotone family, from the winding of a Lagrangian frame.

    A Lagrangian subspace with orthonormal frame ``[P; Q]`` has the unitary
    ``Z = P + iQ``, and two such subspaces meet in the eigenvalue-one space
    of ``U_X U_Y^{-1}`` with ``U = Z conj(Z)^{-1}``. Following the propagated
    initial subspace in ``t`` with the subspace flow
    ``X' = (I - X X^T) K X`` (which keeps the frame orthonormal) and
    integrating ``d/dt arg det Z`` gives a continuous lift of
    ``arg det U_X`` that depends continuously on the family parameter.
    Subtracting the eigenphases of ``U_X U_Y^{-1}``, taken in ``(0, 2 pi]``,
    leaves ``2 pi`` times an integer ``N(s)``.

    The family must be nondecreasing in the parameter. Then the eigenphases all turn one way, so the
    crossings in ``[a, b)`` number exactly ``N(b) - N(a)``. The count relies
    on step control in ``t`` only, where the dynamics are as smooth as the
    coefficients, so crossings concentrated in a tiny parameter window are
    not missed.
    """

    def __init__(self, op: OperatorSpec, family: AffineFamily):
        self.family = family
        n, D = op.n, op.state_dim
        if op.periodic:
            # graphs in R^D x R^D under omega (+) (-omega); positions (x_p, y_q)
            self.pos = np.r_[0:n, D + n : 2 * D]
            self.mom = np.r_[n:D, D : D + n]
            self.X0 = np.vstack([np.eye(D), np.eye(D)]) / np.sqrt(2.0)
            Y = np.linalg.qr(np.vstack([np.eye(D), op.bc.P]))[0]
        else:
            self.pos, self.mom = np.r_[0:n], np.r_[n:D]
            self.X0 = np.linalg.qr(op.left_map)[0]
            Y = np.linalg.svd(op.right_map)[2][n:].T
        self.periodic = op.periodic
        self.UY = self._unitary(Y)
        self.c = float(np.angle(np.linalg.det(self.UY)))
        # increasing B raises the Hamiltonian of a first-order system and
        # lowers that of the companion system; the periodic graph pairing
        # reverses the orientation
        self.direction = (1 if op.order == "first" else -1) * (-1 if op.periodic else 1)

    def _z(self, X: np.ndarray) -> np.ndarray:
        return X[..., self.pos, :] + 1j * X[..., self.mom, :]

    def _unitary(self, X: np.ndarray) -> np.ndarray:
        Z = self._z(X)
        return Z @ np.linalg.inv(Z.conj())

    def _propagate(self, s: np.ndarray):
        m = s.size
        M, r = self.X0.shape
        K_of_t = self.family.generators(s)
        if self.periodic:
            D = M // 2

            def K_amb(t):
                K = np.zeros((m, M, M))
                K[:, D:, D:] = K_of_t(t)
                return K
        else:
            K_amb = K_of_t

        def rhs(t, y):
            X = y[: m * M * r].reshape(m, M, r)
            KX = K_amb(t) @ X
            F = KX - X @ (np.swapaxes(X, -1, -2) @ KX)
            dphi = np.trace(np.linalg.solve(self._z(X), self._z(F)), axis1=-2, axis2=-1).imag
            return np.concatenate([F.ravel(), dphi])

        phi0 = np.angle(np.linalg.det(self._z(self.X0)))
        y0 = np.concatenate([np.broadcast_to(self.X0, (m, M, r)).ravel(), np.full(m, phi0)])
        sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=PHASE_RTOL, atol=PHASE_RTOL)
        if not sol.success:
            raise IntegrationError(sol.message)
        y1 = sol.y[:, -1]
        X1 = np.linalg.qr(y1[: m * M * r].reshape(m, M, r))[0]
        return X1, y1[m * M * r :]

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        X1, phi = self._propagate(s)
        W = self._unitary(X1) @ np.linalg.inv(self.UY)
        theta = np.mod(self.direction * np.angle(np.linalg.eigvals(W)), 2 * np.pi)
        # an eigenvalue at one (a kernel) counts as a full turn; its phase is
        # twice the principal angle, hence the kernel threshold doubles
        theta = np.where((theta < 2 * NULL_REL) | (theta > 2 * np.pi - 2 * NULL_REL), 2 * np.pi, theta)
        lift = self.direction * (2 * phi - self.c)
        return np.rint((lift - theta.sum(axis=-1)) / (2 * np.pi)).astype(int)


# ---------------------------------------------------------------------------
# crossing scans
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Crossing:
    lam: float
    nullity: int
    width: float


@dataclass
class CrossingTrace:
    """Located crossings plus every sampled indicator value."""

    crossings: list = field(default_factory=list)
    lam: np.ndarray = field(default_factory=lambda: np.empty(0))
    indicator: np.ndarray = field(default_factory=lambda: np.empty(0))
    nullity: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def total(self) -> int:
        return int(sum(c.nullity for c in self.crossings))

    def shifted(self, offset: float) -> "CrossingTrace":
        return CrossingTrace(
            [Crossing(c.lam + offset, c.nullity, c.width) for c in self.crossings],
            self.lam + offset,
            self.indicator,
            self.nullity,
        )

    def rows(self):
        flagged = {c.lam for c in self.crossings}
        for lam, ind, nul in zip(self.lam, self.indicator, self.nullity):
            yield float(lam), float(ind), int(nul), int(float(lam) in flagged)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["lambda", "indicator", "nullity", "crossing"])
            for lam, ind, nul, flag in self.rows():
                w.writerow([f"{lam:.17g}", f"{ind:.17g}", nul, flag])


MAX_POINTS = 1 << 14
# initial-grid resolution: a step may move the boundary matrix by at most
# STEP_MOTION, and its chord must match the trapezoid of end tangents to
# CHORD_TOL; both are absolute since the matrix has norm at most 1
STEP_MOTION = 0.5
CHORD_TOL = 0.05
RESOLVE_PASSES = 40


class _Samples:
    """Accumulates every evaluated point for the exported trace."""

    def __init__(self, stats):
        self.stats = stats
        self.lam, self.ind, self.nul = [], [], []

    def __call__(self, x):
        out = self.stats(x)
        self.record(x, out)
        return out[0], out[1], (out[2] if len(out) > 2 else None)

    def record(self, x, out):
        self.lam.append(x), self.ind.append(out[0]), self.nul.append(out[1])


def _local_minima(v: np.ndarray) -> list[int]:
    """Indices of the local minima of a sampled run (plateaus report their first point)."""
    left = np.r_[np.inf, v[:-1]]
    right = np.r_[v[1:], np.inf]
    return list(np.flatnonzero((v < left) & (v <= right)))


def _resolve_grid(stats, x: np.ndarray, passes: int = RESOLVE_PASSES):
    """Refine ``x`` until the boundary matrices returned by ``stats`` are resolved.

    A boundary subspace can sweep through the terminal one within a single
    coarse step, leaving only a narrow dip in the indicator. The matrices
    themselves are smooth, so their tangents (forward differences with a
    tiny step) expose such a step: its chord disagrees with the end tangents
    or the tangents alone move the matrix too far. Flagged steps are split
    in four. Returns ``x``, the stats at ``x`` and the tangent norms.
    """
    for _ in range(passes):
        v, nn, N = stats(x)
        d = 1e-7 * np.maximum(1.0, np.abs(x))
        # step backwards at the right end so the probe stays inside the range
        d[-1] = -d[-1]
        _, _, Nd = stats(x + d)
        D = (Nd - N) / d[:, None, None]
        h = np.diff(x)
        chord = np.diff(N, axis=0)
        err = np.linalg.norm(chord - 0.5 * h[:, None, None] * (D[:-1] + D[1:]), 2, axis=(-2, -1))
        tang = np.linalg.norm(D, 2, axis=(-2, -1))
        motion = h * np.maximum(tang[:-1], tang[1:])
        bad = (err > CHORD_TOL) | (motion > STEP_MOTION)
        if not bad.any() or x.size > MAX_POINTS:
            return x, (v, nn, N), tang
        extra = np.concatenate([x[i] + h[i] * np.array([0.25, 0.5, 0.75]) for i in np.flatnonzero(bad)])
        x = np.sort(np.concatenate([x, extra]))
    v, nn, N = stats(x)
    return x, (v, nn, N), None


def _candidates(
    x: np.ndarray, v: np.ndarray, L_floor: float, safety: float, maps: np.ndarray | None = None, tangents: np.ndarray | None = None
):
    """Maximal runs of sample intervals on which the indicator may vanish.

    An interval ``[x_i, x_{i+1}]`` can contain a zero of a function with
    Lipschitz constant ``L`` only if ``v_i + v_{i+1} <= L (x_{i+1} - x_i)``.
    ``L`` is estimated as ``safety`` times the largest sampled slope within two
    intervals, and never below ``L_floor``. When the underlying matrices
    ``maps`` are given their slope counts too: a smallest singular value
    moves no faster than its matrix, and the matrix has no kink to hide
    behind a coarse sample.
    """
    h = np.diff(x)
    slope = np.abs(np.diff(v)) / h
    if maps is not None:
        slope = np.maximum(slope, np.linalg.norm(np.diff(maps, axis=0), 2, axis=(-2, -1)) / h)
    if tangents is not None:
        slope = np.maximum(slope, np.maximum(tangents[:-1], tangents[1:]))
    L = safety * maximum_filter1d(slope, size=5, mode="nearest")
    L = np.maximum(L, L_floor)
    ok = v[:-1] + v[1:] <= L * h
    runs = []
    i = 0
    while i < ok.size:
        if ok[i]:
            j = i
            while j + 1 < ok.size and ok[j + 1]:
                j += 1
            runs.append((x[i], x[j + 1], float(L[i : j + 1].max())))
            i = j + 1
        else:
            i += 1
    return runs


def _reconcile(counter: PhaseCounter, crossings: list, lo: float, hi: float, tol: float, merge: float) -> list:
    """Check scanned crossings on ``[lo, hi)`` against a count function and repair disagreements.

    Intervals whose scanned total differs from the count are halved until
    they agree or are narrower than ``tol``; a narrow interval still in
    disagreement becomes one crossing carrying the counted multiplicity.
    """
    keep, jumps = [], []
    pending = [(lo, hi, *counter(np.array([lo, hi])))]
    while pending:
        split = []
        for a, b, Na, Nb in pending:
            inside = [c for c in crossings if a <= c.lam < b]
            if sum(c.nullity for c in inside) == Nb - Na:
                keep += inside
            elif Nb < Na:
                raise CrossingClusterError(f"crossing count decreases on [{a!r}, {b!r}); the family is not monotone")
            elif b - a <= tol or b - a <= 8 * np.spacing(max(abs(a), abs(b), 1.0)):
                jumps.append((a, b, int(Nb - Na)))
            else:
                split.append((a, b, Na, Nb))
        if not split:
            break
        mids = np.array([0.5 * (a + b) for a, b, _, _ in split])
        Nm = counter(mids)
        pending = []
        for (a, b, Na, Nb), m, nm in zip(split, mids, Nm):
            pending += [(a, m, Na, nm), (m, b, nm, Nb)]

    merged: list[list] = []
    for a, b, k in sorted(j for j in jumps if j[2] > 0):
        if merged and a - merged[-1][1] <= merge:
            merged[-1][1], merged[-1][2] = b, merged[-1][2] + k
        else:
            merged.append([a, b, k])
    added = [Crossing(float(a0 if a0 == lo else 0.5 * (a0 + b)), k, float(b - a0)) for a0, b, k in merged]
    return sorted(keep + added, key=lambda c: c.lam)


def scan_crossings(
    stats: Callable[[np.ndarray], tuple],
    grid: np.ndarray,
    *,
    include_lo: bool = True,
    include_hi: bool = False,
    tol: float = CROSSING_TOL,
    merge: float = MERGE_TOL,
    subdivide: int = 16,
    safety: float = 3.0,
    max_levels: int = 64,
    counter: PhaseCounter | None = None,
) -> CrossingTrace:
    """Locate every zero of the indicator returned by ``stats`` on ``[grid[0], grid[-1]]``.

    The indicator (a smallest singular value) is Lipschitz and
    V-shaped at a crossing, so it never changes sign. Brackets are kept
    while the sampled values are compatible with a zero under a local
    Lipschitz bound and are subdivided until narrower than ``tol`` with a
    sample showing a numerical kernel (or until floating-point resolution).
    A surviving bracket is a crossing if the boundary map has a nontrivial
    numerical kernel at its best point. Crossings closer than ``merge`` form
    one cluster whose nullity is the kernel dimension at its best point.

    A ``counter`` for a monotone family (half-open range only) certifies
    the result: wherever the counted crossings disagree with the scan, the
    count function is bisected and its jumps replace the scanned crossings.
    This catches crossings too steep for any sample to show.
    """
    if counter is not None and (not include_lo or include_hi):
        raise ValueError("a crossing counter certifies half-open ranges [lo, hi) only")
    grid = np.asarray(grid, dtype=float)
    lo, hi = grid[0], grid[-1]
    sampler = _Samples(stats)
    tangents = None
    if len(stats(grid[:1])) > 2:
        grid, (v, nn, maps), tangents = _resolve_grid(stats, grid)
        sampler.record(grid, (v, nn))
    else:
        v, _, maps = sampler(grid)
    # safety 3 leaves room for a steep dip hidden under a shallower neighbour
    h0 = np.diff(grid)
    brackets = [
        (a, b, L, float(h0[(grid >= a)[:-1] & (grid <= b)[1:]].max()))
        for a, b, L in _candidates(grid, v, 0.0, safety, maps, tangents)
    ]

    best = []
    for _ in range(max_levels):
        if not brackets:
            break
        # refine at the bracket's own granularity so that runs spanning a
        # whole parent interval still shrink
        counts = [int(min(max(subdivide, np.ceil(subdivide * (b - a) / h)), MAX_POINTS)) for a, b, _, h in brackets]
        pts = np.concatenate([np.linspace(a, b, n + 1) for (a, b, _, _), n in zip(brackets, counts)])
        pv, pn, pm = sampler(pts)
        nxt = []
        start = 0
        for (a, b, L, _), n in zip(brackets, counts):
            x, vv, nn = pts[start : start + n + 1], pv[start : start + n + 1], pn[start : start + n + 1]
            mm = None if pm is None else pm[start : start + n + 1]
            start += n + 1
            hc = (b - a) / n
            # at the tolerance a steep crossing may still sit just above the
            # kernel threshold; keep refining until a sample shows the kernel
            # or the bracket is excluded
            if (hc <= tol and nn.max() > 0) or hc <= 8 * np.spacing(max(abs(a), abs(b), 1.0)):
                for j in _local_minima(vv):
                    best.append((x[j], vv[j], int(nn[j]), max(b - a, hc)))
                continue
            nxt += [(c, d, L2, hc) for c, d, L2 in _candidates(x, vv, L, safety, mm)]
        brackets = nxt
    else:
        raise CrossingClusterError(f"{len(brackets)} brackets still unresolved after {max_levels} refinements")

    found = sorted((b for b in best if b[2] > 0), key=lambda b: b[0])
    clusters: list[list] = []
    for b in found:
        if clusters and b[0] - clusters[-1][-1][0] <= merge:
            clusters[-1].append(b)
        else:
            clusters.append([b])

    crossings = []
    for cl in clusters:
        lam, _, nullity, width = min(cl, key=lambda b: b[1])
        width = max(width, cl[-1][0] - cl[0][0])
        if lam - lo <= merge:
            if not include_lo:
                continue
            lam = lo
        if hi - lam <= merge:
            if not include_hi:
                continue
            lam = hi
        crossings.append(Crossing(float(lam), int(nullity), float(width)))
    if counter is not None:
        crossings = _reconcile(counter, crossings, lo, hi, tol, merge)

    if crossings:
        sampler(np.array([c.lam for c in crossings]))
    lam_all = np.concatenate(sampler.lam)
    ind_all = np.concatenate(sampler.ind)
    nul_all = np.concatenate(sampler.nul)
    lam_u, idx = np.unique(lam_all, return_index=True)
    return CrossingTrace(crossings, lam_u, ind_all[idx], nul_all[idx].astype(int))


def family_stats(op: OperatorSpec, family: AffineFamily):
    def stats(s):
        return boundary_stats(op, family.psi1(s), with_map=True)

    return stats
