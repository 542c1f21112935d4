"""Nullity, relative index, absolute index and the quadratic-form indices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import (
    HOMOTOPY_SAMPLES,
    AffineFamily,
    CrossingTrace,
    PhaseCounter,
    boundary_stats,
    family_stats,
    fundamental_matrix,
    scan_crossings,
)
from .operator import Bolza, OperatorSpec, SturmLiouville, build_operator
from .paths import MatrixPath, as_path
from .spectral import SpectralModel, build_spectral_model, eigen_scan, gram_matrix

# crossings per unit of |B2 - B1| are at most ~1/pi; this keeps several
# samples between neighbouring crossings on long homotopies
SAMPLE_SPACING = 0.05


class NotStrictError(ValueError):
    """The homotopy endpoints do not satisfy ``B1 < B2``."""


class CertificateError(RuntimeError):
    """The lower end of a lambda-scan is not crossing-free."""


class SmallnessError(ValueError):
    """``|B| + eps < beta`` fails for a quadratic-form computation."""


def nullity(op: OperatorSpec, B) -> int:
    """Dimension of the solution space of ``(A - B) x = 0`` under the boundary conditions."""
    B = as_path(B, op.dim)
    _, nul = boundary_stats(op, fundamental_matrix(op, B, 1.0)[None])
    return int(nul[0])


def _samples(length: float, base: int = HOMOTOPY_SAMPLES) -> int:
    return max(base, int(np.ceil(length / SAMPLE_SPACING)) + 1)


def homotopy_trace(op: OperatorSpec, B1, B2, *, strict: bool = True, samples: int | None = None) -> CrossingTrace:
    """Crossings of ``(1 - s) B1 + s B2`` for ``s`` in ``[0, 1)``.

    With ``strict`` the pair is required to satisfy ``B1 < B2``. Equal
    endpoints give an empty trace.
    """
    B1, B2 = as_path(B1, op.dim), as_path(B2, op.dim)
    diff = B2 - B1
    # a constant homotopy has no crossings by convention
    if diff.equals(MatrixPath.zeros(op.dim)):
        return CrossingTrace()
    if strict and not B1.lt(B2):
        raise NotStrictError("B1 < B2 violated")
    n = samples or _samples(diff.supnorm)
    family = AffineFamily(op, B1, diff)
    # the phase count certifies monotone homotopies only
    counter = PhaseCounter(op, family) if strict or B1.lt(B2) else None
    return scan_crossings(family_stats(op, family), np.linspace(0.0, 1.0, n), include_lo=True, include_hi=False, counter=counter)


def homotopy_nullity_sum(op: OperatorSpec, B1, B2, samples: int | None = None) -> int:
    """``sum over s in [0,1) of nullity((1 - s) B1 + s B2)`` for ``B1 < B2``."""
    return homotopy_trace(op, B1, B2, strict=True, samples=samples).total


def _comparison_level(B1: MatrixPath, B2: MatrixPath) -> float:
    return max(B1.supnorm, B2.supnorm) + 1.0


def relative_index(op: OperatorSpec, B1, B2) -> int:
    """``I(B1, B2) = I(B1, kI) - I(B2, kI)`` with ``k = max(|B1|, |B2|) + 1``."""
    B1, B2 = as_path(B1, op.dim), as_path(B2, op.dim)
    if B1.equals(B2):
        return 0
    kI = MatrixPath.scalar(_comparison_level(B1, B2), op.dim)
    return homotopy_nullity_sum(op, B1, kI) - homotopy_nullity_sum(op, B2, kI)


# ---------------------------------------------------------------------------
# absolute index
# ---------------------------------------------------------------------------
@dataclass
class IndexReport:
    """Index ``i`` and nullity ``nu`` of one matrix path.

    ``anchor`` is the reference path with its assigned index; ``traces`` holds
    every crossing scan used (the first is the main one).
    """

    i: int
    nu: int
    route: str
    anchor: tuple
    traces: list = field(default_factory=list)
    certificate: dict = field(default_factory=dict)

    @property
    def trace(self) -> CrossingTrace:
        return self.traces[0] if self.traces else CrossingTrace()

    def to_dict(self) -> dict:
        return {
            "i": self.i,
            "nu": self.nu,
            "route": self.route,
            "anchor": {"B": self.anchor[0].describe(), "i": self.anchor[1]},
            "crossings": [
                {"lambda": c.lam, "nullity": c.nullity, "width": c.width} for t in self.traces for c in t.crossings
            ],
            "certificate": self.certificate,
        }


def sl_lower_bound(bc: SturmLiouville) -> float:
    """A lower bound for the spectrum of ``-x''`` under separated conditions.

    Robin terms with the wrong sign contribute at most ``c (c + 1)`` with
    ``c`` the sum of their coefficients (trace inequality on [0, 1]).
    """
    a = max(0.0, -1.0 / np.tan(bc.alpha)) if bc.alpha != 0 else 0.0
    b = max(0.0, 1.0 / np.tan(bc.beta)) if bc.beta != np.pi else 0.0
    c = a + b
    return -c * (c + 1.0)


def spectrum_bottom(op: OperatorSpec) -> float:
    """Smallest eigenvalue of a second-order operator."""
    if op.order != "second":
        raise ValueError("only second-order operators are bounded below")
    lb = sl_lower_bound(op.bc)
    pairs = eigen_scan(op, (lb - 1.0, np.pi**2 + 1.0))
    return pairs[0].lam if pairs else lb


def lambda_scan(op: OperatorSpec, B, lam_min: float | None = None) -> tuple[CrossingTrace, dict]:
    """Crossings of ``B + lam I`` for ``lam`` in ``[lam_min, 0)``."""
    B = as_path(B, op.dim)
    if lam_min is None:
        lam_min = spectrum_bottom(op) - B.max_eigenvalue() - 1.0
    lam_min = min(float(lam_min), -1.0)
    cert_nu = nullity(op, B + lam_min)
    cert = {"lambda_min": lam_min, "nullity_at_lambda_min": cert_nu}
    if cert_nu != 0:
        raise CertificateError(f"nullity(B + lambda_min I) = {cert_nu} at lambda_min = {lam_min}")
    length = -lam_min
    family = AffineFamily(op, B, MatrixPath.scalar(1.0, op.dim))
    grid = np.linspace(lam_min, 0.0, _samples(length))
    trace = scan_crossings(family_stats(op, family), grid, include_lo=True, include_hi=False, counter=PhaseCounter(op, family))
    return trace, cert


def default_anchor(op: OperatorSpec, periodic_anchor: int = 0) -> tuple[MatrixPath, int]:
    """Reference path and its assigned index for first-order operators."""
    n = op.n
    if isinstance(op.bc, Bolza):
        upper, lower = MatrixPath.zeros(n), MatrixPath.scalar(1.0, n)
        sl = build_operator(SturmLiouville(op.bc.alpha, op.bc.beta), "second", n, op.grid)
        trace, _ = lambda_scan(sl, MatrixPath.zeros(n))
        return MatrixPath.block_diag(upper, lower), trace.total
    return MatrixPath.zeros(op.dim), int(periodic_anchor)


def index(op: OperatorSpec, B, anchor: tuple | None = None, periodic_anchor: int = 0) -> IndexReport:
    """Index and nullity of ``B``.

    Second-order operators use the negative-shift count
    ``i(B) = sum_{lam < 0} nullity(B + lam I)``. First-order operators add
    the relative index from ``anchor`` (default: ``diag{0, I}`` with the
    index of the matching second-order problem for Bolza conditions, and
    ``(0, periodic_anchor)`` for periodic ones).
    """
    B = as_path(B, op.dim)
    nu = nullity(op, B)
    if op.order == "second" and anchor is None:
        trace, cert = lambda_scan(op, B)
        ref = B + cert["lambda_min"]
        return IndexReport(trace.total, nu, "lambda-scan", (ref, 0), [trace], cert)

    B0, i0 = anchor if anchor is not None else default_anchor(op, periodic_anchor)
    B0 = as_path(B0, op.dim)
    if B0.equals(B):
        return IndexReport(int(i0), nu, "shooting-homotopy", (B0, int(i0)), [CrossingTrace()])
    if B0.lt(B):
        tr = homotopy_trace(op, B0, B)
        return IndexReport(int(i0) + tr.total, nu, "shooting-homotopy", (B0, int(i0)), [tr])
    if B.lt(B0):
        tr = homotopy_trace(op, B, B0)
        return IndexReport(int(i0) - tr.total, nu, "shooting-homotopy", (B0, int(i0)), [tr])
    kI = MatrixPath.scalar(_comparison_level(B0, B), op.dim)
    t0 = homotopy_trace(op, B0, kI)
    t1 = homotopy_trace(op, B, kI)
    return IndexReport(int(i0) + t0.total - t1.total, nu, "shooting-homotopy", (B0, int(i0)), [t1, t0])


# ---------------------------------------------------------------------------
# quadratic-form route
# ---------------------------------------------------------------------------
@dataclass
class QFormIndices:
    """Spectral index ``i_beta``, nullity ``nu_beta`` and the eigenvalues ``mu`` of the form operator."""

    i_beta: int
    nu_beta: int
    mu: np.ndarray
    tol: float


def qform_matrix(model: SpectralModel, B) -> np.ndarray:
    """Truncated matrix of the self-adjoint form operator on ``E`` (plus and zero modes).

    ``B`` may be a :class:`MatrixPath` or samples on the model nodes.
    """
    G = gram_matrix(model, B, model.epsilon)
    T = model.scale[:, None] * G * model.scale[None, :]
    return _schur(model, T)


def _schur(blocks, T: np.ndarray) -> np.ndarray:
    """Eliminate the minus block of ``T`` and add ``2`` on the zero block."""
    E, M = blocks.E, blocks.minus
    TEE = T[np.ix_(E, E)]
    if M.size:
        TEM = T[np.ix_(E, M)]
        TMM = T[np.ix_(M, M)]
        TEE = TEE - TEM @ np.linalg.solve(np.eye(M.size) + TMM, TEM.T)
    P0 = np.isin(E, blocks.zero).astype(float)
    out = 2.0 * np.diag(P0) + TEE
    return 0.5 * (out + out.T)


def qform_indices(model: SpectralModel, B, null_tol: float = 1e-8) -> QFormIndices:
    """``i_beta = #{mu > 1}`` and ``nu_beta = #{mu = 1}`` for the form operator's eigenvalues ``mu``.

    Eigenvalues within ``tol`` of 1 count towards ``nu_beta``. ``tol`` is the
    larger of ``null_tol`` and the change of those eigenvalues when the
    window is halved, so Galerkin truncation error is not mistaken for a
    nonzero gap.
    """
    B = as_path(B, model.op.dim) if not isinstance(B, np.ndarray) else B
    if isinstance(B, MatrixPath) and B.supnorm + model.epsilon >= model.beta:
        raise SmallnessError(f"|B| + eps = {B.supnorm + model.epsilon:g} >= beta = {model.beta:g}")
    G = gram_matrix(model, B, model.epsilon)
    T = model.scale[:, None] * G * model.scale[None, :]
    mu = np.linalg.eigvalsh(_schur(model, T))

    tol = null_tol
    keep = np.flatnonzero(np.abs(model.lamp) <= model.window / 2.0)
    if keep.size < model.size and keep.size:
        half = _restrict(model, keep)
        Th = T[np.ix_(keep, keep)]
        mu_h = np.linalg.eigvalsh(_schur(half, Th))
        near = np.abs(mu - 1.0) < 1e-2
        near_h = np.abs(mu_h - 1.0) < 1e-2
        if near.any() and near.sum() == near_h.sum():
            drift = np.abs(np.sort(mu[near]) - np.sort(mu_h[near_h])).max()
            tol = max(tol, drift)
    i_beta = int(np.sum(mu > 1.0 + tol))
    nu_beta = int(np.sum(np.abs(mu - 1.0) <= tol))
    return QFormIndices(i_beta, nu_beta, mu, float(tol))


@dataclass
class _Blocks:
    E: np.ndarray
    minus: np.ndarray
    zero: np.ndarray


def _restrict(model: SpectralModel, keep: np.ndarray) -> _Blocks:
    pos = {j: k for k, j in enumerate(keep)}
    remap = lambda idx: np.array([pos[j] for j in idx if j in pos], dtype=int)
    return _Blocks(remap(model.E), remap(model.minus), remap(model.zero))


# ---------------------------------------------------------------------------
# cross-route checks
# ---------------------------------------------------------------------------
@dataclass
class Check:
    name: str
    lhs: object
    rhs: object
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "passed": self.passed}


@dataclass
class ConsistencyReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _check(name, lhs, rhs) -> Check:
    return Check(name, lhs, rhs, bool(lhs == rhs))


def consistency_report(op: OperatorSpec, B, model: SpectralModel | None = None) -> ConsistencyReport:
    """Compare index and nullity of ``B`` across independent routes."""
    B = as_path(B, op.dim)
    checks = []
    rep = index(op, B)
    checks.append(Check("nullity range", rep.nu, op.max_nullity, rep.nu <= op.max_nullity))
    if model is None:
        model = build_spectral_model(op, bound=B.supnorm)
    q = qform_indices(model, B)
    checks.append(_check("qform nullity = shooting nullity", q.nu_beta, rep.nu))

    if op.order == "second":
        checks.append(_check("qform index = lambda-scan index", q.i_beta, rep.i))
        lifted_op = build_operator(Bolza(op.bc.alpha, op.bc.beta), "first", op.n, op.grid)
        lifted = MatrixPath.block_diag(B, MatrixPath.scalar(1.0, op.n))
        frep = index(lifted_op, lifted)
        checks.append(_check("first-order lift index", frep.i, rep.i))
        checks.append(_check("first-order lift nullity", frep.nu, rep.nu))
    else:
        B0, i0 = rep.anchor
        q0 = qform_indices(model, B0) if B0.supnorm + model.epsilon < model.beta else None
        if q0 is not None:
            checks.append(_check("qform index difference = relative index", q.i_beta - q0.i_beta, rep.i - i0))

    B0 = rep.anchor[0]
    if B0.lt(B):
        checks.append(_check("homotopy sum = relative index", homotopy_nullity_sum(op, B0, B), relative_index(op, B0, B)))
    elif B.lt(B0):
        checks.append(_check("homotopy sum = relative index", homotopy_nullity_sum(op, B, B0), relative_index(op, B, B0)))
    else:
        checks.append(_check("anchor relative index", relative_index(op, B0, B), rep.i - rep.anchor[1]))
    return ConsistencyReport(checks)
