"""Critical points of the reduced functional and checks of the existence theorem."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .index import index, nullity, qform_indices
from .parallel import thread_map
from .paths import MatrixPath
from .reduction import FP_TOL, ContractionError, NonlinearProblem, ReducedPoint
from .spectral import SpectralModel

log = logging.getLogger(__name__)

RADII = (0.5, 1.0, 2.0, 4.0)
START_MODES = 8


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 64
    seed: int = 42
    start_radius: float = 1.0
    newton_tol: float = 1e-10
    max_newton_iters: int = 60
    deflation_radius: float = 1e-4
    null_tol: float = 1e-7
    fp_tol: float = FP_TOL

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.deflation_radius <= 0:
            raise ValueError("deflation_radius must be positive")
        if self.newton_tol <= 0 or self.max_newton_iters < 1:
            raise ValueError("newton_tol must be positive and max_newton_iters >= 1")


@dataclass(eq=False)
class CriticalPoint:
    """A converged critical point of the reduced functional."""

    ustar: np.ndarray
    value: float
    gradnorm: float
    morse_index: int
    nullity: int
    hessian_eigs: np.ndarray
    point: ReducedPoint = field(repr=False)
    iterations: int = 0
    distinct_id: int = -1

    @property
    def trajectory(self) -> np.ndarray:
        return self.point.x

    @property
    def residual(self) -> float:
        return float(np.linalg.norm(self.point.galerkin_residual))

    @property
    def tail(self) -> float:
        return self.point.tail_estimate

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.ustar))

    def is_trivial(self, radius: float) -> bool:
        return self.norm <= radius

    def to_dict(self) -> dict:
        p = self.point
        return {
            "id": self.distinct_id,
            "value": self.value,
            "gradnorm": self.gradnorm,
            "morse_index": self.morse_index,
            "nullity": self.nullity,
            "norm": self.norm,
            "residual": self.residual,
            "tail_estimate": self.tail,
            "contraction_factor": p.contraction_factor,
            "minus_condition": p.minus_condition,
            "newton_iterations": self.iterations,
            "ustar": self.ustar.tolist(),
        }


@dataclass
class Divergence:
    start: np.ndarray
    iterations: int
    gradnorm: float
    reason: str
    trace: list = field(default_factory=list)


def classify(point: ReducedPoint, null_tol: float = 1e-7):
    """Morse index and nullity of the reduced Hessian with threshold ``null_tol * |a''|``."""
    eigs = np.linalg.eigvalsh(point.hessian)
    scale = np.abs(eigs).max() if eigs.size else 1.0
    thr = null_tol * max(scale, np.finfo(float).tiny)
    return int(np.sum(eigs < -thr)), int(np.sum(np.abs(eigs) <= thr)), eigs


def newton_solve(model: SpectralModel, prob: NonlinearProblem, start, cfg: SearchConfig = SearchConfig()):
    """Damped Newton iteration on ``a'(u) = 0``.

    Steps solve ``a'' d = -a'`` and are halved until ``|a'|^2`` decreases
    sufficiently. If that fails the step ``-a'' a'`` (steepest descent for
    ``|a'|^2``, valid at saddles as well) is tried. Returns a
    :class:`CriticalPoint` or a :class:`Divergence`.
    """
    u = np.array(start, dtype=float)
    trace = []
    try:
        p = ReducedPoint(model, prob, u, cfg.fp_tol)
    except ContractionError as exc:
        return Divergence(u, 0, np.inf, str(exc))
    for it in range(cfg.max_newton_iters + 1):
        g = p.gradient
        gn = float(np.linalg.norm(g))
        trace.append(gn)
        if not np.isfinite(gn):
            return Divergence(np.array(start, dtype=float), it, gn, "non-finite gradient", trace)
        if gn <= cfg.newton_tol:
            morse, nul, eigs = classify(p, cfg.null_tol)
            return CriticalPoint(p.ustar.copy(), p.value, gn, morse, nul, eigs, p, it)
        if it == cfg.max_newton_iters:
            break
        Hm = p.hessian
        dirs = []
        try:
            d = np.linalg.solve(Hm, -g)
            if np.all(np.isfinite(d)):
                dirs.append(d)
        except np.linalg.LinAlgError:
            pass
        dirs.append(-(Hm @ g))
        moved = False
        for d in dirs:
            alpha = 1.0
            for _ in range(40):
                try:
                    q = ReducedPoint(model, prob, p.ustar + alpha * d, cfg.fp_tol, guess=p.uminus)
                except ContractionError:
                    q = None
                if q is not None and q.gradnorm**2 <= (1.0 - 1e-4 * alpha) * gn**2:
                    p, moved = q, True
                    break
                alpha *= 0.5
            if moved:
                break
        if not moved:
            return Divergence(np.array(start, dtype=float), it, gn, "line search failed", trace)
    return Divergence(np.array(start, dtype=float), cfg.max_newton_iters, trace[-1], "max iterations exceeded", trace)


def start_points(model: SpectralModel, cfg: SearchConfig) -> np.ndarray:
    """Deterministic starting coefficients: ``0``, mode-aligned pairs, random sphere points."""
    E = model.E
    m = E.size
    order = np.argsort(np.abs(model.lamp[E]), kind="stable")
    low = order[: min(START_MODES, m)]
    scale = cfg.start_radius * np.sqrt(np.abs(model.lamp[E][low[0]])) if m else 1.0
    starts = [np.zeros(m)]
    # zero-block modes first, then the lowest plus modes
    aligned = sorted(low, key=lambda k: (model.lamp[E[k]] > 0, abs(model.lamp[E[k]])))
    for k in aligned:
        for sgn in (1.0, -1.0):
            v = np.zeros(m)
            v[k] = sgn * scale
            starts.append(v)
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.starts):
        r = RADII[i % len(RADII)] * scale
        v = rng.normal(size=low.size)
        v *= r / np.linalg.norm(v)
        s = np.zeros(m)
        s[low] = v
        starts.append(s)
    return np.array(starts)


def deduplicate(points: list, radius: float) -> list:
    """Keep one representative per ``radius``-cluster, processing by value then norm."""
    ordered = sorted(points, key=lambda c: (c.value, c.norm))
    kept = []
    for c in ordered:
        if all(np.linalg.norm(c.ustar - k.ustar) > radius for k in kept):
            kept.append(c)
    for i, c in enumerate(kept):
        c.distinct_id = i
    return kept


@dataclass
class SearchResult:
    points: list
    divergences: list
    starts: int

    def nontrivial(self, radius: float) -> list:
        return [c for c in self.points if not c.is_trivial(radius)]


def multi_start_search(model: SpectralModel, prob: NonlinearProblem, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Newton from every start in :func:`start_points`; distinct critical points sorted by value."""
    starts = start_points(model, cfg)
    results = thread_map(lambda s: newton_solve(model, prob, s, cfg), starts)
    found = [r for r in results if isinstance(r, CriticalPoint)]
    div = [r for r in results if isinstance(r, Divergence)]
    for d in div:
        log.info("start diverged after %d iterations: %s", d.iterations, d.reason)
    return SearchResult(deduplicate(found, cfg.deflation_radius), div, len(starts))


# ---------------------------------------------------------------------------
# theorem hypotheses and conclusion
# ---------------------------------------------------------------------------
@dataclass
class Item:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, **self.detail}


@dataclass
class TheoremReport:
    hypotheses: list
    identities: list
    predicted: int
    found: int
    search: SearchResult | None = field(default=None, repr=False)

    @property
    def hypotheses_hold(self) -> bool:
        return all(h.passed for h in self.hypotheses if not h.name.startswith("(iv)"))

    @property
    def conclusion_holds(self) -> bool:
        return self.found >= self.predicted

    @property
    def passed(self) -> bool:
        return self.hypotheses_hold and self.conclusion_holds and all(i.passed for i in self.identities)

    def item(self, name: str) -> Item:
        for it in self.hypotheses + self.identities:
            if it.name.startswith(name):
                return it
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "hypotheses_hold": self.hypotheses_hold,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "identities": [i.to_dict() for i in self.identities],
            "predicted_nontrivial": self.predicted,
            "found_nontrivial": self.found,
            "conclusion": "found >= predicted" if self.conclusion_holds else "found < predicted",
        }


def sandwich_check(prob: NonlinearProblem, B1: MatrixPath, B2: MatrixPath, probes: int = 2000, seed: int = 0, tol: float = 1e-10):
    """Smallest eigenvalues of ``hessH - B1`` and ``B2 - hessH`` over random probes with ``|x| >= r``."""
    rng = np.random.default_rng(seed)
    d = prob.dim
    t = rng.uniform(0.0, 1.0, probes)
    v = rng.normal(size=(probes, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = max(prob.r, 1e-12)
    radii = r * np.exp(rng.uniform(0.0, np.log(1e3), probes))
    radii[: probes // 10] = r
    x = v * radii[:, None]
    Hx = prob.hessH(t, x)
    lower = np.linalg.eigvalsh(Hx - B1(t)).min()
    upper = np.linalg.eigvalsh(B2(t) - Hx).min()
    return float(lower), float(upper), bool(lower >= -tol and upper >= -tol)


def solution_hessian_path(prob: NonlinearProblem, cp: CriticalPoint) -> MatrixPath:
    """``t -> hessH(t, x0(t))`` along a found solution."""
    return MatrixPath(lambda t: prob.hessH(t, cp.point.trajectory(t)), prob.dim, name="hessH(t,x0)")


def verify_theorem(
    model: SpectralModel,
    prob: NonlinearProblem,
    B0: MatrixPath | None = None,
    B1: MatrixPath | None = None,
    B2: MatrixPath | None = None,
    cfg: SearchConfig = SearchConfig(),
    search: SearchResult | None = None,
    anchor=None,
) -> TheoremReport:
    """Check the existence theorem's hypotheses on ``prob`` and compare its prediction with a search."""
    op = prob.op
    B0 = B0 if B0 is not None else prob.B0
    B1 = B1 if B1 is not None else prob.B1
    B2 = B2 if B2 is not None else prob.B2
    if B0 is None or B1 is None or B2 is None:
        raise ValueError("comparison matrices B0, B1, B2 are required")

    r0, r1, r2 = (index(op, B, anchor=anchor) for B in (B0, B1, B2))
    hyps = []
    t = np.linspace(0.0, 1.0, 65)
    g0 = float(np.abs(prob.gradH(t, np.zeros((t.size, prob.dim)))).max())
    hyps.append(Item("(i) gradH(t,0) = 0", g0 <= 1e-12, {"max_abs": g0}))
    hyps.append(Item("(ii) i(B1) = i(B2)", r1.i == r2.i, {"i_B1": r1.i, "i_B2": r2.i}))
    hyps.append(Item("(ii) nu(B2) = 0", r2.nu == 0, {"nu_B2": r2.nu}))
    lo, hi, ok = sandwich_check(prob, B1, B2)
    hyps.append(Item("(ii) B1 <= hessH <= B2 for |x| >= r", ok, {"r": prob.r, "min_eig_lower": lo, "min_eig_upper": hi}))
    in_gap = r0.i <= r1.i <= r0.i + r0.nu
    hyps.append(Item("(iii) i(B1) not in [i(B0), i(B0)+nu(B0)]", not in_gap, {"i_B0": r0.i, "nu_B0": r0.nu, "i_B1": r1.i}))
    diff = abs(r1.i - r0.i)
    need = op.max_nullity
    iv_n = r0.nu == 0 and diff >= need
    hyps.append(Item("(iv) nu(B0) = 0 and |i(B1) - i(B0)| >= n", iv_n, {"nu_B0": r0.nu, "difference": diff, "bound": need}))

    hypotheses_ok = all(h.passed for h in hyps if not h.name.startswith("(iv)"))

    if search is None:
        search = multi_start_search(model, prob, cfg)
    nontriv = search.nontrivial(cfg.deflation_radius)
    if nontriv:
        nus = [nullity_along(prob, cp) for cp in nontriv]
        iv_sol = r0.nu == 0 and all(diff >= nu for nu in nus)
        hyps.append(Item("(iv') nu(B0) = 0 and |i(B1) - i(B0)| >= nu(hessH(x0))", iv_sol, {"solution_nullities": nus, "difference": diff}))

    predicted = 0
    if hypotheses_ok:
        predicted = 2 if iv_n else 1

    ids = []
    theta = next((c for c in search.points if c.is_trivial(cfg.deflation_radius)), None)
    q0 = qform_indices(model, B0)
    if theta is not None:
        ids.append(Item("m-(a''(theta)) = i_beta(B0)", theta.morse_index == q0.i_beta, {"morse_theta": theta.morse_index, "i_beta_B0": q0.i_beta}))
    if B1.supnorm + model.epsilon < model.beta:
        q1 = qform_indices(model, B1)
        ids.append(
            Item(
                "i_beta(B1) - i_beta(B0) = i(B1) - i(B0)",
                q1.i_beta - q0.i_beta == r1.i - r0.i,
                {"qform_difference": q1.i_beta - q0.i_beta, "index_difference": r1.i - r0.i},
            )
        )
    return TheoremReport(hyps, ids, predicted, len(nontriv), search)


def nullity_along(prob: NonlinearProblem, cp: CriticalPoint) -> int:
    """Nullity of the linearisation at a found solution."""
    return nullity(prob.op, solution_hessian_path(prob, cp))
