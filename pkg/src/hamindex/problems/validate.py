"""Finite-difference checks of user-supplied derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..reduction import NonlinearProblem

FD_TOL = 1e-6


@dataclass
class FDReport:
    grad_error: float
    hess_error: float
    symmetry_error: float
    origin_gradient: float
    failures: list = field(default_factory=list)
    tol: float = FD_TOL

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "grad_error": self.grad_error,
            "hess_error": self.hess_error,
            "symmetry_error": self.symmetry_error,
            "origin_gradient": self.origin_gradient,
            "failures": self.failures,
        }


def _rel(err: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return np.abs(err) / np.maximum(1.0, np.abs(ref))


def fd_validate(prob: NonlinearProblem, probes: int = 20, seed: int = 0, tol: float = FD_TOL, scale: float = 2.0) -> FDReport:
    """Compare ``gradH`` with central differences of ``H`` and ``hessH`` with those of ``gradH``.

    Errors are relative, ``|fd - exact| / max(1, |exact|)``, maximised over
    ``probes`` random points ``t ~ U(0, 1)``, ``x ~ N(0, scale^2)``. Each
    failing component is named in ``failures``.
    """
    rng = np.random.default_rng(seed)
    d = prob.dim
    t = rng.uniform(0.0, 1.0, probes)
    x = rng.normal(0.0, scale, (probes, d))
    h = 1e-5
    g = prob.gradH(t, x)
    Hm = prob.hessH(t, x)
    g_fd = np.empty_like(g)
    H_fd = np.empty_like(Hm)
    for i in range(d):
        dx = np.zeros(d)
        dx[i] = h
        g_fd[:, i] = (prob.H(t, x + dx) - prob.H(t, x - dx)) / (2 * h)
        H_fd[:, :, i] = (prob.gradH(t, x + dx) - prob.gradH(t, x - dx)) / (2 * h)
    ge = _rel(g_fd - g, g)
    he = _rel(H_fd - Hm, Hm)
    sym = float(np.abs(Hm - np.swapaxes(Hm, 1, 2)).max()) if probes else 0.0
    g0 = float(np.abs(prob.gradH(t, np.zeros_like(x))).max()) if probes else 0.0

    failures = []
    for i in range(d):
        if ge[:, i].max() > tol:
            failures.append(f"gradH[{i}] disagrees with dH/dx{i + 1} (rel. error {ge[:, i].max():.3e})")
        for j in range(d):
            if he[:, i, j].max() > tol:
                failures.append(f"hessH[{i}][{j}] disagrees with d gradH[{i}]/dx{j + 1} (rel. error {he[:, i, j].max():.3e})")
    if sym > 1e-12:
        failures.append(f"hessH not symmetric (defect {sym:.3e})")
    if g0 > 1e-12:
        failures.append(f"gradH(t, 0) != 0 (max {g0:.3e})")
    return FDReport(float(ge.max(initial=0.0)), float(he.max(initial=0.0)), sym, g0, failures, tol)
