"""Command-line front end: ``hamindex {index,homotopy,solve,verify}``.

Exit codes: 0 success, 1 problem-file error, 2 numerical failure,
3 verification failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .flow import CrossingClusterError, IntegrationError
from .index import (
    CertificateError,
    NotStrictError,
    SmallnessError,
    consistency_report,
    homotopy_trace,
    index,
    qform_indices,
    relative_index,
)
from .operator import Bolza, PPeriodic, SpecError, SturmLiouville, build_operator, dirichlet
from .paths import MatrixPath
from .problems import ProblemError, build_op, build_problem, lift_comparison, linear_path, matrix_path, parse_problem
from .reduction import ContractionError
from .report import RunReport, sha256_text, write_trajectories
from .search import SearchConfig, multi_start_search, verify_theorem
from .spectral import SpectralGapError, build_spectral_model

log = logging.getLogger("hamindex")

EXIT_OK, EXIT_SPEC, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
NUMERICAL_ERRORS = (
    IntegrationError,
    CrossingClusterError,
    ContractionError,
    SpectralGapError,
    NotStrictError,
    CertificateError,
    SmallnessError,
    np.linalg.LinAlgError,
)
TRAJECTORY_SAMPLES = 201


class _Ctx:
    """Parsed problem plus the numerics in force for this run."""

    def __init__(self, args):
        path = Path(args.problem)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ProblemError([("$", f"cannot read {path}: {exc.strerror}")]) from None
        self.spec = parse_problem(text)
        self.spec_hash = sha256_text(json.dumps(self.spec.to_json(), sort_keys=True))
        num = dict(self.spec.numerics)
        for key in ("epsilon", "beta", "grid"):
            val = getattr(args, key, None)
            if val is not None:
                num[key] = val
        self.numerics = num
        self.op = build_op(self.spec, num.get("grid"))
        self.problem = build_problem(self.spec, num.get("grid"))

    def model(self, bound: float):
        n = self.numerics
        return build_spectral_model(self.op, n.get("epsilon"), n.get("beta"), n.get("window"), bound=bound)

    def anchor(self):
        a = self.numerics.get("anchor")
        if a is None or self.op.order == "second":
            return None
        if isinstance(a, int):
            return (MatrixPath.zeros(self.op.dim), a) if self.op.periodic else None
        return (matrix_path(a["B"], self.op.dim), int(a["i"]))

    def periodic_anchor(self) -> int:
        a = self.numerics.get("anchor")
        return a if isinstance(a, int) else 0

    def used(self, model=None) -> dict:
        out = {"grid": self.op.grid, "null_tol": self.numerics.get("null_tol", 1e-8)}
        if model is not None:
            out.update(epsilon=model.epsilon, beta=model.beta, window=model.window, modes=model.size, quadrature_nodes=model.grid)
        return out


def _index_B(ctx: _Ctx) -> MatrixPath:
    B = linear_path(ctx.spec)
    if B is not None:
        return B
    if ctx.problem is not None:
        return ctx.problem.hessian_at_zero()
    raise ProblemError([("$.linear.B", "index needs linear.B or a Hamiltonian")])


def _index_results(ctx: _Ctx, B: MatrixPath):
    warnings = []
    rep = index(ctx.op, B, anchor=ctx.anchor(), periodic_anchor=ctx.periodic_anchor())
    res = {"i": rep.i, "nu": rep.nu, "routes": {rep.route: rep.to_dict()}}
    model = None
    try:
        model = ctx.model(B.supnorm)
        q = qform_indices(model, B, ctx.numerics.get("null_tol", 1e-8))
        B0, i0 = rep.anchor
        entry = {"i_beta": q.i_beta, "nu_beta": q.nu_beta, "tolerance": q.tol}
        if ctx.op.order == "first" and B0.supnorm + model.epsilon < model.beta:
            entry["i_beta_anchor"] = qform_indices(model, B0).i_beta
            entry["i_from_qform"] = i0 + q.i_beta - entry["i_beta_anchor"]
        res["routes"]["qform"] = entry
    except (SmallnessError, SpectralGapError) as exc:
        warnings.append(f"qform route skipped: {exc}")
    if ctx.op.order == "second":
        lop = build_operator(Bolza(ctx.op.bc.alpha, ctx.op.bc.beta), "first", ctx.op.n, ctx.op.grid)
        frep = index(lop, lift_comparison(B, ctx.op.n))
        res["routes"]["first-order-lift"] = {"i": frep.i, "nu": frep.nu}
    return res, model, warnings


def cmd_index(args) -> int:
    ctx = _Ctx(args)
    t0 = time.perf_counter()
    B = _index_B(ctx)
    res, model, warnings = _index_results(ctx, B)
    res["B"] = B.describe()
    expect = ctx.spec.expect or {}
    RunReport("index", ctx.spec_hash, ctx.used(model), res, warnings, {"total_s": time.perf_counter() - t0}).write(
        args.out, not args.no_timings
    )
    if ("i" in expect and expect["i"] != res["i"]) or ("nu" in expect and expect["nu"] != res["nu"]):
        print(f"expected (i, nu) = ({expect.get('i')}, {expect.get('nu')}), got ({res['i']}, {res['nu']})", file=sys.stderr)
    return EXIT_OK


def _matrix_arg(text: str, d: int) -> MatrixPath:
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return matrix_path(value, d)


def cmd_homotopy(args) -> int:
    ctx = _Ctx(args)
    t0 = time.perf_counter()
    h = ctx.spec.homotopy or {}
    d = ctx.op.dim
    if args.from_ is not None:
        B1 = _matrix_arg(args.from_, d)
    elif "from" in h:
        B1 = matrix_path(h["from"], d)
    else:
        raise ProblemError([("$.homotopy.from", "homotopy needs a start matrix (homotopy.from or --from)")])
    if args.to is not None:
        B2 = _matrix_arg(args.to, d)
    elif "to" in h:
        B2 = matrix_path(h["to"], d)
    else:
        raise ProblemError([("$.homotopy.to", "homotopy needs an end matrix (homotopy.to or --to)")])
    route = args.route or h.get("route")
    if route is None:
        route = "strict" if B1.lt(B2) else "general"
    if route == "strict":
        trace = homotopy_trace(ctx.op, B1, B2, strict=True)
        total = trace.total
    else:
        trace = homotopy_trace(ctx.op, B1, B2, strict=False)
        total = relative_index(ctx.op, B1, B2)
    if args.trace:
        trace.to_csv(args.trace)
    res = {
        "route": route,
        "from": B1.describe(),
        "to": B2.describe(),
        "crossings": [{"lambda": c.lam, "nullity": c.nullity, "width": c.width} for c in trace.crossings],
        "relative_index": total,
        "samples": int(trace.lam.size),
    }
    RunReport("homotopy", ctx.spec_hash, ctx.used(), res, [], {"total_s": time.perf_counter() - t0}).write(
        args.out, not args.no_timings
    )
    return EXIT_OK


def _search_cfg(ctx: _Ctx, args) -> SearchConfig:
    n = ctx.numerics
    return SearchConfig(
        starts=args.starts if args.starts is not None else n.get("starts", 64),
        seed=args.seed if args.seed is not None else n.get("seed", 42),
        start_radius=n.get("start_radius", 1.0),
        newton_tol=n.get("newton_tol", 1e-10),
        deflation_radius=n.get("deflation_radius", 1e-4),
        null_tol=n.get("hessian_null_tol", 1e-7),
        fp_tol=n.get("fp_tol", 1e-12),
    )


def _require_problem(ctx: _Ctx):
    if ctx.problem is None:
        raise ProblemError([("$.hamiltonian", "this command needs a Hamiltonian")])
    return ctx.problem


def _points_json(points) -> list:
    return [cp.to_dict() for cp in points]


def _search_warnings(points, model) -> list:
    out = []
    for cp in points:
        if cp.tail > 1e-6:
            out.append(f"point {cp.distinct_id}: truncation tail estimate {cp.tail:.3e}")
        if cp.point.minus_condition > 1e6:
            out.append(f"point {cp.distinct_id}: minus-block condition number {cp.point.minus_condition:.3e}")
    return out


def cmd_solve(args) -> int:
    ctx = _Ctx(args)
    prob = _require_problem(ctx)
    t0 = time.perf_counter()
    model = ctx.model(prob.M)
    t1 = time.perf_counter()
    cfg = _search_cfg(ctx, args)
    res = multi_start_search(model, prob, cfg)
    t2 = time.perf_counter()
    nontriv = res.nontrivial(cfg.deflation_radius)
    results = {
        "problem": prob.name,
        "starts": res.starts,
        "diverged": len(res.divergences),
        "distinct": len(res.points),
        "nontrivial": len(nontriv),
        "points": _points_json(res.points),
    }
    if args.trace or args.out not in (None, "-"):
        traj = args.trace or str(Path(args.out).with_suffix("")) + "_trajectories.csv"
        write_trajectories(traj, res.points, np.linspace(0.0, 1.0, TRAJECTORY_SAMPLES))
        results["trajectories_csv"] = Path(traj).name
    numerics = ctx.used(model) | {"search": cfg.__dict__}
    RunReport(
        "solve", ctx.spec_hash, numerics, results, _search_warnings(res.points, model), {"model_s": t1 - t0, "search_s": t2 - t1}, cfg.seed
    ).write(args.out, not args.no_timings)
    return EXIT_OK


def builtin_battery():
    """Small fixed set of ``(label, operator, B)`` used by the consistency suite."""
    pi = np.pi
    bolza = build_operator(Bolza(0.0, pi), "first", 1)
    robin = build_operator(SturmLiouville(0.3, 2.0), "second", 2)
    ramp = MatrixPath(lambda t: (20.0 + 5.0 * np.cos(3.0 * t))[:, None, None], 1, name="20+5cos(3t)")
    tt = MatrixPath(lambda t: np.einsum("k,ij->kij", 2.0 * t, np.eye(2)), 2, name="2t*I")
    return [
        ("dirichlet B=15", dirichlet(1), MatrixPath.scalar(15.0, 1)),
        ("dirichlet B=pi^2", dirichlet(1), MatrixPath.scalar(pi**2, 1)),
        ("dirichlet B=20+5cos(3t)", dirichlet(1), ramp),
        ("neumann B=0", build_operator(SturmLiouville(pi / 2, pi / 2), "second", 1), MatrixPath.zeros(1)),
        ("robin n=2", robin, MatrixPath.constant([[4.0, 1.0], [1.0, 30.0]])),
        ("bolza B=pi*I", bolza, MatrixPath.scalar(pi, 2)),
        ("bolza B=2t*I", bolza, tt),
        ("periodic P=I B=0", build_operator(PPeriodic(np.eye(2)), "first", 1), MatrixPath.zeros(2)),
    ]


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    if args.suite == "consistency":
        entries = []
        if args.problem:
            ctx = _Ctx(args)
            B = _index_B(ctx)
            battery = [(ctx.spec.name or "problem", ctx.op, B)]
            spec_hash, numerics = ctx.spec_hash, ctx.used()
        else:
            battery = builtin_battery()
            spec_hash, numerics = sha256_text("builtin-battery"), {}
        ok = True
        for label, op, B in battery:
            rep = consistency_report(op, B)
            ok &= rep.passed
            entries.append({"case": label} | rep.to_dict())
        results = {"suite": "consistency", "passed": ok, "cases": entries}
        RunReport("verify", spec_hash, numerics, results, [], {"total_s": time.perf_counter() - t0}).write(
            args.out, not args.no_timings
        )
        return EXIT_OK if ok else EXIT_VERIFY

    if not args.problem:
        raise ProblemError([("$", "suite 'theorem' needs --problem")])
    ctx = _Ctx(args)
    prob = _require_problem(ctx)
    model = ctx.model(prob.M)
    cfg = _search_cfg(ctx, args)
    rep = verify_theorem(model, prob, cfg=cfg, anchor=ctx.anchor())
    expect = ctx.spec.expect or {}
    want_hyp = expect.get("hypotheses", True)
    need = expect.get("nontrivial_min", rep.predicted)
    checks = {
        "hypotheses_match_expectation": rep.hypotheses_hold == want_hyp,
        "identities": all(i.passed for i in rep.identities),
        "found_at_least_expected": rep.found >= need,
    }
    ok = all(checks.values())
    # the suite verdict overrides the theorem report's own "passed"
    results = rep.to_dict() | {"suite": "theorem", "passed": ok, "checks": checks, "expected_hypotheses": want_hyp}
    results["points"] = _points_json(rep.search.points)
    RunReport("verify", ctx.spec_hash, ctx.used(model) | {"search": cfg.__dict__}, results, [], {"total_s": time.perf_counter() - t0}, cfg.seed).write(
        args.out, not args.no_timings
    )
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hamindex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, problem_required=True):
        sp.add_argument("--problem", required=problem_required, help="problem JSON file")
        sp.add_argument("--out", default="-", help="report JSON path (default: standard output)")
        sp.add_argument("--epsilon", type=float, help="override the spectral shift")
        sp.add_argument("--beta", type=float, help="override the splitting level")
        sp.add_argument("--grid", type=int, help="override the quadrature node count")
        sp.add_argument("--no-timings", action="store_true", help="omit wall-clock timings so reports are byte-identical")

    sp = sub.add_parser("index", help="index and nullity of linear.B (or hessH at 0)")
    common(sp)
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("homotopy", help="crossings along a straight-line homotopy")
    common(sp)
    sp.add_argument("--from", dest="from_", help="start matrix (number, expression or JSON array)")
    sp.add_argument("--to", help="end matrix")
    sp.add_argument("--route", choices=["strict", "general"])
    sp.add_argument("--trace", help="CSV path for the sampled crossing indicator")
    sp.set_defaults(func=cmd_homotopy)

    sp = sub.add_parser("solve", help="multi-start search for critical points")
    common(sp)
    sp.add_argument("--starts", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trace", help="CSV path for trajectories")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="run a verification suite")
    common(sp, problem_required=False)
    sp.add_argument("--suite", choices=["consistency", "theorem"], required=True)
    sp.add_argument("--starts", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (ProblemError, SpecError, ValueError) as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            print(f"hamindex: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"hamindex: problem error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except NUMERICAL_ERRORS as exc:
        print(f"hamindex: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
