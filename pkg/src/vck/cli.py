"""Command-line front end: ``vck <command> [options]``.

Every command prints a one-screen summary, or with ``--json`` a report in
the ``vck/1`` schema (``report_schema.json`` in this package).  Exit codes:
0 success, 1 usage or I/O error, 2 validation failure, 3 a solver
certificate failed its self-check.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .approx import (compactness_certificate, defect_profile, eval_step,
                     finite_rank_fit, fit_step)
from .core import (KERNEL_KINDS, PLAN_KINDS, SET_KINDS, ValidationError, as_kernel, as_mask,
                   gen_kernel, gen_plan, gen_set, make_space, plan_class, uniform_space,
                   validate_metric)
from .sampling import compare_md, random_points_test, sample_md
from .thickness import CertificateError, Refusal, tau_distance, thickness
from .vcnorm import markov_apply, me_norm, pairing, vc_norm

SCHEMA = "vck/1"
EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_CERTIFICATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class Context:
    """Loads inputs for one command and remembers them for the report."""

    def __init__(self, args):
        self.args = args
        self.inputs: list[dict] = []

    def _note(self, path):
        self.inputs.append({"path": str(path), "sha256": io.sha256(path)})

    def kernel(self, path) -> np.ndarray:
        self._note(path)
        return as_kernel(io.read_matrix(path, header=self.args.header))

    def mask(self, path) -> np.ndarray:
        self._note(path)
        return as_mask(io.read_matrix(path, header=self.args.header))

    def plan(self, path, shape=None):
        self._note(path)
        return io.read_plan(path, shape)

    def spaces(self, shape):
        X = Y = None
        if self.args.weights_x:
            self._note(self.args.weights_x)
            X = io.read_weights(self.args.weights_x)
        if self.args.weights_y:
            self._note(self.args.weights_y)
            Y = io.read_weights(self.args.weights_y)
        X = X if X is not None else uniform_space(shape[0])
        Y = Y if Y is not None else uniform_space(shape[1])
        if (X.size, Y.size) != tuple(shape):
            raise ValidationError(f"weights sizes ({X.size}, {Y.size}) do not match shape {tuple(shape)}")
        return X, Y


# --- command handlers: each returns (results, witnesses) -------------------

def cmd_gen(args, ctx):
    what, kind, n = args.what, args.kind, args.n
    res = {"what": what, "kind": kind, "n": n}
    if what == "kernel":
        params = {"r": args.r, "name": args.name, "profile": args.profile}
        a = gen_kernel(kind, n, seed=args.seed, **params)
        res["shape"] = list(a.shape)
        _emit(args, lambda p: io.write_matrix(p, a), lambda: io.write_matrix(sys.stdout, a))
    elif what == "set":
        a = gen_set(kind, n, seed=args.seed, k=args.k, strict=args.strict, p=args.p,
                    A=args.A or [], B=args.B or [])
        res["shape"] = list(a.shape)
        res["cells"] = int(a.sum())
        _emit(args, lambda p: io.write_matrix(p, a), lambda: io.write_matrix(sys.stdout, a))
    elif what == "plan":
        if kind == "vertical_line":
            plan = gen_plan(kind, n=n)
            X = Y = uniform_space(n * n)
        else:
            X, Y = ctx.spaces((n, n))
            plan = gen_plan(kind, X, Y, sigma=args.sigma)
        res["shape"] = list(plan.shape)
        res["class"] = plan_class(plan, X, Y).kind
        res["total_mass"] = plan.total_mass
        _emit(args, lambda p: io.write_plan(p, plan), lambda: io.write_plan(sys.stdout, plan))
    elif what == "weights":
        if kind == "uniform":
            w = uniform_space(n).weights
        elif kind == "random":
            w = np.random.default_rng(args.seed).uniform(0.1, 1.0, n)
        else:
            raise ValidationError(f"unknown weights kind {kind!r}")
        _emit(args, lambda p: io.write_weights(p, w), lambda: io.write_weights(sys.stdout, w))
    return res, None


def _emit(args, to_file, to_stdout):
    if args.out:
        to_file(args.out)
    elif not args.json:
        to_stdout()


def cmd_thickness(args, ctx):
    path = args.set or args.file
    if path is None:
        raise UsageError("thickness needs a set file (--set FILE)")
    Z = ctx.mask(path)
    X, Y = ctx.spaces(Z.shape)
    cert = thickness(Z, X, Y)
    cert.check(Z, X, Y)
    if args.out:
        io.write_plan(args.out, cert.dual)
    product = float(X.weights @ Z @ Y.weights)
    return ({"value": cert.value, "gap": cert.gap, "product_measure": product,
             "exact": None if cert.exact is None else str(cert.exact)},
            {"certificate": cert.to_dict()})


def cmd_tau(args, ctx):
    f, g = ctx.kernel(args.f), ctx.kernel(args.g)
    X, Y = ctx.spaces(f.shape)
    r = tau_distance(f, g, X, Y, method=args.method)
    return {"value": r.value, "method": r.method}, {"breakpoints": [list(p) for p in r.breakpoints]}


def cmd_norm(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    cert = vc_norm(f, X, Y)
    cert.check(f, X, Y)
    if args.out:
        io.write_weights(f"{args.out}.a.csv", cert.primal.a)
        io.write_weights(f"{args.out}.b.csv", cert.primal.b)
        io.write_plan(f"{args.out}.h.csv", cert.dual)
    return {"value": cert.value, "gap": cert.gap}, {"certificate": cert.to_dict()}


def _shape_arg(args):
    if args.shape:
        return tuple(args.shape) if len(args.shape) == 2 else (args.shape[0], args.shape[0])
    return None


def cmd_me_norm(args, ctx):
    plan = ctx.plan(args.plan, _shape_arg(args))
    X, Y = ctx.spaces(plan.shape)
    return {"value": me_norm(plan, X, Y), "total_mass": plan.total_mass}, None


def _named_or_file_plan(args, ctx, X, Y, shape):
    if args.plan in PLAN_KINDS:
        if args.plan == "vertical_line":
            return gen_plan("vertical_line", X, Y, n=math.isqrt(shape[0]))
        return gen_plan(args.plan, X, Y, sigma=args.sigma)
    return ctx.plan(args.plan, shape)


def cmd_trace(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    plan = _named_or_file_plan(args, ctx, X, Y, f.shape)
    res = {"value": pairing(f, plan), "product_integral": float(X.weights @ f @ Y.weights),
           "plan_me_norm": me_norm(plan, X, Y)}
    if not plan.signed:
        res["plan_class"] = plan_class(plan, X, Y).kind
    return res, None


def _verify_tau(f, step, tau, X, Y):
    again = tau_distance(f, eval_step(step), X, Y).value
    if again != tau:
        raise CertificateError(f"reported tau {tau!r} differs from recomputed {again!r}")


def cmd_fit_step(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    fit = fit_step(f, X, Y, args.nx, args.ny or args.nx, restarts=args.restarts, seed=args.seed)
    _verify_tau(f, fit.step, fit.tau, X, Y)
    if args.out:
        if str(args.out).endswith(".csv"):
            io.write_matrix(args.out, eval_step(fit.step))
        else:
            Path(args.out).write_text(json.dumps(fit.step.to_dict()))
    return ({"tau": fit.tau, "blocks": list(fit.step.n_blocks)},
            {"step": fit.step.to_dict()})


def cmd_defect(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    prof = defect_profile(f, X, Y, args.blocks, restarts=args.restarts, seed=args.seed)
    for _, tau, step in prof.entries:
        _verify_tau(f, step, tau, X, Y)
    if args.out:
        if str(args.out).endswith(".csv"):
            Path(args.out).write_text("".join(f"{N},{io.FLOAT_FMT % t}\n" for N, t in zip(prof.Ns, prof.taus)))
        else:
            Path(args.out).write_text(json.dumps(prof.to_dict()))
    return {"profile": prof.to_dict(), "nonincreasing": bool(np.all(np.diff(prof.taus) <= 0))}, None


def cmd_rank_fit(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    fit = finite_rank_fit(f, X, Y, args.rank)
    if args.out:
        io.write_matrix(args.out, fit.function.evaluate())
    return {"tau": fit.tau, "rank": fit.function.rank}, None


def cmd_compactness(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    cert = compactness_certificate(f, X, Y, args.eps, args.net_budget)
    if isinstance(cert, Refusal):
        return {"certified": False, "reason": cert.reason}, {"attempt": cert.attempt}
    try:
        cert.check(f, X, Y, args.eps)
    except ValueError as exc:
        raise CertificateError(str(exc)) from exc
    if args.out:
        Path(args.out).write_text(json.dumps(cert.to_dict()))
    return ({"certified": True, "net_size": len(cert.centers), "radius": cert.radius,
             "removed_mass": list(cert.removed_mass)}, {"certificate": cert.to_dict()})


def cmd_classify(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    levels = []
    for lvl in range(args.levels):
        s = 2 ** lvl
        if min(f.shape[0] // s, f.shape[1] // s) < max(args.blocks):
            break
        sub = f[::s, ::s]
        Xs, Ys = make_space(X.exact[::s]), make_space(Y.exact[::s])
        prof = defect_profile(sub, Xs, Ys, args.blocks, restarts=args.restarts, seed=args.seed)
        levels.append({"n": list(sub.shape), "profile": prof.to_dict()})
    if not levels:
        raise ValidationError("kernel too small for the requested block counts")
    finest = [e["tau"] for e in levels[0]["profile"]]
    decays = finest[-1] <= args.threshold and finest[-1] < finest[0]
    verdict = ("defect profile consistent with virtual continuity" if decays else
               "defect profile consistent with failure of virtual continuity")
    return {"verdict": verdict, "threshold": args.threshold, "levels": levels}, None


def cmd_sample_md(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    s = sample_md(f, X, Y, args.k, args.trials, args.seed)
    if args.out:
        io.write_md(args.out, s)
    return {"k": s.k, "trials": s.trials, "mean": float(s.matrices.mean()),
            "std": float(s.matrices.std())}, None


def cmd_compare_md(args, ctx):
    s1 = io.read_md(args.s1, seed=None)
    s2 = io.read_md(args.s2, seed=None)
    ctx._note(args.s1)
    ctx._note(args.s2)
    c = compare_md(s1, s2, args.permutations, seed=args.seed)
    return {"statistic": c.statistic, "p_value": c.p_value, "permutations": c.permutations}, None


def cmd_random_points(args, ctx):
    f = ctx.kernel(args.f)
    X, Y = ctx.spaces(f.shape)
    r = random_points_test(f, X, Y, args.eps, args.N, args.m, args.seed)
    if args.out:
        Path(args.out).write_text(json.dumps(r.partition.to_dict()))
    return ({"passed": r.passed, "outlier_fraction": r.partition.outlier_fraction,
             "max_oscillation": r.partition.max_oscillation,
             "row_classes": int(r.partition.row_classes.max()),
             "col_classes": int(r.partition.col_classes.max())}, None)


def grid_metric(n: int) -> np.ndarray:
    """Euclidean distances between cell centres of the ``n x n`` grid, index ``u*n + v``."""
    c = (np.arange(n) + 0.5) / n
    u, v = np.meshgrid(c, c, indexing="ij")
    pts = np.column_stack([u.ravel(), v.ravel()])
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))


def cmd_restrict_metric(args, ctx):
    n = args.n
    rho = ctx.kernel(args.metric) if args.metric else grid_metric(n)
    if rho.shape != (n * n, n * n):
        raise ValidationError(f"metric must be {n * n}x{n * n} for grid side {n}")
    bad = validate_metric(rho)
    if bad:
        raise ValidationError(f"not a semimetric: {bad[0]} ({len(bad)} violations)")
    X = uniform_space(n * n)
    plan = gen_plan("vertical_line", X, X, n=n)
    product = gen_plan("product", X, X)
    U1 = markov_apply(plan, np.ones(n * n), X, X).values
    return ({"restricted_integral": pairing(rho, plan), "product_integral": pairing(rho, product),
             "plan_class": plan_class(plan, X, X).kind, "plan_me_norm": me_norm(plan, X, X),
             "markov_preserves_constants": bool(np.all(U1 == 1.0))}, None)


COMMANDS = {
    "gen": cmd_gen, "thickness": cmd_thickness, "tau": cmd_tau, "norm": cmd_norm,
    "me-norm": cmd_me_norm, "trace": cmd_trace, "fit-step": cmd_fit_step, "defect": cmd_defect,
    "rank-fit": cmd_rank_fit, "compactness": cmd_compactness, "classify": cmd_classify,
    "sample-md": cmd_sample_md, "compare-md": cmd_compare_md, "random-points": cmd_random_points,
    "restrict-metric": cmd_restrict_metric,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="print a vck/1 JSON report")
    common.add_argument("--out", help="write the command's artifact here")
    common.add_argument("--weights-x", help="weights file for the row space (default uniform)")
    common.add_argument("--weights-y", help="weights file for the column space (default uniform)")
    common.add_argument("--header", action="store_true", help="input CSVs carry a header row")

    p = _Parser(prog="vck", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate kernels, sets, plans, weights")
    g.add_argument("--what", choices=["kernel", "set", "plan", "weights"], default="kernel")
    g.add_argument("--kind", required=True,
                   help=f"kernel: {KERNEL_KINDS}; set: {SET_KINDS}; plan: {PLAN_KINDS}; "
                        "weights: uniform, random")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, default=1)
    g.add_argument("--name", default="sincos")
    g.add_argument("--profile", default="cos")
    g.add_argument("--k", type=int, default=1)
    g.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--A", type=_int_list)
    g.add_argument("--B", type=_int_list)
    g.add_argument("--sigma", type=_int_list)

    t = sub.add_parser("thickness", parents=[common], help="thickness of a cell set")
    t.add_argument("file", nargs="?")
    t.add_argument("--set")

    t = sub.add_parser("tau", parents=[common], help="tau distance between two kernels")
    t.add_argument("f")
    t.add_argument("g")
    t.add_argument("--method", choices=["exact", "bisect"], default="exact")

    t = sub.add_parser("norm", parents=[common], help="VC1 norm with duality certificate")
    t.add_argument("f")

    t = sub.add_parser("me-norm", parents=[common], help="dual measure norm of a plan")
    t.add_argument("plan")
    t.add_argument("--shape", type=_int_list)

    t = sub.add_parser("trace", parents=[common], help="integral of a kernel against a plan")
    t.add_argument("f")
    t.add_argument("--plan", required=True, help=f"one of {PLAN_KINDS} or a triplet CSV")
    t.add_argument("--sigma", type=_int_list)

    t = sub.add_parser("fit-step", parents=[common], help="tau-fit a step function")
    t.add_argument("f")
    t.add_argument("--nx", type=int, default=2)
    t.add_argument("--ny", type=int)
    t.add_argument("--restarts", type=int, default=16)

    for name, hlp in (("defect", "defect profile over block counts"),
                      ("classify", "multi-resolution defect report")):
        t = sub.add_parser(name, parents=[common], help=hlp)
        t.add_argument("f")
        t.add_argument("--blocks", type=_int_list, default=[2, 4, 8, 16])
        t.add_argument("--restarts", type=int, default=16)
        if name == "classify":
            t.add_argument("--levels", type=int, default=3)
            t.add_argument("--threshold", type=float, default=0.1)

    t = sub.add_parser("rank-fit", parents=[common], help="finite-rank fit scored in tau")
    t.add_argument("f")
    t.add_argument("--rank", type=int, default=1)

    t = sub.add_parser("compactness", parents=[common], help="greedy precompactness certificate")
    t.add_argument("f")
    t.add_argument("--eps", type=float, default=0.1)
    t.add_argument("--net-budget", type=int, default=16)

    t = sub.add_parser("sample-md", parents=[common], help="sample matrix distribution windows")
    t.add_argument("f")
    t.add_argument("--k", type=int, default=3)
    t.add_argument("--trials", type=int, default=1000)

    t = sub.add_parser("compare-md", parents=[common], help="energy-distance two-sample test")
    t.add_argument("s1")
    t.add_argument("s2")
    t.add_argument("--permutations", type=int, default=200)

    t = sub.add_parser("random-points", parents=[common], help="random-points clustering test")
    t.add_argument("f")
    t.add_argument("--eps", type=float, default=0.1)
    t.add_argument("--N", type=int, default=10)
    t.add_argument("--m", type=int, default=500)

    t = sub.add_parser("restrict-metric", parents=[common],
                       help="restrict a metric on the unit square to vertical lines")
    t.add_argument("--n", type=int, default=8)
    t.add_argument("--metric", help="optional n^2 x n^2 metric CSV")
    return p


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def _parameters(args) -> dict:
    skip = {"json", "out", "command", "seed"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _fail(code: int, kind: str, msg: str) -> int:
    print(f"error: {kind}: {msg}".replace("\n", " "), file=sys.stderr)
    return code


def main(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    ctx = Context(args)
    try:
        results, witnesses = COMMANDS[args.command](args, ctx)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", str(exc))
    except CertificateError as exc:
        return _fail(EXIT_CERTIFICATE, "certificate", str(exc))
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    except Exception as exc:  # never leak a traceback
        return _fail(EXIT_USAGE, "internal", f"{type(exc).__name__}: {exc}")
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "inputs": ctx.inputs,
        "parameters": _parameters(args),
        "results": results,
        "witnesses": witnesses,
        "seed": args.seed,
        "runtimeMs": int(round(1000 * (time.perf_counter() - start))),
    }
    report = _jsonable(report)
    if args.json:
        print(json.dumps(report, indent=1))
    elif args.command != "gen" or args.out:
        for k, v in results.items():
            print(f"{k}: {json.dumps(_jsonable(v))}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
