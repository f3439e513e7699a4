"""Command-line front end.

Subcommands mirror the pipeline: `check` runs the conformance analysis,
`canon` reduces and emits conic form, `step` applies one schema at one
occurrence, `solve-oracle` grid-searches a problem or an emitted conic file,
and `verify` replays a trace against a solution file and re-checks everything
numerically.

Exit codes: 0 success, 1 semantic failure (non-conformance, failed check,
infeasible grid), 2 unreadable input (parse or file format errors).
"""

import argparse
import pathlib
import sys

import numpy as np

from .conic import (
    ConicError,
    ConicFormatError,
    DualCertificate,
    check_dual_bound,
    check_primal,
    read_conic,
    read_solution,
    write_conic,
    write_solution,
    SolutionFile,
)
from .dcp import OccPath, dcp_check, resolve
from .dsl import DslError, parse, print_expr, print_problem
from .oracle import Infeasible, OracleError, SearchBox, grid_minimize, grid_minimize_conic
from .problem import Problem, check_feasible, objective_value
from .reduce import (
    ReduceError,
    apply_step,
    backmap,
    canonize,
    read_trace,
    verify_trace_sampled,
    write_trace,
)


class _Exit(Exception):
    def __init__(self, code: int, message: str | None = None):
        self.code = code
        self.message = message


def _fail(code: int, message: str) -> "_Exit":
    return _Exit(code, message)


def _read_text(path: str) -> str:
    try:
        return pathlib.Path(path).read_text()
    except OSError as e:
        raise _fail(2, f"cannot read {path}: {e.strerror or e}")


def _load_problem(path: str) -> Problem:
    text = _read_text(path)
    try:
        return parse(text)
    except DslError as e:
        lines = [f"{path}:{issue}" for issue in e.issues]
        raise _fail(2, "\n".join(lines))


def _parse_params(pairs: list[str]) -> dict[str, float]:
    out = {}
    for item in pairs:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise _fail(2, f"bad --param {item!r}, expected name=value")
        try:
            out[name] = float(value)
        except ValueError:
            raise _fail(2, f"bad --param value {value!r} for {name}")
    return out


def _parse_boxes(pairs: list[str]) -> dict[str, tuple[float, float]]:
    out = {}
    for item in pairs:
        name, sep, span = item.partition("=")
        lo, sep2, hi = span.partition(":")
        if not sep or not sep2:
            raise _fail(2, f"bad --box {item!r}, expected var=lo:hi")
        try:
            out[name] = (float(lo), float(hi))
        except ValueError:
            raise _fail(2, f"bad --box bounds in {item!r}")
    return out


def _make_box(names, boxes: dict[str, tuple[float, float]], res: int) -> SearchBox:
    box = SearchBox.uniform(names, -5.0, 5.0, res)
    for name, (lo, hi) in boxes.items():
        if name not in names:
            raise _fail(2, f"--box names unknown variable {name}")
        box = box.with_axis(name, lo, hi, res)
    return box


# --- subcommands --------------------------------------------------------------


def _cmd_check(args) -> int:
    p = _load_problem(args.problem)
    verdict = dcp_check(p)
    for d in verdict.diagnoses:
        where = "objective" if d.constraint is None else f"constraint #{d.constraint} {d.side}"
        line = f"{where}: required {d.required}, got {d.inferred.name.lower()}"
        if not d.ok and d.failing_path is not None:
            line += f" at {print_expr(resolve(p, d.failing_path))}"
        print(line)
    print("DCP: conformant" if verdict.conformant else "DCP: not conformant")
    if not verdict.conformant:
        for d in verdict.failures():
            k = "objective" if d.constraint is None else f"constraint #{d.constraint}"
            at = ""
            if d.failing_path is not None:
                at = f" at {print_expr(resolve(p, d.failing_path))}"
            print(f"{k}: required {d.required}, got {d.inferred.name.lower()}{at}", file=sys.stderr)
    return 0 if verdict.conformant else 1


def _cmd_canon(args) -> int:
    p = _load_problem(args.problem)
    params = _parse_params(args.param)
    try:
        cp, trace = canonize(p, params)
    except (ReduceError, ConicError) as e:
        raise _fail(1, str(e))

    if not args.skip_verify:
        try:
            report = verify_trace_sampled(trace, params, box=(-5.0, 5.0), n=args.samples, tol=args.tol)
        except (OracleError, Infeasible) as e:
            raise _fail(1, f"trace verification could not sample: {e}")
        if not report.ok:
            for f in report.failures[:5]:
                print(f"verification failure: {f}", file=sys.stderr)
            raise _fail(1, "sampled trace verification failed")
        print(
            f"trace verified on {report.backward_checked} backward and "
            f"{report.forward_checked} forward samples"
        )
    else:
        print("trace verification skipped")

    src = pathlib.Path(args.problem)
    out = pathlib.Path(args.out) if args.out else src.with_suffix(".cone")
    tr = pathlib.Path(args.trace) if args.trace else src.with_suffix(".trace")
    out.write_text(write_conic(cp))
    tr.write_text(write_trace(trace))
    kinds = " ".join(bl.kind for bl in cp.blocks) or "none"
    print(f"wrote {out}: {len(cp.variables)} vars, {cp.A.shape[0]} equalities, blocks {kinds}")
    print(f"wrote {tr}: {len(trace.steps)} steps")
    return 0


def _cmd_step(args) -> int:
    p = _load_problem(args.problem)
    path = None
    if args.path is not None:
        try:
            path = OccPath.parse(args.path)
        except ValueError as e:
            raise _fail(2, str(e))
    removed = ()
    if args.drop:
        try:
            removed = tuple(int(s) for s in args.drop.split(","))
        except ValueError:
            raise _fail(2, f"bad --drop {args.drop!r}, expected indices like 2,3")
    schema = {"eliminate": "eliminate_redundant"}.get(args.schema, args.schema)
    try:
        q, step = apply_step(p, schema, path, removed)
    except ReduceError as e:
        raise _fail(1, f"{type(e).__name__}: {e}")
    except IndexError:
        raise _fail(1, "path does not resolve in this problem")
    print(print_problem(q), end="")
    return 0


def _sniff_conic(text: str) -> bool:
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith("#"):
            return s.startswith("CONICFORM")
    return False


def _cmd_solve_oracle(args) -> int:
    text = _read_text(args.problem)
    boxes = _parse_boxes(args.box)
    eliminate = args.eliminate

    if _sniff_conic(text):
        try:
            cp = read_conic(text)
        except ConicFormatError as e:
            raise _fail(2, str(e))
        names = cp.variables
        axes = len(names) - (1 if eliminate else 0)
        res = args.res or _auto_res(axes)
        box = _make_box(names, boxes, res)
        try:
            result = grid_minimize_conic(cp, box, tol=args.tol, eliminate=eliminate)
        except Infeasible:
            raise _fail(1, "infeasible on grid")
        except OracleError as e:
            raise _fail(1, str(e))
    else:
        try:
            p = parse(text)
        except DslError as e:
            raise _fail(2, "\n".join(f"{args.problem}:{i}" for i in e.issues))
        params = _parse_params(args.param)
        missing = [d.name for d in p.params if d.name not in params]
        if missing:
            raise _fail(1, f"unbound parameter {missing[0]}")
        names = p.variables
        axes = len(names) - (1 if eliminate else 0)
        res = args.res or _auto_res(axes)
        box = _make_box(names, boxes, res)
        try:
            result = grid_minimize(p, params, box, tol=args.tol, eliminate=eliminate)
        except Infeasible:
            raise _fail(1, "infeasible on grid")
        except OracleError as e:
            raise _fail(1, str(e))

    at = ", ".join(f"{v}={result.point[v]!r}" for v in names)
    print(f"minimum {result.value!r} at {at} ({result.feasible_count} feasible lattice points)")
    out = pathlib.Path(args.out) if args.out else pathlib.Path(args.problem).with_suffix(".sol")
    out.write_text(write_solution(SolutionFile(np.array([result.point[v] for v in names]))))
    print(f"wrote {out}")
    return 0


def _auto_res(axes: int) -> int:
    budget = 200_000
    if axes < 1:
        return 3
    return max(3, min(2001, int(budget ** (1.0 / axes))))


def _cmd_verify(args) -> int:
    p = _load_problem(args.problem)
    params = _parse_params(args.param)
    try:
        trace = read_trace(_read_text(args.trace), p)
    except ReduceError as e:
        raise _fail(2, f"trace: {e}")
    try:
        sol = read_solution(_read_text(args.solution))
    except ConicFormatError as e:
        raise _fail(2, f"solution: {e}")

    from .conic import emit

    try:
        cp = emit(trace.final, params)
    except ConicError as e:
        raise _fail(1, str(e))

    if sol.primal.shape != (len(cp.variables),):
        raise _fail(1, f"primal has {sol.primal.shape[0]} values, problem has {len(cp.variables)}")

    primal = check_primal(cp, sol.primal, tol=args.tol)
    if not primal.feasible:
        raise _fail(1, "FAIL primal: " + "; ".join(primal.failures))
    print(f"conic primal feasible, objective {primal.objective!r}")

    point = dict(zip(cp.variables, (float(v) for v in sol.primal)))
    back = backmap(trace, point)
    full = {**params, **back}
    verdict = check_feasible(trace.original, full, tol=args.tol)
    if not verdict.feasible:
        detail = f"constraint #{verdict.index}"
        if verdict.error is not None:
            detail += f" ({verdict.error})"
        raise _fail(1, f"FAIL backmap: original infeasible at {detail}")
    original_value = objective_value(trace.original, full)
    at = ", ".join(f"{v}={back[v]!r}" for v in trace.original.variables)
    print(f"backmapped point feasible: {at}")
    print(f"original objective {original_value!r}")

    if sol.dual_cone is not None or sol.dual_eq is not None:
        y = sol.dual_eq if sol.dual_eq is not None else np.zeros(cp.A.shape[0])
        z = sol.dual_cone if sol.dual_cone is not None else np.zeros(cp.G.shape[0])
        report = check_dual_bound(cp, DualCertificate(y, z), tol=args.tol)
        if not report.accepted:
            raise _fail(1, "FAIL dual: " + "; ".join(report.failures))
        gap = primal.objective - report.bound
        print(f"certified lower bound {report.bound!r}, duality gap {gap!r}")
        if gap < -args.tol:
            raise _fail(1, "FAIL dual: bound exceeds objective")
    print("OK")
    return 0


# --- parser --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conify", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and report DCP conformance")
    c.add_argument("problem")
    c.set_defaults(func=_cmd_check)

    c = sub.add_parser("canon", help="reduce to conic form, write .cone and trace")
    c.add_argument("problem")
    c.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    c.add_argument("--out", help="conic output path (default: problem path with .cone)")
    c.add_argument("--trace", help="trace output path (default: problem path with .trace)")
    c.add_argument("--skip-verify", action="store_true", help="skip sampled trace checks")
    c.add_argument("--samples", type=int, default=200, help="verification sample count")
    c.add_argument("--tol", type=float, default=1e-7)
    c.set_defaults(func=_cmd_canon)

    c = sub.add_parser("step", help="apply one reduction schema and print the result")
    c.add_argument("problem")
    c.add_argument("--schema", required=True,
                   choices=["linearize", "linearize_mono", "linearize_antimono",
                            "graph_expand", "graph_expand_concave", "graph_expand_convex",
                            "eliminate", "eliminate_redundant"])
    c.add_argument("--path", help="occurrence path like c0/rhs/0/1")
    c.add_argument("--drop", help="constraint indices for eliminate, like 2,3")
    c.set_defaults(func=_cmd_step)

    c = sub.add_parser("solve-oracle", help="grid-search a .opt problem or .cone file")
    c.add_argument("problem")
    c.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    c.add_argument("--box", action="append", default=[], metavar="VAR=LO:HI")
    c.add_argument("--res", type=int, help="lattice points per axis (default: by point budget)")
    c.add_argument("--tol", type=float, default=1e-6, help="feasibility tolerance on the lattice")
    c.add_argument("--eliminate", metavar="VAR",
                   help="solve an affine equality for VAR (or 'auto') instead of gridding it")
    c.add_argument("--out", help="solution output path (default: problem path with .sol)")
    c.set_defaults(func=_cmd_solve_oracle)

    c = sub.add_parser("verify", help="replay a trace and check a solution end to end")
    c.add_argument("problem")
    c.add_argument("trace")
    c.add_argument("solution")
    c.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    c.add_argument("--tol", type=float, default=1e-7)
    c.set_defaults(func=_cmd_verify)

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _Exit as e:
        if e.message:
            print(f"error: {e.message}" if e.code != 1 else e.message, file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
