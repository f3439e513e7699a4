"""Conic form: emission, cone membership, and certificate checking.

A conic problem is  min c.x  subject to  A x = b  and  G x - h in K,  where K
is a product of blocks: nonnegative orthants, second-order cones
{v : v1 >= ||v[1:]||}, and the exponential cone

    EXP = {(x1, x2, x3) : x2 > 0, x1 >= x2 * e^(x3/x2)}
          union {(x1, 0, x3) : x1 >= 0, x3 <= 0}.

Emission recognizes four constraint shapes: affine = affine becomes an
equality row; affine <= affine an ORTHANT(1) row on rhs - lhs; u^2 <= e (u, e
affine) the SOC(3) rows ((e+1)/2, (e-1)/2, u), using
u^2 <= e  <=>  (e+1)/2 >= sqrt(((e-1)/2)^2 + u^2); and exp(u) <= e the EXP
rows (e, 1, u).

Weak duality: if A~y + G~z = c and each z block lies in the dual cone, then
for any primal-feasible x,  c.x - (b.y + h.z) = z.(Gx - h) >= 0,  so
b.y + h.z is a lower bound.  Orthant and SOC are self-dual.  For EXP as
ordered above the dual cone works out to

    EXP* = {(p, q, r) : r < 0, p > 0, q >= r - r*log(-r/p)}
           union {(p, q, 0) : p >= 0, q >= 0}:

minimizing p*x1 + q*x2 + r*x3 over the x2 > 0 branch needs p >= 0 (x1 free
upward), and with x1 at its floor x2*e^(x3/x2) the minimum over x3 sits at
x3 = x2*log(-r/p), where the objective is x2*(q - r + r*log(-r/p)); the r = 0
slice needs q >= 0 as x3 -> -infinity.  The closure branch adds nothing
beyond p >= 0, r <= 0.  Tests re-validate this formula against a sampled
inner-product oracle before it is trusted anywhere.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dcp import curvature_of
from .problem import (
    Assignment,
    Call,
    Const,
    Constraint,
    Expr,
    Param,
    Problem,
    UnboundName,
    Var,
    evaluate,
)


class ConicError(Exception):
    pass


class StrictComparatorRemains(ConicError):
    pass


class UnrecognizedShape(ConicError):
    pass


class UnboundParameter(ConicError):
    pass


class ConicFormatError(ConicError):
    pass


CONE_KINDS = ("ORTHANT", "SOC", "EXP")


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "EXP" and self.dim != 3:
            raise ValueError("EXP blocks have dimension 3")
        if self.dim < 1:
            raise ValueError("cone blocks need dimension >= 1")


@dataclass(frozen=True, eq=False)
class ConicProblem:
    variables: tuple[str, ...]
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    blocks: tuple[ConeBlock, ...]

    def __post_init__(self):
        n = len(self.variables)
        if self.c.shape != (n,):
            raise ValueError("objective length mismatch")
        if self.A.shape[1] != n or self.A.shape[0] != self.b.shape[0]:
            raise ValueError("equality block shape mismatch")
        if self.G.shape[1] != n or self.G.shape[0] != self.h.shape[0]:
            raise ValueError("cone block shape mismatch")
        if sum(bl.dim for bl in self.blocks) != self.G.shape[0]:
            raise ValueError("cone dimensions do not cover G")

    def __eq__(self, other):
        if not isinstance(other, ConicProblem):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.blocks == other.blocks
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.G, other.G)
            and np.array_equal(self.h, other.h)
        )

    def block_slices(self) -> list[tuple[ConeBlock, slice]]:
        out, at = [], 0
        for bl in self.blocks:
            out.append((bl, slice(at, at + bl.dim)))
            at += bl.dim
        return out


@dataclass(frozen=True)
class DualCertificate:
    y: np.ndarray  # multipliers for A x = b
    z: np.ndarray  # multipliers for G x - h in K, block by block


# --- shape recognition --------------------------------------------------------


def _structurally_affine(e: Expr) -> bool:
    return curvature_of(e, {}).is_affine()


def constraint_shape(c: Constraint) -> str | None:
    """Emission shape of one constraint, or None when no rule applies.

    Strict comparators never emit; sign-flipped forms (>=) normalize first.
    """
    if c.op == "=":
        if _structurally_affine(c.lhs) and _structurally_affine(c.rhs):
            return "eq"
        return None
    if c.op in ("<", ">"):
        return None
    lo, hi = (c.lhs, c.rhs) if c.op == "<=" else (c.rhs, c.lhs)
    if not _structurally_affine(hi):
        return None
    if isinstance(lo, Call) and lo.atom == "pow" and lo.args[1] == Const(2.0) \
            and _structurally_affine(lo.args[0]):
        return "soc"
    if isinstance(lo, Call) and lo.atom == "exp" and _structurally_affine(lo.args[0]):
        return "exp"
    if _structurally_affine(lo):
        return "orthant"
    return None


# --- emission -----------------------------------------------------------------


class _NotAffine(Exception):
    pass


def _has_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Call):
        return any(_has_var(a) for a in e.args)
    return False


def _const_value(e: Expr, params: Assignment) -> float:
    try:
        return evaluate(e, params)
    except UnboundName as err:
        raise UnboundParameter(f"unbound parameter {err.name}") from None


def _linear(e: Expr, vidx: dict[str, int], params: Assignment) -> tuple[np.ndarray, float]:
    """Coefficient vector and constant of an affine expression."""
    n = len(vidx)
    if not _has_var(e):
        return np.zeros(n), _const_value(e, params)
    if isinstance(e, Var):
        row = np.zeros(n)
        row[vidx[e.name]] = 1.0
        return row, 0.0
    if isinstance(e, Call):
        if e.atom == "add":
            r0, c0 = _linear(e.args[0], vidx, params)
            r1, c1 = _linear(e.args[1], vidx, params)
            return r0 + r1, c0 + c1
        if e.atom == "sub":
            r0, c0 = _linear(e.args[0], vidx, params)
            r1, c1 = _linear(e.args[1], vidx, params)
            return r0 - r1, c0 - c1
        if e.atom == "neg":
            r0, c0 = _linear(e.args[0], vidx, params)
            return -r0, -c0
        if e.atom == "mul":
            if not _has_var(e.args[0]):
                k = _const_value(e.args[0], params)
                r, c = _linear(e.args[1], vidx, params)
            elif not _has_var(e.args[1]):
                k = _const_value(e.args[1], params)
                r, c = _linear(e.args[0], vidx, params)
            else:
                raise _NotAffine
            return k * r, k * c
        if e.atom == "div":
            if _has_var(e.args[1]):
                raise _NotAffine
            k = _const_value(e.args[1], params)
            if k == 0.0:
                raise _NotAffine
            r, c = _linear(e.args[0], vidx, params)
            return r / k, c / k
        if e.atom == "pow" and e.args[1] == Const(1.0):
            return _linear(e.args[0], vidx, params)
    raise _NotAffine


def emit(p: Problem, params: Assignment) -> ConicProblem:
    """Emit conic form with parameters bound.

    Row order is deterministic: equality rows in constraint order, then cone
    blocks in constraint order.
    """
    vidx = {v: i for i, v in enumerate(p.variables)}
    n = len(p.variables)

    try:
        c_row, c_off = _linear(p.objective, vidx, params)
    except _NotAffine:
        raise UnrecognizedShape("objective is not affine") from None
    if c_off != 0.0:
        raise UnrecognizedShape(
            "objective has a constant offset; conic form carries none"
        )

    A_rows, b_vals, G_rows, h_vals, blocks = [], [], [], [], []

    def affine_parts(e: Expr, index: int) -> tuple[np.ndarray, float]:
        try:
            return _linear(e, vidx, params)
        except _NotAffine:
            raise UnrecognizedShape(
                f"constraint {index} is not an emittable shape"
            ) from None

    for i, c in enumerate(p.constraints):
        if c.op == "=":
            rl, cl = affine_parts(c.lhs, i)
            rr, cr = affine_parts(c.rhs, i)
            A_rows.append(rl - rr)
            b_vals.append(cr - cl)

    for i, c in enumerate(p.constraints):
        if c.op == "=":
            continue
        if c.op in ("<", ">"):
            raise StrictComparatorRemains(
                f"constraint {i} keeps a strict comparator; it cannot emit"
            )
        lo, hi = (c.lhs, c.rhs) if c.op == "<=" else (c.rhs, c.lhs)
        shape = constraint_shape(c)
        if shape == "soc":
            ru, du = affine_parts(lo.args[0], i)
            re_, de = affine_parts(hi, i)
            G_rows += [re_ / 2.0, re_ / 2.0, ru]
            h_vals += [-(de + 1.0) / 2.0, -(de - 1.0) / 2.0, -du]
            blocks.append(ConeBlock("SOC", 3))
        elif shape == "exp":
            ru, du = affine_parts(lo.args[0], i)
            re_, de = affine_parts(hi, i)
            G_rows += [re_, np.zeros(n), ru]
            h_vals += [-de, -1.0, -du]
            blocks.append(ConeBlock("EXP", 3))
        elif shape == "orthant":
            rl, dl = affine_parts(lo, i)
            rr, dr = affine_parts(hi, i)
            G_rows.append(rr - rl)
            h_vals.append(-(dr - dl))
            blocks.append(ConeBlock("ORTHANT", 1))
        else:
            raise UnrecognizedShape(f"constraint {i} is not an emittable shape")

    A = np.array(A_rows) if A_rows else np.zeros((0, n))
    b = np.array(b_vals) if b_vals else np.zeros(0)
    G = np.array(G_rows) if G_rows else np.zeros((0, n))
    h = np.array(h_vals) if h_vals else np.zeros(0)
    return ConicProblem(tuple(p.variables), c_row, A, b, G, h, tuple(blocks))


# --- membership ---------------------------------------------------------------


def cone_member(kind: str, v, tol: float = 1e-7) -> bool:
    v = np.asarray(v, dtype=float)
    if kind == "ORTHANT":
        return bool((v >= -tol).all())
    if kind == "SOC":
        return bool(v[0] + tol >= math.sqrt(float((v[1:] ** 2).sum())))
    if kind == "EXP":
        x1, x2, x3 = (float(x) for x in v)
        if abs(x2) <= tol:
            return x1 >= -tol and x3 <= tol
        if x2 < 0:
            return False
        try:
            lifted = x2 * math.exp(x3 / x2)
        except OverflowError:
            return False
        return x1 + tol >= lifted
    raise ValueError(f"unknown cone kind {kind!r}")


def dual_cone_member(kind: str, v, tol: float = 1e-7) -> bool:
    if kind in ("ORTHANT", "SOC"):
        return cone_member(kind, v, tol)
    if kind == "EXP":
        p_, q, r = (float(x) for x in np.asarray(v, dtype=float))
        if r > tol:
            return False
        if r >= -tol:
            return p_ >= -tol and q >= -tol
        if p_ <= 0.0:
            return False
        return q + tol >= r - r * math.log(-r / p_)
    raise ValueError(f"unknown cone kind {kind!r}")


# --- certificate checks ---------------------------------------------------------


@dataclass(frozen=True)
class PrimalReport:
    feasible: bool
    objective: float
    failures: tuple[str, ...] = ()


def check_primal(cp: ConicProblem, x, tol: float = 1e-7) -> PrimalReport:
    x = np.asarray(x, dtype=float)
    failures = []
    if cp.A.shape[0]:
        res = cp.A @ x - cp.b
        for i, r in enumerate(res):
            if abs(r) > tol:
                failures.append(f"equality row {i} residual {r:.3e}")
    s = cp.G @ x - cp.h
    for j, (bl, sl) in enumerate(cp.block_slices()):
        if not cone_member(bl.kind, s[sl], tol):
            failures.append(f"cone block {j}")
    return PrimalReport(not failures, float(cp.c @ x), tuple(failures))


@dataclass(frozen=True)
class DualReport:
    accepted: bool
    bound: float | None
    failures: tuple[str, ...] = ()


def check_dual_bound(cp: ConicProblem, cert: DualCertificate, tol: float = 1e-7) -> DualReport:
    """Accept a certificate iff stationarity holds and every z block is dual
    feasible; the certified lower bound is b.y + h.z."""
    y = np.asarray(cert.y, dtype=float)
    z = np.asarray(cert.z, dtype=float)
    failures = []
    if y.shape != (cp.A.shape[0],):
        failures.append("dual equality multiplier length mismatch")
    if z.shape != (cp.G.shape[0],):
        failures.append("dual cone multiplier length mismatch")
    if failures:
        return DualReport(False, None, tuple(failures))
    residual = cp.A.T @ y + cp.G.T @ z - cp.c
    if np.abs(residual).max(initial=0.0) > tol:
        failures.append(f"stationarity residual {np.abs(residual).max():.3e}")
    for j, (bl, sl) in enumerate(cp.block_slices()):
        if not dual_cone_member(bl.kind, z[sl], tol):
            failures.append(f"dual cone block {j}")
    if failures:
        return DualReport(False, None, tuple(failures))
    return DualReport(True, float(cp.b @ y + cp.h @ z))


# --- files ----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _row_text(row: np.ndarray, tail: float) -> str:
    return " ".join([_fmt(v) for v in row] + [_fmt(tail)])


def write_conic(cp: ConicProblem) -> str:
    lines = [
        "CONICFORM 1",
        f"VARS {len(cp.variables)}",
        " ".join(cp.variables),
        "# minimize c.x with A x = b and G x - h in the listed cones;",
        "# a dual (y, z) with A~y + G~z = c and z in the dual cones",
        "# certifies the lower bound b.y + h.z.",
        "OBJ " + " ".join(_fmt(v) for v in cp.c),
        f"EQ {cp.A.shape[0]}",
    ]
    for i in range(cp.A.shape[0]):
        lines.append(_row_text(cp.A[i], cp.b[i]))
    for bl, sl in cp.block_slices():
        head = f"CONE {bl.kind}" if bl.kind == "EXP" else f"CONE {bl.kind} {bl.dim}"
        lines.append(head)
        for i in range(sl.start, sl.stop):
            lines.append(_row_text(cp.G[i], cp.h[i]))
    lines.append("END")
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, text: str):
        self.items = [
            (i + 1, ln.strip())
            for i, ln in enumerate(text.splitlines())
            if ln.strip() and not ln.strip().startswith("#")
        ]
        self.at = 0

    def next(self, what: str) -> tuple[int, str]:
        if self.at >= len(self.items):
            raise ConicFormatError(f"unexpected end of file, wanted {what}")
        item = self.items[self.at]
        self.at += 1
        return item

    def done(self) -> bool:
        return self.at >= len(self.items)


def _numbers(no: int, text: str, count: int) -> list[float]:
    parts = text.split()
    if len(parts) != count:
        raise ConicFormatError(f"line {no}: expected {count} numbers, found {len(parts)}")
    try:
        return [float(x) for x in parts]
    except ValueError:
        raise ConicFormatError(f"line {no}: unreadable number") from None


def read_conic(text: str) -> ConicProblem:
    lines = _Lines(text)
    no, ln = lines.next("header")
    if ln != "CONICFORM 1":
        raise ConicFormatError(f"line {no}: expected 'CONICFORM 1'")
    no, ln = lines.next("VARS")
    if not ln.startswith("VARS "):
        raise ConicFormatError(f"line {no}: expected 'VARS <count>'")
    try:
        n = int(ln.split()[1])
    except (IndexError, ValueError):
        raise ConicFormatError(f"line {no}: unreadable variable count") from None
    no, ln = lines.next("variable names")
    names = tuple(ln.split())
    if len(names) != n:
        raise ConicFormatError(f"line {no}: expected {n} variable names")
    no, ln = lines.next("OBJ")
    if not ln.startswith("OBJ"):
        raise ConicFormatError(f"line {no}: expected 'OBJ'")
    c = np.array(_numbers(no, ln[3:], n))
    no, ln = lines.next("EQ")
    if not ln.startswith("EQ"):
        raise ConicFormatError(f"line {no}: expected 'EQ <count>'")
    try:
        m = int(ln.split()[1])
    except (IndexError, ValueError):
        raise ConicFormatError(f"line {no}: unreadable equality count") from None
    A_rows, b_vals = [], []
    for _ in range(m):
        no, ln = lines.next("equality row")
        row = _numbers(no, ln, n + 1)
        A_rows.append(row[:n])
        b_vals.append(row[n])
    G_rows, h_vals, blocks = [], [], []
    while True:
        no, ln = lines.next("'CONE ...' or 'END'")
        if ln == "END":
            break
        parts = ln.split()
        if parts[0] != "CONE" or len(parts) < 2 or parts[1] not in CONE_KINDS:
            raise ConicFormatError(f"line {no}: expected 'CONE ORTHANT|SOC|EXP'")
        if parts[1] == "EXP":
            dim = 3
            if len(parts) != 2:
                raise ConicFormatError(f"line {no}: 'CONE EXP' takes no dimension")
        else:
            try:
                dim = int(parts[2])
            except (IndexError, ValueError):
                raise ConicFormatError(f"line {no}: missing cone dimension") from None
        blocks.append(ConeBlock(parts[1], dim))
        for _ in range(dim):
            no, ln = lines.next("cone row")
            row = _numbers(no, ln, n + 1)
            G_rows.append(row[:n])
            h_vals.append(row[n])
    if not lines.done():
        no, ln = lines.next("nothing")
        raise ConicFormatError(f"line {no}: content after END")
    A = np.array(A_rows) if A_rows else np.zeros((0, n))
    b = np.array(b_vals) if b_vals else np.zeros(0)
    G = np.array(G_rows) if G_rows else np.zeros((0, n))
    h = np.array(h_vals) if h_vals else np.zeros(0)
    return ConicProblem(names, c, A, b, G, h, tuple(blocks))


@dataclass(frozen=True, eq=False)
class SolutionFile:
    primal: np.ndarray
    dual_eq: np.ndarray | None = None
    dual_cone: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, SolutionFile):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (
            same(self.primal, other.primal)
            and same(self.dual_eq, other.dual_eq)
            and same(self.dual_cone, other.dual_cone)
        )


def write_solution(sol: SolutionFile) -> str:
    lines = ["SOLUTION 1", "PRIMAL " + " ".join(_fmt(v) for v in sol.primal)]
    if sol.dual_eq is not None:
        lines.append("DUAL_EQ " + " ".join(_fmt(v) for v in sol.dual_eq))
    if sol.dual_cone is not None:
        lines.append("DUAL_CONE " + " ".join(_fmt(v) for v in sol.dual_cone))
    lines.append("END")
    return "\n".join(lines) + "\n"


def read_solution(text: str) -> SolutionFile:
    lines = _Lines(text)
    no, ln = lines.next("header")
    if ln != "SOLUTION 1":
        raise ConicFormatError(f"line {no}: expected 'SOLUTION 1'")
    no, ln = lines.next("PRIMAL")
    if not ln.startswith("PRIMAL"):
        raise ConicFormatError(f"line {no}: expected 'PRIMAL'")
    primal = np.array([float(x) for x in ln.split()[1:]])
    dual_eq = dual_cone = None
    while True:
        no, ln = lines.next("'DUAL_...' or 'END'")
        if ln == "END":
            break
        if ln.startswith("DUAL_EQ"):
            dual_eq = np.array([float(x) for x in ln.split()[1:]])
        elif ln.startswith("DUAL_CONE"):
            dual_cone = np.array([float(x) for x in ln.split()[1:]])
        else:
            raise ConicFormatError(f"line {no}: expected DUAL_EQ, DUAL_CONE or END")
    return SolutionFile(primal, dual_eq, dual_cone)
