"""Brute-force grid oracle.

Enumerates a finite lattice over a box, keeps feasible points, and returns the
lexicographically first minimizer.  This is the ground truth the reduction
pipeline is checked against, so it stays deliberately dumb: no pruning, no
continuous optimization, nothing shared with the canonizer beyond expression
evaluation.  Anything past three or four free axes is out of its depth; that
is a feature, not a bug.

Lattice nodes use the exact affine combination ((n-1-k)*lo + k*hi)/(n-1)
rather than lo + k*step, so round decimal endpoints produce round decimal
nodes (a 201-point grid on [0, 2] contains 1.0 exactly) and refining a grid
from n to 2n-1 points keeps every old node.

Points where evaluation leaves an atom's domain (log of a nonpositive value,
sqrt of a negative, division by zero) are skipped, matching the DomainError
behaviour of scalar evaluation.  The vectorized path must mask those to nan
itself: numpy maps log(0) to -inf, not nan, and masked comparisons must come
out False.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .conic import ConicProblem, _linear, _NotAffine
from .problem import (
    Assignment,
    Call,
    Const,
    DomainError,
    Expr,
    Param,
    Problem,
    UnboundName,
    Var,
    comparison_holds,
    evaluate,
    objective_value,
)


class OracleError(Exception):
    pass


class Infeasible(OracleError):
    """No lattice point (or sampled point) satisfied every constraint."""


CHUNK = 1 << 20


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("axes need at least two points")
        if not (self.lo <= self.hi):
            raise ValueError(f"axis {self.name}: lo must not exceed hi")

    def values(self) -> np.ndarray:
        n = self.points
        k = np.arange(n, dtype=float)
        return ((n - 1 - k) * self.lo + k * self.hi) / (n - 1)


@dataclass(frozen=True)
class SearchBox:
    axes: tuple[Axis, ...]

    @staticmethod
    def uniform(names, lo: float, hi: float, points: int) -> "SearchBox":
        return SearchBox(tuple(Axis(nm, lo, hi, points) for nm in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(ax.name for ax in self.axes)

    def axis(self, name: str) -> Axis:
        for ax in self.axes:
            if ax.name == name:
                return ax
        raise KeyError(name)

    def with_axis(self, name: str, lo: float, hi: float, points: int) -> "SearchBox":
        out = [Axis(name, lo, hi, points) if ax.name == name else ax for ax in self.axes]
        if not any(ax.name == name for ax in self.axes):
            out.append(Axis(name, lo, hi, points))
        return SearchBox(tuple(out))

    def without(self, name: str) -> "SearchBox":
        return SearchBox(tuple(ax for ax in self.axes if ax.name != name))

    def refined(self) -> "SearchBox":
        """Double the resolution; the old lattice is a subset of the new one."""
        return SearchBox(
            tuple(Axis(ax.name, ax.lo, ax.hi, 2 * ax.points - 1) for ax in self.axes)
        )

    def total_points(self) -> int:
        return math.prod(ax.points for ax in self.axes)


def _as_box(box, names) -> SearchBox:
    if isinstance(box, SearchBox):
        return box
    lo, hi = box
    return SearchBox.uniform(names, float(lo), float(hi), 2)


@dataclass(frozen=True)
class GridResult:
    point: Assignment
    value: float
    feasible_count: int


# --- vectorized evaluation ------------------------------------------------------


def _veval(e: Expr, env: dict[str, np.ndarray | float]):
    """Evaluate over arrays; out-of-domain entries become nan."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (Var, Param)):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundName(e.name) from None
    assert isinstance(e, Call)
    a = _veval(e.args[0], env)
    if e.atom == "neg":
        return -a
    if e.atom == "exp":
        return np.exp(a)
    if e.atom == "log":
        a = np.asarray(a, dtype=float)
        return np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), np.nan)
    if e.atom == "sqrt":
        a = np.asarray(a, dtype=float)
        return np.where(a >= 0, np.sqrt(np.where(a >= 0, a, 0.0)), np.nan)
    if e.atom == "abs":
        return np.abs(a)
    b = _veval(e.args[1], env)
    if e.atom == "add":
        return a + b
    if e.atom == "sub":
        return a - b
    if e.atom == "mul":
        return a * b
    if e.atom == "div":
        b = np.asarray(b, dtype=float)
        return np.where(b != 0, a / np.where(b != 0, b, 1.0), np.nan)
    if e.atom == "pow":
        return np.asarray(a, dtype=float) ** int(b)
    raise AssertionError(e.atom)


def _mask_ok(op: str, lv, rv, tol: float) -> np.ndarray:
    """Vector twin of comparison_holds; nan on either side compares False."""
    lv = np.asarray(lv, dtype=float)
    rv = np.asarray(rv, dtype=float)
    if op == "<=":
        return lv <= rv + tol
    if op == "<":
        return lv < rv
    if op == "=":
        return np.abs(lv - rv) <= tol
    if op == ">=":
        return lv + tol >= rv
    if op == ">":
        return lv > rv
    raise AssertionError(op)


# --- equality elimination -------------------------------------------------------


@dataclass(frozen=True)
class Elimination:
    """One variable solved out of one affine equality constraint."""

    constraint: int
    var: str
    row: np.ndarray  # coefficients over p.variables, lhs minus rhs
    rhs: float  # constant moved right

    def solve(self, env: dict[str, np.ndarray | float], variables) -> np.ndarray | float:
        acc = self.rhs
        coeff = 0.0
        for j, name in enumerate(variables):
            if name == self.var:
                coeff = self.row[j]
            elif self.row[j] != 0.0:
                acc = acc - self.row[j] * env[name]
        return acc / coeff


def find_elimination(p: Problem, params: Assignment, var: str | None = None) -> Elimination | None:
    """First affine equality that can be solved for a variable.

    With var unset, the solved variable is the one with the largest
    coefficient magnitude, later declaration winning ties.
    """
    vidx = {v: i for i, v in enumerate(p.variables)}
    for i, c in enumerate(p.constraints):
        if c.op != "=":
            continue
        try:
            rl, cl = _linear(c.lhs, vidx, params)
            rr, cr = _linear(c.rhs, vidx, params)
        except _NotAffine:
            continue
        row = rl - rr
        if var is not None:
            if row[vidx[var]] != 0.0:
                return Elimination(i, var, row, cr - cl)
            continue
        best = None
        for j, name in enumerate(p.variables):
            if row[j] != 0.0 and (best is None or abs(row[j]) >= abs(row[best])):
                best = j
        if best is not None:
            return Elimination(i, p.variables[best], row, cr - cl)
    return None


# --- grid search ----------------------------------------------------------------


def _scan_grid(axes: tuple[Axis, ...], fill_env, mask_and_obj):
    """Chunked argmin over the lattice product.

    Returns (best flat index, best value, env at best, feasible count) with
    ties resolved to the smallest flat index, which is lexicographic order in
    axis values.
    """
    shape = tuple(ax.points for ax in axes)
    values = [ax.values() for ax in axes]
    total = math.prod(shape)
    best_idx, best_val, feasible = -1, math.inf, 0
    for start in range(0, total, CHUNK):
        stop = min(start + CHUNK, total)
        multi = np.unravel_index(np.arange(start, stop), shape)
        env = {ax.name: values[d][multi[d]] for d, ax in enumerate(axes)}
        fill_env(env)
        with np.errstate(all="ignore"):
            mask, obj = mask_and_obj(env)
        mask = mask & ~np.isnan(obj)
        count = int(mask.sum())
        feasible += count
        if not count:
            continue
        guarded = np.where(mask, obj, math.inf)
        local = int(np.argmin(guarded))
        if guarded[local] < best_val:
            best_val = float(guarded[local])
            best_idx = start + local
    if best_idx < 0:
        raise Infeasible("no feasible lattice point")
    multi = np.unravel_index(best_idx, shape)
    env = {ax.name: float(values[d][multi[d]]) for d, ax in enumerate(axes)}
    fill_env(env)
    return env, best_val, feasible


def grid_minimize(
    p: Problem,
    params: Assignment,
    box,
    tol: float = 1e-6,
    eliminate: str | None = None,
    method: str = "vectorized",
) -> GridResult:
    """Lexicographically first lattice minimizer of p at bound parameters.

    box: a SearchBox covering every variable, or a (lo, hi) pair applied
    uniformly (then useful only for sampling; grids want explicit axes).
    eliminate: "auto" solves the first affine equality for one variable, a
    variable name forces the choice; the solved variable keeps its box bounds
    as a membership filter but costs no axis.
    """
    full = _as_box(box, p.variables)
    missing = set(p.variables) - set(full.names)
    if missing:
        raise OracleError(f"box misses variables: {sorted(missing)}")

    elim = None
    if eliminate is not None:
        elim = find_elimination(p, params, None if eliminate == "auto" else eliminate)
        if elim is None:
            raise OracleError("no affine equality available to eliminate")

    if method == "sequential":
        return _grid_sequential(p, params, full, tol, elim)
    if method != "vectorized":
        raise ValueError(f"unknown method {method!r}")

    axes = tuple(ax for ax in full.axes if elim is None or ax.name != elim.var)
    if not axes:
        raise OracleError("elimination leaves no grid axis")
    skip = () if elim is None else (elim.constraint,)

    def fill_env(env):
        if elim is not None:
            env[elim.var] = elim.solve(env, p.variables)
        env.update(params)

    def mask_and_obj(env):
        mask = np.ones(np.shape(env[axes[0].name]), dtype=bool)
        if elim is not None:
            ax = full.axis(elim.var)
            v = env[elim.var]
            mask &= (v >= ax.lo) & (v <= ax.hi) & np.isfinite(v)
        for i, c in enumerate(p.constraints):
            if i in skip:
                continue
            mask &= _mask_ok(c.op, _veval(c.lhs, env), _veval(c.rhs, env), tol)
        return mask, np.broadcast_to(
            np.asarray(_veval(p.objective, env), dtype=float), mask.shape
        )

    env, value, count = _scan_grid(axes, fill_env, mask_and_obj)
    point = {v: float(env[v]) for v in p.variables}
    return GridResult(point, value, count)


def _grid_sequential(p, params, box, tol, elim) -> GridResult:
    """Reference implementation: plain loops and scalar evaluation."""
    axes = [ax for ax in box.axes if elim is None or ax.name != elim.var]
    names = [ax.name for ax in axes]
    best = None
    feasible = 0
    for combo in itertools.product(*[ax.values().tolist() for ax in axes]):
        point = dict(zip(names, combo))
        if elim is not None:
            acc, coeff = elim.rhs, 0.0
            for j, name in enumerate(p.variables):
                if name == elim.var:
                    coeff = elim.row[j]
                elif elim.row[j] != 0.0:
                    acc -= elim.row[j] * point[name]
            v = acc / coeff
            ax = box.axis(elim.var)
            if not (ax.lo <= v <= ax.hi) or not math.isfinite(v):
                continue
            point[elim.var] = v
        full = {**params, **point}
        held = True
        for i, c in enumerate(p.constraints):
            if elim is not None and i == elim.constraint:
                continue
            try:
                lv = evaluate(c.lhs, full)
                rv = evaluate(c.rhs, full)
            except DomainError:
                held = False
                break
            if not comparison_holds(c.op, lv, rv, tol):
                held = False
                break
        if not held:
            continue
        try:
            val = objective_value(p, full)
        except DomainError:
            continue
        if math.isnan(val):
            continue
        feasible += 1
        if best is None or val < best[0]:
            best = (val, {v: point[v] for v in p.variables})
    if best is None:
        raise Infeasible("no feasible lattice point")
    return GridResult(best[1], best[0], feasible)


# --- conic grid search ----------------------------------------------------------


def _cone_mask(kind: str, s: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized membership for one block; s has shape (dim, chunk)."""
    if kind == "ORTHANT":
        return (s >= -tol).all(axis=0)
    if kind == "SOC":
        return s[0] + tol >= np.sqrt((s[1:] ** 2).sum(axis=0))
    if kind == "EXP":
        x1, x2, x3 = s
        safe = np.where(np.abs(x2) > tol, x2, 1.0)
        main = (x2 > tol) & (x1 + tol >= safe * np.exp(x3 / safe))
        closure = (np.abs(x2) <= tol) & (x1 >= -tol) & (x3 <= tol)
        return main | closure
    raise ValueError(kind)


def grid_minimize_conic(
    cp: ConicProblem, box, tol: float = 1e-6, eliminate: str | None = None
) -> GridResult:
    """Grid search directly on conic data.

    eliminate solves the first equality row for one variable ("auto" picks
    the largest coefficient, later variable winning ties), so that row holds
    to rounding rather than to tol.
    """
    full = _as_box(box, cp.variables)
    missing = set(cp.variables) - set(full.names)
    if missing:
        raise OracleError(f"box misses variables: {sorted(missing)}")

    solved = None
    if eliminate is not None:
        if not cp.A.shape[0]:
            raise OracleError("no equality row to eliminate")
        row, rhs = cp.A[0], float(cp.b[0])
        if eliminate == "auto":
            nz = np.flatnonzero(np.abs(row) == np.abs(row).max())
            j = int(nz[-1])
        else:
            j = cp.variables.index(eliminate)
        if row[j] == 0.0:
            raise OracleError(f"equality row has no {cp.variables[j]} term")
        solved = (j, row, rhs)

    axes = tuple(
        full.axis(v)
        for i, v in enumerate(cp.variables)
        if solved is None or i != solved[0]
    )
    if not axes:
        raise OracleError("elimination leaves no grid axis")

    def fill_env(env):
        if solved is not None:
            j, row, rhs = solved
            acc = rhs
            for i, v in enumerate(cp.variables):
                if i != j and row[i] != 0.0:
                    acc = acc - row[i] * env[v]
            env[cp.variables[j]] = acc / row[j]

    def mask_and_obj(env):
        x = np.vstack([
            np.broadcast_to(np.asarray(env[v], dtype=float), np.shape(env[axes[0].name]))
            for v in cp.variables
        ])
        mask = np.ones(x.shape[1], dtype=bool)
        if solved is not None:
            j = solved[0]
            ax = full.axis(cp.variables[j])
            mask &= (x[j] >= ax.lo) & (x[j] <= ax.hi) & np.isfinite(x[j])
        rows = cp.A[1:] if solved is not None else cp.A
        vals = cp.b[1:] if solved is not None else cp.b
        if rows.shape[0]:
            mask &= (np.abs(rows @ x - vals[:, None]) <= tol).all(axis=0)
        s = cp.G @ x - cp.h[:, None]
        for bl, sl in cp.block_slices():
            mask &= _cone_mask(bl.kind, s[sl], tol)
        return mask, cp.c @ x

    env, value, count = _scan_grid(axes, fill_env, mask_and_obj)
    point = {v: float(env[v]) for v in cp.variables}
    return GridResult(point, value, count)


# --- feasible sampling ----------------------------------------------------------


def sample_feasible(
    p: Problem,
    params: Assignment,
    box,
    n: int,
    seed: int = 0,
    tol: float = 0.0,
    max_batches: int = 4000,
) -> list[Assignment]:
    """Rejection-sample n feasible points, uniform over the box.

    An affine equality, if present, is solved for one variable instead of
    being tested: a random box never hits a hyperplane, and at tol 0 even a
    lattice rarely does.  The solved variable must land inside its box
    bounds.  The solved equality holds by construction (to rounding); every
    other constraint is tested at the given tol, which defaults to exact.
    """
    full = _as_box(box, p.variables)
    missing = set(p.variables) - set(full.names)
    if missing:
        raise OracleError(f"box misses variables: {sorted(missing)}")

    elim = find_elimination(p, params)
    eq_left = sum(
        1
        for i, c in enumerate(p.constraints)
        if c.op == "=" and (elim is None or i != elim.constraint)
    )
    if eq_left and tol <= 0.0:
        raise OracleError(
            "equality constraints beyond the first affine one cannot be "
            "sampled exactly; raise tol or reformulate"
        )

    rng = np.random.default_rng(seed)
    free = [ax for ax in full.axes if elim is None or ax.name != elim.var]
    out: list[Assignment] = []
    batch = max(256, min(8192, 8 * n))
    for _ in range(max_batches):
        env: dict[str, np.ndarray | float] = {
            ax.name: rng.uniform(ax.lo, ax.hi, size=batch) for ax in free
        }
        mask = np.ones(batch, dtype=bool)
        if elim is not None:
            v = elim.solve(env, p.variables)
            env[elim.var] = v
            ax = full.axis(elim.var)
            mask &= (v >= ax.lo) & (v <= ax.hi) & np.isfinite(v)
        env.update(params)
        with np.errstate(all="ignore"):
            for i, c in enumerate(p.constraints):
                if elim is not None and i == elim.constraint:
                    continue
                mask &= _mask_ok(c.op, _veval(c.lhs, env), _veval(c.rhs, env), tol)
        for k in np.flatnonzero(mask):
            out.append({v: float(env[v][k] if np.ndim(env[v]) else env[v]) for v in p.variables})
            if len(out) == n:
                return out
    raise Infeasible(
        f"rejection sampling found {len(out)} of {n} requested points; "
        "the feasible region may be too thin for this box"
    )
