"""Random cone data shared by the conic tests and the acceptance suite.

Primal samples are interior points (plus the flat boundary piece of the
exponential cone), dual samples follow the dual-cone characterization the
library claims, and weak-duality instances are built backwards from a
feasible point and a dual certificate so the bound must hold by algebra.
"""

import numpy as np

from conify.conic import ConeBlock, ConicProblem, DualCertificate


def sample_cone_point(rng, kind, dim):
    if kind == "ORTHANT":
        return rng.uniform(0.0, 2.0, dim)
    if kind == "SOC":
        rest = rng.normal(size=dim - 1)
        return np.concatenate(([np.linalg.norm(rest) + rng.uniform(0.0, 1.0)], rest))
    if rng.uniform() < 0.25:
        # flat face: v2 = 0 needs v1 >= 0 and v3 <= 0
        return np.array([rng.uniform(0.0, 2.0), 0.0, -rng.uniform(0.0, 2.0)])
    v2 = rng.uniform(0.05, 2.0)
    v3 = rng.normal()
    v1 = v2 * np.exp(v3 / v2) + rng.uniform(0.0, 1.0)
    return np.array([v1, v2, v3])


def sample_interior_point(rng, kind, dim):
    if kind == "ORTHANT":
        return rng.uniform(0.1, 2.0, dim)
    if kind == "SOC":
        rest = rng.normal(size=dim - 1)
        return np.concatenate(([np.linalg.norm(rest) + rng.uniform(0.1, 1.0)], rest))
    v2 = rng.uniform(0.1, 2.0)
    v3 = rng.normal()
    v1 = v2 * np.exp(v3 / v2) + rng.uniform(0.1, 1.0)
    return np.array([v1, v2, v3])


def sample_dual_point(rng, kind, dim):
    if kind in ("ORTHANT", "SOC"):
        return sample_interior_point(rng, kind, dim)
    if rng.uniform() < 0.3:
        # r = 0 face of the dual: p >= 0, q >= 0
        return np.array([rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), 0.0])
    r = -abs(rng.normal()) - 0.1
    p = abs(rng.normal()) + 0.1
    q = r - r * np.log(-r / p) + rng.uniform(0.0, 1.0)
    return np.array([p, q, r])


def random_blocks(rng):
    blocks = []
    for _ in range(rng.integers(1, 4)):
        kind = rng.choice(["ORTHANT", "SOC", "EXP"])
        if kind == "ORTHANT":
            blocks.append(ConeBlock("ORTHANT", int(rng.integers(1, 4))))
        elif kind == "SOC":
            blocks.append(ConeBlock("SOC", int(rng.integers(2, 5))))
        else:
            blocks.append(ConeBlock("EXP", 3))
    return tuple(blocks)


def make_weak_duality_pair(rng):
    """A conic problem, a feasible point, and a valid dual certificate."""
    blocks = random_blocks(rng)
    n = int(rng.integers(2, 7))
    meq = int(rng.integers(0, 3))
    total = sum(b.dim for b in blocks)
    A = rng.normal(size=(meq, n))
    G = rng.normal(size=(total, n))
    x0 = rng.normal(size=n)
    s = np.concatenate([sample_interior_point(rng, b.kind, b.dim) for b in blocks])
    z = np.concatenate([sample_dual_point(rng, b.kind, b.dim) for b in blocks])
    y = rng.normal(size=meq)
    cp = ConicProblem(
        variables=tuple(f"v{i}" for i in range(n)),
        c=A.T @ y + G.T @ z,
        A=A,
        b=A @ x0,
        G=G,
        h=G @ x0 - s,
        blocks=blocks,
    )
    return cp, x0, DualCertificate(y=y, z=z)
