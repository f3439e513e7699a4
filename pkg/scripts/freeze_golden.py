"""Compute the grid-oracle golden values that the acceptance tests pin.

Run from the repository root:

    python3 scripts/freeze_golden.py

The output is meant to be pasted into tests/test_acceptance.py.  Goldens are
only ever produced by this oracle, never by the reduction pipeline under
test.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from conify import SearchBox, grid_minimize, parse  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]

INSTANCES = [
    {"a": 1.0, "b": 1.0, "c": 1.0, "d": 1.0},
    {"a": 2.0, "b": 1.0, "c": 1.0, "d": 3.0},
    {"a": 1.0, "b": 2.0, "c": 1.0, "d": 1.0},
]


def main() -> None:
    p = parse((ROOT / "corpus" / "chain1.opt").read_text())
    box = SearchBox.uniform(("x",), 0.0, 4.0, 401).with_axis("y", -4.0, 2.0, 401)

    print("# star instance, equality kept as a tolerance test")
    t0 = time.time()
    r = grid_minimize(p, INSTANCES[0], box, tol=1e-6)
    print(f"STAR_OPT = {r.point!r}  # value {r.value!r}, {time.time() - t0:.2f}s")

    print("# per-instance optima with y eliminated through the equality")
    for inst in INSTANCES:
        t0 = time.time()
        r = grid_minimize(p, inst, box, tol=1e-6, eliminate="y")
        key = tuple(inst[k] for k in "abcd")
        print(f"    {key!r}: ({r.point['x']!r}, {r.point['y']!r}, {r.value!r}),"
              f"  # {time.time() - t0:.2f}s, {r.feasible_count} feasible")


if __name__ == "__main__":
    main()
