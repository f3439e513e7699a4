"""Walk the full pipeline over the bundled corpus and print what happens.

Run from the repository root:

    python3 scripts/pipeline_demo.py [--workdir DIR]

For every corpus entry this parses the problem, reports DCP conformance,
canonizes it when possible, grid-solves the emitted conic problem, and
re-verifies the written files end to end through the command-line entry
points, exactly as a user would.
"""

import argparse
import json
import pathlib
import shutil
import sys
import tempfile
from dataclasses import dataclass

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from conify import (  # noqa: E402
    canonize,
    dcp_check,
    parse,
    print_problem,
    reduce_problem,
)
from conify.cli import main as cli  # noqa: E402
from conify.dsl import print_constraint  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


@dataclass
class DemoConfig:
    workdir: pathlib.Path
    samples: int = 50
    tol: float = 1e-7


def show_chain_walkthrough() -> None:
    p = parse((CORPUS / "chain1.opt").read_text())
    print("=" * 72)
    print("step-by-step reduction of the exp/log/sqrt chain")
    print("=" * 72)
    print(print_problem(p))
    trace = reduce_problem(p)
    for i, (step, stage) in enumerate(zip(trace.steps, trace.intermediates()[1:]), 1):
        where = ",".join(str(t) for t in step.targets)
        what = f"fresh {step.fresh}" if step.fresh else f"dropped {list(step.removed)}"
        print(f"--- step {i}: {step.schema} at [{where}] ({what}) ---")
        for c in stage.constraints:
            print(f"    {print_constraint(c)}")
    cp, _ = canonize(p, {"a": 1.0, "b": 1.0, "c": 1.0, "d": 1.0})
    kinds = " + ".join(f"{b.kind}({b.dim})" for b in cp.blocks)
    print(f"emitted conic form: {len(cp.variables)} vars, "
          f"{cp.A.shape[0]} equality row(s), cones {kinds}")
    print()


def run_corpus(cfg: DemoConfig) -> int:
    manifest = json.loads((CORPUS / "manifest.json").read_text())
    failures = 0
    print("=" * 72)
    print("corpus pipeline: check, canon, solve-oracle, verify")
    print("=" * 72)
    for name, meta in sorted(manifest.items()):
        src = cfg.workdir / name
        shutil.copy(CORPUS / name, src)
        verdict = dcp_check(parse(src.read_text()))
        tag = "conformant" if verdict.conformant else "NOT conformant"
        if not meta["canonizable"]:
            print(f"{name:18s} {tag}  (stops here by design)")
            continue
        print(f"{name:18s} {tag}")

        params = [f"{k}={v}" for k, v in meta["params"].items()]
        param_args = [a for p_ in params for a in ("--param", p_)]
        rc = cli(["canon", str(src), *param_args,
                  "--samples", str(cfg.samples)])
        if rc != 0:
            print("  canon FAILED")
            failures += 1
            continue

        box_args = []
        for var, (lo, hi) in meta["boxes"].items():
            box_args += ["--box", f"{var}={lo}:{hi}"]
        sol = src.with_suffix(".sol")
        solve = ["solve-oracle", str(src.with_suffix(".cone")), *box_args,
                 "--res", str(meta["res"]), "--tol", str(cfg.tol),
                 "--out", str(sol)]
        if meta["eliminate"]:
            solve += ["--eliminate", "auto"]
        if cli(solve) != 0:
            print("  solve FAILED")
            failures += 1
            continue

        rc = cli(["verify", str(src), str(src.with_suffix(".trace")),
                  str(sol), *param_args])
        print("  -> canon+solve+verify OK" if rc == 0 else "  -> verify FAILED")
        failures += rc != 0
    return failures


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=pathlib.Path, default=None,
                    help="where to place generated files (default: a temp dir)")
    args = ap.parse_args()

    show_chain_walkthrough()
    if args.workdir is not None:
        args.workdir.mkdir(parents=True, exist_ok=True)
        failures = run_corpus(DemoConfig(workdir=args.workdir))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            failures = run_corpus(DemoConfig(workdir=pathlib.Path(tmp)))
    print()
    print("all corpus entries verified" if failures == 0
          else f"{failures} corpus entries FAILED")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
