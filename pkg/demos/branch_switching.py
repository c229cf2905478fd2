"""Trace the homogeneous branch of the M1 row, then switch onto the pattern branch.

    python demos/branch_switching.py [outdir]

Prints the events found on both branches and writes branches.svg plus one
CSV table per branch.
"""
import sys
from pathlib import Path

from auxinbif import CellRow, ContinuationProblem, continue_branch, continue_switched, make_point, preset, trivial_solution
from auxinbif import svg
from auxinbif.continuation import stability_losses
from auxinbif.export import write_branch_csv

WINDOW = (0.1, 6.0)
PROBE = 6


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    row, prm = CellRow(20), preset("M1").with_(t=0.1)
    problem = ContinuationProblem.for_model(row, prm, "t")
    trivial = continue_branch(problem, make_point(problem, trivial_solution(row, prm), prm.t), WINDOW)
    loss = min(stability_losses(trivial), key=lambda e: e.lam)
    print(f"trivial branch: {len(trivial)} points, stability lost at T = {loss.lam:.6f} ({loss.kind})")

    pattern = continue_switched(problem, loss, WINDOW)
    print(f"pattern branch: {len(pattern)} points")
    for ev in pattern.events:
        if ev.kind in ("LimitPoint", "BranchPoint", "Hopf"):
            print(f"  {ev.kind:12s} T = {ev.lam:.5f}")

    branches = [trivial, pattern]
    for k, b in enumerate(branches):
        write_branch_csv(out / f"branch_{k}.csv", b, PROBE)
    curves = [(b.lambdas, b.probe(PROBE), b.stable) for b in branches]
    marks = [(ev.lam, ev.u[row.n + PROBE - 1], ev.kind) for b in branches for ev in b.events]
    (out / "branches.svg").write_text(svg.branch_diagram(curves, marks, "T", f"a_{PROBE}"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/branch_switching"))
