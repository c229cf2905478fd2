"""Hopf onset on the M3 row and the oscillation just past it.

    python demos/oscillations.py [outdir]

Continues the homogeneous state up to the first Hopf point, then integrates
slightly beyond it and summarizes the limit cycle seen in the probe cell.
"""
import sys
from pathlib import Path

import numpy as np

from auxinbif import CellRow, ContinuationProblem, analyze_orbit, continue_branch, make_point, perturbed_trivial, preset, simulate, trivial_solution
from auxinbif import svg
from auxinbif.export import write_orbit_json


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    row, prm = CellRow(20), preset("M3").with_(t=15.0)
    problem = ContinuationProblem.for_model(row, prm, "t")
    branch = continue_branch(problem, make_point(problem, trivial_solution(row, prm), prm.t), (15.0, 30.0))
    hopf = min((e for e in branch.events if e.kind == "Hopf"), key=lambda e: e.lam)
    print(f"first Hopf at T = {hopf.lam:.4f}, frequency {hopf.beta:.4f}, linear period {2 * np.pi / hopf.beta:.3f}")

    beyond = prm.with_(t=23.5)
    traj = simulate(perturbed_trivial(row, beyond, amplitude=0.02), row, beyond, 1200.0, sample_stride=10)
    orbit = analyze_orbit(traj)
    print(f"T = 23.5: period {orbit.period:.4f}, converged {orbit.converged}")
    print(f"  probe cell swings between {orbit.a_min[5]:.4f} and {orbit.a_max[5]:.4f}")
    write_orbit_json(out / "orbit.json", orbit)
    tail = traj.times >= traj.times[-1] - 100.0
    (out / "spacetime.svg").write_text(svg.spacetime_plot(traj.times[tail], traj.a[tail], title="T = 23.5"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/oscillations"))
