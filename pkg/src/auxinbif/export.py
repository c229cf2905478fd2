"""CSV and JSON writers for trajectories, branches, events and orbits."""
from __future__ import annotations

import csv
import json

import numpy as np

from .continuation import Branch
from .integrate import OrbitSummary, Trajectory

__all__ = [
    "write_branch_csv",
    "write_events_json",
    "write_orbit_json",
    "write_phase_csv",
    "write_trajectory_csv",
]


def _num(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path, traj: Trajectory) -> int:
    """Header ``t,p_0..p_{n+1},a_1..a_n``; returns the number of data rows."""
    n = traj.a.shape[1]
    header = ["t"] + [f"p_{i}" for i in range(n + 2)] + [f"a_{i}" for i in range(1, n + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, p, a in zip(traj.times, traj.p, traj.a):
            w.writerow([_num(t)] + [_num(v) for v in p] + [_num(v) for v in a])
    return len(traj)


def write_phase_csv(path, table: np.ndarray) -> int:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "a_probe", "da_probe_dt"])
        for row in table:
            w.writerow([_num(v) for v in row])
    return table.shape[0]


def write_branch_csv(path, branch: Branch, probe_cell: int = 6) -> int:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lambda", "a_probe", "stable", "unstable_count", "dlambda_ds"])
        for k, lam, a, stable, count, dl in branch.table(probe_cell):
            w.writerow([k, _num(lam), _num(a), stable, count, _num(dl)])
    return len(branch)


def write_events_json(path, events, extra: dict | None = None) -> None:
    payload = {"events": [ev.to_dict() for ev in events]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_orbit_json(path, orbit: OrbitSummary) -> None:
    with open(path, "w") as fh:
        json.dump(orbit.to_dict(), fh, indent=2)
        fh.write("\n")
