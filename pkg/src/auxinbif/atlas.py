"""Two-parameter stability scans of the trivial solution.

A grid node is stable (1), unstable (0) or invalid (9) when the closed-form
trivial solution or its Jacobian cannot be evaluated there. Boundaries
between stable and unstable neighbors are bisected along the grid line and
labeled by the kind of eigenvalue that crosses.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import PARAMETER_NAMES, CellRow, ParameterSet, steady_residual, trivial_solution
from .numerics import NumericsConfig, classify_stability, eigenvalues, fd_jacobian

__all__ = [
    "STABLE",
    "UNSTABLE",
    "INVALID",
    "BoundaryTypeCurve",
    "GridSpec",
    "StabilityGrid",
    "boundary_type_map",
    "node_stability",
    "stability_map",
]

STABLE, UNSTABLE, INVALID = 1, 0, 9


@dataclass(frozen=True)
class GridSpec:
    param_id: str
    lo: float
    hi: float
    count: int
    log: bool = False

    def __post_init__(self):
        if self.param_id not in PARAMETER_NAMES:
            raise KeyError(f"unknown parameter {self.param_id!r}")
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got {self.lo} and {self.hi}")
        if self.count < 2:
            raise ValueError("grid needs at least 2 samples")
        if self.log and self.lo <= 0:
            raise ValueError("log spacing needs lo > 0")

    @property
    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``id:lo:hi:count`` (append ``:log`` for geometric spacing)."""
        parts = text.split(":")
        if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "log"):
            raise ValueError(f"grid spec must look like id:lo:hi:count[:log], got {text!r}")
        return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]), len(parts) == 5)


@dataclass
class StabilityGrid:
    """``cells[j, i]`` belongs to ``y.values[j]`` and ``x.values[i]``.

    ``unstable_real`` and ``unstable_complex`` count the eigenvalues in the
    right half-plane per node (-1 on invalid nodes).
    """

    x: GridSpec
    y: GridSpec
    cells: np.ndarray
    base: ParameterSet
    n: int
    unstable_real: np.ndarray | None = None
    unstable_complex: np.ndarray | None = None

    def stable_fraction(self) -> float:
        valid = self.cells != INVALID
        return float(np.count_nonzero(self.cells == STABLE) / max(1, np.count_nonzero(valid)))

    def write_csv(self, path) -> None:
        """Header row holds the x values, first column the y values."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{self.y.param_id}\\{self.x.param_id}"] + [repr(float(v)) for v in self.x.values])
            for yv, row in zip(self.y.values, self.cells):
                w.writerow([repr(float(yv))] + [int(c) for c in row])


@dataclass
class BoundaryTypeCurve:
    samples: list[tuple[float, float, str]] = field(default_factory=list)
    unresolved: list[tuple[float, float, str]] = field(default_factory=list)
    x_id: str = "x"
    y_id: str = "y"

    def kinds(self) -> set[str]:
        return {k for _, _, k in self.samples}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "kind"])
            for x, y, k in self.samples:
                w.writerow([repr(x), repr(y), k])
            for x, y, k in self.unresolved:
                w.writerow([repr(x), repr(y), "unresolved"])


def node_stability(params: ParameterSet, n: int, numerics: NumericsConfig = NumericsConfig()):
    """``(code, unstable_real, unstable_complex)`` for the trivial state at ``params``."""
    row = CellRow(n)
    try:
        params.validate()
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            u = trivial_solution(row, params)
            jac = fd_jacobian(lambda x: steady_residual(x, row, params), u, numerics, vectorized=True)
        if not np.all(np.isfinite(jac)):
            return INVALID, -1, -1
        tag = classify_stability(eigenvalues(jac), numerics)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError):
        return INVALID, -1, -1
    return (STABLE if tag.stable else UNSTABLE), tag.unstable_real, tag.unstable_complex


def _node_task(args):
    params, n, numerics = args
    return node_stability(params, n, numerics)


def _run(tasks, jobs):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) < 2:
        return [_node_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps submission order, so the assembled grid does not depend on scheduling
        return list(pool.map(_node_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def stability_map(
    x: GridSpec,
    y: GridSpec,
    base: ParameterSet,
    n: int,
    jobs: int | None = 1,
    numerics: NumericsConfig = NumericsConfig(),
) -> StabilityGrid:
    """Classify the trivial solution on every node of the ``x`` by ``y`` grid."""
    if x.param_id == y.param_id:
        raise ValueError("the two grid axes must vary different parameters")
    xs, ys = x.values, y.values
    tasks = [
        (replace(base, **{x.param_id: float(xv), y.param_id: float(yv)}), n, numerics)
        for yv in ys
        for xv in xs
    ]
    out = np.array(_run(tasks, jobs), dtype=int).reshape(len(ys), len(xs), 3)
    return StabilityGrid(x, y, out[..., 0].copy(), base, n, out[..., 1].copy(), out[..., 2].copy())


def _classify_crossing(stable_side, unstable_side) -> str | None:
    _, r_s, c_s = stable_side
    _, r_u, c_u = unstable_side
    dr, dc = r_u - r_s, c_u - c_s
    if dr == 1 and dc == 0:
        return "BranchPoint"
    if dr == 0 and dc == 2:
        return "Hopf"
    return None


def _bisect_boundary(args):
    """Bisect one grid edge; returns the boundary value and a kind or a diagnostic."""
    base, n, numerics, pid, lo, hi, fixed_id, fixed, rel_width = args

    def at(v):
        return node_stability(replace(base, **{pid: float(v), fixed_id: float(fixed)}), n, numerics)

    left, right = at(lo), at(hi)
    width_goal = rel_width * max(abs(lo), abs(hi), 1e-12)
    for _ in range(200):
        if abs(hi - lo) <= width_goal:
            break
        mid = 0.5 * (lo + hi)
        m = at(mid)
        if m[0] == INVALID:
            return mid, "invalid node inside the bracket"
        if m[0] == left[0]:
            lo, left = mid, m
        else:
            hi, right = mid, m
    stable_side, unstable_side = (left, right) if left[0] == STABLE else (right, left)
    kind = _classify_crossing(stable_side, unstable_side)
    if kind is None:
        kind = f"real {unstable_side[1]}, complex {unstable_side[2]} unstable at the boundary"
    return 0.5 * (lo + hi), kind


def boundary_type_map(
    x: GridSpec,
    y: GridSpec,
    base: ParameterSet,
    n: int,
    jobs: int | None = 1,
    numerics: NumericsConfig = NumericsConfig(),
    grid: StabilityGrid | None = None,
    rel_width: float = 1e-3,
) -> BoundaryTypeCurve:
    """Label every stability transition of the grid as BranchPoint or Hopf.

    Transitions between horizontally adjacent nodes are bisected in the x
    parameter at fixed y, vertical ones in y at fixed x, until the bracket
    is ``rel_width`` times the parameter value. The crossing is a branch
    point when one real eigenvalue changes side and a Hopf point when one
    complex pair does. Anything else is listed as unresolved.
    """
    if grid is None:
        grid = stability_map(x, y, base, n, jobs, numerics)
    xs, ys, cells = x.values, y.values, grid.cells
    tasks, where = [], []
    for j in range(len(ys)):
        for i in range(len(xs) - 1):
            a, b = cells[j, i], cells[j, i + 1]
            if INVALID not in (a, b) and a != b:
                tasks.append((base, n, numerics, x.param_id, xs[i], xs[i + 1], y.param_id, ys[j], rel_width))
                where.append(("x", j))
    for j in range(len(ys) - 1):
        for i in range(len(xs)):
            a, b = cells[j, i], cells[j + 1, i]
            if INVALID not in (a, b) and a != b:
                tasks.append((base, n, numerics, y.param_id, ys[j], ys[j + 1], x.param_id, xs[i], rel_width))
                where.append(("y", i))

    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bisect_boundary, tasks))
    else:
        results = [_bisect_boundary(t) for t in tasks]

    curve = BoundaryTypeCurve(x_id=x.param_id, y_id=y.param_id)
    for (axis, k), (value, label) in zip(where, results):
        point = (float(value), float(ys[k])) if axis == "x" else (float(xs[k]), float(value))
        if label in ("BranchPoint", "Hopf"):
            curve.samples.append((*point, label))
        else:
            curve.unresolved.append((*point, label))
    return curve
