import csv

import numpy as np
import pytest

from auxinbif.atlas import (
    INVALID,
    STABLE,
    UNSTABLE,
    GridSpec,
    boundary_type_map,
    node_stability,
    stability_map,
)
from auxinbif.model import CellRow, preset, steady_residual, trivial_solution
from auxinbif.numerics import classify_stability, eigenvalues, fd_jacobian

RHO = GridSpec("rho_iaa", 0.01, 3.0, 20)
T20 = GridSpec("t", 0.1, 20.0, 20)


@pytest.fixture(scope="module")
def m2_grid():
    return stability_map(RHO, T20, preset("M2"), 20)


def test_grid_spec():
    g = GridSpec.parse("t:0.1:20:5")
    assert g == GridSpec("t", 0.1, 20.0, 5)
    assert np.allclose(g.values, np.linspace(0.1, 20, 5))
    assert np.allclose(GridSpec.parse("d:0.1:10:3:log").values, [0.1, 1.0, 10.0])
    for bad in ("t:1:0:5", "t:0:1:1", "zz:0:1:3", "t:0:1", "t:0:1:3:lin", "d:0:1:3:log"):
        with pytest.raises((KeyError, ValueError)):
            GridSpec.parse(bad)


def test_small_rho_column_is_stable_for_almost_all_t(m2_grid):
    assert m2_grid.cells.shape == (20, 20)
    first = m2_grid.cells[:, 0]
    assert np.mean(first == STABLE) >= 0.9
    assert set(np.unique(m2_grid.cells)) <= {STABLE, UNSTABLE}


def test_omega_zero_is_stable_everywhere():
    grid = stability_map(GridSpec("rho_iaa", 0.01, 3.0, 12), GridSpec("t", 0.1, 30.0, 12), preset("M2").with_(omega=0.0), 20)
    assert np.all(grid.cells == STABLE)
    other = stability_map(GridSpec("d", 0.1, 5.0, 6), GridSpec("t", 0.1, 30.0, 6), preset("M1").with_(omega=0.0), 20)
    assert np.all(other.cells == STABLE)


def test_tau_one_region_is_strictly_smaller(m2_grid):
    smaller = stability_map(RHO, T20, preset("M2").with_(tau=1.0), 20)
    s1, s2 = smaller.cells == STABLE, m2_grid.cells == STABLE
    assert np.all(s1 <= s2)
    assert s1.sum() < s2.sum()


def test_more_cells_do_not_grow_the_stable_region(m2_grid):
    forty = stability_map(RHO, T20, preset("M2"), 40)
    assert np.all((forty.cells == STABLE) <= (m2_grid.cells == STABLE))


def test_parallel_is_bitwise_serial():
    x, y = GridSpec("rho_iaa", 0.1, 2.0, 6), GridSpec("t", 0.5, 25.0, 5)
    serial = stability_map(x, y, preset("M2"), 20, jobs=1)
    parallel = stability_map(x, y, preset("M2"), 20, jobs=2)
    assert np.array_equal(serial.cells, parallel.cells)
    assert np.array_equal(serial.unstable_real, parallel.unstable_real)
    assert np.array_equal(serial.unstable_complex, parallel.unstable_complex)


def test_nodes_agree_with_direct_classification(m2_grid):
    rng = np.random.default_rng(5)
    for _ in range(6):
        j, i = rng.integers(0, 20, size=2)
        prm = preset("M2").with_(rho_iaa=float(RHO.values[i]), t=float(T20.values[j]))
        row = CellRow(20)
        jac = fd_jacobian(lambda x: steady_residual(x, row, prm), trivial_solution(row, prm), vectorized=True)
        tag = classify_stability(eigenvalues(jac))
        assert m2_grid.cells[j, i] == (STABLE if tag.stable else UNSTABLE)
        assert m2_grid.unstable_real[j, i] == tag.unstable_real


def test_invalid_nodes_are_marked_not_fatal():
    grid = stability_map(GridSpec("mu_iaa", 0.0, 0.2, 3), GridSpec("t", 1.0, 2.0, 2), preset("M2"), 6)
    assert np.all(grid.cells[:, 0] == INVALID)
    assert np.all(grid.cells[:, 1:] != INVALID)
    assert grid.unstable_real[0, 0] == -1
    assert node_stability(preset("M2").with_(mu_iaa=0.0), 6)[0] == INVALID
    with pytest.raises(ValueError):
        stability_map(T20, T20, preset("M2"), 6)


def test_grid_csv(tmp_path, m2_grid):
    path = tmp_path / "grid.csv"
    m2_grid.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0][0] == "t\\rho_iaa"
    assert np.allclose([float(v) for v in rows[0][1:]], RHO.values, rtol=0, atol=0)
    assert len(rows) == 21
    assert float(rows[1][0]) == T20.values[0]
    assert {c for r in rows[1:] for c in r[1:]} <= {"0", "1", "9"}
    assert [int(c) for c in rows[5][1:]] == list(m2_grid.cells[4])


def test_boundary_kinds(m2_grid, tmp_path):
    curve = boundary_type_map(RHO, T20, preset("M2"), 20, grid=m2_grid)
    assert curve.samples
    assert curve.kinds() <= {"BranchPoint", "Hopf"}
    small = {k for x, _, k in curve.samples if x < 0.8}
    assert small == {"Hopf"}
    curve.write_csv(tmp_path / "boundary.csv")
    rows = list(csv.reader(open(tmp_path / "boundary.csv")))
    assert rows[0] == ["x", "y", "kind"]
    assert len(rows) == 1 + len(curve.samples) + len(curve.unresolved)


def test_boundary_matches_continuation_events():
    # columns through the M2 and M1 production rates; T is bisected at fixed rho
    x = GridSpec("rho_iaa", 0.75, 1.5, 2)
    y = GridSpec("t", 0.1, 6.0, 30)
    curve = boundary_type_map(x, y, preset("M2"), 20)
    at = {round(xv, 2): (yv, k) for xv, yv, k in curve.samples}
    assert at[0.75][1] == "Hopf" and at[0.75][0] == pytest.approx(3.3113, abs=0.01)
    assert at[1.5][1] == "BranchPoint" and at[1.5][0] == pytest.approx(0.8983, abs=0.01)
