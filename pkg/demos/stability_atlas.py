"""Where is the homogeneous state stable in the (rho_iaa, T) plane?

    python demos/stability_atlas.py [outdir]

Compares the M2 map for tau = 2 with tau = 1 and marks how the boundary is
crossed: a real eigenvalue (pattern onset) or a complex pair (oscillation).
"""
import sys
from pathlib import Path

from auxinbif import GridSpec, boundary_type_map, preset, stability_map
from auxinbif import svg
from auxinbif.atlas import STABLE

X = GridSpec("rho_iaa", 0.01, 3.0, 40)
Y = GridSpec("t", 0.1, 30.0, 40)


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    base = preset("M2")
    wide = stability_map(X, Y, base, 20, jobs=None)
    narrow = stability_map(X, Y, base.with_(tau=1.0), 20, jobs=None)
    n_wide, n_narrow = int((wide.cells == STABLE).sum()), int((narrow.cells == STABLE).sum())
    print(f"stable nodes: tau=2 {n_wide}, tau=1 {n_narrow} of {wide.cells.size}")

    curve = boundary_type_map(X, Y, base, 20, grid=wide, jobs=None)
    for kind in ("BranchPoint", "Hopf"):
        xs = [x for x, _, k in curve.samples if k == kind]
        if xs:
            print(f"  {kind:12s} boundary for rho_iaa in [{min(xs):.2f}, {max(xs):.2f}]")
    wide.write_csv(out / "grid.csv")
    curve.write_csv(out / "boundary.csv")
    (out / "atlas.svg").write_text(svg.stability_heatmap(X.values, Y.values, wide.cells, "rho_iaa", "t", curve.samples))
    print(f"wrote {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/stability_atlas"))
