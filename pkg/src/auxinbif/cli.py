"""Command-line front end.

Every command writes its outputs plus ``manifest.json`` into the output
directory (``--out``, else ``$AUXINBIF_OUT``, else the working directory).
Parameters resolve in this order: preset, then ``--params`` file, then each
``--set key=value``.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 continuation failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import SPEC_VERSION, __version__
from .atlas import GridSpec, boundary_type_map, stability_map
from .continuation import (
    ContinuationConfig,
    ContinuationProblem,
    SwitchFailed,
    continue_branch,
    continue_switched,
    make_point,
)
from .export import (
    write_branch_csv,
    write_events_json,
    write_orbit_json,
    write_phase_csv,
    write_trajectory_csv,
)
from .integrate import BlowUpError, analyze_orbit, perturbed_trivial, phase_plane, simulate, tile_pattern
from .model import PARAMETER_NAMES, CellRow, DynamicState, ParameterSet, preset, steady_residual, trivial_concentrations, trivial_solution
from .numerics import (
    NonConvergence,
    NumericsConfig,
    classify_stability,
    eigenvalues,
    fd_jacobian,
    matrix_to_json,
    newton_solve,
    spectrum_to_json,
)
from . import svg

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_CONTINUATION = 0, 2, 3, 4
OUT_ENV = "AUXINBIF_OUT"


class ConfigError(Exception):
    pass


class Run:
    """Collects outputs and writes the manifest at the end of a command."""

    def __init__(self, args, params: ParameterSet | None):
        self.out = Path(args.out or os.environ.get(OUT_ENV) or ".")
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.errors: list[str] = []
        self.started = time.perf_counter()
        self.config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
        self.config["params"] = params.to_dict() if params else None

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def finish(self, status: int) -> int:
        outputs = []
        for p in self.files:
            if p.exists():
                outputs.append({"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        manifest = {
            "tool": "auxinbif",
            "version": __version__,
            "spec_version": SPEC_VERSION,
            "config": self.config,
            "exit_code": status,
            "errors": self.errors,
            "wall_time_s": round(time.perf_counter() - self.started, 3),
            "outputs": outputs,
        }
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=".manifest-", suffix=".json")
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
            fh.write("\n")
        os.replace(tmp, self.out / "manifest.json")
        return status


def _parse_set(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in PARAMETER_NAMES:
            raise ConfigError(f"--set expects key=value with key in {', '.join(PARAMETER_NAMES)}; got {item!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise ConfigError(f"--set {key}: {value!r} is not a number") from None
    return out


def resolve_params(args) -> ParameterSet:
    try:
        params = ParameterSet.from_json(Path(args.params)) if args.params else preset(args.preset)
        params = params.with_(**_parse_set(args.set)).validate()
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    return params


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--window expects lo:hi, got {text!r}") from None
    if not lo < hi:
        raise ConfigError("--window needs lo < hi")
    return lo, hi


def load_state(path, params: ParameterSet) -> DynamicState:
    """Read a state file holding ``u`` (steady vector) or ``p`` and ``a``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read state file {path}: {exc}") from exc
    if "u" in data:
        u = np.asarray(data["u"], dtype=float)
        if u.ndim != 1 or u.size % 2:
            raise ConfigError(f"state file {path}: 'u' must be a flat vector of even length")
        return DynamicState.from_steady(u, params)
    if "p" in data and "a" in data:
        try:
            return DynamicState(data["p"], data["a"])
        except ValueError as exc:
            raise ConfigError(f"state file {path}: {exc}") from exc
    raise ConfigError(f"state file {path} needs 'u' or both 'p' and 'a'")


def _state_json(state: DynamicState, params: ParameterSet) -> str:
    payload = {"n": state.n, "p": state.p.tolist(), "a": state.a.tolist(), "u": state.steady_vector().tolist(), "params": params.to_dict()}
    return json.dumps(payload, indent=2) + "\n"


# -- commands ---------------------------------------------------------------


def cmd_trivial(args, params: ParameterSet, run: Run) -> int:
    row = CellRow(args.cells)
    p_star, a_star = trivial_concentrations(params)
    u = trivial_solution(row, params)
    jac = fd_jacobian(lambda x: steady_residual(x, row, params), u, vectorized=True)
    spec = eigenvalues(jac)
    tag = classify_stability(spec)
    lead = spec.leading()
    report = {
        "n": args.cells,
        "a_star": a_star,
        "p_star": p_star,
        "stability": tag.kind,
        "unstable_count": tag.unstable_count,
        "leading_pair_complex": tag.leading_pair_complex,
        "leading_eigenvalue": [lead.real, lead.imag],
        "params": params.to_dict(),
    }
    print(f"a* = {a_star:.6f}")
    print(f"p* = {p_star:.6f}")
    print(f"stability: {tag.kind} ({tag.unstable_count} eigenvalues with positive real part)")
    run.write_text("trivial.json", json.dumps(report, indent=2) + "\n")
    if args.dump_matrices:
        run.write_text("jacobian.json", matrix_to_json(jac) + "\n")
        run.write_text("spectrum.json", spectrum_to_json(spec) + "\n")
    return EXIT_OK


def cmd_simulate(args, params: ParameterSet, run: Run) -> int:
    row = CellRow(args.cells)
    if args.t_end <= 0 or args.dt <= 0 or args.stride < 1:
        raise ConfigError("--t-end and --dt must be positive and --stride >= 1")
    if args.start:
        state0 = load_state(args.start, params)
        row = CellRow(state0.n)
    else:
        state0 = perturbed_trivial(row, params, args.amplitude, args.frequency)
    if not 1 <= args.probe <= row.n:
        raise ConfigError(f"--probe must lie in 1..{row.n}")
    # a run shorter than one stride still records its last step
    stride = max(1, min(args.stride, int(round(args.t_end / args.dt))))
    try:
        traj = simulate(state0, row, params, args.t_end, args.dt, stride)
    except BlowUpError as exc:
        if exc.trajectory is not None:
            write_trajectory_csv(run.path("trajectory.csv"), exc.trajectory)
        msg = str(exc)
        run.errors.append(msg)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_BLOWUP
    rows = write_trajectory_csv(run.path("trajectory.csv"), traj)
    run.write_text("final_state.json", _state_json(traj.final, params))
    print(f"{rows} samples written; final max a = {traj.final.a.max():.6f}")
    if args.svg:
        run.write_text("spacetime.svg", svg.spacetime_plot(traj.times, traj.a, title=f"T = {params.t:g}"))
    if args.orbit:
        orbit = analyze_orbit(traj, args.probe, args.transient)
        write_orbit_json(run.path("orbit.json"), orbit)
        write_phase_csv(run.path("phase.csv"), phase_plane(traj, row, params, args.probe))
        period = f"{orbit.period:.6f}" if orbit.converged else "n/a"
        print(f"orbit converged: {orbit.converged}, period {period} ({orbit.diagnostics})")
    return EXIT_OK


def _start_state(args, params, run: Run) -> tuple[CellRow, np.ndarray]:
    spec = args.start
    if spec == "trivial":
        row = CellRow(args.cells)
        return row, trivial_solution(row, params)
    if spec.startswith("tile:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError("--from tile expects tile:FILE:COPIES")
        try:
            copies = int(parts[2])
        except ValueError:
            raise ConfigError(f"tile copies must be an integer, got {parts[2]!r}") from None
        pattern = load_state(parts[1], params)
        state = tile_pattern(pattern.steady_vector(), copies, params)
        row = CellRow(state.n)
        if args.relax > 0:
            # settle the copies into a steady state before Newton takes over
            state = simulate(state, row, params, args.relax, sample_stride=max(1, int(args.relax / 0.01))).final
        return row, state.steady_vector()
    with np.errstate(invalid="ignore"):  # non-finite states fail as a start point in cmd_continue
        state = load_state(spec, params)
    return CellRow(state.n), state.steady_vector()


def cmd_continue(args, params: ParameterSet, run: Run) -> int:
    lo, hi = _window(args.window)
    if args.param not in PARAMETER_NAMES:
        raise ConfigError(f"--param must be one of {', '.join(PARAMETER_NAMES)}")
    if args.ds0 <= 0:
        raise ConfigError("--ds0 must be positive")
    lam0 = getattr(params, args.param)
    if not lo <= lam0 <= hi:
        raise ConfigError(f"start value {args.param}={lam0} lies outside the window {lo}:{hi}; use --set")
    row, u0 = _start_state(args, params, run)
    if not 1 <= args.probe <= row.n:
        raise ConfigError(f"--probe must lie in 1..{row.n}")
    config = ContinuationConfig(ds0=args.ds0)
    problem = ContinuationProblem.for_model(row, params, args.param)
    try:
        with np.errstate(all="ignore"):  # a bad start is reported below, not warned about
            start = make_point(problem, u0, lam0, config=config)
    except (NonConvergence, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        run.errors.append(f"start point: {exc}")
        print(f"error: could not converge the start point: {exc}", file=sys.stderr)
        return EXIT_CONTINUATION

    branches = [continue_branch(problem, start, (lo, hi), config)]
    frontier = [(branches[0], 0)]
    while frontier:
        branch, depth = frontier.pop(0)
        if not args.switch or depth >= args.switch_depth:
            continue
        for ev in branch.events:
            if ev.kind != "BranchPoint":
                continue
            try:
                new = continue_switched(problem, ev, (lo, hi), config)
            except SwitchFailed as exc:
                run.errors.append(f"switch at {args.param}={ev.lam:.6g}: {exc}")
                continue
            branches.append(new)
            frontier.append((new, depth + 1))

    events = []
    for k, branch in enumerate(branches):
        write_branch_csv(run.path(f"branch_{k}.csv"), branch, args.probe)
        run.errors.extend(branch.diagnostics)
        for ev in branch.events:
            d = ev.to_dict()
            d["branch"] = k
            events.append(d)
            print(f"branch {k}: {ev.kind} at {args.param} = {ev.lam:.6f}" + (f", beta = {ev.beta:.6f}" if ev.beta else ""))
    with open(run.path("events.json"), "w") as fh:
        json.dump({"param": args.param, "probe_cell": args.probe, "events": events}, fh, indent=2)
        fh.write("\n")
    if args.dump_matrices:
        for i, d in enumerate(events):
            u = np.asarray(d["u"])
            jac = problem.jac_u(u, d["lambda"], config.numerics)
            run.write_text(f"event_{i}_jacobian.json", matrix_to_json(jac) + "\n")
            run.write_text(f"event_{i}_spectrum.json", spectrum_to_json(eigenvalues(jac)) + "\n")
    if args.svg:
        curves = [(b.lambdas, b.probe(args.probe), b.stable) for b in branches]
        marks = [(ev.lam, ev.u[row.n + args.probe - 1], ev.kind) for b in branches for ev in b.events]
        run.write_text("branches.svg", svg.branch_diagram(curves, marks, args.param, f"a_{args.probe}"))
    print(f"{len(branches)} branch(es), {sum(len(b) for b in branches)} points")
    return EXIT_OK


def cmd_atlas(args, params: ParameterSet, run: Run) -> int:
    try:
        gx, gy = GridSpec.parse(args.x), GridSpec.parse(args.y)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if gx.param_id == gy.param_id:
        raise ConfigError("--x and --y must vary different parameters")
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    grid = stability_map(gx, gy, params, args.cells, jobs=args.jobs)
    grid.write_csv(run.path("grid.csv"))
    print(f"stable fraction {grid.stable_fraction():.4f} over {gx.count}x{gy.count} nodes")
    samples = []
    if args.boundary_types:
        curve = boundary_type_map(gx, gy, params, args.cells, jobs=args.jobs, grid=grid)
        curve.write_csv(run.path("boundary.csv"))
        samples = curve.samples
        counts = {k: sum(1 for s in samples if s[2] == k) for k in ("BranchPoint", "Hopf")}
        print(f"boundary: {counts['BranchPoint']} BranchPoint, {counts['Hopf']} Hopf, {len(curve.unresolved)} unresolved")
    if args.svg:
        run.write_text("atlas.svg", svg.stability_heatmap(gx.values, gy.values, grid.cells, gx.param_id, gy.param_id, samples))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", default="M2", help="parameter preset M1, M2 or M3 (default M2)")
    common.add_argument("--params", help="JSON parameter file; replaces the preset")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter (repeatable)")
    common.add_argument("--cells", type=int, default=20, help="interior cell count n (default 20)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the working directory)")
    common.add_argument("--dump-matrices", action="store_true", help="also write Jacobians and spectra as JSON")

    parser = argparse.ArgumentParser(prog="auxinbif", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"auxinbif {__version__} (spec {SPEC_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trivial", parents=[common], help="homogeneous steady state and its stability")
    p.set_defaults(func=cmd_trivial)

    p = sub.add_parser("simulate", parents=[common], help="RK4 time integration")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=10, help="keep every k-th step (default 10)")
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--frequency", type=int, default=5)
    p.add_argument("--from", dest="start", help="state JSON to start from instead of the perturbed trivial state")
    p.add_argument("--svg", action="store_true")
    p.add_argument("--orbit", action="store_true", help="analyze the periodic orbit and write the phase plane")
    p.add_argument("--probe", type=int, default=6)
    p.add_argument("--transient", type=float, default=0.5)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("continue", parents=[common], help="pseudo-arclength continuation")
    p.add_argument("--param", default="t")
    p.add_argument("--window", default="0.1:6")
    p.add_argument("--ds0", type=float, default=0.01)
    p.add_argument("--from", dest="start", default="trivial", help="trivial, a state JSON, or tile:FILE:COPIES")
    p.add_argument("--relax", type=float, default=500.0, help="time to integrate a tiled start before Newton (default 500)")
    p.add_argument("--switch", action="store_true", help="follow branches emerging from branch points")
    p.add_argument("--switch-depth", type=int, default=1)
    p.add_argument("--probe", type=int, default=6)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("atlas", parents=[common], help="two-parameter stability map of the trivial state")
    p.add_argument("--x", required=True, help="id:lo:hi:count[:log]")
    p.add_argument("--y", required=True, help="id:lo:hi:count[:log]")
    p.add_argument("--boundary-types", action="store_true")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_atlas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve_params(args)
        if args.cells < 2:
            raise ConfigError("--cells must be >= 2")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args, params)
    try:
        status = args.func(args, params, run)
    except ConfigError as exc:
        run.errors.append(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except BlowUpError as exc:
        run.errors.append(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_BLOWUP
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
