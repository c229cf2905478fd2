"""Pseudo-arclength continuation of steady branches with event detection.

A branch is traced in ``(u, lam)`` space, where ``lam`` is any scalar field
of :class:`ParameterSet`. Every accepted point carries its spectrum, so
stability changes are found by comparing neighbors. They are then refined
by bisection in arclength:

* a sign change of ``dlam/ds`` is a limit point (fold),
* one real eigenvalue crossing without a fold is a branch point,
* a complex pair crossing is a Hopf point.

Intervals with a mixture of crossings are split before giving up and
reporting an ``unresolved`` event.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .model import CellRow, ParameterSet, PARAMETER_NAMES, steady_residual
from .numerics import (
    NonConvergence,
    NumericsConfig,
    Spectrum,
    StabilityTag,
    classify_stability,
    eigenvalues,
    fd_jacobian,
    lu_factor_checked,
    newton_solve,
    rank_deficiency,
)

log = logging.getLogger(__name__)

__all__ = [
    "BifurcationEvent",
    "Branch",
    "BranchPoint",
    "ContinuationConfig",
    "ContinuationProblem",
    "NullSpaceDegenerate",
    "StepRejected",
    "SwitchFailed",
    "arclength_step",
    "continue_branch",
    "continue_in_omega",
    "continue_switched",
    "detect_bifurcations",
    "make_point",
    "solutions_at",
    "stability_losses",
    "switch_branch",
    "tangent",
]


class StepRejected(RuntimeError):
    """The corrector failed; the caller should shrink the step."""


class NullSpaceDegenerate(np.linalg.LinAlgError):
    """The augmented Jacobian has a two-dimensional null space (a branch point).

    Locate the point with bisection and use :func:`switch_branch` there.
    """


class SwitchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ContinuationConfig:
    ds0: float = 0.01
    ds_min: float = 1e-6
    ds_max: float = 0.1
    grow: float = 1.3
    grow_after: int = 4
    max_points: int = 5000
    corrector_max_iter: int = 12
    max_corrector_ratio: float = 1.0
    min_tangent_cos: float = 0.9
    bisect_tol: float = 1e-8
    max_bisect: int = 30
    max_split_depth: int = 20
    resolve_ds: float = 2e-3  # intervals with a stability change are split down to this arclength
    lp_tol: float = 1e-6
    singular_tol: float = 1e-6
    switch_delta: float = 1e-2
    switch_delta_max: float = 1e-1
    switch_max_ratio: float = 5.0  # a starter may land at most this many deltas from its prediction
    numerics: NumericsConfig = field(default_factory=NumericsConfig)


DEFAULT = ContinuationConfig()


@dataclass
class ContinuationProblem:
    """Residual ``F(u, lam)`` with ``lam`` being one parameter of the model.

    ``residual`` may be replaced by any callable with the same signature,
    which is how the toy problems in the tests are built.
    """

    residual: Callable[[np.ndarray, float], np.ndarray]
    param_id: str = "lam"
    vectorized: bool = False
    row: CellRow | None = None
    params: ParameterSet | None = None

    @classmethod
    def for_model(cls, row: CellRow, params: ParameterSet, param_id: str) -> "ContinuationProblem":
        if param_id not in PARAMETER_NAMES:
            raise KeyError(f"unknown continuation parameter {param_id!r}; choose from {PARAMETER_NAMES}")

        def residual(u, lam):
            return steady_residual(u, row, replace(params, **{param_id: float(lam)}))

        return cls(residual, param_id, True, row, params)

    def params_at(self, lam: float) -> ParameterSet:
        return replace(self.params, **{self.param_id: float(lam)})

    def jac_u(self, u, lam, config: NumericsConfig) -> np.ndarray:
        return fd_jacobian(lambda x: self.residual(x, lam), u, config, vectorized=self.vectorized)

    def jac_lam(self, u, lam, config: NumericsConfig) -> np.ndarray:
        eps = config.fd_epsilon
        return (self.residual(u, lam + eps) - self.residual(u, lam - eps)) / (2.0 * eps)

    def augmented(self, u, lam, config: NumericsConfig) -> np.ndarray:
        return np.column_stack([self.jac_u(u, lam, config), self.jac_lam(u, lam, config)])


@dataclass
class BranchPoint:
    u: np.ndarray
    lam: float
    tangent: np.ndarray
    stability: StabilityTag
    spectrum: Spectrum
    det_sign: int
    residual_norm: float
    sigma_min: float = np.nan  # smallest singular value of J_U relative to the largest

    @property
    def x(self) -> np.ndarray:
        return np.append(self.u, self.lam)

    @property
    def dlambda_ds(self) -> float:
        return float(self.tangent[-1])

    @property
    def test_values(self) -> tuple[int, int, float]:
        return (self.det_sign, self.stability.unstable_count, self.dlambda_ds)

    def flipped(self) -> "BranchPoint":
        return replace(self, tangent=-self.tangent)


@dataclass
class BifurcationEvent:
    kind: str  # BranchPoint, LimitPoint, Hopf or unresolved
    point: BranchPoint
    beta: float | None = None
    null_directions: np.ndarray | None = None
    bracket_width: float = np.nan
    augmented_deficiency: int = 0
    interval: int = -1

    @property
    def u(self) -> np.ndarray:
        return self.point.u

    @property
    def lam(self) -> float:
        return self.point.lam

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "beta": self.beta,
            "residual_norm": self.point.residual_norm,
            "bracket_width": self.bracket_width,
            "augmented_deficiency": self.augmented_deficiency,
            "unstable_count": self.point.stability.unstable_count,
            "u": self.u.tolist(),
        }


@dataclass
class Branch:
    points: list[BranchPoint]
    param_id: str
    events: list[BifurcationEvent] = field(default_factory=list)
    closed: bool = False
    diagnostics: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def stable(self) -> np.ndarray:
        return np.array([p.stability.stable for p in self.points])

    def probe(self, cell: int = 6) -> np.ndarray:
        """IAA in interior cell ``cell`` (1-based) along the branch."""
        return np.array([p.u[len(p.u) // 2 + cell - 1] for p in self.points])

    def table(self, probe_cell: int = 6) -> list[tuple]:
        a = self.probe(probe_cell)
        return [
            (k, p.lam, a[k], int(p.stability.stable), p.stability.unstable_count, p.dlambda_ds)
            for k, p in enumerate(self.points)
        ]


def _null_basis(aug: np.ndarray, config: ContinuationConfig):
    _, s, vh = np.linalg.svd(aug)
    return s, vh


def _orient(t: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    if previous is not None:
        return t if float(t @ previous) >= 0 else -t
    if t[-1] != 0:
        return t if t[-1] > 0 else -t
    k = np.flatnonzero(t)[0]
    return t if t[k] > 0 else -t


def tangent(
    problem: ContinuationProblem,
    u: np.ndarray,
    lam: float,
    previous_tangent: np.ndarray | None = None,
    config: ContinuationConfig = DEFAULT,
    aug: np.ndarray | None = None,
    allow_degenerate: bool = False,
) -> np.ndarray:
    """Unit null vector of ``[J_U | J_lam]``, oriented like ``previous_tangent``.

    Without a previous tangent the ``+lam`` direction is preferred. At a
    branch point the null space is two-dimensional and the direction is
    ambiguous; this raises unless ``allow_degenerate`` is set and a previous
    tangent is available, in which case its projection is returned.
    """
    if aug is None:
        aug = problem.augmented(u, lam, config.numerics)
    if previous_tangent is not None:
        # bordered solve; singular only on a branch point, where the SVD below decides
        bordered = np.vstack([aug, previous_tangent])
        try:
            lu = lu_factor_checked(bordered, config.numerics)
        except np.linalg.LinAlgError:
            pass
        else:
            rhs = np.zeros(aug.shape[1])
            rhs[-1] = 1.0
            t = scipy.linalg.lu_solve(lu, rhs)
            return _orient(t / np.linalg.norm(t), previous_tangent)
    s, vh = _null_basis(aug, config)
    t = vh[-1]
    degenerate = s[-1] <= config.numerics.rank_tol * max(s[0], 1.0)
    if degenerate:
        if not (allow_degenerate and previous_tangent is not None):
            raise NullSpaceDegenerate(
                f"two-dimensional null space at {problem.param_id}={lam:.10g}; "
                "refine the branch point by bisection and switch branches there"
            )
        basis = vh[-2:]
        t = basis.T @ (basis @ previous_tangent)
        t /= np.linalg.norm(t)
    return _orient(t, previous_tangent)


def make_point(
    problem: ContinuationProblem,
    u: np.ndarray,
    lam: float,
    previous_tangent: np.ndarray | None = None,
    config: ContinuationConfig = DEFAULT,
    refine: bool = True,
    allow_degenerate: bool = False,
) -> BranchPoint:
    """Build a fully annotated branch point, optionally Newton-refining u at fixed lam."""
    nc = config.numerics
    u = np.asarray(u, dtype=float)
    if refine:
        u = newton_solve(lambda x: problem.residual(x, lam), u, nc, vectorized=problem.vectorized).u
    ju = problem.jac_u(u, lam, nc)
    jl = problem.jac_lam(u, lam, nc)
    aug = np.column_stack([ju, jl])
    t = tangent(problem, u, lam, previous_tangent, config, aug=aug, allow_degenerate=allow_degenerate)
    return _annotate(problem, u, lam, t, ju, jl, config)


def _annotate(problem, u, lam, t, ju, jl, config: ContinuationConfig) -> BranchPoint:
    nc = config.numerics
    spec = eigenvalues(ju)
    stab = classify_stability(spec, nc)
    bordered = np.vstack([np.column_stack([ju, jl]), t])
    sign, _ = np.linalg.slogdet(bordered)
    res = float(np.max(np.abs(problem.residual(u, lam))))
    return BranchPoint(u, float(lam), t, stab, spec, int(sign), res)


def _sigma_ratio(problem, point: BranchPoint, config: ContinuationConfig) -> float:
    sv = np.linalg.svd(problem.jac_u(point.u, point.lam, config.numerics), compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] else 0.0


def _correct(problem, x_pred, direction, config: ContinuationConfig):
    """Newton on ``F(x) = 0`` restricted to the hyperplane through x_pred normal to direction."""
    nc = config.numerics
    x = x_pred.copy()
    m = x.shape[0] - 1
    for _ in range(config.corrector_max_iter):
        u, lam = x[:m], x[m]
        f = problem.residual(u, lam)
        g = float(direction @ (x - x_pred))
        fnorm = float(np.max(np.abs(f)))
        if not np.isfinite(fnorm):
            raise StepRejected("residual is not finite")
        if fnorm <= nc.newton_tol and abs(g) <= nc.newton_tol:
            return x, f
        ju = problem.jac_u(u, lam, nc)
        jl = problem.jac_lam(u, lam, nc)
        bordered = np.vstack([np.column_stack([ju, jl]), direction])
        lu = lu_factor_checked(bordered, nc)
        x = x - scipy.linalg.lu_solve(lu, np.append(f, g))
    raise StepRejected(f"corrector did not converge in {config.corrector_max_iter} iterations")


def arclength_step(
    problem: ContinuationProblem,
    point: BranchPoint,
    ds: float,
    config: ContinuationConfig = DEFAULT,
    allow_degenerate: bool = True,
) -> BranchPoint:
    """One predictor-corrector step of signed length ``ds`` along ``point.tangent``."""
    if ds == 0:
        raise ValueError("ds must be nonzero")
    nc = config.numerics
    x_pred = point.x + ds * point.tangent
    try:
        x, _ = _correct(problem, x_pred, point.tangent, config)
    except StepRejected:
        raise
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise StepRejected(f"corrector failed: {exc}") from exc
    if np.linalg.norm(x - x_pred) > config.max_corrector_ratio * abs(ds):
        raise StepRejected("corrector moved too far from the prediction")
    m = x.shape[0] - 1
    u, lam = x[:m], float(x[m])
    previous = point.tangent if ds > 0 else -point.tangent
    try:
        ju = problem.jac_u(u, lam, nc)
        jl = problem.jac_lam(u, lam, nc)
        t = tangent(problem, u, lam, previous, config, np.column_stack([ju, jl]), allow_degenerate)
    except (ArithmeticError, ValueError) as exc:
        raise StepRejected(f"tangent evaluation failed: {exc}") from exc
    if ds < 0:
        t = -t
    return _annotate(problem, u, lam, t, ju, jl, config)


def _march(problem, start: BranchPoint, window, config: ContinuationConfig, diagnostics: list):
    lo, hi = window
    points = [start]
    ds = config.ds0
    accepted = 0
    closed = False
    current = start
    while len(points) < config.max_points:
        try:
            nxt = arclength_step(problem, current, ds, config)
            if float(nxt.tangent @ current.tangent) < config.min_tangent_cos:
                raise StepRejected("tangent turned too sharply")
        except StepRejected as exc:
            ds *= 0.5
            accepted = 0
            if ds < config.ds_min:
                diagnostics.append(
                    f"step size fell below ds_min at {problem.param_id}={current.lam:.6g}: {exc}"
                )
                break
            continue
        if not lo <= nxt.lam <= hi:
            break
        points.append(nxt)
        current = nxt
        accepted += 1
        if accepted >= config.grow_after:
            ds = min(ds * config.grow, config.ds_max)
            accepted = 0
        if len(points) > 10 and np.linalg.norm(nxt.x - start.x) < 0.5 * ds:
            closed = True
            break
    return points, closed


def continue_branch(
    problem: ContinuationProblem,
    start: BranchPoint,
    window: Sequence[float],
    config: ContinuationConfig = DEFAULT,
    detect: bool = True,
    both_directions: bool = True,
) -> Branch:
    """Trace the branch through ``start`` in both directions until it leaves the window."""
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    if not lo <= start.lam <= hi:
        raise ValueError(f"start {problem.param_id}={start.lam} lies outside the window [{lo}, {hi}]")
    diagnostics: list[str] = []
    forward, closed = _march(problem, start, (lo, hi), config, diagnostics)
    points = forward
    if both_directions and not closed:
        backward, _ = _march(problem, start.flipped(), (lo, hi), config, diagnostics)
        points = [p.flipped() for p in reversed(backward[1:])] + forward
    branch = Branch(points, problem.param_id, closed=closed, diagnostics=diagnostics)
    if detect and len(points) >= 2:
        branch.events = detect_bifurcations(problem, branch, config)
    return branch


def _interval_length(left: BranchPoint, right: BranchPoint) -> float:
    return float(left.tangent @ (right.x - left.x))


def _kind_of_change(left: BranchPoint, right: BranchPoint) -> str | None:
    fold = left.dlambda_ds * right.dlambda_ds < 0
    d_total = right.stability.unstable_count - left.stability.unstable_count
    d_real = right.stability.unstable_real - left.stability.unstable_real
    d_complex = right.stability.unstable_complex - left.stability.unstable_complex
    if fold:
        return "LimitPoint" if abs(d_total) <= 1 else "mixed"
    # pairs colliding on the real axis inside the unstable half-plane leave the total unchanged
    if d_total == 0:
        return None
    if abs(d_real) == 1 and d_complex == 0:
        return "BranchPoint"
    if d_real == 0 and abs(d_complex) == 2:
        return "Hopf"
    return "mixed"


def _signature(point: BranchPoint, kind: str):
    if kind == "LimitPoint":
        return point.dlambda_ds > 0
    return point.stability.unstable_count


def _bisect(problem, left: BranchPoint, right: BranchPoint, kind: str, config: ContinuationConfig):
    """Shrink the arclength bracket around a sign change of the kind's test function."""
    length = _interval_length(left, right)
    lo_s, hi_s = 0.0, length
    lo_pt, hi_pt = left, right
    ref = _signature(left, kind)
    for _ in range(config.max_bisect):
        if abs(hi_s - lo_s) <= config.bisect_tol:
            break
        mid_s = 0.5 * (lo_s + hi_s)
        try:
            mid = arclength_step(problem, left, mid_s, config, allow_degenerate=True)
        except StepRejected:
            break
        if _signature(mid, kind) == ref:
            lo_s, lo_pt = mid_s, mid
        else:
            hi_s, hi_pt = mid_s, mid
    return lo_pt, hi_pt, abs(hi_s - lo_s)


def _refine(problem, left, right, kind, config: ContinuationConfig, interval: int) -> BifurcationEvent:
    lo_pt, hi_pt, width = _bisect(problem, left, right, kind, config)
    nc = config.numerics
    if kind in ("LimitPoint", "BranchPoint"):
        if kind == "LimitPoint":
            best = min((lo_pt, hi_pt), key=lambda p: abs(p.dlambda_ds))
        else:
            best = min((lo_pt, hi_pt), key=lambda p: _sigma_ratio(problem, p, config))
        best.sigma_min = _sigma_ratio(problem, best, config)
        aug = problem.augmented(best.u, best.lam, nc)
        _, _, vh = np.linalg.svd(aug)
        deficiency = rank_deficiency(aug, replace(nc, rank_tol=config.singular_tol))
        # a fold of the crossing branch exactly at a pitchfork is still a branch point;
        # a real crossing with full augmented rank and vertical tangent is a fold
        if deficiency >= 1:
            kind = "BranchPoint"
        elif abs(best.dlambda_ds) <= config.lp_tol:
            kind = "LimitPoint"
        elif kind == "LimitPoint":
            # dlam/ds jumped across the bracket instead of passing through zero;
            # this happens where the tangent flips orientation next to a branch point
            kind = "unresolved"
        return BifurcationEvent(
            kind, best, null_directions=vh[-2:] if kind == "BranchPoint" else None,
            bracket_width=width, augmented_deficiency=deficiency, interval=interval,
        )
    # Hopf: keep the end whose critical pair sits closest to the imaginary axis
    def crit(p):
        w = p.spectrum.eigenvalues
        w = w[np.abs(w.imag) > nc.eig_zero_tol]
        return w[np.argmin(np.abs(w.real))] if w.size else complex(np.inf)

    best = min((lo_pt, hi_pt), key=lambda p: abs(crit(p).real))
    return BifurcationEvent("Hopf", best, beta=float(abs(crit(best).imag)), bracket_width=width, interval=interval)


def _scan(problem, left, right, config, interval, depth, out):
    kind = _kind_of_change(left, right)
    if kind is None:
        return
    length = _interval_length(left, right)
    # a long interval can hide several crossings whose counts happen to add up to a simple one
    if kind != "mixed" and abs(length) <= config.resolve_ds:
        out.append(_refine(problem, left, right, kind, config, interval))
        return
    if depth >= config.max_split_depth:
        if kind != "mixed":
            out.append(_refine(problem, left, right, kind, config, interval))
        else:
            out.append(BifurcationEvent("unresolved", right, bracket_width=length, interval=interval))
        return
    half = 0.5 * length
    try:
        mid = arclength_step(problem, left, half, config, allow_degenerate=True)
    except StepRejected:
        if kind != "mixed":
            out.append(_refine(problem, left, right, kind, config, interval))
        else:
            out.append(BifurcationEvent("unresolved", right, bracket_width=length, interval=interval))
        return
    _scan(problem, left, mid, config, interval, depth + 1, out)
    _scan(problem, mid, right, config, interval, depth + 1, out)


def detect_bifurcations(
    problem: ContinuationProblem, branch: Branch, config: ContinuationConfig = DEFAULT
) -> list[BifurcationEvent]:
    """Find, refine and classify every event between consecutive branch points."""
    events: list[BifurcationEvent] = []
    pts = branch.points
    for k in range(len(pts) - 1):
        _scan(problem, pts[k], pts[k + 1], config, k, 0, events)
    for ev in events:
        log.info("%s at %s=%.6f", ev.kind, problem.param_id, ev.lam)
    return events


def switch_branch(
    problem: ContinuationProblem, event: BifurcationEvent, config: ContinuationConfig = DEFAULT
) -> list[BranchPoint]:
    """Starting points on the branch crossing at a refined branch point.

    The new direction is the part of the augmented Jacobian's
    two-dimensional null space orthogonal to the incoming tangent. Each
    sign gives one starter, corrected on the hyperplane normal to that
    direction. The offset grows from ``switch_delta`` up to
    ``switch_delta_max`` while the corrector fails or falls back onto the
    incoming branch.
    """
    if event.kind != "BranchPoint":
        raise ValueError(f"can only switch at a BranchPoint, got {event.kind}")
    nc = config.numerics
    base = event.point
    incoming = base.tangent
    if event.null_directions is None:
        _, _, vh = np.linalg.svd(problem.augmented(base.u, base.lam, nc))
        basis = vh[-2:]
    else:
        basis = event.null_directions
    c = basis @ incoming
    q = c[1] * basis[0] - c[0] * basis[1]
    q -= (q @ incoming) * incoming
    q /= np.linalg.norm(q)

    starters = []
    notes = []
    for sign in (1.0, -1.0):
        direction = sign * q
        delta = config.switch_delta
        while delta <= config.switch_delta_max * (1 + 1e-12):
            x_pred = base.x + delta * direction
            try:
                x, _ = _correct(problem, x_pred, direction, config)
            except (StepRejected, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                notes.append(f"delta={delta:g} sign={sign:+g}: {exc}")
                delta *= 2
                continue
            # oblique crossings correct by about 2 delta; far jumps land on some other branch
            if np.linalg.norm(x - x_pred) > config.switch_max_ratio * delta:
                notes.append(f"delta={delta:g} sign={sign:+g}: corrector moved too far from the prediction")
                delta *= 2
                continue
            offset = x - base.x
            off_line = offset - (offset @ incoming) * incoming
            if np.linalg.norm(off_line) < 0.5 * delta:
                notes.append(f"delta={delta:g} sign={sign:+g}: fell back onto the incoming branch")
                delta *= 2
                continue
            m = x.shape[0] - 1
            starters.append(
                make_point(problem, x[:m], x[m], direction, config, refine=False, allow_degenerate=True)
            )
            break
    if not starters:
        raise SwitchFailed("no starter converged onto a new branch: " + "; ".join(notes))
    return starters


def continue_switched(
    problem: ContinuationProblem,
    event: BifurcationEvent,
    window: Sequence[float],
    config: ContinuationConfig = DEFAULT,
    detect: bool = True,
) -> Branch:
    """Switch at a branch point and trace the crossing branch on both sides.

    Each starter is marched away from the branch point only; the two halves
    are joined across it, so the branch point shows up again as a stability
    exchange on the new branch.
    """
    lo, hi = float(window[0]), float(window[1])
    starters = [s for s in switch_branch(problem, event, config) if lo <= s.lam <= hi]
    if not starters:
        raise SwitchFailed("all starters lie outside the window")
    diagnostics: list[str] = []
    if len(starters) == 1:
        branch = continue_branch(problem, starters[0], window, config, detect=False)
        diagnostics.extend(branch.diagnostics)
        points, closed = branch.points, branch.closed
    else:
        plus, closed = _march(problem, starters[0], (lo, hi), config, diagnostics)
        if closed:
            points = plus
        else:
            minus, _ = _march(problem, starters[1], (lo, hi), config, diagnostics)
            points = [p.flipped() for p in reversed(minus)] + plus
    branch = Branch(points, problem.param_id, closed=closed, diagnostics=diagnostics)
    if detect and len(points) >= 2:
        branch.events = detect_bifurcations(problem, branch, config)
    return branch


def continue_in_omega(
    row: CellRow,
    params: ParameterSet,
    u0: np.ndarray,
    window: Sequence[float] = (0.0, 1.0),
    config: ContinuationConfig = DEFAULT,
) -> Branch:
    """Continue a steady state in the transport blend ``omega``, starting at ``params.omega``."""
    problem = ContinuationProblem.for_model(row, params, "omega")
    start = make_point(problem, u0, params.omega, config=config)
    # at omega = 1 the branch can only go down; start the march in that direction
    if start.lam >= window[1] and start.dlambda_ds > 0:
        start = start.flipped()
    return continue_branch(problem, start, window, config)


def solutions_at(
    problem: ContinuationProblem, branch: Branch, lam: float, config: ContinuationConfig = DEFAULT
) -> list[np.ndarray]:
    """Steady states of ``branch`` at parameter value ``lam``.

    Every pair of consecutive points bracketing ``lam`` gives a linear
    interpolant, which Newton then refines at fixed ``lam``. Refinements
    that fail are skipped.
    """
    out = []
    pts = branch.points
    for left, right in zip(pts[:-1], pts[1:]):
        if (left.lam - lam) * (right.lam - lam) > 0 or left.lam == right.lam:
            continue
        w = (lam - left.lam) / (right.lam - left.lam)
        guess = (1 - w) * left.u + w * right.u
        try:
            res = newton_solve(lambda x: problem.residual(x, lam), guess, config.numerics, vectorized=problem.vectorized)
        except (NonConvergence, ArithmeticError, ValueError, np.linalg.LinAlgError):
            continue
        out.append(res.u)
    return out


def stability_losses(branch: Branch) -> list[BifurcationEvent]:
    """Events at which the branch changes between Stable and Unstable.

    A coarse step can hold several events; only the one nearest the stable
    end of such an interval is where stability actually changes.
    """
    pts = branch.points
    by_interval: dict[int, list[BifurcationEvent]] = {}
    for ev in branch.events:
        if 0 <= ev.interval < len(pts) - 1:
            by_interval.setdefault(ev.interval, []).append(ev)
    out = []
    for k, evs in sorted(by_interval.items()):
        left, right = pts[k], pts[k + 1]
        if left.stability.stable == right.stability.stable:
            continue
        anchor = left if left.stability.stable else right
        out.append(min(evs, key=lambda e: float(np.linalg.norm(e.point.x - anchor.x))))
    return out
