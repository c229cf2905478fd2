"""Fixed-step RK4 integration, perturbed starts, and orbit analysis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import (
    CellRow,
    DomainError,
    DynamicState,
    ParameterSet,
    _rhs_flat,
    dynamic_rhs,
    split_steady,
    steady_pin,
    trivial_concentrations,
)

__all__ = [
    "BlowUpError",
    "OrbitSummary",
    "Trajectory",
    "analyze_orbit",
    "perturbed_trivial",
    "phase_plane",
    "rk4_step",
    "simulate",
    "tile_pattern",
]

DEFAULT_DT = 0.01
BLOWUP_LIMIT = 1e6


class BlowUpError(FloatingPointError):
    def __init__(self, time, trajectory=None):
        super().__init__(f"solution became non-finite or exceeded |state| > {BLOWUP_LIMIT:g} at t = {time:g}")
        self.time = time
        self.trajectory = trajectory


def _rk4(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state, dt: float, row: CellRow | None = None, params: ParameterSet | None = None, rhs=None):
    """One classical RK4 step.

    Without ``rhs`` the model derivative is used and a DynamicState is
    returned. With ``rhs`` (a callable on arrays) the model is bypassed and
    ``state`` is treated as a plain array.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if rhs is not None:
        return _rk4(rhs, np.asarray(state, dtype=float), dt)
    n = row.n
    y = _rk4(lambda x: _rhs_flat(x, n, params), state.flat(), dt)
    if not np.all(np.isfinite(y)):
        raise BlowUpError(dt)
    return DynamicState.from_flat(y, n)


def perturbed_trivial(row: CellRow, params: ParameterSet, amplitude: float = 0.2, frequency: int = 5) -> DynamicState:
    """Trivial state with ``amplitude*sin(frequency*(i+2)*pi/(n+4))`` added to a_i.

    For n = 20 the denominator is 24, the classic symmetry-breaking start.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    p_star, a_star = trivial_concentrations(params)
    n = row.n
    i = np.arange(1, n + 1)
    a = a_star + amplitude * np.sin(frequency * (i + 2) * np.pi / (n + 4))
    return DynamicState(np.full(n + 2, p_star), a)


@dataclass
class Trajectory:
    """Samples every ``sample_stride`` steps; ``p`` and ``a`` are (samples, cells)."""

    times: np.ndarray
    p: np.ndarray
    a: np.ndarray
    sample_stride: int
    dt: float

    def __len__(self):
        return self.times.shape[0]

    def state(self, k: int) -> DynamicState:
        return DynamicState(self.p[k].copy(), self.a[k].copy())

    @property
    def final(self) -> DynamicState:
        return self.state(-1)


def simulate(
    state0: DynamicState,
    row: CellRow,
    params: ParameterSet,
    t_end: float,
    dt: float = DEFAULT_DT,
    sample_stride: int = 1,
) -> Trajectory:
    """Integrate with fixed-step RK4 from t=0 to t_end.

    Times are ``k*dt`` rather than a running sum, so sampling stays uniform.
    On blow-up the partial trajectory travels with the exception.
    """
    if not (t_end > 0 and dt > 0):
        raise ValueError("t_end and dt must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    n = row.n
    steps = int(round(t_end / dt))
    f = lambda x: _rhs_flat(x, n, params)  # noqa: E731
    y = state0.flat().astype(float)
    samples = [y]
    sample_steps = [0]
    for k in range(1, steps + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                y = _rk4(f, y, dt)
        except (ArithmeticError, DomainError):
            # the state left the model's domain; report it like any other blow-up
            y = np.full_like(y, np.nan)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_LIMIT:
            partial = _pack(sample_steps, samples, n, sample_stride, dt)
            raise BlowUpError(k * dt, partial)
        if k % sample_stride == 0:
            samples.append(y)
            sample_steps.append(k)
    return _pack(sample_steps, samples, n, sample_stride, dt)


def _pack(sample_steps, samples, n, stride, dt) -> Trajectory:
    ys = np.array(samples)
    return Trajectory(np.array(sample_steps) * dt, ys[:, : n + 2], ys[:, n + 2 :], stride, dt)


@dataclass
class OrbitSummary:
    period: float
    a_min: np.ndarray
    a_max: np.ndarray
    poincare_points: list[tuple[float, np.ndarray]] = field(default_factory=list)
    converged: bool = False
    probe_cell: int = 6
    diagnostics: str = ""

    def to_dict(self) -> dict:
        return {
            "period": self.period if np.isfinite(self.period) else None,
            "converged": self.converged,
            "probe_cell": self.probe_cell,
            "a_min": self.a_min.tolist(),
            "a_max": self.a_max.tolist(),
            "poincare_points": [{"t": float(t), "a": a.tolist()} for t, a in self.poincare_points],
            "diagnostics": self.diagnostics,
        }


def analyze_orbit(traj: Trajectory, probe_cell: int = 6, transient_fraction: float = 0.5) -> OrbitSummary:
    """Measure a periodic orbit through upward crossings of the probe cell's mean.

    ``probe_cell`` is an interior index in 1..n. The period is the mean gap
    between crossings, accepted when the gaps scatter by at most 1%.
    """
    if not 0 <= transient_fraction < 1:
        raise ValueError("transient_fraction must lie in [0, 1)")
    start = int(np.floor(transient_fraction * len(traj)))
    t = traj.times[start:]
    a = traj.a[start:]
    x = a[:, probe_cell - 1]
    a_min, a_max = a.min(axis=0), a.max(axis=0)
    level = x.mean()

    below = x[:-1] < level
    above = x[1:] >= level
    idx = np.flatnonzero(below & above)
    crossings = []
    for k in idx:
        frac = (level - x[k]) / (x[k + 1] - x[k])
        tc = t[k] + frac * (t[k + 1] - t[k])
        crossings.append((tc, a[k] + frac * (a[k + 1] - a[k])))

    if len(crossings) < 3:
        return OrbitSummary(
            np.nan, a_min, a_max, crossings, False, probe_cell,
            f"only {len(crossings)} section crossings after the transient; steady state or t_end too short",
        )
    gaps = np.diff([c[0] for c in crossings])
    period = float(gaps.mean())
    spread = float(gaps.std())
    converged = period > 0 and spread <= 0.01 * period
    diag = f"{len(crossings)} crossings, gap std/mean = {spread / period:.2e}"
    return OrbitSummary(period, a_min, a_max, crossings, converged, probe_cell, diag)


def phase_plane(traj: Trajectory, row: CellRow, params: ParameterSet, probe_cell: int = 6) -> np.ndarray:
    """Columns t, a_probe, da_probe/dt with the derivative from the model."""
    n = row.n
    out = np.empty((len(traj), 3))
    out[:, 0] = traj.times
    out[:, 1] = traj.a[:, probe_cell - 1]
    for k in range(len(traj)):
        out[k, 2] = dynamic_rhs(traj.state(k), row, params).a[probe_cell - 1]
    return out


def tile_pattern(pattern: np.ndarray, copies: int, params: ParameterSet) -> DynamicState:
    """Repeat an interior steady pattern ``copies`` times along the row."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    p, a = split_steady(np.asarray(pattern, dtype=float))
    p = np.tile(p, copies)
    a = np.tile(a, copies)
    ghost = steady_pin(a[[0, -1]], params)
    return DynamicState(np.concatenate([[ghost[0]], p, [ghost[1]]]), a)
