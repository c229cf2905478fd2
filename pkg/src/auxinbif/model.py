"""Coupled PIN1/IAA transport model on a one-dimensional file of cells.

The interior cells are numbered ``1..n``. Two ghost cells sit on each side
(``-1, 0`` and ``n+1, n+2``). Ghost IAA mirrors the nearest interior cell,
which realizes zero-flux boundaries. Ghost PIN1 exists only in cells ``0``
and ``n+1``.

Steady unknowns are ordered ``(p_1..p_n, a_1..a_n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

__all__ = [
    "PARAMETER_NAMES",
    "CellRow",
    "DegenerateDenominatorError",
    "DomainError",
    "DynamicState",
    "ParameterSet",
    "active_transport",
    "allocation_weight",
    "count_peaks",
    "dynamic_rhs",
    "preset",
    "reflect_steady",
    "split_steady",
    "steady_pin",
    "steady_residual",
    "trivial_concentrations",
    "trivial_solution",
]


class DomainError(ValueError):
    """Raised when a closed form or power is evaluated outside its domain."""


class DegenerateDenominatorError(ZeroDivisionError):
    """The PIN1 allocation weights of a cell's neighbors sum to zero or less."""


@dataclass(frozen=True)
class ParameterSet:
    b: float
    kappa_pin: float
    kappa_t: float
    kappa_iaa: float
    rho_pin0: float
    rho_pin: float
    mu_pin: float
    mu_iaa: float
    rho_iaa: float
    d: float
    t: float
    omega: float = 1.0
    tau: float = 2.0

    def validate(self) -> "ParameterSet":
        """Check the admissible ranges and return ``self``.

        Construction does not validate, so continuation may probe just past
        a window edge. Call this on user-facing inputs.
        """
        for name in TABLE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"parameter {name!r} must be finite and >= 0, got {value!r}")
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError(f"omega must lie in [0, 1], got {self.omega!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be > 0, got {self.tau!r}")
        return self

    def with_(self, **changes: float) -> "ParameterSet":
        unknown = set(changes) - set(PARAMETER_NAMES)
        if unknown:
            raise KeyError(f"unknown parameter(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in changes.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSet":
        unknown = set(data) - set(PARAMETER_NAMES)
        if unknown:
            raise KeyError(f"unknown parameter(s): {sorted(unknown)}")
        missing = set(TABLE_NAMES) - set(data)
        if missing:
            raise KeyError(f"missing parameter(s): {sorted(missing)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: str | Path) -> "ParameterSet":
        """Load from a JSON string or a path to a JSON file."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        return cls.from_dict(json.loads(text)).validate()


PARAMETER_NAMES = tuple(f.name for f in fields(ParameterSet))
TABLE_NAMES = PARAMETER_NAMES[:11]

_M2 = dict(
    b=3.0,
    kappa_pin=1.0,
    kappa_t=1.0,
    kappa_iaa=1.0,
    rho_pin0=0.0,
    rho_pin=1.0,
    mu_pin=0.1,
    mu_iaa=0.1,
    rho_iaa=0.75,
    d=1.0,
    t=3.5,
)
_PRESETS = {
    "M1": {**_M2, "rho_iaa": 1.5},
    "M2": _M2,
    "M3": {**_M2, "rho_iaa": 0.5},
}


def preset(name: str) -> ParameterSet:
    """Return one of the parameter sets M1, M2, M3 (Smith transport, omega=1, tau=2)."""
    try:
        values = _PRESETS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid presets are {sorted(_PRESETS)}") from None
    return ParameterSet(**values, omega=1.0, tau=2.0).validate()


@dataclass(frozen=True)
class CellRow:
    """A static row of ``n`` unit square cells.

    All walls share one length, so ``wall_length`` cancels from the
    allocation fractions and never enters the equations.
    """

    n: int
    wall_length: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"a cell row needs n >= 2 interior cells, got {self.n!r}")
        if not self.wall_length > 0:
            raise ValueError("wall_length must be positive")

    @property
    def size(self) -> int:
        """Length of the steady unknown vector."""
        return 2 * self.n

    def neighbors(self, i: int) -> tuple[int, int]:
        return (i - 1, i + 1)


@dataclass
class DynamicState:
    """Time-dependent state.

    ``p`` holds PIN1 for cells ``0..n+1`` (both ghost cells included) and
    ``a`` holds IAA for the interior cells ``1..n``.
    """

    p: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.p.shape != (self.a.shape[0] + 2,):
            raise ValueError(f"p must have n+2 entries; got p{self.p.shape}, a{self.a.shape}")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.p, self.a])

    @classmethod
    def from_flat(cls, y: np.ndarray, n: int) -> "DynamicState":
        return cls(y[: n + 2].copy(), y[n + 2 :].copy())

    def steady_vector(self) -> np.ndarray:
        return np.concatenate([self.p[1:-1], self.a])

    @classmethod
    def from_steady(cls, u: np.ndarray, params: ParameterSet) -> "DynamicState":
        """Interior values from ``u``; ghost PIN1 from its steady closed form."""
        p, a = split_steady(u)
        ghost = steady_pin(a[[0, -1]], params)
        return cls(np.concatenate([[ghost[0]], p, [ghost[1]]]), a.copy())

    def reflect(self) -> "DynamicState":
        return DynamicState(self.p[::-1].copy(), self.a[::-1].copy())


def split_steady(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = u.shape[0] // 2
    return u[:n], u[n:]


def reflect_steady(u: np.ndarray) -> np.ndarray:
    """Mirror a steady vector (or residual) through the middle of the row."""
    p, a = split_steady(u)
    return np.concatenate([p[::-1], a[::-1]])


def _power(a, tau: float):
    if float(tau).is_integer():
        return a ** int(tau)
    if np.any(np.asarray(a) < 0):
        raise DomainError(f"negative concentration raised to non-integer power tau={tau}")
    return a**tau


def allocation_weight(a_j, params: ParameterSet):
    """PIN1 allocation weight toward a neighbor holding IAA ``a_j``."""
    w = params.omega
    if w == 1.0:
        return params.b**a_j
    if w == 0.0:
        return a_j * 1.0
    return w * params.b**a_j + (1.0 - w) * a_j


def active_transport(p_i, a_i, a_j, weight_sum, params: ParameterSet):
    """PIN1-mediated IAA flux from cell i into neighbor j.

    ``weight_sum`` is the allocation weight summed over all neighbors of i.
    """
    weight_sum = np.asarray(weight_sum)
    if np.any(weight_sum <= 0):
        raise DegenerateDenominatorError("allocation weights of the neighbors sum to <= 0")
    tau = params.tau
    share = allocation_weight(a_j, params) / weight_sum
    return params.t * p_i * share * _power(a_i, tau) / (1.0 + params.kappa_t * _power(a_j, tau))


def _pin_rate(p, a, params: ParameterSet):
    return (params.rho_pin0 + params.rho_pin * a) / (1.0 + params.kappa_pin * p) - params.mu_pin * p


def _iaa_rate(p_ext, a, params: ParameterSet):
    """IAA rate for interior cells.

    ``p_ext`` carries PIN1 of cells ``0..n+1`` along axis 0; ``a`` carries
    interior IAA. Extra trailing axes are broadcast, so columns of a matrix
    are evaluated independently.
    """
    first, last = a[:1], a[-1:]
    # cells -1..n+2
    a_ext = np.concatenate([first, first, a, last, last])
    w = allocation_weight(a_ext, params)
    # weight sums for cells 0..n+1 over neighbors {k-1, k+1}
    wsum = w[:-2] + w[2:]
    a_k = a_ext[1:-1]  # cells 0..n+1
    # interface k sits between cells k and k+1, k = 0..n
    right = active_transport(p_ext[:-1], a_k[:-1], a_k[1:], wsum[:-1], params)
    left = active_transport(p_ext[1:], a_k[1:], a_k[:-1], wsum[1:], params)
    transport = right[:-1] - left[:-1] + left[1:] - right[1:]
    diffusion = params.d * (a_ext[1:-3] - 2.0 * a + a_ext[3:-1])
    production = params.rho_iaa / (1.0 + params.kappa_iaa * a) - params.mu_iaa * a
    return production + diffusion + transport


def dynamic_rhs(state: DynamicState, row: CellRow, params: ParameterSet) -> DynamicState:
    """Time derivative of the full state, ghost PIN1 included."""
    p, a = state.p, state.a
    if a.shape[0] != row.n:
        raise ValueError(f"state has {a.shape[0]} cells, row has {row.n}")
    a_for_p = np.concatenate([a[:1], a, a[-1:]])
    return DynamicState(_pin_rate(p, a_for_p, params), _iaa_rate(p, a, params))


def _rhs_flat(y: np.ndarray, n: int, params: ParameterSet) -> np.ndarray:
    p, a = y[: n + 2], y[n + 2 :]
    a_for_p = np.concatenate([a[:1], a, a[-1:]])
    return np.concatenate([_pin_rate(p, a_for_p, params), _iaa_rate(p, a, params)])


def steady_residual(u: np.ndarray, row: CellRow, params: ParameterSet) -> np.ndarray:
    """Steady-state residual F(u) of length 2n.

    Ghost PIN1 is tied to its interior neighbor (``p_0 = p_1``,
    ``p_{n+1} = p_n``). Both ghost and neighbor obey the same PIN1 equation
    driven by the same mirrored IAA value, so this subspace is invariant
    under the dynamics and the spectrum of this residual's Jacobian is the
    dynamic spectrum minus two decaying PIN1 modes. At every steady state
    the tie coincides with the closed-form steady PIN1 value.

    ``u`` may carry extra trailing axes; each column is evaluated separately.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] != row.size:
        raise ValueError(f"steady vector must have length {row.size}, got {u.shape[0]}")
    p, a = split_steady(u)
    p_ext = np.concatenate([p[:1], p, p[-1:]])
    return np.concatenate([_pin_rate(p, a, params), _iaa_rate(p_ext, a, params)])


def steady_pin(a, params: ParameterSet):
    """Positive root of the steady PIN1 equation for a given IAA level."""
    k, mu = params.kappa_pin, params.mu_pin
    if k <= 0 or mu <= 0:
        raise DomainError("steady PIN1 needs kappa_pin > 0 and mu_pin > 0")
    return (-1.0 + np.sqrt(1.0 + 4.0 * k * (params.rho_pin0 + params.rho_pin * np.asarray(a)) / mu)) / (2.0 * k)


def trivial_concentrations(params: ParameterSet) -> tuple[float, float]:
    """Homogeneous steady levels ``(p*, a*)``; independent of d, t, omega, tau."""
    k, mu = params.kappa_iaa, params.mu_iaa
    if k <= 0 or mu <= 0:
        raise DomainError("the trivial solution needs kappa_iaa > 0 and mu_iaa > 0")
    a_star = (-1.0 + math.sqrt(1.0 + 4.0 * k * params.rho_iaa / mu)) / (2.0 * k)
    return float(steady_pin(a_star, params)), a_star


def trivial_solution(row: CellRow, params: ParameterSet) -> np.ndarray:
    p_star, a_star = trivial_concentrations(params)
    return np.concatenate([np.full(row.n, p_star), np.full(row.n, a_star)])


def count_peaks(a, rel_tol: float = 1e-6) -> int:
    """Number of IAA peaks in a profile.

    A peak is a strict local maximum whose value exceeds the profile mean.
    Neighbors closer than ``rel_tol`` times the largest value are merged
    first, so a symmetric peak spread over two equal cells counts once.
    The row ends compare against minus infinity.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    tol = rel_tol * max(1.0, float(np.max(np.abs(a))))
    keep = np.concatenate([[True], np.abs(np.diff(a)) > tol])
    levels = a[keep]
    ext = np.concatenate([[-np.inf], levels, [-np.inf]])
    is_max = (levels > ext[:-2]) & (levels > ext[2:])
    return int(np.count_nonzero(is_max & (levels > a.mean())))
