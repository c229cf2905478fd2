"""Finite-difference Jacobians, Newton solves, spectra and stability tags."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

__all__ = [
    "JacobianEvaluationError",
    "NewtonResult",
    "NonConvergence",
    "NumericsConfig",
    "SingularJacobian",
    "Spectrum",
    "StabilityTag",
    "classify_stability",
    "eigenvalues",
    "fd_jacobian",
    "newton_solve",
    "rank_deficiency",
    "spectrum_to_json",
    "matrix_to_json",
]

ResidualFn = Callable[[np.ndarray], np.ndarray]


class NonConvergence(RuntimeError):
    def __init__(self, message, iterations=0, residual_norm=np.inf):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm


class SingularJacobian(np.linalg.LinAlgError):
    """Newton met a numerically singular Jacobian, usually near a bifurcation."""


class JacobianEvaluationError(RuntimeError):
    def __init__(self, column, cause):
        super().__init__(f"residual evaluation failed for column {column}: {cause}")
        self.column = column


@dataclass(frozen=True)
class NumericsConfig:
    fd_epsilon: float = 1e-7
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    eig_zero_tol: float = 1e-8
    rank_tol: float = 1e-8
    singular_pivot_tol: float = 1e-12

    def __post_init__(self):
        for name in ("fd_epsilon", "newton_tol", "eig_zero_tol", "rank_tol", "singular_pivot_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


DEFAULT = NumericsConfig()


def fd_jacobian(
    residual_fn: ResidualFn,
    u: np.ndarray,
    config: NumericsConfig = DEFAULT,
    vectorized: bool = False,
) -> np.ndarray:
    """Central-difference Jacobian, one column per unknown.

    With ``vectorized=True`` the residual is called once on a matrix whose
    columns are the perturbed points.
    """
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    eps = config.fd_epsilon
    if vectorized:
        shift = eps * np.eye(m)
        try:
            plus = residual_fn(u[:, None] + shift)
            minus = residual_fn(u[:, None] - shift)
        except Exception as exc:
            raise JacobianEvaluationError(None, exc) from exc
        return (plus - minus) / (2.0 * eps)

    cols = []
    for j in range(m):
        step = np.zeros(m)
        step[j] = eps
        try:
            cols.append((residual_fn(u + step) - residual_fn(u - step)) / (2.0 * eps))
        except Exception as exc:
            raise JacobianEvaluationError(j, exc) from exc
    return np.column_stack(cols)


def lu_factor_checked(matrix: np.ndarray, config: NumericsConfig = DEFAULT):
    """LU with partial pivoting; raises SingularJacobian on a tiny pivot."""
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularJacobian
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    scale = np.linalg.norm(matrix, np.inf)
    if scale == 0 or np.min(np.abs(np.diag(lu))) < config.singular_pivot_tol * scale:
        raise SingularJacobian("Jacobian is numerically singular")
    return lu, piv


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    residual_norm: float
    history: list[float] = field(default_factory=list)


def newton_solve(
    residual_fn: ResidualFn,
    u0: np.ndarray,
    config: NumericsConfig = DEFAULT,
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    vectorized: bool = False,
) -> NewtonResult:
    """Plain Newton iteration with a dense LU solve per step.

    ``history`` holds the residual infinity-norm before each update.
    """
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("initial guess must be finite")
    if jacobian_fn is None:
        jacobian_fn = lambda x: fd_jacobian(residual_fn, x, config, vectorized=vectorized)  # noqa: E731

    f = residual_fn(u)
    norm = float(np.max(np.abs(f)))
    history = [norm]
    for it in range(config.newton_max_iter + 1):
        if norm <= config.newton_tol:
            return NewtonResult(u, it, norm, history)
        if it == config.newton_max_iter or not np.isfinite(norm):
            break
        lu = lu_factor_checked(jacobian_fn(u), config)
        u = u - scipy.linalg.lu_solve(lu, f)
        f = residual_fn(u)
        norm = float(np.max(np.abs(f)))
        history.append(norm)
    raise NonConvergence(
        f"Newton did not reach {config.newton_tol:g} in {config.newton_max_iter} iterations "
        f"(last residual {norm:.3e})",
        iterations=len(history) - 1,
        residual_norm=norm,
    )


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by descending real part, then descending imaginary part."""

    eigenvalues: np.ndarray

    def __len__(self):
        return self.eigenvalues.shape[0]

    @property
    def real(self):
        return self.eigenvalues.real

    @property
    def imag(self):
        return self.eigenvalues.imag

    def leading(self) -> complex:
        return complex(self.eigenvalues[0])


def _sort_spectrum(w: np.ndarray) -> np.ndarray:
    order = np.lexsort((-w.imag, -w.real))
    return w[order]


def eigenvalues(matrix: np.ndarray) -> Spectrum:
    """Full spectrum of a dense, possibly non-symmetric, real matrix."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eigenvalues need a square matrix, got shape {a.shape}")
    w = scipy.linalg.eigvals(a, check_finite=True)
    # LAPACK returns exact conjugates for real input; snap rounding noise on real eigenvalues
    w = np.where(np.abs(w.imag) <= 1e-14 * max(1.0, np.abs(w).max(initial=0.0)), w.real + 0j, w)
    return Spectrum(_sort_spectrum(w))


@dataclass(frozen=True)
class StabilityTag:
    kind: str  # "Stable" or "Unstable"
    unstable_count: int
    leading_pair_complex: bool
    unstable_real: int = 0
    unstable_complex: int = 0

    @property
    def stable(self) -> bool:
        return self.kind == "Stable"


def classify_stability(spectrum: Spectrum, config: NumericsConfig = DEFAULT) -> StabilityTag:
    """Stable iff no eigenvalue has real part above ``eig_zero_tol``.

    The unstable count is also split into real eigenvalues and members of
    complex pairs, which lets callers tell a real crossing from a Hopf one.
    """
    w = spectrum.eigenvalues
    unstable = w[w.real > config.eig_zero_tol]
    is_complex = np.abs(unstable.imag) > config.eig_zero_tol
    n_complex = int(np.count_nonzero(is_complex))
    n_real = int(unstable.shape[0] - n_complex)
    leading = bool(unstable.shape[0] and is_complex[0])
    kind = "Stable" if unstable.shape[0] == 0 else "Unstable"
    return StabilityTag(kind, int(unstable.shape[0]), leading, n_real, n_complex)


def rank_deficiency(matrix: np.ndarray, config: NumericsConfig = DEFAULT) -> int:
    """How many singular values fall below ``rank_tol`` times the largest.

    The scale is floored at 1 so that a matrix of pure finite-difference
    noise counts as rank deficient instead of well conditioned.
    """
    s = np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
    if s.size == 0:
        return int(min(np.shape(matrix)))
    return int(np.count_nonzero(s <= config.rank_tol * max(s[0], 1.0)))


def matrix_to_json(matrix: np.ndarray) -> str:
    return json.dumps(np.asarray(matrix, dtype=float).tolist())


def spectrum_to_json(spectrum: Spectrum) -> str:
    return json.dumps([[float(z.real), float(z.imag)] for z in spectrum.eigenvalues])
