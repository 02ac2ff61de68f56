"""Starting iterates: null-vector spectral initialization and random starts.

The null-vector method finds the unit object vector whose measurements are
smallest on the weak index set (the coordinates with the smallest data
magnitudes), by power iteration on ``x -> x - A(1_I * (A* x))``.  The
result depends on the data only through the magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import (
    InvalidDataError,
    MeasurementEnsemble,
    check_magnitudes,
    project_torus,
)
from .solvers import AdmmState, RaarState

__all__ = [
    "InitSpec",
    "NullVectorResult",
    "null_vector",
    "random_object",
    "random_lift",
    "make_initial_state",
]


@dataclass(frozen=True)
class InitSpec:
    """Configuration of an initializer.

    ``weak_fraction`` is the fraction of measurement coordinates counted
    as weak (null-vector only); ``power_iters`` and ``tol`` control the
    power iteration; ``seed`` fixes the iteration's random start.
    """

    kind: str = "null-vector"
    weak_fraction: float = 0.5
    power_iters: int = 200
    seed: int = 0
    tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("null-vector", "random"):
            raise ValueError(f"unknown initializer kind {self.kind!r}")
        if not 0.0 < self.weak_fraction < 1.0:
            raise ValueError(f"weak_fraction must lie in (0, 1), got {self.weak_fraction}")
        if self.power_iters < 1:
            raise ValueError("power_iters must be at least 1")


@dataclass
class NullVectorResult:
    """Unit spectral initializer with power-iteration convergence info."""

    x: np.ndarray
    eigenvalue: float
    residual: float
    converged: bool
    iterations: int


def null_vector(E: MeasurementEnsemble, b, spec: InitSpec | None = None) -> NullVectorResult:
    """Spectral initializer minimizing the measurement energy on the weak set.

    With ``I`` the indices of the ``floor(weak_fraction * N)`` smallest
    entries of ``b``, returns the unit ``x`` minimizing ``||1_I * (A* x)||``,
    computed as the dominant eigenvector of ``I - A diag(1_I) A*`` by
    power iteration (eigenvalues lie in [0, 1]).  Deterministic given the
    spec seed; non-convergence within the iteration budget is flagged.
    """
    spec = spec or InitSpec()
    b = check_magnitudes(b)
    if b.size != E.N:
        raise InvalidDataError(f"magnitude data has length {b.size}, expected {E.N}")
    weak_count = math.floor(spec.weak_fraction * E.N)
    if weak_count < 1:
        raise InvalidDataError("weak fraction selects no coordinates")
    weak = np.zeros(E.N)
    weak[np.argsort(b, kind="stable")[:weak_count]] = 1.0

    def apply_op(x):
        return x - E.apply(weak * E.apply_adjoint(x))

    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal(E.n) + 1j * rng.standard_normal(E.n)
    x /= np.linalg.norm(x)
    mu = 0.0
    resid = np.inf
    iters = 0
    for iters in range(1, spec.power_iters + 1):
        y = apply_op(x)
        mu = float(np.real(np.vdot(x, y)))
        resid = float(np.linalg.norm(y - mu * x))
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
        if resid <= spec.tol:
            break
    return NullVectorResult(
        x=x, eigenvalue=mu, residual=resid, converged=resid <= spec.tol, iterations=iters
    )


def random_object(n: int, seed: int) -> np.ndarray:
    """I.i.d. complex-Gaussian object vector, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_lift(N: int, seed: int) -> np.ndarray:
    """I.i.d. complex-Gaussian lifted vector, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(N) + 1j * rng.standard_normal(N)


def make_initial_state(
    E: MeasurementEnsemble,
    b,
    x_init: np.ndarray | None = None,
    w0: np.ndarray | None = None,
    beta: float | None = None,
):
    """Wrap an object vector or a raw lift into matched starting states.

    For an object input the lift is ``w0 = A* x_init``.  The multiplier
    state starts from ``z1 = [w0]_Z`` and ``lambda1 = w0 - z1``, the
    split that makes its trajectory reproduce the relaxed-reflection
    sequence started at ``w0`` exactly.
    """
    if (x_init is None) == (w0 is None):
        raise ValueError("provide exactly one of x_init or w0")
    b = np.asarray(b, dtype=np.float64)
    if x_init is not None:
        w0 = E.apply_adjoint(x_init)
    else:
        w0 = np.asarray(w0, dtype=np.complex128)
        if w0.size != E.N:
            raise InvalidDataError(f"lift has length {w0.size}, expected {E.N}")
    if np.linalg.norm(w0) == 0:
        raise InvalidDataError("initial vector must be nonzero")
    z1 = project_torus(w0, b)
    lam1 = w0 - z1
    raar = RaarState(w=w0, k=0, beta=beta)
    admm = AdmmState(y=z1, z=z1, lam=lam1, k=0, beta=beta)
    return raar, admm
