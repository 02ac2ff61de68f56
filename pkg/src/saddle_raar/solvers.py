"""Relaxed-reflection iteration, its multiplier form, and the splitting competitor.

Three equivalent views of the same phase-retrieval geometry:

* ``raar_step``: the one-parameter relaxed averaged alternating
  reflections update on a lifted iterate ``w``;
* ``admm_step``: the exactly equivalent alternating-direction triple
  update on ``(y, z, lambda)`` with unit dual step, exposing the
  primal/dual decomposition the diagnostics are written in;
* ``drs_step``: the penalty-parameter splitting method that minimizes
  ``|| |z| - b ||^2`` over the measurement range, used as a competitor.

A parameter schedule (piecewise-linear in the iteration index) drives
continuation runs; ``run`` is the shared loop with trace recording and
stopping rules.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .analysis import DiagnosticsRecord, diagnostics
from .operators import MeasurementEnsemble, project_torus

__all__ = [
    "RaarState",
    "AdmmState",
    "DrsState",
    "ParameterSchedule",
    "StoppingRule",
    "RunResult",
    "raar_step",
    "admm_step",
    "drs_step",
    "run",
    "reconstruct",
    "drs_reconstruct",
    "drs_fixed_point_residuals",
    "beta_from_rho",
    "rho_from_beta",
]


def beta_from_rho(rho: float) -> float:
    """Relaxation parameter paired with a splitting penalty: ``1 / (rho + 1)``."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return 1.0 / (rho + 1.0)


def rho_from_beta(beta: float) -> float:
    """Inverse pairing ``(1 - beta) / beta``; beta = 1 has no finite penalty."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1) for a finite penalty, got {beta}")
    return (1.0 - beta) / beta


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def _check_finite(name, v):
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass
class RaarState:
    """Lifted iterate of the relaxed-reflection recursion."""

    w: np.ndarray
    k: int = 0
    beta: float | None = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.complex128)
        _check_finite("w", self.w)
        if self.beta is not None and not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")


@dataclass
class AdmmState:
    """Triple ``(y, z, lambda)`` of the multiplier form; dual step fixed at 1.

    ``z`` lives on the magnitude torus; ``z + lambda`` is the lifted
    iterate of the equivalent relaxed-reflection recursion.
    """

    y: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    k: int = 0
    beta: float | None = None
    s: float = 1.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.complex128)
        self.z = np.asarray(self.z, dtype=np.complex128)
        self.lam = np.asarray(self.lam, dtype=np.complex128)
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.s != 1.0:
            raise ValueError("only unit dual step size is supported")

    @property
    def lift(self) -> np.ndarray:
        """Lifted iterate ``z + lambda`` (equals the reflection iterate)."""
        return self.z + self.lam


@dataclass
class DrsState:
    """State of the splitting competitor with penalty ``rho > 0``."""

    y: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    rho: float
    k: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.complex128)
        self.z = np.asarray(self.z, dtype=np.complex128)
        self.lam = np.asarray(self.lam, dtype=np.complex128)
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------


def raar_step(E: MeasurementEnsemble, b, w, beta: float) -> np.ndarray:
    """One relaxed-reflection update.

    ``w -> beta w + (1 - 2 beta) [w]_Z + beta P(2 [w]_Z - w)`` where
    ``[w]_Z`` is the torus projection and ``P`` the range projection.
    At ``beta = 1/2`` this is alternating projections plus a halved
    complement term; at ``beta = 1`` the averaged reflector composition.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    w = np.asarray(w, dtype=np.complex128)
    t = project_torus(w, b)
    return beta * w + (1.0 - 2.0 * beta) * t + beta * E.project_range(2.0 * t - w)


def admm_step(E: MeasurementEnsemble, b, state: AdmmState, beta: float | None = None) -> AdmmState:
    """One triple update of the multiplier form (unit dual step).

    ``y <- (I - beta Q)(z - lambda)``; ``z <- [y + lambda]_Z``;
    ``lambda <- lambda + (y - z)``, with ``Q`` the complement projection.
    """
    beta = state.beta if beta is None else beta
    if beta is None or not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    d = state.z - state.lam
    y = d - beta * E.project_complement(d)
    z = project_torus(y + state.lam, b)
    lam = state.lam + (y - z)
    return AdmmState(y=y, z=z, lam=lam, k=state.k + 1, beta=beta)


def drs_step(E: MeasurementEnsemble, b, state: DrsState, rho: float | None = None) -> DrsState:
    """One splitting update with penalty ``rho``.

    ``y <- P(z + lambda/rho)``; ``z <- ([w]_Z + rho w) / (1 + rho)`` with
    ``w = y - lambda/rho``; ``lambda <- lambda + rho (z - y)``.
    """
    rho = state.rho if rho is None else rho
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    mu = state.lam / rho
    y = E.project_range(state.z + mu)
    w = y - mu
    z = (project_torus(w, b) + rho * w) / (1.0 + rho)
    lam = state.lam + rho * (z - y)
    return DrsState(y=y, z=z, lam=lam, rho=rho, k=state.k + 1)


def reconstruct(E: MeasurementEnsemble, z, lam) -> np.ndarray:
    """Object estimate ``A(z - lambda)`` from a primal/dual pair."""
    return E.apply(np.asarray(z) - np.asarray(lam))


def drs_reconstruct(E: MeasurementEnsemble, z, lam, rho: float) -> np.ndarray:
    """Object estimate ``A(z + lambda/rho)`` from a splitting state."""
    return E.apply(np.asarray(z) + np.asarray(lam) / rho)


def drs_fixed_point_residuals(E: MeasurementEnsemble, b, state: DrsState):
    """The three splitting fixed-point defects ``(||P mu||, ||Q z||, ||z + rho mu - [z]_Z||)``."""
    mu = state.lam / state.rho
    p_mu = float(np.linalg.norm(E.project_range(mu)))
    q_z = float(np.linalg.norm(E.project_complement(state.z)))
    torus_gap = float(
        np.linalg.norm(state.z + state.rho * mu - project_torus(state.z, b))
    )
    return p_mu, q_z, torus_gap


# ---------------------------------------------------------------------------
# Parameter schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterSchedule:
    """Piecewise-linear parameter path over the (1-based) iteration index.

    Values interpolate linearly between breakpoints and extend as
    constants beyond the first/last breakpoint.
    """

    breakpoints: tuple

    def __post_init__(self):
        pts = tuple((int(k), float(v)) for k, v in self.breakpoints)
        if not pts:
            raise ValueError("schedule needs at least one breakpoint")
        ks = [k for k, _ in pts]
        if any(b < a for a, b in zip(ks, ks[1:])):
            raise ValueError("breakpoint indices must be nondecreasing")
        object.__setattr__(self, "breakpoints", pts)

    @classmethod
    def constant(cls, value: float) -> "ParameterSchedule":
        return cls(((1, value),))

    @classmethod
    def relaxation_path(
        cls, start: float, hold: int = 300, total: int = 600, final: float = 0.5
    ) -> "ParameterSchedule":
        """Hold ``start`` for ``hold`` iterations, then decrease linearly to ``final`` at ``total``."""
        return cls(((1, start), (hold, start), (total, final)))

    def value_at(self, k: int) -> float:
        pts = self.breakpoints
        if k <= pts[0][0]:
            return pts[0][1]
        for (k0, v0), (k1, v1) in zip(pts, pts[1:]):
            if k <= k1:
                if k1 == k0:
                    return v1
                frac = (k - k0) / (k1 - k0)
                return v0 + frac * (v1 - v0)
        return pts[-1][1]


_PARAM_RANGES = {
    "raar": (lambda v: 0.0 < v <= 1.0, "(0, 1]"),
    "admm": (lambda v: 0.0 < v < 1.0, "(0, 1)"),
    "drs": (lambda v: v > 0.0, "(0, inf)"),
}


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------


@dataclass
class StoppingRule:
    """Stop on small residual or small dual-gradient norm, unless fixed budget.

    The residual test is relative (``||Q z|| / ||b||``); the derivative
    test is absolute.  ``fixed_budget`` disables both, reproducing
    fixed-iteration experiment runs.
    """

    residual_tol: float = 1e-10
    deriv_tol: float = 1e-10
    fixed_budget: bool = False


@dataclass
class RunResult:
    records: list
    state: object
    stop_reason: str
    iterates: list | None = None

    @property
    def final_record(self) -> DiagnosticsRecord:
        return self.records[-1]


def _decompose(state, b):
    if isinstance(state, RaarState):
        z = project_torus(state.w, b)
        return z, state.w - z
    return state.z, state.lam


def _lift(state):
    if isinstance(state, RaarState):
        return state.w
    if isinstance(state, AdmmState):
        return state.lift
    return state.z


def run(
    E: MeasurementEnsemble,
    b,
    algo: str,
    schedule: ParameterSchedule,
    init,
    max_iters: int,
    stop: StoppingRule | None = None,
    record_every: int = 1,
    keep_iterates: bool = False,
) -> RunResult:
    """Drive one solver with a parameter schedule and record diagnostics.

    The schedule is evaluated at the 1-based iteration index before each
    step.  Diagnostics are recorded at ``k = 0``, every ``record_every``
    steps, and at the final step; with a stopping rule they are evaluated
    every iteration regardless so the rule can fire between records.
    """
    if algo not in _PARAM_RANGES:
        raise ValueError(f"unknown algorithm {algo!r}")
    expected_state = {"raar": RaarState, "admm": AdmmState, "drs": DrsState}[algo]
    if not isinstance(init, expected_state):
        raise TypeError(f"{algo} expects a {expected_state.__name__} initial state, got {type(init).__name__}")
    in_range, range_text = _PARAM_RANGES[algo]
    b = np.asarray(b, dtype=np.float64)
    stop = stop or StoppingRule()
    t0 = time.perf_counter_ns()

    state = init
    z, lam = _decompose(state, b)
    first_param = schedule.value_at(1)
    records = [diagnostics(E, b, z, lam, first_param, 0, 0, algo=algo)]
    iterates = [_lift(state).copy()] if keep_iterates else None
    reason = "max_iters"

    for k in range(1, max_iters + 1):
        param = schedule.value_at(k)
        if not in_range(param):
            raise ValueError(
                f"schedule value {param} at iteration {k} outside the admissible range {range_text} for {algo}"
            )
        if algo == "raar":
            state = RaarState(w=raar_step(E, b, state.w, param), k=k, beta=param)
        elif algo == "admm":
            state = admm_step(E, b, state, beta=param)
        else:
            state = drs_step(E, b, state, rho=param)
        if keep_iterates:
            iterates.append(_lift(state).copy())

        want_record = (k % record_every == 0) or (k == max_iters)
        if want_record or not stop.fixed_budget:
            z, lam = _decompose(state, b)
            rec = diagnostics(E, b, z, lam, param, k, time.perf_counter_ns() - t0, algo=algo)
            if want_record:
                records.append(rec)
            if not stop.fixed_budget:
                if rec.residual <= stop.residual_tol:
                    reason = "residual"
                elif rec.deriv_norm <= stop.deriv_tol:
                    reason = "deriv_norm"
                else:
                    continue
                if not want_record:
                    records.append(rec)
                break

    return RunResult(records=records, state=state, stop_reason=reason, iterates=iterates)
