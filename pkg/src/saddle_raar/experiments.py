"""Desk-scale benchmark studies: Gaussian success sweeps and CDP runs.

Two experiment families:

* ``gaussian_success_sweep`` reconstructs random objects from dense
  Gaussian ensembles over a grid of sampling ratios and parameters,
  reporting per-cell success rates for the relaxed-reflection solver and
  the splitting competitor at paired parameters ``beta = 1/(rho+1)``;
* the coded-diffraction experiments run the randomly phased phantom under
  five relaxation paths (constant start, then linear decay to 0.5) on
  noiseless or Poisson-noised magnitudes, with reconstruction quality and
  saddle diagnostics.

Trials are independent; per-trial seeds derive from the experiment seed
by counter-based keys, so results are reproducible and order-independent
even under the trial-level thread pool (capped by SADDLE_RAAR_THREADS).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .initializers import InitSpec, make_initial_state, null_vector, random_lift
from .operators import (
    InvalidDataError,
    MeasurementEnsemble,
    PhantomObject,
    build_cdp_ensemble,
    build_gaussian_ensemble,
    build_rpp,
    project_torus,
)
from .solvers import (
    DrsState,
    ParameterSchedule,
    StoppingRule,
    drs_fixed_point_residuals,
    drs_reconstruct,
    reconstruct,
    rho_from_beta,
    run,
)

__all__ = [
    "BETA_GRID",
    "RHO_GRID",
    "RATIO_GRID",
    "BETA_PATH_STARTS",
    "NoiseSpec",
    "PoissonData",
    "poisson_data",
    "TrialOutcome",
    "CellResult",
    "SweepResult",
    "gaussian_success_sweep",
    "paired_success_cells",
    "CdpInstance",
    "cdp_instance",
    "CdpPathResult",
    "cdp_case_run",
    "CdpCaseResult",
    "cdp_case_suite",
]

# Parameter grids of the Gaussian study: beta = k/(k+1) pairs with rho = 1/k.
BETA_GRID = tuple(k / (k + 1.0) for k in range(1, 11))
RHO_GRID = tuple(1.0 / k for k in range(1, 11))
RATIO_GRID = (3.0, 3.5, 4.0, 4.5, 5.0)
BETA_PATH_STARTS = (0.95, 0.9, 0.8, 0.7, 0.6)

# Iterations held at the terminal relaxation value at the end of each
# decay path.  The dual maximizer moves with the parameter, so a path
# still declining at the final iteration leaves a dual gradient of the
# size of one parameter step no matter how well the solver tracks; the
# terminal hold lets the iterate reach the terminal-parameter saddle.
TERMINAL_SETTLE_ITERS = 240


def _worker_count(requested: int | None) -> int:
    cap = os.environ.get("SADDLE_RAAR_THREADS")
    workers = requested if requested is not None else 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def _child_seeds(*key) -> np.ndarray:
    """Four deterministic integer seeds derived from a counter key."""
    return np.random.SeedSequence(list(key)).generate_state(4)


# ---------------------------------------------------------------------------
# Poisson counting noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    target_level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "poisson"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.target_level < 1.0:
            raise ValueError("target noise level must lie in [0, 1)")
        if self.kind == "poisson" and self.target_level == 0.0:
            raise InvalidDataError("a zero noise level is unreachable with finite counts")


@dataclass
class PoissonData:
    """Calibrated noisy magnitudes with the resolved count scale."""

    b: np.ndarray
    kappa: float
    realized_level: float
    target_level: float


def _sample_magnitudes(clean: np.ndarray, kappa: float, seed_key) -> np.ndarray:
    rng = np.random.default_rng(seed_key)
    counts = rng.poisson(kappa * clean**2)
    return np.sqrt(counts / kappa)


def poisson_data(
    x0,
    E: MeasurementEnsemble,
    target_level: float,
    seed: int,
    rel_window: float = 0.05,
    max_steps: int = 80,
) -> PoissonData:
    """Poisson counting noise calibrated to a relative magnitude error.

    Squared magnitudes are Poisson with mean ``kappa * |A* x0|^2``; the
    scale ``kappa`` is bisected (each probe resampling with a fixed
    per-probe seed) until the realized level ``||b - |A* x0||| / ||b||``
    is within ``rel_window`` of the target.
    """
    if not 0.0 < target_level < 1.0:
        raise InvalidDataError("target noise level must lie in (0, 1)")
    vec = x0.values if isinstance(x0, PhantomObject) else np.asarray(x0)
    clean = np.abs(E.apply_adjoint(vec))
    norm_clean = np.linalg.norm(clean)

    def realize(kappa, probe):
        b = _sample_magnitudes(clean, kappa, [seed, probe])
        nb = np.linalg.norm(b)
        level = float(np.linalg.norm(b - clean) / nb) if nb > 0 else 1.0
        return b, level

    # noise level scales like 1/sqrt(kappa); start from the analytic guess
    kappa = E.N / (4.0 * (target_level * norm_clean) ** 2)
    lo = hi = None
    probe = 0
    b, level = realize(kappa, probe)
    for _ in range(max_steps):
        if abs(level - target_level) <= rel_window * target_level:
            return PoissonData(b=b, kappa=kappa, realized_level=level, target_level=target_level)
        if level > target_level:
            lo = kappa  # too noisy: need more counts
            kappa = kappa * 4.0 if hi is None else math.sqrt(kappa * hi)
        else:
            hi = kappa
            kappa = kappa / 4.0 if lo is None else math.sqrt(kappa * lo)
        probe += 1
        b, level = realize(kappa, probe)
    raise InvalidDataError(
        f"could not reach noise level {target_level} within {max_steps} probes (last {level})"
    )


# ---------------------------------------------------------------------------
# Gaussian success sweep
# ---------------------------------------------------------------------------


@dataclass
class TrialOutcome:
    algo: str
    ratio: float
    param: float
    trial: int
    success: bool
    final_residual: float
    aligned_error: float
    iterations: int
    fixed_point_pass: bool

    def as_dict(self):
        return {
            "algo": self.algo,
            "ratio": self.ratio,
            "param": self.param,
            "trial": self.trial,
            "success": self.success,
            "final_residual": self.final_residual,
            "aligned_error": self.aligned_error,
            "iterations": self.iterations,
            "fixed_point_pass": self.fixed_point_pass,
        }


@dataclass
class CellResult:
    algo: str
    ratio: float
    param: float
    outcomes: list

    @property
    def trials(self) -> int:
        return len(self.outcomes)

    @property
    def successes(self) -> int:
        return sum(1 for o in self.outcomes if o.success)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


@dataclass
class SweepResult:
    """Per-cell success counts over the (ratio x parameter x algo) grid."""

    n: int
    trials: int
    seed: int
    success_threshold: float
    cells: list = field(default_factory=list)

    def cell(self, algo: str, ratio: float, param: float) -> CellResult:
        for c in self.cells:
            if c.algo == algo and c.ratio == ratio and abs(c.param - param) < 1e-12:
                return c
        raise KeyError((algo, ratio, param))

    def to_rows(self):
        rows = []
        for c in sorted(self.cells, key=lambda c: (c.algo, c.ratio, c.param)):
            rows.append((c.ratio, repr(c.param), c.algo, repr(c.success_rate)))
        return rows

    def to_json_dict(self):
        return {
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "success_threshold": self.success_threshold,
            "cells": [
                {
                    "algo": c.algo,
                    "ratio": c.ratio,
                    "param": c.param,
                    "successes": c.successes,
                    "trials": c.trials,
                    "success_rate": c.success_rate,
                    "outcomes": [o.as_dict() for o in c.outcomes],
                }
                for c in sorted(self.cells, key=lambda c: (c.algo, c.ratio, c.param))
            ],
        }


def _run_success_trial(
    n, ratio, algo, param, param_idx, trial, seed, max_iters, threshold
) -> TrialOutcome:
    N = int(round(ratio * n))
    ialgo = 0 if algo == "raar" else 1
    seeds = _child_seeds(seed, int(round(ratio * 10)), ialgo, param_idx, trial)
    E = build_gaussian_ensemble(n, N, seed=int(seeds[0]))
    rng_obj = np.random.default_rng(int(seeds[1]))
    x0 = rng_obj.standard_normal(n) + 1j * rng_obj.standard_normal(n)
    b = np.abs(E.apply_adjoint(x0))
    w0 = random_lift(N, int(seeds[2]))

    # stop well below the success threshold so converged iterates sit
    # comfortably inside the fixed-point certificate tolerance
    stop = StoppingRule(residual_tol=min(1e-8, 0.1 * threshold), deriv_tol=0.0)
    if algo == "raar":
        raar0, _ = make_initial_state(E, b, w0=w0)
        result = run(E, b, "raar", ParameterSchedule.constant(param), raar0, max_iters, stop)
        z = project_torus(result.state.w, b)
        lam = result.state.w - z
        x = reconstruct(E, z, lam)
        w_final = result.state.w
        cert = analysis.certify_fixed_point(E, b, w_final, param, tol=1e-6)
        cert_pass = bool(cert.certified)
    else:
        state = DrsState(y=w0, z=w0, lam=np.zeros_like(w0), rho=param)
        result = run(E, b, "drs", ParameterSchedule.constant(param), state, max_iters, stop)
        x = drs_reconstruct(E, result.state.z, result.state.lam, param)
        resids = drs_fixed_point_residuals(E, b, result.state)
        cert_pass = bool(max(resids) <= 1e-6 * np.linalg.norm(b))

    final_residual = result.final_record.residual
    return TrialOutcome(
        algo=algo,
        ratio=ratio,
        param=param,
        trial=trial,
        success=bool(final_residual <= threshold),
        final_residual=final_residual,
        aligned_error=analysis.aligned_error(x, x0),
        iterations=result.final_record.k,
        fixed_point_pass=cert_pass,
    )


def gaussian_success_sweep(
    n: int = 100,
    ratios=RATIO_GRID,
    betas=BETA_GRID,
    rhos=RHO_GRID,
    trials: int = 40,
    seed: int = 0,
    max_iters: int = 2000,
    success_threshold: float = 1e-5,
    workers: int | None = None,
) -> SweepResult:
    """Success-rate sweep over sampling ratios and solver parameters.

    Each trial draws a fresh ensemble, object, and random start from
    counter-derived seeds.  Success means the final relative residual is
    at or below ``success_threshold`` within the iteration budget (the
    aligned reconstruction error is recorded alongside).
    """
    jobs = []
    for ratio in ratios:
        for idx, beta in enumerate(betas):
            for trial in range(trials):
                jobs.append(("raar", ratio, beta, idx, trial))
        for idx, rho in enumerate(rhos):
            for trial in range(trials):
                jobs.append(("drs", ratio, rho, idx, trial))

    def do(job):
        algo, ratio, param, idx, trial = job
        return _run_success_trial(
            n, ratio, algo, param, idx, trial, seed, max_iters, success_threshold
        )

    nworkers = _worker_count(workers)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            outcomes = list(pool.map(do, jobs))
    else:
        outcomes = [do(j) for j in jobs]

    sweep = SweepResult(n=n, trials=trials, seed=seed, success_threshold=success_threshold)
    keyed = {}
    for job, outcome in zip(jobs, outcomes):
        algo, ratio, param, _, _ = job
        keyed.setdefault((algo, ratio, param), []).append(outcome)
    for (algo, ratio, param), outs in sorted(keyed.items()):
        outs.sort(key=lambda o: o.trial)
        sweep.cells.append(CellResult(algo=algo, ratio=ratio, param=param, outcomes=outs))
    return sweep


def paired_success_cells(
    n: int = 100,
    ratio: float = 4.0,
    beta: float = 0.9,
    trials: int = 40,
    seed: int = 0,
    max_iters: int = 2000,
    success_threshold: float = 1e-5,
    workers: int | None = None,
) -> SweepResult:
    """The two paired cells (one relaxation value, its penalty partner)."""
    rho = rho_from_beta(beta)
    return gaussian_success_sweep(
        n=n,
        ratios=(ratio,),
        betas=(beta,),
        rhos=(rho,),
        trials=trials,
        seed=seed,
        max_iters=max_iters,
        success_threshold=success_threshold,
        workers=workers,
    )


# ---------------------------------------------------------------------------
# Coded diffraction experiments
# ---------------------------------------------------------------------------


@dataclass
class CdpInstance:
    """Shared data of one coded-diffraction case: ensemble, object, magnitudes."""

    case: str
    ensemble: MeasurementEnsemble
    phantom: PhantomObject
    b: np.ndarray
    noise: PoissonData | None
    init_seed: int


def cdp_instance(
    case: str, grid=(32, 32), seed: int = 0, noise_target: float = 0.18
) -> CdpInstance:
    """Build the shared instance for one experiment case.

    Cases: (a) noiseless + spectral init, (b) noiseless + random init,
    (c) Poisson noise + spectral init, (d) Poisson noise + random init.
    """
    if case not in ("a", "b", "c", "d"):
        raise ValueError(f"unknown case {case!r}")
    seeds = _child_seeds(seed, "abcd".index(case))
    phantom = build_rpp(grid, seed=int(seeds[0]))
    E = build_cdp_ensemble(grid, seed=int(seeds[1]))
    if case in ("a", "b"):
        b = np.abs(E.apply_adjoint(phantom.values))
        noise = None
    else:
        noise = poisson_data(phantom, E, noise_target, seed=int(seeds[2]))
        b = noise.b
    return CdpInstance(
        case=case, ensemble=E, phantom=phantom, b=b, noise=noise, init_seed=int(seeds[3])
    )


@dataclass
class CdpPathResult:
    """One relaxation path's trace and reconstructions."""

    beta_start: float
    records: list
    x_final: np.ndarray
    x_snapshot: np.ndarray
    final_residual: float
    final_deriv_norm: float
    aligned_error: float
    tail_t_ratios: np.ndarray
    w_final: np.ndarray
    iterates: list | None = None


def cdp_case_run(
    case: str,
    beta_start: float,
    grid=(32, 32),
    seed: int = 0,
    total_iters: int = 600,
    hold_iters: int = 300,
    settle_iters: int = TERMINAL_SETTLE_ITERS,
    noise_target: float = 0.18,
    weak_fraction: float = 0.5,
    instance: CdpInstance | None = None,
    keep_iterates: bool = False,
) -> CdpPathResult:
    """Run one relaxation path on the phantom instance.

    The path holds ``beta_start`` for ``hold_iters`` iterations, then
    decreases piecewise linearly to 0.5 within the remaining budget
    (fixed budget, full trace).  The decline completes ``settle_iters``
    before the end: the dual maximizer moves with the parameter, so the
    dual gradient at the final iterate would otherwise measure one
    parameter step's worth of target motion rather than convergence
    quality.  Returns the mid-run snapshot reconstruction, the final
    reconstruction ``A(z - lambda)``, and the tail of the basin indicator.
    """
    inst = instance or cdp_instance(case, grid, seed, noise_target)
    E, b = inst.ensemble, inst.b
    if inst.case in ("a", "c"):
        nv = null_vector(E, b, InitSpec(weak_fraction=weak_fraction, seed=inst.init_seed))
        # scale to the data's energy; direction is what matters
        x_init = nv.x * np.linalg.norm(b)
        raar0, _ = make_initial_state(E, b, x_init=x_init)
    else:
        raar0, _ = make_initial_state(E, b, w0=random_lift(E.N, inst.init_seed))

    knee = max(hold_iters + 1, total_iters - settle_iters)
    schedule = ParameterSchedule(
        ((1, beta_start), (hold_iters, beta_start), (knee, 0.5), (total_iters, 0.5))
    )
    result = run(
        E,
        b,
        "raar",
        schedule,
        raar0,
        max_iters=total_iters,
        stop=StoppingRule(fixed_budget=True),
        record_every=1,
        keep_iterates=True,
    )
    w_snap = result.iterates[min(hold_iters, len(result.iterates) - 1)]
    z_snap = project_torus(w_snap, b)
    x_snap = reconstruct(E, z_snap, w_snap - z_snap)

    w_fin = result.state.w
    z_fin = project_torus(w_fin, b)
    lam_fin = w_fin - z_fin
    x_fin = reconstruct(E, z_fin, lam_fin)

    tail = np.array([r.t_ratio for r in result.records[-100:]])
    return CdpPathResult(
        beta_start=beta_start,
        records=result.records,
        x_final=x_fin,
        x_snapshot=x_snap,
        final_residual=result.final_record.residual,
        final_deriv_norm=result.final_record.deriv_norm,
        aligned_error=analysis.aligned_error(x_fin, inst.phantom.values),
        tail_t_ratios=tail,
        w_final=w_fin,
        iterates=result.iterates if keep_iterates else None,
    )


@dataclass
class CdpCaseResult:
    """All five relaxation paths of one case plus cross-path correlations."""

    case: str
    instance: CdpInstance
    paths: list
    correlations: np.ndarray

    def pairwise_min_correlation(self) -> float:
        m = self.correlations
        off = m[~np.eye(m.shape[0], dtype=bool)]
        return float(off.min()) if off.size else 1.0


def cdp_case_suite(
    case: str,
    grid=(32, 32),
    seed: int = 0,
    beta_starts=BETA_PATH_STARTS,
    total_iters: int = 600,
    hold_iters: int = 300,
    settle_iters: int = TERMINAL_SETTLE_ITERS,
    noise_target: float = 0.18,
    weak_fraction: float = 0.5,
    workers: int | None = None,
) -> CdpCaseResult:
    """Run all relaxation paths of one case on a shared instance."""
    inst = cdp_instance(case, grid, seed, noise_target)

    def do(start):
        return cdp_case_run(
            case,
            start,
            grid=grid,
            seed=seed,
            total_iters=total_iters,
            hold_iters=hold_iters,
            settle_iters=settle_iters,
            noise_target=noise_target,
            weak_fraction=weak_fraction,
            instance=inst,
        )

    nworkers = _worker_count(workers)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            paths = list(pool.map(do, beta_starts))
    else:
        paths = [do(s) for s in beta_starts]

    k = len(paths)
    corr = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            corr[i, j] = corr[j, i] = analysis.correlation(paths[i].x_final, paths[j].x_final)
    return CdpCaseResult(case=case, instance=inst, paths=paths, correlations=corr)
