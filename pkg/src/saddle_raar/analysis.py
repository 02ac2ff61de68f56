"""Saddle-point objective, optimality diagnostics, and certificates.

Central objects, written with ``P`` = projection onto ``range(A*)`` and
``Q = I - P`` the complementary projection:

* the concave-nonconvex objective ``F(z, l; beta) = (beta/2)||Q(z-l)||^2
  - ||l||^2 / 2`` maximized in the dual ``l`` and minimized in ``z`` on
  the magnitude torus;
* the entrywise criticality vector ``q(z, l) = z^{-1} * Q(z - l)`` whose
  realness encodes first-order optimality of ``z``;
* fixed-point certificates for the relaxed-reflection iteration, with the
  admissible relaxation interval implied by the penalty threshold;
* cross-section (tangent) Hessian certificates on the subspace
  ``Xi = { xi real : <xi, b> = 0 }`` that quotients out global phase;
* the measurement spectral gap ``lambda2`` certifying strict local
  minimality of the true solution;
* the convergence functional ``T`` and its self-referenced inequality
  ratio used as a basin-of-attraction indicator.

All evaluators are pure.  Dense eigen/SVD paths are used up to
``DENSE_CAP`` ambient dimensions; beyond that, matrix-free Lanczos with a
convergence flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .operators import MeasurementEnsemble, unit_phase, project_torus

__all__ = [
    "DENSE_CAP",
    "beta_prime",
    "objective",
    "dual_gradient",
    "dual_gradient_norm",
    "optimal_dual",
    "criticality_vector",
    "global_phase",
    "aligned_error",
    "aligned_distance",
    "correlation",
    "relative_residual",
    "convergence_functional",
    "inequality_ratio",
    "contraction_margin",
    "FixedPointCertificate",
    "certify_fixed_point",
    "beta_max_from_threshold",
    "tangent_basis",
    "assemble_range_form",
    "assemble_complement_form",
    "SaddleCertificate",
    "certify_cross_section_minimizer",
    "certify_drs_cross_section",
    "SpectralGapResult",
    "spectral_gap",
    "fejer_monitor",
    "margin_positivity_probe",
    "DiagnosticsRecord",
    "diagnostics",
]

# Above this ambient dimension, eigen/SVD work switches to matrix-free
# iterative routines with explicit convergence flags.
DENSE_CAP = 4096


def beta_prime(beta: float) -> float:
    """Auxiliary parameter ``beta / (1 - beta)``; inverse penalty weight."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return beta / (1.0 - beta)


def _real_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


# ---------------------------------------------------------------------------
# Objective and first-order quantities
# ---------------------------------------------------------------------------


def objective(E: MeasurementEnsemble, z: np.ndarray, lam: np.ndarray, beta: float) -> float:
    """Max-min objective ``(beta/2) ||Q(z - lam)||^2 - ||lam||^2 / 2``."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    q_part = E.project_complement(np.asarray(z) - np.asarray(lam))
    return 0.5 * beta * float(np.linalg.norm(q_part) ** 2) - 0.5 * float(
        np.linalg.norm(lam) ** 2
    )


def dual_gradient(E: MeasurementEnsemble, z, lam, beta: float) -> np.ndarray:
    """Gradient of the objective in the dual direction.

    Real-inner-product convention: the derivative of ``F`` along a complex
    direction ``d`` is ``Re(g^H d)`` for the returned ``g``, here
    ``g = -(beta Q(z - lam) + lam)``.
    """
    return -(beta * E.project_complement(np.asarray(z) - np.asarray(lam)) + np.asarray(lam))


def dual_gradient_norm(E: MeasurementEnsemble, z, lam, beta: float) -> float:
    """Norm of :func:`dual_gradient`: ``(||Q((1-beta)lam + beta z)||^2 + ||A lam||^2)^{1/2}``."""
    zp = E.project_complement(z)
    lp = E.project_complement(lam)
    range_part = np.linalg.norm(E.apply(lam))
    return float(np.hypot(np.linalg.norm((1.0 - beta) * lp + beta * zp), range_part))


def optimal_dual(E: MeasurementEnsemble, z, beta: float) -> np.ndarray:
    """The unique dual maximizer of the objective at fixed ``z``.

    Equals ``-beta' Q z`` with ``beta' = beta/(1-beta)``; undefined at
    ``beta = 1``.
    """
    bp = beta_prime(beta)
    return -bp * E.project_complement(z)


def criticality_vector(E: MeasurementEnsemble, z, lam, b=None) -> np.ndarray:
    """Entrywise quotient ``z^{-1} * Q(z - lam)``.

    Realness of the result is the first-order condition for ``z`` to
    minimize the objective on the torus.  Coordinates where ``z`` vanishes
    are excluded (reported as zero); passing the magnitude data ``b`` makes
    a vanishing ``z`` entry on the support of ``b`` an error instead.
    """
    z = np.asarray(z, dtype=np.complex128)
    support = np.abs(z) > 0
    if b is not None and np.any(~support & (np.asarray(b) > 0)):
        raise ZeroDivisionError("iterate vanishes on the support of the magnitude data")
    resid = E.project_complement(z - np.asarray(lam))
    out = np.zeros_like(z)
    out[support] = resid[support] / z[support]
    return out


# ---------------------------------------------------------------------------
# Phase alignment and error metrics
# ---------------------------------------------------------------------------


def global_phase(w: np.ndarray, w_ref: np.ndarray) -> complex:
    """Unit scalar ``alpha`` minimizing ``||w - alpha w_ref||``; 1 if undetermined."""
    s = np.vdot(w_ref, w)
    a = abs(s)
    return s / a if a > 0 else 1.0 + 0.0j


def aligned_error(x: np.ndarray, x0: np.ndarray) -> float:
    """Relative error ``min_{|alpha|=1} ||x - alpha x0|| / ||x0||``."""
    x = np.asarray(x, dtype=np.complex128)
    x0 = np.asarray(x0, dtype=np.complex128)
    nrm = np.linalg.norm(x0)
    if nrm == 0:
        raise ValueError("reference object must be nonzero")
    alpha = global_phase(x, x0)
    return float(np.linalg.norm(x - alpha * x0) / nrm)


def aligned_distance(w: np.ndarray, w_ref: np.ndarray) -> float:
    """Absolute distance ``min_{|alpha|=1} ||w - alpha w_ref||``."""
    alpha = global_phase(w, w_ref)
    return float(np.linalg.norm(np.asarray(w) - alpha * np.asarray(w_ref)))


def correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Phase-invariant correlation ``|<x, y>| / (||x|| ||y||)``."""
    denom = np.linalg.norm(x) * np.linalg.norm(y)
    if denom == 0:
        return 0.0
    return float(abs(np.vdot(x, y)) / denom)


def relative_residual(E: MeasurementEnsemble, z, b) -> float:
    """Feasibility residual ``||Q z|| / ||b||``."""
    return float(np.linalg.norm(E.project_complement(z)) / np.linalg.norm(b))


# ---------------------------------------------------------------------------
# Convergence functional and basin indicator
# ---------------------------------------------------------------------------


def convergence_functional(
    E: MeasurementEnsemble,
    z,
    lam,
    z_star,
    lam_star,
    beta: float,
    align: bool = True,
) -> float:
    """Distance functional ``T``.

    ``T = beta ||Q(z - z*)||^2 + (1-beta) ||Q(lam - lam*)||^2 + ||A lam||^2``,
    with the reference pair first rotated by the global phase aligning
    ``z* + lam*`` to ``z + lam`` (references are phase families).
    """
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    z_star = np.asarray(z_star, dtype=np.complex128)
    lam_star = np.asarray(lam_star, dtype=np.complex128)
    if align:
        alpha = global_phase(z + lam, z_star + lam_star)
        z_star = alpha * z_star
        lam_star = alpha * lam_star
    t = beta * np.linalg.norm(E.project_complement(z - z_star)) ** 2
    t += (1.0 - beta) * np.linalg.norm(E.project_complement(lam - lam_star)) ** 2
    t += np.linalg.norm(E.apply(lam)) ** 2
    return float(t)


def inequality_ratio(E: MeasurementEnsemble, z, lam, beta: float) -> float:
    """Basin indicator ``1 + 2<z, lam> / (beta ||Qz||^2 + (1-beta)||Q lam||^2 + ||A lam||^2)``.

    Positive values signal entry into the attraction basin of a noiseless
    solution.  The indicator is a 0/0 limit at such a solution: once the
    denominator falls to roundoff level relative to the torus scale the
    iterate is a solution to machine precision and the ``+inf`` marker is
    returned (the quotient's sign would be pure roundoff noise there).
    """
    denom = beta * np.linalg.norm(E.project_complement(z)) ** 2
    denom += (1.0 - beta) * np.linalg.norm(E.project_complement(lam)) ** 2
    denom += np.linalg.norm(E.apply(lam)) ** 2
    scale = max(float(np.linalg.norm(z)), float(np.linalg.norm(lam)))
    if denom <= (1e-13 * scale) ** 2:
        return float("inf")
    return 1.0 + 2.0 * _real_inner(z, lam) / float(denom)


def contraction_margin(
    E: MeasurementEnsemble, z, lam, z_star, lam_star, beta: float
) -> float:
    """Margin ``T(z, lam) - 2 <alpha z* - z, lam - alpha lam*>``.

    A positive margin at every step makes the phase-aligned distance to
    the reference non-increasing (Fejer-type contraction); the margin is
    zero at the reference itself.
    """
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    z_star = np.asarray(z_star, dtype=np.complex128)
    lam_star = np.asarray(lam_star, dtype=np.complex128)
    alpha = global_phase(z + lam, z_star + lam_star)
    t = convergence_functional(E, z, lam, z_star, lam_star, beta, align=True)
    cross = _real_inner(alpha * z_star - z, lam - alpha * lam_star)
    return float(t - 2.0 * cross)


# ---------------------------------------------------------------------------
# Fixed-point certificate
# ---------------------------------------------------------------------------


@dataclass
class FixedPointCertificate:
    """Result of checking the fixed-point conditions at a lifted iterate.

    ``c`` is the measured real vector with ``P(b*u) = c*u``; ``phase_residual``
    the defect of that identity against the value implied by the iterate's
    magnitudes; ``beta_max`` the upper end of the admissible relaxation
    interval ``(0, beta_max]`` from the penalty threshold at this phase.
    """

    beta: float
    tol: float
    phase_residual: float
    c: np.ndarray
    c_imag_norm: float
    magnitude_margin: np.ndarray
    magnitude_ok: bool
    threshold: float
    beta_max: float
    certified: bool

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "tol": self.tol,
            "phase_residual": self.phase_residual,
            "c_imag_norm": self.c_imag_norm,
            "magnitude_ok": self.magnitude_ok,
            "threshold": self.threshold,
            "beta_max": self.beta_max,
            "beta_interval": [0.0, self.beta_max],
            "certified": self.certified,
        }


def beta_max_from_threshold(threshold: float) -> float:
    """Largest relaxation parameter admitted by a penalty threshold ``t``.

    The fixed-point magnitude stays nonnegative iff ``(1-beta)/beta >= t``,
    i.e. ``beta <= 1/(1+t)``; nonpositive thresholds admit the whole (0, 1].
    """
    if threshold <= 0.0:
        return 1.0
    return 1.0 / (1.0 + threshold)


def certify_fixed_point(
    E: MeasurementEnsemble, b, w, beta: float, tol: float = 1e-8
) -> FixedPointCertificate:
    """Check whether ``w`` is a fixed point of the beta-relaxed iteration.

    With ``u = w/|w|`` and ``c = (1 - (1-beta)/beta) b + ((1-beta)/beta)|w|``,
    the conditions are the phase identity ``P(b*u) = c*u`` and the
    nonnegativity of the implied magnitude, ``c >= (1 - (1-beta)/beta) b``.
    Also reports the measured ``c`` (from ``u`` alone) and the admissible
    relaxation interval at this phase vector.  Failures are reported in the
    certificate, never raised.
    """
    b = np.asarray(b, dtype=np.float64)
    w = np.asarray(w, dtype=np.complex128)
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    u = unit_phase(w)
    inv_bp = (1.0 - beta) / beta
    c_def = (1.0 - inv_bp) * b + inv_bp * np.abs(w)

    lifted = E.project_range(b * u)
    phase_residual = float(np.linalg.norm(lifted - c_def * u))

    c_meas = np.conj(u) * lifted
    c = np.real(c_meas)
    c_imag_norm = float(np.linalg.norm(np.imag(c_meas)))

    margin = c - (1.0 - inv_bp) * b
    scale = float(np.linalg.norm(b))
    magnitude_ok = bool(np.min(margin) >= -tol * scale)

    support = b > 0
    threshold = float(np.max((b[support] - c[support]) / b[support])) if np.any(support) else 0.0
    bmax = beta_max_from_threshold(threshold)

    certified = (
        phase_residual <= tol * scale
        and c_imag_norm <= max(tol, 1e-8) * max(scale, float(np.linalg.norm(c)))
        and magnitude_ok
    )
    return FixedPointCertificate(
        beta=beta,
        tol=tol,
        phase_residual=phase_residual,
        c=c,
        c_imag_norm=c_imag_norm,
        magnitude_margin=margin,
        magnitude_ok=magnitude_ok,
        threshold=threshold,
        beta_max=bmax,
        certified=certified,
    )


# ---------------------------------------------------------------------------
# Tangent (cross-section) Hessian machinery
# ---------------------------------------------------------------------------


def tangent_basis(b: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of ``Xi = { xi real : <xi, b> = 0 }``."""
    b = np.asarray(b, dtype=np.float64)
    return scipy.linalg.null_space(b[None, :])


def assemble_complement_form(E: MeasurementEnsemble, u: np.ndarray) -> np.ndarray:
    """Dense real symmetric form ``Re(diag(conj(u)) Q diag(u))``."""
    ad = E.materialize_adjoint()
    p = ad @ ad.conj().T
    m = np.conj(u)[:, None] * (np.eye(E.N) - p) * u[None, :]
    k = np.real(m)
    return 0.5 * (k + k.T)


def assemble_range_form(E: MeasurementEnsemble, u: np.ndarray) -> np.ndarray:
    """Dense real symmetric form ``Re(diag(conj(u)) P diag(u))``."""
    ad = E.materialize_adjoint()
    p = ad @ ad.conj().T
    m = np.conj(u)[:, None] * p * u[None, :]
    k = np.real(m)
    return 0.5 * (k + k.T)


def _restricted_min_eig_dense(h: np.ndarray, basis: np.ndarray):
    hr = basis.T @ h @ basis
    hr = 0.5 * (hr + hr.T)
    vals, vecs = scipy.linalg.eigh(hr)
    lam = float(vals[0])
    y = vecs[:, 0]
    resid = float(np.linalg.norm(hr @ y - lam * y))
    return lam, resid, True


def _restricted_min_eig_lanczos(apply_h, b: np.ndarray, n_dim: int, shift: float, tol: float):
    """Smallest eigenvalue of a symmetric operator restricted to ``<xi,b>=0``.

    The excluded direction is pushed up by ``shift`` so plain Lanczos on
    the projected operator sees only the tangent spectrum.
    """
    bhat = b / np.linalg.norm(b)

    def matvec(xi):
        xi = np.asarray(xi, dtype=np.float64)
        t = xi - bhat * (bhat @ xi)
        y = apply_h(t)
        y = y - bhat * (bhat @ y)
        return y + shift * (bhat @ xi) * bhat

    op = scipy.sparse.linalg.LinearOperator((n_dim, n_dim), matvec=matvec, dtype=np.float64)
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=tol, maxiter=5000)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            return float(exc.eigenvalues[0]), float("nan"), False
        return float("nan"), float("nan"), False
    lam = float(vals[0])
    v = vecs[:, 0]
    resid = float(np.linalg.norm(matvec(v) - lam * v))
    return lam, resid, True


@dataclass
class SaddleCertificate:
    """Second-order certificate on the cross section at a candidate point.

    ``hessian_min_eig`` is the smallest eigenvalue of the tangent Hessian
    ``K_perp - diag(Re q)`` restricted to ``Xi``; ``rho`` the fitted
    multiplier for the first-order condition ``Im q = rho * 1``; the beta
    bounds give the largest relaxation parameters for which the local
    saddle (curvature) and contraction conditions hold at this point.
    """

    q: np.ndarray
    rho: float
    first_order_defect: float
    hessian_min_eig: float
    eig_residual: float
    strict: bool
    beta: float | None
    beta_ok: bool | None
    beta_bound_saddle: float | None
    beta_bound_contraction: float | None
    beta_bound: float | None
    method: str
    converged: bool

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "first_order_defect": self.first_order_defect,
            "hessian_min_eig": self.hessian_min_eig,
            "eig_residual": self.eig_residual,
            "strict": self.strict,
            "beta": self.beta,
            "beta_ok": self.beta_ok,
            "beta_bound_saddle": self.beta_bound_saddle,
            "beta_bound_contraction": self.beta_bound_contraction,
            "beta_bound": self.beta_bound,
            "method": self.method,
            "converged": self.converged,
        }


def certify_cross_section_minimizer(
    E: MeasurementEnsemble,
    z,
    lam,
    beta: float | None = None,
    eig_tol: float = 1e-8,
) -> SaddleCertificate:
    """Certify second-order minimality of ``z`` on its cross section.

    Assembles ``H = K_perp - diag(Re q(z, lam))`` with
    ``K_perp = Re(diag(conj(u)) Q diag(u))`` and returns its smallest
    eigenvalue restricted to the tangent subspace ``Xi`` orthogonal to the
    magnitudes, together with the first-order defect
    ``||Im q - rho * 1||`` at the fitted multiplier ``rho``.

    Coordinates where ``z`` vanishes carry no phase freedom; all
    quantities restrict to the support.  Dense assembly up to
    ``DENSE_CAP`` support dimensions; beyond that a matrix-free Lanczos
    path computes the restricted eigenvalue (beta bounds then unavailable).
    """
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    mag = np.abs(z)
    s = mag > 0
    if not np.any(s):
        raise ValueError("iterate has empty support")
    b = mag[s]
    u_full = unit_phase(z)
    q_full = criticality_vector(E, z, lam)
    q = q_full[s]
    b2 = b * b
    # multiplier fitted by the b^2-weighted mean, matching the constraint
    # <theta, b^2> = 0 that defines the cross section
    rho = float(np.dot(b2, np.imag(q)) / np.sum(b2))
    first_order_defect = float(np.linalg.norm(np.imag(q) - rho))

    req = np.real(q)
    n_support = int(np.count_nonzero(s))
    q0 = np.real(criticality_vector(E, z, np.zeros_like(z)))[s]
    if n_support <= DENSE_CAP:
        kperp = assemble_complement_form(E, u_full)[np.ix_(s, s)]
        h = kperp - np.diag(req)
        basis = tangent_basis(b)
        min_eig, eig_resid, converged = _restricted_min_eig_dense(h, basis)
        method = "dense"

        # generalized-eigenvalue beta bounds against the K_perp form on Xi
        g2 = basis.T @ kperp @ basis
        g2 = 0.5 * (g2 + g2.T)
        h0 = basis.T @ (kperp - np.diag(q0)) @ basis
        h0 = 0.5 * (h0 + h0.T)
        d0 = basis.T @ np.diag(q0) @ basis
        d0 = 0.5 * (d0 + d0.T)
        try:
            saddle_vals = scipy.linalg.eigh(h0, g2, eigvals_only=True)
            contraction_vals = scipy.linalg.eigh(d0, g2, eigvals_only=True)
            beta_saddle = float(min(max(saddle_vals[0], 0.0), 1.0))
            beta_contraction = float(min(max(1.0 - 2.0 * contraction_vals[-1], 0.0), 1.0))
            beta_bound = min(beta_saddle, beta_contraction)
        except scipy.linalg.LinAlgError:
            beta_saddle = beta_contraction = beta_bound = None
    else:
        def apply_h(xi):
            full = np.zeros(E.N)
            full[s] = xi
            t = u_full * full
            y = np.real(np.conj(u_full) * E.project_complement(t))
            return y[s] - req * xi

        shift = 2.0 + float(np.max(np.abs(req)))
        min_eig, eig_resid, converged = _restricted_min_eig_lanczos(
            apply_h, b, n_support, shift, eig_tol
        )
        method = "lanczos"
        beta_saddle = beta_contraction = beta_bound = None

    beta_ok = None
    if beta is not None and beta_bound is not None:
        beta_ok = bool(beta < beta_bound)
    return SaddleCertificate(
        q=q_full,
        rho=rho,
        first_order_defect=first_order_defect,
        hessian_min_eig=min_eig,
        eig_residual=eig_resid,
        strict=bool(converged and min_eig > 0.0),
        beta=beta,
        beta_ok=beta_ok,
        beta_bound_saddle=beta_saddle,
        beta_bound_contraction=beta_contraction,
        beta_bound=beta_bound,
        method=method,
        converged=converged,
    )


def certify_drs_cross_section(
    E: MeasurementEnsemble, b, z, rho: float, eig_tol: float = 1e-8
) -> SaddleCertificate:
    """Analogous restricted curvature check for the splitting competitor.

    Certifies ``(rho+1) I - diag(b/|z|) - rho K >= 0`` on the tangent
    subspace, with ``K = Re(diag(conj(u)) P diag(u))``.
    """
    z = np.asarray(z, dtype=np.complex128)
    b = np.asarray(b, dtype=np.float64)
    mag = np.abs(z)
    if np.any(mag <= 0):
        raise ValueError("curvature check needs nonzero iterate magnitudes")
    u = z / mag
    if E.N > DENSE_CAP:
        def apply_h(xi):
            t = u * xi
            y = (rho + 1.0) * xi - (b / mag) * xi - rho * np.real(np.conj(u) * E.project_range(t))
            return y

        shift = rho + 3.0 + float(np.max(b / mag))
        min_eig, eig_resid, converged = _restricted_min_eig_lanczos(
            apply_h, mag, E.N, shift, eig_tol
        )
        method = "lanczos"
    else:
        k = assemble_range_form(E, u)
        h = (rho + 1.0) * np.eye(E.N) - np.diag(b / mag) - rho * k
        basis = tangent_basis(mag)
        min_eig, eig_resid, converged = _restricted_min_eig_dense(h, basis)
        method = "dense"
    return SaddleCertificate(
        q=np.zeros_like(z),
        rho=rho,
        first_order_defect=float("nan"),
        hessian_min_eig=min_eig,
        eig_residual=eig_resid,
        strict=bool(converged and min_eig > 0.0),
        beta=None,
        beta_ok=None,
        beta_bound_saddle=None,
        beta_bound_contraction=None,
        beta_bound=None,
        method=method,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Spectral gap
# ---------------------------------------------------------------------------


@dataclass
class SpectralGapResult:
    """Second singular value of the phase-conjugated measurement stack.

    ``lambda2 < 1`` certifies strict local minimality of the true solution
    on its cross section; the top singular value is 1 by construction.
    ``hypothesis_met`` is False when the randomness/rank assumptions behind
    that guarantee do not hold (deterministic masks, rank-1 object, single
    pattern), in which case ``lambda2`` is still reported.
    """

    lambda2: float
    sigma_top: float
    hypothesis_met: bool
    method: str
    converged: bool
    notes: str = ""


def spectral_gap(E: MeasurementEnsemble, x0, grid=None, seed: int = 0) -> SpectralGapResult:
    """Compute the spectral gap ``lambda2`` at the noiseless solution.

    Builds ``B* = diag(conj(u0)) A*`` with ``u0`` the phase of ``A* x0``
    and returns the second-largest singular value of the real stack
    ``[Re(B*), Im(B*)]``.  Dense SVD for ambient dimensions up to
    ``DENSE_CAP``; matrix-free two-vector SVD beyond, with convergence flag.
    """
    from .operators import PhantomObject  # local import to keep namespaces tidy

    if isinstance(x0, PhantomObject):
        vec = x0.values
        rank = x0.matricized_rank()
    else:
        vec = np.asarray(x0, dtype=np.complex128).ravel()
        rank = (
            int(np.linalg.matrix_rank(vec.reshape(grid))) if grid is not None else None
        )
    w0 = E.apply_adjoint(vec)
    b = np.abs(w0)
    if np.min(b) <= 1e-14 * np.max(b):
        raise ValueError("zero measurement magnitudes: phase of the solution undefined")
    u0 = w0 / b

    random_masks = getattr(E, "random_mask_count", 0)
    n_patterns = getattr(E, "l", None)
    hypothesis = True
    notes = []
    if rank is not None and rank < 2:
        hypothesis = False
        notes.append("object rank < 2")
    if n_patterns is not None and (n_patterns < 2 or random_masks < 1):
        hypothesis = False
        notes.append("masks deterministic or too few patterns")

    if E.N <= DENSE_CAP:
        ad = E.materialize_adjoint()
        bstar = np.conj(u0)[:, None] * ad
        stack = np.concatenate([bstar.real, bstar.imag], axis=1)
        svals = np.linalg.svd(stack, compute_uv=False)
        sigma_top, lam2 = float(svals[0]), float(svals[1])
        method, converged = "dense", True
    else:
        n = E.n

        def matvec(t):
            v = t[:n] - 1j * t[n:]
            return np.real(np.conj(u0) * E.apply_adjoint(v))

        def rmatvec(w):
            y = E.apply(u0 * np.asarray(w, dtype=np.complex128))
            return np.concatenate([y.real, -y.imag])

        op = scipy.sparse.linalg.LinearOperator(
            (E.N, 2 * n), matvec=matvec, rmatvec=rmatvec, dtype=np.float64
        )
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(2 * n)
        try:
            svals = scipy.sparse.linalg.svds(
                op, k=2, which="LM", v0=v0, return_singular_vectors=False, tol=1e-10
            )
            svals = np.sort(svals)[::-1]
            sigma_top, lam2 = float(svals[0]), float(svals[1])
            converged = True
        except scipy.sparse.linalg.ArpackNoConvergence:
            sigma_top, lam2 = float("nan"), float("nan")
            converged = False
        method = "lanczos"

    return SpectralGapResult(
        lambda2=lam2,
        sigma_top=sigma_top,
        hypothesis_met=hypothesis,
        method=method,
        converged=converged,
        notes="; ".join(notes),
    )


def fejer_monitor(E: MeasurementEnsemble, b, iterates, betas, z_star, lam_star) -> dict:
    """Contraction diagnostics along a run of lifted iterates.

    For each step ``k`` (``iterates[k-1] -> iterates[k]``) evaluates, at
    the step's decomposition ``z_k = [w_{k-1}]_Z``, ``lam_k = w_{k-1} - z_k``:
    the convergence functional ``T_k``, the contraction margin, and the
    cross-term ratio ``r_k = (T_k - margin_k) / T_k`` (zero where ``T_k``
    is at roundoff level).  Also returns the phase-aligned distances
    ``d_k = min_alpha ||w_k - alpha w*||`` for every iterate.

    ``betas`` gives the parameter used at each step (``betas[k]`` for the
    step producing ``iterates[k]``).
    """
    b = np.asarray(b, dtype=np.float64)
    w_star = np.asarray(z_star) + np.asarray(lam_star)
    floor = (1e-12 * np.linalg.norm(b)) ** 2
    t_vals, margins, ratios = [], [], []
    for k in range(1, len(iterates)):
        w_prev = iterates[k - 1]
        z = project_torus(w_prev, b)
        lam = w_prev - z
        beta = betas[k]
        t = convergence_functional(E, z, lam, z_star, lam_star, beta)
        m = contraction_margin(E, z, lam, z_star, lam_star, beta)
        t_vals.append(t)
        margins.append(m)
        ratios.append((t - m) / t if t > floor else 0.0)
    distances = np.array([aligned_distance(w, w_star) for w in iterates])
    return {
        "T": np.array(t_vals),
        "margin": np.array(margins),
        "ratio": np.array(ratios),
        "distance": distances,
    }


# ---------------------------------------------------------------------------
# Monte-Carlo basin probe
# ---------------------------------------------------------------------------


def margin_positivity_probe(
    E: MeasurementEnsemble,
    b,
    w_star,
    beta: float,
    radius: float,
    trials: int = 1000,
    seed: int = 0,
) -> float:
    """Fraction of random perturbations with positive contraction margin.

    Perturbs the reference lift by vectors of norm ``radius * ||w*||``,
    splits each perturbed point into its torus/dual parts, and evaluates
    the contraction margin against the reference.  The admissible
    neighborhood size is not constructive, so this empirical probe reports
    the observed fraction instead of asserting a radius.
    """
    b = np.asarray(b, dtype=np.float64)
    w_star = np.asarray(w_star, dtype=np.complex128)
    z_star = project_torus(w_star, b)
    lam_star = w_star - z_star
    rng = np.random.default_rng(seed)
    scale = radius * np.linalg.norm(w_star)
    hits = 0
    for _ in range(trials):
        d = rng.standard_normal(E.N) + 1j * rng.standard_normal(E.N)
        w = w_star + d * (scale / np.linalg.norm(d))
        z = project_torus(w, b)
        lam = w - z
        if contraction_margin(E, z, lam, z_star, lam_star, beta) > 0:
            hits += 1
    return hits / trials


# ---------------------------------------------------------------------------
# Per-iteration diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    """One row of a solver trace."""

    k: int
    param: float
    residual: float
    deriv_norm: float
    t_ratio: float
    objective: float
    wall_ns: int = 0

    csv_header = ("k", "beta_or_rho", "residual", "deriv_norm", "t_ratio", "objective_F", "wall_ns")

    def csv_row(self):
        return (
            self.k,
            repr(self.param),
            repr(self.residual),
            repr(self.deriv_norm),
            repr(self.t_ratio),
            repr(self.objective),
            self.wall_ns,
        )


def diagnostics(
    E: MeasurementEnsemble,
    b,
    z,
    lam,
    param: float,
    k: int,
    wall_ns: int = 0,
    algo: str = "raar",
) -> DiagnosticsRecord:
    """Evaluate the trace metrics at a primal/dual pair.

    For the relaxed-reflection and multiplier forms ``param`` is the
    relaxation parameter; for the splitting competitor it is the penalty
    ``rho`` and the derivative norm / objective are the splitting
    Lagrangian's (the ratio uses the corresponding ``1/(1+rho)``).
    """
    b = np.asarray(b, dtype=np.float64)
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    az = E.apply(z)
    al = E.apply(lam)
    pz = E.apply_adjoint(az)
    pl = E.apply_adjoint(al)
    zq = z - pz
    lq = lam - pl
    b_norm = float(np.linalg.norm(b))
    residual = float(np.linalg.norm(zq)) / b_norm

    if algo == "drs":
        rho = param
        beta_eq = 1.0 / (1.0 + rho)
        mu = lam / rho
        deriv = float(np.hypot(np.linalg.norm(zq), np.linalg.norm(pl) / rho))
        obj = 0.5 * float(np.linalg.norm(np.abs(z) - b) ** 2)
        obj += 0.5 * rho * float(np.linalg.norm(zq + lq / rho) ** 2 - np.linalg.norm(mu) ** 2)
        beta = beta_eq
    else:
        beta = param
        deriv = float(np.hypot(np.linalg.norm((1.0 - beta) * lq + beta * zq), np.linalg.norm(al)))
        obj = 0.5 * beta * float(np.linalg.norm(zq - lq) ** 2) - 0.5 * float(
            np.linalg.norm(lam) ** 2
        )

    denom = beta * float(np.linalg.norm(zq) ** 2)
    denom += (1.0 - beta) * float(np.linalg.norm(lq) ** 2)
    denom += float(np.linalg.norm(al) ** 2)
    # same roundoff guard as inequality_ratio: at machine-precision
    # convergence the quotient is 0/0 and only the marker is meaningful
    t_scale = max(float(np.linalg.norm(z)), float(np.linalg.norm(lam)))
    if denom <= (1e-13 * t_scale) ** 2:
        t_ratio = float("inf")
    else:
        t_ratio = 1.0 + 2.0 * _real_inner(z, lam) / denom

    return DiagnosticsRecord(
        k=k,
        param=float(param),
        residual=residual,
        deriv_norm=deriv,
        t_ratio=t_ratio,
        objective=float(obj),
        wall_ns=int(wall_ns),
    )
