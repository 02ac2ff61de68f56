"""Measurement ensembles and the linear maps used by every solver.

An ensemble represents an isometric measurement map through its adjoint
``A*`` (object space -> measurement space, ``A A* = I``).  Everything the
iterations need is expressed with three operations:

* ``apply_adjoint``  -- ``x -> A* x``
* ``apply``          -- ``w -> A w``
* ``project_range``  -- ``w -> P w`` with ``P = A* A``

The complementary projection ``I - P`` (the energy outside the measurement
range) is always computed as ``w - project_range(w)``; the complementary
isometry itself is never materialized.

Two ensemble kinds are provided: dense complex-Gaussian matrices with
orthonormalized rows, and masked oversampled 2-D DFTs (coded diffraction
patterns).  The module also builds the randomly phased phantom test object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "InvalidMaskError",
    "AliasingError",
    "InvalidDataError",
    "MeasurementEnsemble",
    "GaussianEnsemble",
    "CodedDiffractionEnsemble",
    "PhantomObject",
    "build_gaussian_ensemble",
    "build_cdp_ensemble",
    "random_unit_masks",
    "unit_phase",
    "project_torus",
    "on_torus",
    "shepp_logan",
    "build_rpp",
    "ensemble_from_descriptor",
]


class DimensionError(ValueError):
    """Vector length does not match the ensemble dimensions."""


class InvalidMaskError(ValueError):
    """A diffraction mask has entries off the unit circle."""


class AliasingError(ValueError):
    """Padded grid too small to oversample the object."""


class InvalidDataError(ValueError):
    """Magnitude data violates its contract (negative, all zero, ...)."""


# ---------------------------------------------------------------------------
# Elementwise torus operations
# ---------------------------------------------------------------------------


def unit_phase(w: np.ndarray) -> np.ndarray:
    """Entrywise phase ``w / |w|``, with phase 1 where ``w`` vanishes.

    The zero-entry convention makes the map total and deterministic; any
    unit value is admissible there.
    """
    w = np.asarray(w, dtype=np.complex128)
    mag = np.abs(w)
    out = np.ones_like(w)
    nz = mag > 0
    out[nz] = w[nz] / mag[nz]
    return out


def project_torus(w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nearest point ``b * w/|w|`` on the torus ``{z : |z| = b}``.

    Entries where ``b`` is zero map to exactly zero; entries where ``w``
    is zero use the phase-1 convention of :func:`unit_phase`.
    """
    b = np.asarray(b, dtype=np.float64)
    return b * unit_phase(w)


def on_torus(z: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> bool:
    """Whether ``|z| = b`` entrywise to relative tolerance ``rtol``."""
    z = np.asarray(z)
    b = np.asarray(b, dtype=np.float64)
    scale = float(np.max(b)) if b.size else 0.0
    if scale == 0.0:
        return bool(np.all(z == 0))
    return bool(np.all(np.abs(np.abs(z) - b) <= rtol * scale))


def check_magnitudes(b: np.ndarray) -> np.ndarray:
    """Validate magnitude data: finite, nonnegative, not all zero."""
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise InvalidDataError("magnitude data must be finite")
    if np.any(b < 0):
        raise InvalidDataError("magnitude data must be nonnegative")
    if not np.any(b > 0):
        raise InvalidDataError("magnitude data must have a positive entry")
    return b


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


class MeasurementEnsemble:
    """Isometric measurement map exposed through matrix-free actions.

    Subclasses set ``n`` (object dimension), ``N`` (measurement dimension)
    and implement ``apply_adjoint`` / ``apply``.  Instances are immutable
    after construction and safe to share across concurrent solver runs.
    """

    kind = "abstract"
    n: int
    N: int

    # -- actions ----------------------------------------------------------

    def apply_adjoint(self, x: np.ndarray) -> np.ndarray:
        """Lift an object vector: ``x -> A* x``."""
        raise NotImplementedError

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Adjoint pair of :meth:`apply_adjoint`: ``w -> A w``."""
        raise NotImplementedError

    def project_range(self, w: np.ndarray) -> np.ndarray:
        """Orthogonal projection ``P w = A*(A w)`` onto ``range(A*)``."""
        return self.apply_adjoint(self.apply(w))

    def project_complement(self, w: np.ndarray) -> np.ndarray:
        """Complementary projection ``w - P w``."""
        return np.asarray(w, dtype=np.complex128) - self.project_range(w)

    # -- shape checks ------------------------------------------------------

    def _check_object(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128).ravel()
        if x.size != self.n:
            raise DimensionError(f"object vector has length {x.size}, expected {self.n}")
        return x

    def _check_measurement(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.complex128).ravel()
        if w.size != self.N:
            raise DimensionError(f"measurement vector has length {w.size}, expected {self.N}")
        return w

    # -- numerical self-checks ----------------------------------------------

    def isometry_defect(self, probes: int = 100, seed: int = 0) -> float:
        """Largest ``| ||A* x|| / ||x|| - 1 |`` over random probes."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            x = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
            r = np.linalg.norm(self.apply_adjoint(x)) / np.linalg.norm(x)
            worst = max(worst, abs(r - 1.0))
        return worst

    def projection_defect(self, probes: int = 20, seed: int = 0) -> float:
        """Largest relative defect of ``P`` being an orthogonal projection.

        Checks idempotence ``P(Pw) = Pw`` and the Pythagoras identity
        ``||w - Pw||^2 + ||A w||^2 = ||w||^2`` on random probes.
        """
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            w = rng.standard_normal(self.N) + 1j * rng.standard_normal(self.N)
            pw = self.project_range(w)
            worst = max(worst, np.linalg.norm(self.project_range(pw) - pw) / np.linalg.norm(w))
            total = np.linalg.norm(w - pw) ** 2 + np.linalg.norm(self.apply(w)) ** 2
            worst = max(worst, abs(total / np.linalg.norm(w) ** 2 - 1.0))
        return worst

    def materialize_adjoint(self) -> np.ndarray:
        """Dense ``N x n`` matrix of ``A*`` (columns are lifted basis vectors)."""
        cols = np.empty((self.N, self.n), dtype=np.complex128)
        e = np.zeros(self.n, dtype=np.complex128)
        for j in range(self.n):
            e[j] = 1.0
            cols[:, j] = self.apply_adjoint(e)
            e[j] = 0.0
        return cols

    # -- serialization -------------------------------------------------------

    def descriptor(self) -> dict:
        raise NotImplementedError


class GaussianEnsemble(MeasurementEnsemble):
    """Dense ensemble: complex Gaussian rows orthonormalized by QR.

    ``A*`` is the N x n matrix with orthonormal columns obtained from an
    i.i.d. complex standard-Gaussian draw, so ``A A* = I`` holds exactly
    up to factorization roundoff.
    """

    kind = "dense-gaussian"

    def __init__(self, n: int, N: int, seed: int):
        if n < 1 or N < 1:
            raise DimensionError("dimensions must be positive")
        if N < n:
            raise DimensionError(f"need N >= n, got n={n}, N={N}")
        self.n = int(n)
        self.N = int(N)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        g = rng.standard_normal((self.N, self.n)) + 1j * rng.standard_normal((self.N, self.n))
        q, _ = np.linalg.qr(g)
        self._adjoint = q  # N x n, orthonormal columns

    def apply_adjoint(self, x):
        return self._adjoint @ self._check_object(x)

    def apply(self, w):
        return self._adjoint.conj().T @ self._check_measurement(w)

    def materialize_adjoint(self):
        return self._adjoint.copy()

    def descriptor(self):
        return {"kind": self.kind, "n": self.n, "N": self.N, "seed": self.seed}


class CodedDiffractionEnsemble(MeasurementEnsemble):
    """Masked oversampled 2-D DFT ensemble.

    For each unit-modulus mask ``mu_j`` on the object grid, a measurement
    block is the unnormalized 2-D DFT of the zero-padded product
    ``mu_j * x``, scaled by a common constant so that ``A A* = I``.
    """

    kind = "masked-dft"

    def __init__(self, grid, masks, padded=None, seed=None, random_mask_count=0):
        self.grid = (int(grid[0]), int(grid[1]))
        r, c = self.grid
        masks = np.asarray(masks, dtype=np.complex128)
        if masks.ndim == 2:
            masks = masks[None, :, :]
        if masks.ndim != 3 or masks.shape[1:] != self.grid:
            raise DimensionError(f"masks must have shape (l, {r}, {c})")
        if masks.shape[0] < 2:
            raise InvalidMaskError("need at least 2 masks")
        if np.max(np.abs(np.abs(masks) - 1.0)) > 1e-12:
            raise InvalidMaskError("mask entries must have unit modulus")
        if padded is None:
            padded = (2 * r, 2 * c)
        self.padded = (int(padded[0]), int(padded[1]))
        if self.padded[0] < 2 * r - 1 or self.padded[1] < 2 * c - 1:
            raise AliasingError(
                f"padded grid {self.padded} undersamples a {r}x{c} object; "
                f"need at least ({2 * r - 1}, {2 * c - 1})"
            )
        self.masks = masks
        self.seed = seed
        self.random_mask_count = int(random_mask_count)
        self.l = masks.shape[0]
        self.n = r * c
        self.N = self.l * self.padded[0] * self.padded[1]
        # Analytic isometry scale for the unnormalized DFT, then a probe;
        # fall back to the measured scale if the analytic value is off.
        self.c0 = 1.0 / math.sqrt(self.l * self.padded[0] * self.padded[1])
        ratio = self._probe_scale()
        if abs(ratio - 1.0) > 1e-8:
            self.c0 /= ratio
        self.analytic_scale_ok = abs(ratio - 1.0) <= 1e-8

    def _probe_scale(self) -> float:
        rng = np.random.default_rng(0xC0DED)
        x = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
        return float(np.linalg.norm(self.apply_adjoint(x)) / np.linalg.norm(x))

    def apply_adjoint(self, x):
        x2 = self._check_object(x).reshape(self.grid)
        pr, pc = self.padded
        r, c = self.grid
        out = np.empty((self.l, pr, pc), dtype=np.complex128)
        buf = np.zeros((pr, pc), dtype=np.complex128)
        for j in range(self.l):
            buf[:r, :c] = self.masks[j] * x2
            out[j] = np.fft.fft2(buf)
        return self.c0 * out.reshape(self.N)

    def apply(self, w):
        blocks = self._check_measurement(w).reshape(self.l, *self.padded)
        pr, pc = self.padded
        r, c = self.grid
        acc = np.zeros(self.grid, dtype=np.complex128)
        for j in range(self.l):
            # adjoint of the unnormalized forward DFT is (pr*pc) * ifft2
            full = np.fft.ifft2(blocks[j]) * (pr * pc)
            acc += self.masks[j].conj() * full[:r, :c]
        return (self.c0 * acc).reshape(self.n)

    def descriptor(self):
        inter = np.empty(2 * self.masks.size, dtype=np.float64)
        flat = self.masks.reshape(-1)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        return {
            "kind": self.kind,
            "grid": list(self.grid),
            "padded": list(self.padded),
            "seed": self.seed,
            "n_masks": self.l,
            "random_mask_count": self.random_mask_count,
            "masks_re_im": inter.tolist(),
        }


def build_gaussian_ensemble(n: int, N: int, seed: int) -> GaussianEnsemble:
    """Draw and orthonormalize a dense complex-Gaussian ensemble."""
    return GaussianEnsemble(n, N, seed)


def random_unit_masks(grid, l: int, seed: int, first_uncoded: bool = True) -> np.ndarray:
    """Stack of ``l`` unit-modulus masks; the first is all-ones by default.

    Remaining masks have i.i.d. phases uniform on the circle, drawn
    deterministically from ``seed``.
    """
    rng = np.random.default_rng(seed)
    masks = np.empty((l, grid[0], grid[1]), dtype=np.complex128)
    start = 0
    if first_uncoded:
        masks[0] = 1.0
        start = 1
    for j in range(start, l):
        masks[j] = np.exp(2j * np.pi * rng.random(grid))
    return masks


def build_cdp_ensemble(
    grid,
    masks: np.ndarray | None = None,
    oversample=None,
    seed: int = 0,
    n_masks: int = 2,
) -> CodedDiffractionEnsemble:
    """Build a coded-diffraction ensemble on ``grid``.

    Without explicit ``masks``, uses ``n_masks`` masks with the first
    uncoded (all ones) and the rest i.i.d. uniform on the unit circle,
    the "one coded and one uncoded pattern" setup when ``n_masks=2``.
    ``oversample`` is the padded grid shape; default ``(2r, 2c)``.
    """
    random_count = 0
    if masks is None:
        if n_masks < 2:
            raise InvalidMaskError("need at least 2 masks")
        masks = random_unit_masks(grid, n_masks, seed)
        random_count = n_masks - 1
    return CodedDiffractionEnsemble(
        grid, masks, padded=oversample, seed=seed, random_mask_count=random_count
    )


def ensemble_from_descriptor(d: dict) -> MeasurementEnsemble:
    """Rebuild an ensemble from its JSON-friendly descriptor."""
    kind = d.get("kind")
    if kind == GaussianEnsemble.kind:
        return GaussianEnsemble(d["n"], d["N"], d["seed"])
    if kind == CodedDiffractionEnsemble.kind:
        inter = np.asarray(d["masks_re_im"], dtype=np.float64)
        flat = inter[0::2] + 1j * inter[1::2]
        grid = tuple(d["grid"])
        masks = flat.reshape(d["n_masks"], *grid)
        return CodedDiffractionEnsemble(
            grid,
            masks,
            padded=tuple(d["padded"]),
            seed=d.get("seed"),
            random_mask_count=d.get("random_mask_count", 0),
        )
    raise ValueError(f"unknown ensemble kind: {kind!r}")


# ---------------------------------------------------------------------------
# Test objects
# ---------------------------------------------------------------------------


# Classic 10-ellipse head phantom: (additive intensity, semi-axis a, b,
# center x0, y0, rotation in degrees).
_PHANTOM_ELLIPSES = [
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.0230, 0.00, -0.6050, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
]


def shepp_logan(shape) -> np.ndarray:
    """Standard additive Shepp-Logan phantom on ``shape = (rows, cols)``."""
    rows, cols = int(shape[0]), int(shape[1])
    y = np.linspace(1.0, -1.0, rows)[:, None]
    x = np.linspace(-1.0, 1.0, cols)[None, :]
    img = np.zeros((rows, cols))
    for amp, a, b, x0, y0, phi_deg in _PHANTOM_ELLIPSES:
        phi = math.radians(phi_deg)
        xr = (x - x0) * math.cos(phi) + (y - y0) * math.sin(phi)
        yr = -(x - x0) * math.sin(phi) + (y - y0) * math.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    return np.clip(img, 0.0, None)


@dataclass(frozen=True)
class PhantomObject:
    """Complex test object with its grid shape."""

    values: np.ndarray  # flat complex vector, length rows*cols
    grid: tuple

    @property
    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values.reshape(self.grid))

    def matricized_rank(self, tol: float | None = None) -> int:
        return int(np.linalg.matrix_rank(self.values.reshape(self.grid), tol=tol))


def build_rpp(grid, seed: int) -> PhantomObject:
    """Randomly phased phantom: Shepp-Logan magnitudes, i.i.d. uniform phases.

    A zero margin of width ``ceil(rows/8)`` surrounds the phantom.  The
    random phases make reconstruction genuinely harder than for the plain
    phantom; the magnitude image equals the phantom exactly.
    """
    rows, cols = int(grid[0]), int(grid[1])
    if rows < 16 or cols < 16:
        raise DimensionError(f"grid {rows}x{cols} too small for the phantom; need >= 16x16")
    margin = math.ceil(rows / 8)
    inner = (rows - 2 * margin, cols - 2 * margin)
    p = np.zeros((rows, cols))
    p[margin:rows - margin, margin:cols - margin] = shepp_logan(inner)
    rng = np.random.default_rng(seed)
    phases = np.exp(2j * np.pi * rng.random((rows, cols)))
    return PhantomObject(values=(p * phases).reshape(-1), grid=(rows, cols))
