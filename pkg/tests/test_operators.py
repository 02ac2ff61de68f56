import numpy as np
import pytest

from saddle_raar import (
    AliasingError,
    DimensionError,
    InvalidMaskError,
    build_cdp_ensemble,
    build_gaussian_ensemble,
    build_rpp,
    ensemble_from_descriptor,
    on_torus,
    project_torus,
    shepp_logan,
    unit_phase,
)
from conftest import random_complex


class TestGaussianEnsemble:
    def test_identity_case(self):
        E = build_gaussian_ensemble(1, 1, seed=0)
        a = E.materialize_adjoint()
        assert a.shape == (1, 1)
        assert abs(abs(a[0, 0]) - 1.0) < 1e-14
        x = np.array([2.0 + 1.0j])
        assert abs(np.linalg.norm(E.apply_adjoint(x)) - np.linalg.norm(x)) < 1e-14

    def test_isometry_probes(self):
        E = build_gaussian_ensemble(100, 400, seed=2)
        assert E.isometry_defect(probes=100, seed=0) <= 1e-10

    def test_projection_idempotent(self):
        E = build_gaussian_ensemble(16, 48, seed=5)
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = random_complex(rng, 48)
            pw = E.project_range(w)
            assert np.linalg.norm(E.project_range(pw) - pw) <= 1e-12 * np.linalg.norm(w)

    def test_pythagoras(self, dense_small):
        E, _, _ = dense_small
        assert E.projection_defect(probes=100, seed=1) <= 1e-10

    def test_adjoint_identity(self, dense_small):
        E, _, _ = dense_small
        rng = np.random.default_rng(8)
        for _ in range(20):
            x = random_complex(rng, E.n)
            w = random_complex(rng, E.N)
            lhs = np.real(np.vdot(E.apply_adjoint(x), w))
            rhs = np.real(np.vdot(x, E.apply(w)))
            scale = np.linalg.norm(x) * np.linalg.norm(w)
            assert abs(lhs - rhs) <= 1e-12 * scale

    def test_lift_then_project_back(self, dense_small):
        E, _, _ = dense_small
        rng = np.random.default_rng(9)
        x = random_complex(rng, E.n)
        assert np.allclose(E.apply(E.apply_adjoint(x)), x, rtol=0, atol=1e-12 * np.linalg.norm(x))

    def test_dense_matches_materialized(self):
        E = build_gaussian_ensemble(2, 6, seed=4)
        a = E.materialize_adjoint()
        rng = np.random.default_rng(1)
        x = random_complex(rng, 2)
        assert np.allclose(E.apply_adjoint(x), a @ x, atol=1e-14)

    def test_zero_maps_to_zero(self, dense_small):
        E, _, _ = dense_small
        assert np.all(E.apply_adjoint(np.zeros(E.n)) == 0)
        assert np.all(E.apply(np.zeros(E.N)) == 0)

    def test_dimension_errors(self, dense_small):
        E, _, _ = dense_small
        with pytest.raises(DimensionError):
            build_gaussian_ensemble(10, 5, seed=0)
        with pytest.raises(DimensionError):
            E.apply_adjoint(np.zeros(E.n + 1))
        with pytest.raises(DimensionError):
            E.apply(np.zeros(E.N + 1))

    def test_deterministic(self):
        a = build_gaussian_ensemble(4, 8, seed=3).materialize_adjoint()
        b = build_gaussian_ensemble(4, 8, seed=3).materialize_adjoint()
        assert np.array_equal(a, b)


class TestCodedDiffractionEnsemble:
    def test_single_pixel(self):
        # 1x1 object, two masks, minimal padding: N=2, both magnitudes |x|/sqrt(2)
        E = build_cdp_ensemble((1, 1), oversample=(1, 1), seed=0)
        assert E.N == 2
        x = np.array([3.0 - 4.0j])
        w = E.apply_adjoint(x)
        assert np.allclose(np.abs(w), abs(x[0]) / np.sqrt(2.0), atol=1e-12)

    def test_isometry_8x8(self):
        E = build_cdp_ensemble((8, 8), seed=1)
        assert E.N == 2 * 16 * 16
        assert E.isometry_defect(probes=100, seed=0) <= 1e-10
        assert E.projection_defect(probes=20, seed=0) <= 1e-10

    def test_matches_dense_dft_matrix(self):
        # independent oracle: explicitly built padded-DFT matrix per mask
        grid, padded = (4, 3), (8, 6)
        E = build_cdp_ensemble(grid, oversample=padded, seed=9)
        r, c = grid
        pr, pc = padded
        rows = []
        for mask in E.masks:
            f1 = np.exp(-2j * np.pi * np.outer(np.arange(pr), np.arange(r)) / pr)
            f2 = np.exp(-2j * np.pi * np.outer(np.arange(pc), np.arange(c)) / pc)
            block = np.einsum("ka,lb,ab->klab", f1, f2, mask).reshape(pr * pc, r * c)
            rows.append(block)
        dense = E.c0 * np.concatenate(rows, axis=0)
        materialized = E.materialize_adjoint()
        assert np.max(np.abs(dense - materialized)) <= 1e-10 * np.max(np.abs(dense))

    def test_mask_validation(self):
        bad = np.ones((2, 4, 4), dtype=complex)
        bad[1, 0, 0] = 2.0
        with pytest.raises(InvalidMaskError):
            build_cdp_ensemble((4, 4), masks=bad)
        with pytest.raises(InvalidMaskError):
            build_cdp_ensemble((4, 4), n_masks=1, seed=0)

    def test_aliasing_guard(self):
        with pytest.raises(AliasingError):
            build_cdp_ensemble((4, 4), oversample=(6, 6), seed=0)
        # minimal oversampling (2r-1, 2c-1) is allowed
        E = build_cdp_ensemble((4, 4), oversample=(7, 7), seed=0)
        assert E.isometry_defect(probes=10, seed=0) <= 1e-10

    def test_descriptor_roundtrip(self):
        E = build_cdp_ensemble((4, 4), seed=2)
        E2 = ensemble_from_descriptor(E.descriptor())
        rng = np.random.default_rng(0)
        x = random_complex(rng, E.n)
        assert np.allclose(E.apply_adjoint(x), E2.apply_adjoint(x), atol=1e-14)

    def test_gaussian_descriptor_roundtrip(self):
        E = build_gaussian_ensemble(5, 12, seed=6)
        E2 = ensemble_from_descriptor(E.descriptor())
        rng = np.random.default_rng(0)
        x = random_complex(rng, 5)
        assert np.array_equal(E.apply_adjoint(x), E2.apply_adjoint(x))


class TestTorusProjection:
    def test_real_positive(self):
        b = np.array([1.0, 2.0, 0.5])
        w = np.array([3.0, 0.1, 7.0], dtype=complex)
        assert np.allclose(project_torus(w, b), b)

    def test_phase_preserved(self):
        b = np.array([1.0, 2.0])
        w = 1j * b
        assert np.allclose(project_torus(w, b), 1j * b)

    def test_zero_entry_convention(self):
        out = project_torus(np.array([0.0 + 0.0j, 1.0j]), np.array([2.0, 3.0]))
        assert out[0] == 2.0 + 0.0j
        assert np.isclose(out[1], 3.0j)

    def test_idempotent_and_exact_magnitudes(self):
        rng = np.random.default_rng(4)
        b = np.abs(rng.standard_normal(50))
        b[7] = 0.0
        w = random_complex(rng, 50)
        z = project_torus(w, b)
        pos = b > 0
        assert np.max(np.abs(np.abs(z)[pos] - b[pos]) / b[pos]) <= 1e-12
        assert z[7] == 0.0
        assert np.allclose(project_torus(z, b), z, atol=1e-15)
        assert on_torus(z, b)

    def test_unit_phase_zero(self):
        assert unit_phase(np.array([0.0 + 0.0j]))[0] == 1.0 + 0.0j


class TestPhantom:
    def test_shepp_logan_range(self):
        img = shepp_logan((64, 64))
        assert img.shape == (64, 64)
        assert img.min() >= 0.0
        assert img.max() > 0.5

    def test_rpp_deterministic(self):
        a = build_rpp((32, 32), seed=5)
        b = build_rpp((32, 32), seed=5)
        assert np.array_equal(a.values, b.values)
        c = build_rpp((32, 32), seed=6)
        assert not np.array_equal(a.values, c.values)

    def test_rpp_magnitude_is_phantom(self):
        ph = build_rpp((32, 32), seed=1)
        margin = 4  # ceil(32/8)
        p = np.zeros((32, 32))
        p[margin:-margin, margin:-margin] = shepp_logan((24, 24))
        assert np.allclose(ph.magnitude, p, atol=1e-15)

    def test_rpp_rank(self):
        assert build_rpp((32, 32), seed=2).matricized_rank() >= 2

    def test_grid_too_small(self):
        with pytest.raises(DimensionError):
            build_rpp((8, 8), seed=0)


class TestRangeProjection:
    def test_range_vectors_are_fixed(self, dense_small):
        E, _, _ = dense_small
        rng = np.random.default_rng(20)
        w = E.apply_adjoint(random_complex(rng, E.n))
        assert np.linalg.norm(E.project_range(w) - w) <= 1e-12 * np.linalg.norm(w)

    def test_complement_vectors_map_to_zero(self, dense_small):
        E, _, _ = dense_small
        rng = np.random.default_rng(21)
        w = random_complex(rng, E.N)
        perp = w - E.project_range(w)
        assert np.linalg.norm(E.project_range(perp)) <= 1e-12 * np.linalg.norm(w)
