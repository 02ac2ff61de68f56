import json

import numpy as np
import pytest

from saddle_raar import build_cdp_ensemble, build_rpp, poisson_data
from saddle_raar.experiments import (
    InvalidDataError,
    NoiseSpec,
    cdp_case_run,
    cdp_instance,
    gaussian_success_sweep,
    _sample_magnitudes,
)


@pytest.fixture(scope="module")
def rpp_cdp():
    phantom = build_rpp((32, 32), seed=4)
    E = build_cdp_ensemble((32, 32), seed=5)
    return phantom, E


class TestPoissonData:
    def test_deterministic(self, rpp_cdp):
        phantom, E = rpp_cdp
        a = poisson_data(phantom, E, 0.18, seed=3)
        b = poisson_data(phantom, E, 0.18, seed=3)
        assert np.array_equal(a.b, b.b)
        assert a.kappa == b.kappa

    def test_large_count_limit(self, rpp_cdp):
        phantom, E = rpp_cdp
        clean = np.abs(E.apply_adjoint(phantom.values))
        noisy = _sample_magnitudes(clean, 1e9, [0, 0])
        level = np.linalg.norm(noisy - clean) / np.linalg.norm(noisy)
        assert level < 1e-3

    def test_target_level_calibration(self, rpp_cdp):
        phantom, E = rpp_cdp
        data = poisson_data(phantom, E, 0.18, seed=7)
        assert 0.171 <= data.realized_level <= 0.189
        clean = np.abs(E.apply_adjoint(phantom.values))
        assert data.realized_level == pytest.approx(
            np.linalg.norm(data.b - clean) / np.linalg.norm(data.b)
        )

    def test_unreachable_levels_rejected(self, rpp_cdp):
        phantom, E = rpp_cdp
        with pytest.raises(InvalidDataError):
            poisson_data(phantom, E, 0.0, seed=0)
        with pytest.raises(InvalidDataError):
            poisson_data(phantom, E, 1.0, seed=0)

    def test_noise_spec_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(kind="bogus")
        with pytest.raises(InvalidDataError):
            NoiseSpec(kind="poisson", target_level=0.0)
        assert NoiseSpec(kind="poisson", target_level=0.18).target_level == 0.18


class TestSuccessSweep:
    def test_summary_determinism(self):
        kwargs = dict(n=20, ratios=(3.0,), betas=(0.8,), rhos=(0.25,), trials=4,
                      seed=11, max_iters=400)
        a = gaussian_success_sweep(**kwargs)
        b = gaussian_success_sweep(**kwargs)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )

    def test_monotone_trend_smoke(self):
        # hardest cell (low ratio, half relaxation) vs easiest cell
        sweep = gaussian_success_sweep(
            n=40, ratios=(3.0, 5.0), betas=(0.5, 10.0 / 11.0), rhos=(), trials=10,
            seed=2, max_iters=1500,
        )
        hard = sweep.cell("raar", 3.0, 0.5)
        easy = sweep.cell("raar", 5.0, 10.0 / 11.0)
        assert hard.success_rate < easy.success_rate

    def test_successful_trials_certify(self):
        sweep = gaussian_success_sweep(
            n=30, ratios=(4.0,), betas=(0.9,), rhos=(1.0 / 9.0,), trials=6,
            seed=5, max_iters=2000,
        )
        outcomes = [o for c in sweep.cells for o in c.outcomes]
        assert any(o.success for o in outcomes)
        assert all(o.fixed_point_pass for o in outcomes if o.success)

    def test_csv_rows_schema(self):
        sweep = gaussian_success_sweep(
            n=12, ratios=(3.0,), betas=(0.8,), rhos=(0.5,), trials=2, seed=0,
            max_iters=200,
        )
        rows = sweep.to_rows()
        assert len(rows) == 2
        assert all(len(r) == 4 for r in rows)
        assert {r[2] for r in rows} == {"drs", "raar"}


class TestCdpCases:
    def test_unknown_case_rejected(self):
        with pytest.raises(ValueError):
            cdp_instance("e", (16, 16), 0)

    def test_noiseless_random_init_successes_behave(self):
        # large starting values reconstruct from a random start; their
        # dual gradient collapses and the basin indicator stays positive
        inst = cdp_instance("b", (32, 32), 0)
        for start in (0.95, 0.9):
            p = cdp_case_run("b", start, instance=inst)
            assert p.final_residual <= 1e-5
            assert p.final_deriv_norm <= 1e-8
            assert np.all(p.tail_t_ratios > 0)

    def test_noisy_random_init_small_start_stagnates(self):
        inst = cdp_instance("d", (32, 32), 0)
        ref = cdp_case_run("d", 0.95, instance=inst)
        for start in (0.7, 0.6):
            p = cdp_case_run("d", start, instance=inst)
            assert p.final_residual >= ref.final_residual

    def test_snapshot_and_trace_shape(self):
        inst = cdp_instance("a", (16, 16), 1)
        p = cdp_case_run("a", 0.9, instance=inst, total_iters=60, hold_iters=30,
                         settle_iters=10)
        assert len(p.records) == 61
        assert p.records[-1].k == 60
        assert p.x_snapshot.shape == (inst.ensemble.n,)
        assert p.records[35].param < 0.9


class TestConcurrencyCap:
    def test_env_var_caps_workers(self, monkeypatch):
        from saddle_raar.experiments import _worker_count

        monkeypatch.delenv("SADDLE_RAAR_THREADS", raising=False)
        assert _worker_count(None) == 1
        assert _worker_count(8) == 8
        monkeypatch.setenv("SADDLE_RAAR_THREADS", "2")
        assert _worker_count(8) == 2
        assert _worker_count(1) == 1

    def test_threaded_suite_matches_serial(self):
        a = gaussian_success_sweep(n=12, ratios=(3.0,), betas=(0.8,), rhos=(0.5,),
                                   trials=4, seed=0, max_iters=300, workers=4)
        b = gaussian_success_sweep(n=12, ratios=(3.0,), betas=(0.8,), rhos=(0.5,),
                                   trials=4, seed=0, max_iters=300, workers=1)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )
