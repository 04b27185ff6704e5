"""Detector model: spec examples, invariants and oracles."""

import numpy as np
import pytest

from ccdaq.detector import (
    ChargeImage,
    ExposureParams,
    SceneModel,
    digitize_readout,
    drift_scan,
    integrate_charge,
    push_pull,
    scene_rate_map,
    simulate_exposure,
    step_seed,
)
from ccdaq.errors import ParameterError, WrongOperationError

from conftest import make_geom, point_scene


class TestIntegrateCharge:
    def test_bias_zero_everywhere(self, geom, flat_scene):
        p = ExposureParams(exposure_type="bias", exptime=0.0)
        ci = integrate_charge(flat_scene, geom, p, seed=1)
        assert np.all(ci.charge == 0)

    def test_dark_poisson_mean(self):
        # dark 0.04 e-/px/s for 100 s -> mean 4 e-; Poisson sigma/sqrt(N) bound
        g = make_geom(rows=128, cols=128, dark_current=0.04)
        p = ExposureParams(exposure_type="dark", exptime=100.0)
        ci = integrate_charge(SceneModel(), g, p, seed=2)
        n = ci.charge.size
        tol = 5 * np.sqrt(4.0) / np.sqrt(n)
        assert abs(ci.charge.mean() - 4.0) < tol

    def test_object_expectation_map(self, geom):
        # noiseless-limit check on the expectation itself
        rate = scene_rate_map(SceneModel(sky_level=10.0), geom)
        assert np.allclose(rate * 10.0, 100.0)

    def test_invalid_roi_names_field(self, geom, flat_scene):
        p = ExposureParams(exposure_type="object", exptime=1.0, roi=(0, 0, 100, 10))
        with pytest.raises(ParameterError) as ei:
            integrate_charge(flat_scene, geom, p, seed=0)
        assert "roi" in str(ei.value)

    def test_bad_binning_names_field(self, geom, flat_scene):
        p = ExposureParams(exposure_type="object", exptime=1.0, bin_x=5)
        with pytest.raises(ParameterError) as ei:
            integrate_charge(flat_scene, geom, p, seed=0)
        assert "bin_x" in str(ei.value)

    def test_full_well_clamp(self):
        g = make_geom(full_well=50.0)
        p = ExposureParams(exposure_type="object", exptime=100.0)
        ci = integrate_charge(SceneModel(sky_level=10.0), g, p, seed=3)
        assert ci.charge.max() <= 50.0


class TestDigitizeReadout:
    def test_binning_sums_charge(self):
        g = make_geom(rows=4, cols=4, bias_level=(0,))
        charge = ChargeImage(4, 4, np.full((4, 4), 100.0))
        p = ExposureParams(exposure_type="object", bin_x=2, bin_y=2)
        f = digitize_readout(charge, g, p, seed=0)
        assert f.width == f.height == 2
        assert np.all(f.samples == 400)

    def test_gain_and_bias(self):
        g = make_geom(rows=2, cols=2, gains=(2.0,))
        charge = ChargeImage(2, 2, np.full((2, 2), 1000.0))
        p = ExposureParams(exposure_type="object")
        f = digitize_readout(charge, g, p, seed=0)
        assert np.all(f.samples == 1000)  # 1000/2 + 500

    def test_saturation_clamp(self):
        g = make_geom(rows=2, cols=2, gains=(2.0,), full_well=1e9)
        charge = ChargeImage(2, 2, np.full((2, 2), 131070.0))
        p = ExposureParams(exposure_type="object")
        f = digitize_readout(charge, g, p, seed=0)
        assert np.all(f.samples == 65535)
        assert f.meta.saturated == 4

    def test_charge_conservation_under_binning(self):
        rng = np.random.default_rng(7)
        g = make_geom(rows=16, cols=16)
        charge = rng.uniform(0, 1000, size=(16, 16))
        from ccdaq.detector.kernels import bin_sum
        binned = bin_sum(charge, 4, 2)
        assert np.isclose(binned.sum(), charge.sum())

    def test_roi_crop_of_full_frame(self):
        # equal seeds: ROI readout == crop of full-frame readout
        g = make_geom(rows=32, cols=32, read_noise=(3.0,), gains=(1.5,))
        rng = np.random.default_rng(5)
        charge = ChargeImage(32, 32, rng.uniform(0, 500, (32, 32)))
        full = digitize_readout(charge, g, ExposureParams(exposure_type="object"), seed=9)
        p_roi = ExposureParams(exposure_type="object", roi=(8, 4, 16, 8))
        sub = digitize_readout(charge, g, p_roi, seed=9)
        assert np.array_equal(sub.samples, full.samples[4:12, 8:24])

    def test_two_node_bias_strips(self):
        g = make_geom(rows=4, cols=8, output_nodes=2, bias_level=(100, 200))
        charge = ChargeImage(4, 8, np.zeros((4, 8)))
        f = digitize_readout(charge, g, ExposureParams(exposure_type="object"), seed=0)
        assert np.all(f.samples[:, :4] == 100)
        assert np.all(f.samples[:, 4:] == 200)

    def test_single_node_selection(self):
        g = make_geom(rows=4, cols=8, output_nodes=2, bias_level=(100, 200))
        charge = ChargeImage(4, 8, np.zeros((4, 8)))
        f = digitize_readout(charge, g, ExposureParams(exposure_type="object", node=1), seed=0)
        assert np.all(f.samples == 200)


class TestSimulateExposure:
    def test_sequencing_timestamps(self, geom, flat_scene):
        p = ExposureParams(exposure_type="object", exptime=0.5, n_exposures=3)
        frames = simulate_exposure(flat_scene, geom, p, seed=11)
        starts = [f.meta.t_start for f in frames]
        assert len(frames) == 3
        assert starts == sorted(starts) and len(set(starts)) == 3

    def test_bias_equals_bias_level(self, geom, flat_scene):
        p = ExposureParams(exposure_type="bias")
        (f,) = simulate_exposure(flat_scene, geom, p, seed=1)
        assert np.all(f.samples == 500)

    def test_determinism(self, geom, flat_scene):
        p = ExposureParams(exposure_type="object", exptime=1.0, speed=1, n_exposures=2)
        a = simulate_exposure(flat_scene, geom, p, seed=42)
        b = simulate_exposure(flat_scene, geom, p, seed=42)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.samples, fb.samples)

    def test_wrong_type_rejected(self, geom, flat_scene):
        p = ExposureParams(exposure_type="scan", scan_rows=5, row_period=0.1)
        with pytest.raises(WrongOperationError):
            simulate_exposure(flat_scene, geom, p, seed=0)

    def test_neon_adds_lamp(self, geom):
        lamp = SceneModel(sky_level=50.0)
        p = ExposureParams(exposure_type="neon", exptime=2.0)
        (f,) = simulate_exposure(SceneModel(), geom, p, seed=3, lamp=lamp)
        assert f.samples.mean() > 500 + 50  # lamp light present on top of bias

    def test_monotone_in_exptime(self, geom, flat_scene):
        means = []
        for t in (0.5, 1.0, 2.0, 4.0):
            p = ExposureParams(exposure_type="object", exptime=t)
            (f,) = simulate_exposure(flat_scene, geom, p, seed=8)
            means.append(f.samples.mean())
        assert all(b > a for a, b in zip(means, means[1:]))


class TestDriftScan:
    def test_row_count_and_timing(self, geom, flat_scene):
        p = ExposureParams(exposure_type="scan", scan_rows=100, row_period=0.1)
        rows = list(drift_scan(flat_scene, geom, p, seed=1))
        assert len(rows) == 100
        assert abs((rows[-1].timestamp - rows[0].timestamp) - 9.9) < 1e-9

    def test_missing_scan_params(self, geom, flat_scene):
        p = ExposureParams(exposure_type="scan", scan_rows=10)
        with pytest.raises(ParameterError):
            list(drift_scan(flat_scene, geom, p, seed=1))

    def test_uniform_scene_rows_homogeneous(self, geom, flat_scene):
        # pairwise z-test at 5 sigma over 100 rows
        p = ExposureParams(exposure_type="scan", scan_rows=100, row_period=0.05)
        rows = list(drift_scan(flat_scene, geom, p, seed=2))
        data = np.array([r.samples.astype(float) for r in rows])
        means = data.mean(axis=1)
        lam = 10.0 * geom.rows * 0.05  # expected e-/px per emitted row
        se = np.sqrt(lam / geom.cols)
        grand = means.mean()
        z = (means - grand) / se
        assert np.all(np.abs(z) < 5)

    def test_single_row_matches_roi_oracle(self, geom, flat_scene):
        # scan_rows=1 is statistically a 1-row ROI exposure with dwell rows*period
        period = 0.1
        p = ExposureParams(exposure_type="scan", scan_rows=1, row_period=period)
        (row,) = drift_scan(flat_scene, geom, p, seed=3)
        dwell = geom.rows * period
        p_ref = ExposureParams(exposure_type="object", exptime=dwell, roi=(0, 0, geom.cols, 1))
        (ref,) = simulate_exposure(flat_scene, geom, p_ref, seed=4)
        lam = 10.0 * dwell
        se = np.sqrt(lam / geom.cols)
        assert abs(row.samples.mean() - ref.samples.mean()) < 5 * np.sqrt(2) * se

    def test_ramp_flagging(self, flat_scene):
        g = make_geom(rows=8, cols=8)
        p = ExposureParams(exposure_type="scan", scan_rows=12, row_period=0.01)
        rows = list(drift_scan(flat_scene, g, p, seed=5))
        assert all(r.ramp_up for r in rows[:8])
        assert not any(r.ramp_up for r in rows[8:])


def _pushpull_oracle(scene, geom, params, seed):
    """Brute-force shift-accumulate over expectation maps (noise-free)."""
    rate = scene_rate_map(scene, geom)
    exp = np.zeros_like(rate)
    for t in range(params.n_transfers):
        exp += rate * params.elementary_exptime
        s = params.rows_per_transfer
        exp[s:, :] = exp[:-s, :]
        exp[:s, :] = 0.0
    return exp


class TestPushPull:
    def test_single_shift_moves_source(self):
        g = make_geom(rows=32, cols=32, bias_level=(0,))
        scene = point_scene(16, 10, flux=5e4, sigma=0.5)
        p = ExposureParams(exposure_type="push_pull", elementary_exptime=1.0,
                           n_transfers=1, rows_per_transfer=1)
        f = push_pull(scene, g, p, seed=1)
        peak = np.unravel_index(np.argmax(f.samples), f.samples.shape)
        assert peak == (11, 16)

    def test_three_transfer_copies(self):
        g = make_geom(rows=64, cols=32, bias_level=(0,), full_well=1e7)
        scene = point_scene(16, 5, flux=2e5, sigma=0.7)
        p = ExposureParams(exposure_type="push_pull", elementary_exptime=1.0,
                           n_transfers=3, rows_per_transfer=10)
        f = push_pull(scene, g, p, seed=2)
        exp = _pushpull_oracle(scene, g, p, seed=None)
        # copies at rows 5+30, 5+20, 5+10 with equal expected flux
        for offset in (10, 20, 30):
            r = 5 + offset
            band_meas = f.samples[r - 2:r + 3, :].astype(float).sum()
            band_exp = exp[r - 2:r + 3, :].sum()
            assert abs(band_meas - band_exp) < 5 * np.sqrt(band_exp)
        b1 = exp[13:18, :].sum()
        b2 = exp[23:28, :].sum()
        b3 = exp[33:38, :].sum()
        assert np.isclose(b1, b2) and np.isclose(b2, b3)

    def test_uniform_interior_rows_equal_expectation(self):
        g = make_geom(rows=64, cols=16, bias_level=(0,))
        scene = SceneModel(sky_level=50.0)
        p = ExposureParams(exposure_type="push_pull", elementary_exptime=0.5,
                           n_transfers=4, rows_per_transfer=5)
        exp = _pushpull_oracle(scene, g, p, seed=None)
        interior = exp[20:, :]
        assert np.allclose(interior, interior[0, 0])
        f = push_pull(scene, g, p, seed=3)
        meas = f.samples[20:, :].astype(float).mean()
        lam = interior[0, 0]
        assert abs(meas - lam) < 5 * np.sqrt(lam / f.samples[20:, :].size)

    def test_whole_image_shift_rejected(self):
        g = make_geom(rows=16, cols=16)
        p = ExposureParams(exposure_type="push_pull", elementary_exptime=1.0,
                           n_transfers=1, rows_per_transfer=16)
        with pytest.raises(ParameterError):
            push_pull(SceneModel(sky_level=1.0), g, p, seed=0)


class TestPhotonTransferRelation:
    def test_variance_vs_signal(self):
        # K pairs of flats: var((A-B)/sqrt(2)) ~ signal/gain + read_noise_adu^2
        g = make_geom(rows=24, cols=24, read_noise=(4.0,), gains=(2.0,), bias_level=(300,))
        scene = SceneModel(sky_level=400.0)
        p = ExposureParams(exposure_type="object", exptime=1.0)
        diffs = []
        for k in range(1000):
            a = simulate_exposure(scene, g, p, seed=10_000 + k)[0].samples.astype(float)
            b = simulate_exposure(scene, g, p, seed=90_000 + k)[0].samples.astype(float)
            diffs.append((a - b) / np.sqrt(2))
        var = np.var(np.stack(diffs), ddof=1)
        signal_adu = 400.0 / 2.0
        expect = signal_adu / 2.0 + (4.0 / 2.0) ** 2 + 1.0 / 12.0
        assert abs(var - expect) / expect < 0.05
