import numpy as np
import pytest

from opotwin.analysis import (
    GainPoint,
    NoisePoint,
    SqueezeResult,
    clearance_at,
    correct_electronic,
    db_from_linear,
    extract_minmax,
    fit_shot_noise,
    fit_threshold,
    linear_from_db,
    read_gain_csv,
    read_noise_csv,
    shot_noise_residuals_db,
    write_gain_csv,
    write_noise_csv,
)
from opotwin.errors import CalibrationError, DomainError, FitError, InsufficientDataError
from opotwin.optics import parametric_gain

# The single electronic-noise fraction that maps raw -1.0 dB to corrected
# -1.6 dB, solved from (r - e)/(1 - e) = v:  e = (r - v)/(1 - v).
E_CONSISTENT = (10 ** (-0.1) - 10 ** (-0.16)) / (1.0 - 10 ** (-0.16))


class TestDbConversions:
    def test_unity(self):
        assert db_from_linear(1.0) == 0.0

    def test_direct(self):
        assert db_from_linear(0.6514) == pytest.approx(-1.862, abs=1e-3)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        for x in rng.uniform(1e-6, 1e3, 500):
            assert linear_from_db(db_from_linear(x)) == pytest.approx(x, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            db_from_linear(0.0)
        with pytest.raises(DomainError):
            db_from_linear(-3.0)


class TestFitThreshold:
    def test_exact_model_recovery(self):
        pumps = np.linspace(0.05, 0.6, 8)
        pts = [GainPoint(p, parametric_gain(p, 0.87)) for p in pumps]
        p_th, rms = fit_threshold(pts)
        assert p_th == pytest.approx(0.87, abs=1e-6)
        assert rms < 1e-9

    def test_monte_carlo_with_noise(self):
        # oracle: 1000 noisy refits; the ensemble recovers the true threshold
        rng = np.random.default_rng(17)
        pumps = np.linspace(0.05, 0.6, 8)
        clean = np.array([parametric_gain(p, 0.87) for p in pumps])
        fits = []
        for _ in range(1000):
            noisy = clean * (1.0 + 0.02 * rng.standard_normal(len(clean)))
            pts = [GainPoint(p, max(g, 1.0)) for p, g in zip(pumps, noisy)]
            fits.append(fit_threshold(pts)[0])
        fits = np.array(fits)
        assert abs(fits.mean() - 0.87) < 0.02
        assert np.median(np.abs(fits - 0.87)) < 0.02

    def test_figure_like_dataset(self):
        # gains {1.4, 2, 3, 4} synthesized at the published threshold
        gains = [1.4, 2.0, 3.0, 4.0]
        pts = [GainPoint(0.87 * (1.0 - g**-0.5) ** 2, g) for g in gains]
        p_th, _ = fit_threshold(pts)
        assert p_th == pytest.approx(0.870, abs=1e-9)

    def test_scale_consistency(self):
        pumps = np.linspace(0.05, 0.6, 6)
        pts = [GainPoint(p, parametric_gain(p, 0.87)) for p in pumps]
        base, _ = fit_threshold(pts)
        for k in (0.2, 5.0):
            scaled = [GainPoint(k * pt.pump_power, pt.gain) for pt in pts]
            p_th, _ = fit_threshold(scaled)
            assert p_th == pytest.approx(k * base, rel=1e-6)

    def test_too_few_points(self):
        pts = [GainPoint(0.1, 1.5), GainPoint(0.2, 2.0)]
        with pytest.raises(FitError):
            fit_threshold(pts)

    def test_gain_below_one_rejected(self):
        with pytest.raises(DomainError):
            GainPoint(0.1, 0.9)


class TestFitShotNoise:
    def _synthetic(self, slope, offset_dbm, powers):
        off = linear_from_db(offset_dbm)
        return [NoisePoint(p, db_from_linear(slope * p + off)) for p in powers]

    def test_offset_recovery(self):
        pts = self._synthetic(6.75e-8, -70.75, np.linspace(0.0, 3.0, 9))
        slope, offset = fit_shot_noise(pts)
        assert offset == pytest.approx(-70.75, abs=0.05)
        assert slope == pytest.approx(6.75e-8, rel=1e-6)

    def test_zero_slope_is_calibration_error(self):
        pts = [NoisePoint(p, -70.75) for p in np.linspace(0.0, 3.0, 9)]
        with pytest.raises(CalibrationError):
            fit_shot_noise(pts)

    def test_residuals_flag_shot_noise_limited(self):
        pts = self._synthetic(6.75e-8, -70.75, np.linspace(0.0, 3.0, 9))
        slope, offset = fit_shot_noise(pts)
        resid = shot_noise_residuals_db(pts, slope, offset)
        assert np.max(np.abs(resid)) < 0.1

    def test_clearance(self):
        slope, offset = 6.753398779706986e-08, -70.75
        c = clearance_at(slope, offset, 2.5)
        assert c == pytest.approx(3.0066, abs=2e-3)


class TestCorrectElectronic:
    def test_reference_correction_pair(self):
        clearance = 1.0 / E_CONSISTENT
        assert correct_electronic(-1.0, clearance) == pytest.approx(-1.6, abs=1e-3)
        assert correct_electronic(1.2, clearance) == pytest.approx(1.69, abs=0.01)

    def test_pair_consistency_regression(self):
        # the same e must map both published pairs
        clearance = 1.0 / E_CONSISTENT
        assert correct_electronic(-1.0, clearance) == pytest.approx(-1.6, abs=0.001)
        assert correct_electronic(1.2, clearance) == pytest.approx(1.6934, abs=0.01)

    def test_infinite_clearance_is_identity(self):
        for raw in (-1.5, 0.0, 2.0):
            assert correct_electronic(raw, 1e12) == pytest.approx(raw, abs=1e-9)

    def test_monotone_in_raw(self):
        raws = np.linspace(-3.0, 3.0, 50)
        outs = [correct_electronic(r, 3.0) for r in raws]
        assert np.all(np.diff(outs) > 0)

    def test_unphysical_below_floor(self):
        with pytest.raises(DomainError):
            correct_electronic(-6.0, 3.0)  # below the electronic floor

    def test_clearance_must_exceed_one(self):
        with pytest.raises(DomainError):
            correct_electronic(-1.0, 0.9)


class TestSqueezeResult:
    def test_magnitudes_grow_under_correction(self):
        c = 3.0066
        raw_sq, raw_asq = -1.0, 1.2
        res = SqueezeResult(
            raw_sq_db=raw_sq,
            raw_asq_db=raw_asq,
            corrected_sq_db=correct_electronic(raw_sq, c),
            corrected_asq_db=correct_electronic(raw_asq, c),
            clearance=c,
        )
        assert abs(res.corrected_sq_db) > abs(res.raw_sq_db)
        assert abs(res.corrected_asq_db) > abs(res.raw_asq_db)

    def test_clearance_invariant(self):
        with pytest.raises(DomainError):
            SqueezeResult(-1.0, 1.2, -1.6, 1.7, clearance=0.5)


class TestExtractMinmax:
    def test_sinusoid(self):
        # clean-waveform configuration (narrow quantile, as used for seed traces)
        t = np.arange(0, 1.0, 1e-3)
        level, depth = 2.0, 0.5
        v = level * (1.0 + depth * np.sin(2 * np.pi * 20 * t))
        maxima, minima = extract_minmax(v, t, 0.1, width=0.01)
        assert np.mean(maxima) == pytest.approx(level * (1 + depth), rel=0.01)
        assert np.mean(minima) == pytest.approx(level * (1 - depth), rel=0.01)
        # the outlier-resistant default width trades ~1% extra bias
        maxima5, minima5 = extract_minmax(v, t, 0.1, width=0.05)
        assert np.mean(maxima5) == pytest.approx(level * (1 + depth), rel=0.025)
        assert np.mean(minima5) == pytest.approx(level * (1 - depth), rel=0.025)

    def test_flat_trace(self):
        t = np.arange(0, 0.5, 1e-3)
        v = np.full_like(t, 3.25)
        maxima, minima = extract_minmax(v, t, 0.1)
        assert np.all(maxima == 3.25)
        assert np.all(minima == 3.25)

    def test_time_reversal_invariance(self):
        rng = np.random.default_rng(9)
        t = np.arange(0, 0.1, 1e-3)
        v = 1.0 + 0.3 * np.sin(2 * np.pi * 50 * t) + 0.01 * rng.standard_normal(t.size)
        fwd = extract_minmax(v, t, 0.1)
        rev = extract_minmax(v[::-1], t, 0.1)
        assert fwd[0][0] == pytest.approx(rev[0][0], rel=1e-12)
        assert fwd[1][0] == pytest.approx(rev[1][0], rel=1e-12)

    def test_outlier_resistance(self):
        t = np.arange(0, 0.1, 1e-3)
        v = np.ones(t.size)
        v[40] = 100.0  # single-sample glitch
        maxima, _ = extract_minmax(v, t, 0.1, width=0.05)
        assert maxima[0] < 2.0

    def test_window_too_short(self):
        t = np.arange(0, 0.1, 1e-3)
        v = np.ones(t.size)
        with pytest.raises(InsufficientDataError):
            extract_minmax(v, t, 0.004)

    def test_empty_trace(self):
        with pytest.raises(InsufficientDataError):
            extract_minmax(np.array([]), np.array([]), 0.1)

    def test_accepts_zero_span_trace_object(self):
        from opotwin.apparatus import Apparatus, collect_trace

        app = Apparatus(rng_seed=2)
        app.set_pump_power(0.0135)
        trace = collect_trace(app, 500)
        maxima, minima = extract_minmax(trace, window_s=0.1)
        assert len(maxima) == len(minima) == 5
        assert np.all(maxima > minima)


class TestCsvRoundTrip:
    def test_gain_csv(self, tmp_path):
        pts = [GainPoint(0.1, 1.5), GainPoint(0.2, 2.25)]
        path = tmp_path / "g.csv"
        write_gain_csv(path, pts)
        assert path.read_text().splitlines()[0] == "pump_w,gain"
        back = read_gain_csv(path)
        assert back == pts

    def test_noise_csv(self, tmp_path):
        pts = [NoisePoint(0.0, -70.75), NoisePoint(2.5, -66.0)]
        path = tmp_path / "n.csv"
        write_noise_csv(path, pts)
        assert path.read_text().splitlines()[0] == "lo_mw,noise_dbm"
        assert read_noise_csv(path) == pts
