import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import PAPER_SATURATION, hbt_spec, lorentzian_data, saturation_data
from ndphotonics.lm import FitConvergenceError, covariance, levenberg_marquardt
from ndphotonics.photophysics import (
    DataError,
    G2Params,
    PhotonStreamSpec,
    SaturationParams,
    StreamOverflowError,
    bin_average_exp,
    classify,
    correct_g2_background,
    eval_lorentzian,
    eval_saturation,
    fit_g2,
    fit_lorentzian,
    fit_saturation,
    g2_model,
    mix_g2,
    simulate_hbt,
    write_histogram_csv,
)


def rel_err(a, b):
    return abs(a - b) / abs(b)


# -- saturation ------------------------------------------------------------------

def test_saturation_model_values():
    p = SaturationParams(86e3, 1.0)
    assert eval_saturation(p, 1.0) == pytest.approx(43e3, rel=1e-15)
    assert eval_saturation(SaturationParams(5e4, 2.0, 10.0, 123.0), 0.0) == 123.0
    assert eval_saturation(p, 1e6) == pytest.approx(86e3, rel=1e-4)


@pytest.mark.parametrize("truth", PAPER_SATURATION, ids=["1mW", "4mW"])
def test_saturation_round_trip_noiseless(truth):
    fit = fit_saturation(saturation_data(truth))
    for got, want in zip(fit.params.as_array(), truth.as_array()):
        assert rel_err(got, want) <= 1e-3
    assert fit.identifiable and fit.span_ok


@settings(max_examples=50)
@given(
    R=st.floats(1e4, 3e5), p_sat=st.floats(0.2, 8.0), n_frac=st.floats(0.005, 0.2), m=st.floats(20.0, 3000.0)
)
def test_saturation_round_trip_random_draws(R, p_sat, n_frac, m):
    truth = SaturationParams(R, p_sat, n_frac * R / p_sat, m)
    fit = fit_saturation(saturation_data(truth, count=16))
    for got, want in zip(fit.params.as_array(), truth.as_array()):
        assert rel_err(got, want) <= 5e-3


def test_linear_data_leaves_saturation_power_unidentified():
    P = np.linspace(0.1, 5.0, 15)
    fit = fit_saturation(np.column_stack([P, 2e3 * P + 400.0]))
    assert not fit.identifiable
    assert not (fit.uncertainty["P_sat"] < fit.params.P_sat)


@pytest.mark.parametrize(
    "rows, match",
    [
        (np.column_stack([np.full(8, 2.0), np.arange(8.0)]), "rank-deficient"),
        (np.column_stack([np.arange(4.0), np.arange(4.0)]), "at least 6"),
        (np.column_stack([np.arange(8.0) - 1, np.arange(8.0)]), ">= 0"),
    ],
)
def test_saturation_data_errors(rows, match):
    with pytest.raises(DataError, match=match):
        fit_saturation(rows)


def test_saturation_relative_noise_weighting():
    truth = PAPER_SATURATION[0]
    fit = fit_saturation(saturation_data(truth, count=101, noise=0.02, seed=3), noise="relative")
    for got, want in zip(fit.params.as_array(), truth.as_array()):
        assert rel_err(got, want) <= 0.05


# -- Lorentzian ------------------------------------------------------------------

@pytest.mark.parametrize("fwhm", [65.0, 325.0])
def test_lorentzian_round_trip(fwhm):
    fit = fit_lorentzian(lorentzian_data(0.0, fwhm, 1000.0, 50.0))
    assert abs(fit.center) <= 1e-3 * fwhm
    for got, want in ((fit.fwhm_ghz, fwhm), (fit.amplitude, 1000.0), (fit.baseline, 50.0)):
        assert rel_err(got, want) <= 1e-3
    assert fit.has_peak and not fit.resolution_limited


@settings(max_examples=50)
@given(
    center=st.floats(-50.0, 50.0), fwhm=st.floats(20.0, 400.0), amplitude=st.floats(100.0, 1e4),
    baseline=st.floats(1.0, 500.0),
)
def test_lorentzian_round_trip_random_draws(center, fwhm, amplitude, baseline):
    fit = fit_lorentzian(lorentzian_data(center, fwhm, amplitude, baseline))
    assert abs(fit.center - center) <= 5e-3 * fwhm
    for got, want in ((fit.fwhm_ghz, fwhm), (fit.amplitude, amplitude), (fit.baseline, baseline)):
        assert rel_err(got, want) <= 5e-3


@pytest.mark.parametrize("fwhm", [10.0, 25.0, 29.9, 30.1, 40.0, 65.0])
def test_resolution_flag_follows_floor(fwhm):
    fit = fit_lorentzian(lorentzian_data(0.0, fwhm, 500.0, 20.0, half_span=400.0, count=1601))
    assert fit.resolution_limited == (fwhm < 30.0)


def test_flat_spectrum_reports_no_peak():
    rng = np.random.default_rng(7)
    x = np.linspace(-500, 500, 201)
    fit = fit_lorentzian(np.column_stack([x, rng.poisson(50.0, x.size).astype(float)]))
    assert not fit.has_peak


def test_lorentzian_model_peak_height():
    assert eval_lorentzian(3.0, 3.0, 10.0, 7.0, 2.0) == 9.0
    assert eval_lorentzian(8.0, 3.0, 10.0, 7.0, 0.0) == pytest.approx(3.5)


# -- g2 model ----------------------------------------------------------------------

def test_g2_model_values():
    assert g2_model(G2Params(0.31, 20.0), 0.0) == pytest.approx(0.31)
    assert g2_model(G2Params(0.0, 20.0), 20.0) == pytest.approx(1 - np.exp(-1))
    p = G2Params(0.2, 10.0, a=0.5, tau2_ns=200.0)
    assert g2_model(p, 100 * 200.0) == pytest.approx(1.0, abs=1e-6)


@given(
    g0=st.floats(0.0, 1.0), t1=st.floats(1.0, 100.0), a=st.floats(0.0, 2.0), ratio=st.floats(1.5, 50.0),
    tau=st.floats(-1e4, 1e4),
)
def test_g2_model_bounds_and_symmetry(g0, t1, a, ratio, tau):
    p = G2Params(g0, t1, a=a, tau2_ns=t1 * ratio)
    assert g2_model(p, tau) >= -1e-12
    assert g2_model(p, tau) == g2_model(p, -tau)


def test_bin_average_matches_numerical_mean():
    lo, hi = np.array([-3.0, 0.5, 10.0]), np.array([1.0, 2.5, 14.0])
    got = bin_average_exp(lo, hi, 5.0)
    for a, b, g in zip(lo, hi, got):
        t = np.linspace(a, b, 200001)
        assert g == pytest.approx(np.trapezoid(np.exp(-np.abs(t) / 5.0), t) / (b - a), rel=1e-8)


def test_background_correction_values():
    assert correct_g2_background(0.4, 1.0) == 0.4
    for rho in (0.1, 0.5, 0.9):
        assert correct_g2_background(1.0, rho) == pytest.approx(1.0, abs=1e-15)
    value, clipped = correct_g2_background(0.05, 0.8, return_flag=True)
    assert value == 0.0 and clipped
    for rho in (0.0, -0.5, 1.2):
        with pytest.raises(ValueError):
            correct_g2_background(0.5, rho)


@given(g=st.floats(0.0, 3.0), rho=st.floats(1e-3, 1.0))
def test_correction_inverts_mixing(g, rho):
    assert correct_g2_background(mix_g2(g, rho), rho) == pytest.approx(g, abs=1e-12 / rho**2)


def test_classification_rule():
    assert classify(0.31, 0.05) == "single_emitter"
    assert classify(0.45, 0.06) == "inconclusive"
    assert classify(1.0, 0.02) == "not_single"
    assert classify(0.1, 0.01, plateau_identified=False) == "inconclusive"


# -- g2 fits on simulated streams ---------------------------------------------------

def test_flat_histogram_is_poissonian():
    tau = np.arange(-150.0, 151.0, 1.0)
    fit = fit_g2(np.column_stack([tau, np.full(tau.size, 1000.0)]))
    assert fit.g2_zero == pytest.approx(1.0, abs=0.02)
    assert fit.classification == "not_single"


def test_background_only_stream_is_flat():
    hist = simulate_hbt(hbt_spec(1.0, duration_s=1.0, seed=5))
    g = hist.normalized()
    sigma = 1 / np.sqrt(hist.poisson_level)
    assert np.all(np.abs(g - 1) <= 4.5 * sigma)  # 301 bins: 4.5 sigma keeps the family-wise rate tiny
    assert abs(g.mean() - 1) <= 3 * sigma / np.sqrt(g.size)


def test_two_level_emitter_antibunches():
    hist = simulate_hbt(hbt_spec(0.0, seed=11))
    assert hist.coincidences >= 1e6
    fit = fit_g2(hist.as_rows())
    assert fit.g2_zero < 0.1
    assert fit.tau1_ns == pytest.approx(20.0, rel=0.1)
    assert fit.classification == "single_emitter"


def test_rho_squared_law_with_doubled_background():
    spec_a = PhotonStreamSpec(signal_rate=1e6, background_rate=2.5e5, duration_s=2.0, bin_width_ns=2.0, seed=21)
    spec_b = PhotonStreamSpec(signal_rate=1e6, background_rate=5e5, duration_s=2.0, bin_width_ns=2.0, seed=22)
    for spec in (spec_a, spec_b):
        fit = fit_g2(simulate_hbt(spec).as_rows(), rho=spec.rho)
        predicted = mix_g2(0.0, spec.rho)
        assert abs(fit.g2_zero_raw - predicted) <= 3 * fit.g2_zero_raw_err
    assert mix_g2(0.0, spec_b.rho) > mix_g2(0.0, spec_a.rho)


def test_corrected_value_matches_emitter_only_stream():
    clean = fit_g2(simulate_hbt(hbt_spec(0.31, 1.0, seed=41)).as_rows())
    mixed_spec = hbt_spec(0.31, 0.8, seed=42)
    mixed = fit_g2(simulate_hbt(mixed_spec).as_rows(), rho=mixed_spec.rho)
    combined = np.hypot(clean.g2_zero_err, mixed.g2_zero_err)
    assert abs(mixed.g2_zero - clean.g2_zero) <= 3 * combined


def test_simulation_is_deterministic(tmp_path):
    spec = hbt_spec(0.31, 0.9, duration_s=0.2, seed=9)
    a = write_histogram_csv(tmp_path / "a.csv", simulate_hbt(spec))
    b = write_histogram_csv(tmp_path / "b.csv", simulate_hbt(spec))
    assert a.read_bytes() == b.read_bytes()
    c = write_histogram_csv(tmp_path / "c.csv", simulate_hbt(hbt_spec(0.31, 0.9, duration_s=0.2, seed=10)))
    assert a.read_bytes() != c.read_bytes()


@pytest.fixture(scope="module")
def twenty_seed_fits():
    return [fit_g2(simulate_hbt(hbt_spec(0.31, seed=100 + s)).as_rows()) for s in range(20)]


def test_statistical_soundness_over_twenty_seeds(twenty_seed_fits):
    values = np.array([f.g2_zero for f in twenty_seed_fits])
    sigma = values.std(ddof=1)
    assert abs(values.mean() - 0.31) <= sigma / np.sqrt(20)


def test_g2_error_bars_are_calibrated(twenty_seed_fits):
    values = np.array([f.g2_zero for f in twenty_seed_fits])
    reported = np.mean([f.g2_zero_err for f in twenty_seed_fits])
    assert abs(values.mean() - 0.31) <= 3 * reported / np.sqrt(20)
    assert values.std(ddof=1) == pytest.approx(reported, rel=0.35)


def test_overflow_is_reported_with_advice():
    with pytest.raises(StreamOverflowError, match="shorter duration_s"):
        simulate_hbt(PhotonStreamSpec(signal_rate=0.0, background_rate=1e8, duration_s=1.0))
    with pytest.raises(StreamOverflowError, match="shorter duration_s"):
        simulate_hbt(PhotonStreamSpec(signal_rate=0.0, background_rate=3e7, duration_s=1.0, window_ns=1000.0))


@pytest.mark.parametrize(
    "kw",
    [dict(decay_rate=-1.0), dict(duration_s=0.0), dict(window_ns=0.5), dict(seed=-1),
     dict(emitter_weights=(0.5, 0.4)), dict(signal_rate=1e10)],
)
def test_stream_spec_validation(kw):
    with pytest.raises(ValueError):
        PhotonStreamSpec(**kw)


def test_g2_input_errors():
    with pytest.raises(DataError):
        fit_g2(np.zeros((5, 2)))
    tau = np.arange(-50.0, 51.0)
    with pytest.raises(ValueError):
        fit_g2(np.column_stack([tau, np.ones_like(tau)]), rho=0.0)


# -- fit engine ----------------------------------------------------------------------

def test_lm_reports_trace_when_out_of_iterations():
    x = np.linspace(0, 1, 30)
    y = np.exp(3 * x)
    with pytest.raises(FitConvergenceError) as err:
        levenberg_marquardt(lambda p: p[0] * np.exp(p[1] * x) - y,
                            lambda p: np.column_stack([np.exp(p[1] * x), p[0] * x * np.exp(p[1] * x)]),
                            [0.1, -2.0], max_iter=2)
    assert len(err.value.trace) >= 2 and "iter" in str(err.value)


def test_covariance_marks_unidentifiable_directions():
    J = np.column_stack([np.ones(10), np.ones(10), np.arange(10.0)])
    cov = covariance(J)
    assert np.isinf(cov[0, 0]) and np.isinf(cov[1, 1]) and np.isfinite(cov[2, 2])
