import numpy as np
import pytest
import pywt
from scipy import signal as sps

from sozgnn import dsp


def tone(f, fs, seconds, phase=0.0, amp=1.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * np.sin(2 * np.pi * f * t + phase)


# -- downsampling -------------------------------------------------------------

def test_fir_design():
    taps = dsp.antialias_fir(4)
    assert taps.size == 65
    np.testing.assert_allclose(taps, taps[::-1])
    assert abs(taps.sum() - 1.0) < 1e-12


def test_downsample_dc_preserved():
    y = dsp.downsample(np.full(5120, 3.5), 512, 128)
    assert y.shape == (1280,)
    np.testing.assert_allclose(y[20:-20], 3.5, rtol=1e-12)


def test_downsample_sine_amplitude():
    y = dsp.downsample(tone(10, 512, 10), 512, 128)
    ref = tone(10, 128, 10)
    mid = slice(100, -100)
    assert abs(np.max(np.abs(y[mid])) - 1.0) < 0.02
    assert np.max(np.abs(y[mid] - ref[mid])) < 0.02


def test_downsample_matches_direct_convolution(rng):
    x = rng.standard_normal((3, 2048))
    taps = dsp.antialias_fir(4)
    padded = np.pad(x, [(0, 0), (32, 32)], mode="reflect")
    full = np.stack([np.convolve(row, taps, mode="valid") for row in padded])
    np.testing.assert_allclose(dsp.downsample(x, 512, 128), full[:, ::4], atol=1e-12)


def test_antialias_attenuation_at_60hz():
    w, h = sps.freqz(dsp.antialias_fir(4), worN=[60.0], fs=512)
    assert 20 * np.log10(abs(h[0])) <= -20
    y = dsp.downsample(tone(60, 512, 10), 512, 128)
    assert np.sqrt(np.mean(y[50:-50] ** 2)) < 0.1 * np.sqrt(0.5)


def test_downsample_errors():
    with pytest.raises(dsp.SignalError):
        dsp.downsample(np.zeros(1000), 500, 128)
    with pytest.raises(dsp.SignalError):
        dsp.downsample(np.zeros(10), 512, 128)


# -- Welch ----------------------------------------------------------------------

def test_welch_matches_scipy(rng):
    x = rng.standard_normal((4, 1280)) + 0.3
    ours = dsp.welch_psd(x, 128)
    f, p = sps.welch(x, fs=128, window="hann", nperseg=256, noverlap=128)
    np.testing.assert_allclose(ours.freqs, f)
    np.testing.assert_allclose(ours.power, p, rtol=1e-10, atol=1e-15)
    assert ours.power.shape == (4, 129)


@pytest.mark.parametrize("f0", [10.0, 4.5, 22.0, 40.0])
def test_welch_tone_peak(f0):
    psd = dsp.welch_psd(tone(f0, 128, 10), 128)
    assert psd.freqs[np.argmax(psd.power)] == pytest.approx(f0)


def test_welch_zero_and_white(rng):
    assert not np.any(dsp.welch_psd(np.zeros(1280), 128).power)
    x = rng.standard_normal(128 * 60 * 4)
    psd = dsp.welch_psd(x, 128)
    inner = psd.power[1:-1]
    assert inner.max() / inner.min() < 10


def test_welch_too_short():
    with pytest.raises(dsp.SignalError):
        dsp.welch_psd(np.zeros(100), 128)


# -- band power -------------------------------------------------------------------

def test_band_power_alpha_concentration():
    x = tone(10, 128, 10)
    bp = dsp.band_powers(dsp.welch_psd(x, 128), x.size)
    total = sum(float(getattr(bp, b)) for b in dsp.BANDS)
    assert float(bp.alpha) >= 0.9 * total


def test_band_power_formula(rng):
    x = rng.standard_normal(1280)
    psd = dsp.welch_psd(x, 128)
    manual = sum(p for f, p in zip(psd.freqs, psd.power) if 4 <= f < 8) / 1280
    assert float(dsp.band_power(psd, (4, 8), 1280)) == pytest.approx(manual, rel=1e-12)


def test_band_power_zero_and_bounds():
    psd = dsp.welch_psd(np.zeros(1280), 128)
    assert all(float(getattr(dsp.band_powers(psd, 1280), b)) == 0 for b in dsp.BANDS)
    with pytest.raises(dsp.SignalError):
        dsp.band_power(psd, (200, 300), 1280)


# -- moments, Hjorth ------------------------------------------------------------------

def test_moments_conventions(rng):
    assert tuple(float(v) for v in dsp.statistical_moments(np.full(100, 5.0))) == (5.0, 0.0, 0.0, 0.0)
    _, std, skew, kurt = dsp.statistical_moments(np.tile([-1.0, 1.0], 500))
    assert float(std) == pytest.approx(1.0)
    assert float(skew) == pytest.approx(0.0, abs=1e-12)
    assert float(kurt) == pytest.approx(-2.0, abs=1e-12)
    g = rng.standard_normal(200_000)
    assert abs(float(dsp.statistical_moments(g)[3])) < 0.2


def test_moments_match_scipy(rng):
    from scipy import stats
    x = rng.gamma(2.0, size=(3, 999))
    mean, std, skew, kurt = dsp.statistical_moments(x)
    np.testing.assert_allclose(skew, stats.skew(x, axis=1), rtol=1e-10)
    np.testing.assert_allclose(kurt, stats.kurtosis(x, axis=1), rtol=1e-10)
    np.testing.assert_allclose(std, x.std(axis=1), rtol=1e-12)


def test_hjorth_constant():
    h = dsp.hjorth(np.full(50, 2.0))
    assert (float(h.activity), float(h.mobility), float(h.complexity)) == (0.0, 0.0, 0.0)


def test_hjorth_sine_closed_form():
    fs, f = 128.0, 7.0
    h = dsp.hjorth(tone(f, fs, 40))
    w = 2 * np.pi * f
    assert float(h.mobility) == pytest.approx(2 * np.sin(w / (2 * fs)), rel=0.01)
    assert float(h.activity) == pytest.approx(0.5, rel=0.01)
    assert float(h.complexity) == pytest.approx(1.0, rel=0.01)


def test_hjorth_white_noise(rng):
    h = dsp.hjorth(rng.standard_normal(100_000))
    assert float(h.mobility) == pytest.approx(np.sqrt(2), rel=0.05)
    assert float(h.complexity) == pytest.approx(np.sqrt(1.5), rel=0.05)


# -- wavelets -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1280, 1000, 257])
def test_dwt_matches_pywt(rng, n):
    x = rng.standard_normal(n)
    a, details = dsp.dwt(x, 4)
    ref = pywt.wavedec(x, "db4", mode="periodization", level=4)
    np.testing.assert_allclose(a, ref[0], atol=1e-12)
    for ours, theirs in zip(details, ref[:0:-1]):
        np.testing.assert_allclose(ours, theirs, atol=1e-12)


def test_dwt_parseval(rng):
    x = rng.standard_normal((3, 1280))
    e = dsp.dwt_energies(x)
    total = e.energies.sum(axis=-1) + e.approx
    np.testing.assert_allclose(total, np.sum(x ** 2, axis=-1), rtol=1e-6)


def test_dwt_alternating_and_zero():
    e = dsp.dwt_energies(np.tile([1.0, -1.0], 640))
    assert e.energies[0] > 0.5 * e.energies.sum()
    assert not np.any(dsp.dwt_energies(np.zeros(1280)).energies)


# -- analytic signal --------------------------------------------------------------

def test_analytic_matches_scipy(rng):
    x = rng.standard_normal((2, 1001))
    np.testing.assert_allclose(dsp.analytic_signal(x), sps.hilbert(x, axis=-1), atol=1e-12)


def test_analytic_identity():
    fs, f = 256.0, 6.0
    t = np.arange(2560) / fs
    x = np.cos(2 * np.pi * f * t)
    a = dsp.analytic_signal(x)
    assert np.max(np.abs(a.real - x)) <= 1e-9
    mid = slice(128, -128)
    np.testing.assert_allclose(np.abs(a[mid]), 1.0, atol=0.02)
    assert not np.any(dsp.analytic_signal(np.zeros(64)))


def test_phase_properties():
    fs, f = 256.0, 6.0
    t = np.arange(2560) / fs
    c, s = np.cos(2 * np.pi * f * t), np.sin(2 * np.pi * f * t)
    ph = dsp.instantaneous_phase(c)
    assert np.all(ph > -np.pi) and np.all(ph <= np.pi)
    mid = slice(128, -128)
    slope = np.polyfit(t[mid], np.unwrap(ph)[mid], 1)[0]
    assert slope == pytest.approx(2 * np.pi * f, rel=0.01)
    lag = np.angle(np.exp(1j * (ph - dsp.instantaneous_phase(s))))[mid]
    np.testing.assert_allclose(lag, np.pi / 2, atol=0.01)
    np.testing.assert_allclose(dsp.instantaneous_phase(3 * c), ph, atol=1e-12)
