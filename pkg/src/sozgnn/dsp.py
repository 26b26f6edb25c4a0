"""Signal-processing kernels for per-channel features.

Every function accepts a 1-D signal or a (channels, time) matrix and works along
the last axis, so a whole window can be processed in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

BANDS = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 64.0),
}

# Daubechies, 4 vanishing moments (8 taps), reconstruction low-pass orientation.
DB4 = np.array([
    0.23037781330885523, 0.7148465705525415, 0.6308807679295904, -0.02798376941698385,
    -0.18703481171888114, 0.030841381835986965, 0.032883011666982945, -0.010597401784997278,
])


class SignalError(ValueError):
    pass


@dataclass(frozen=True)
class PSDResult:
    freqs: np.ndarray
    power: np.ndarray  # (..., n_bins)


@dataclass(frozen=True)
class BandPowers:
    delta: float
    theta: float
    alpha: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class Hjorth:
    activity: np.ndarray
    mobility: np.ndarray
    complexity: np.ndarray


@dataclass(frozen=True)
class WaveletEnergies:
    energies: np.ndarray  # (..., 4), finest level first
    approx: np.ndarray  # energy left in the final approximation

    @property
    def e1(self):
        return self.energies[..., 0]


def _as_float(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def antialias_fir(factor: int, order: int = 64) -> np.ndarray:
    """Hamming-windowed low-pass with cutoff at 80% of the output Nyquist."""
    return sps.firwin(order + 1, 0.8 / factor, window="hamming")


def downsample(x, fs_in: int, fs_out: int, order: int = 64) -> np.ndarray:
    if fs_out <= 0 or fs_in % fs_out:
        raise SignalError(f"cannot decimate {fs_in} Hz to {fs_out} Hz by an integer factor")
    factor = fs_in // fs_out
    x = _as_float(x)
    if factor == 1:
        return x.copy()
    taps = antialias_fir(factor, order)
    half = order // 2
    if x.shape[-1] <= half:
        raise SignalError("signal shorter than the anti-alias filter")
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    padded = np.pad(x, pad, mode="reflect")
    # centred (zero-delay) filtering, evaluated only at the kept samples;
    # the taps are symmetric so correlation equals convolution
    n_out = x.shape[-1] // factor
    frames = np.lib.stride_tricks.sliding_window_view(padded, order + 1, axis=-1)
    return frames[..., : n_out * factor : factor, :] @ taps


def welch_psd(x, fs: float, nperseg: int = 256, noverlap: int = 128) -> PSDResult:
    """Hann-windowed, segment-mean-removed, averaged one-sided periodogram (density)."""
    x = _as_float(x)
    n = x.shape[-1]
    if n < nperseg:
        raise SignalError(f"signal of {n} samples shorter than one {nperseg}-sample segment")
    step = nperseg - noverlap
    starts = np.arange(0, n - nperseg + 1, step)
    idx = starts[:, None] + np.arange(nperseg)[None, :]
    segs = x[..., idx]  # (..., n_seg, nperseg)
    segs = segs - segs.mean(axis=-1, keepdims=True)
    win = sps.get_window("hann", nperseg)
    spec = np.fft.rfft(segs * win, axis=-1)
    power = (spec.real ** 2 + spec.imag ** 2) / (fs * np.sum(win ** 2))
    if nperseg % 2 == 0:
        power[..., 1:-1] *= 2
    else:
        power[..., 1:] *= 2
    return PSDResult(freqs=np.fft.rfftfreq(nperseg, 1.0 / fs), power=power.mean(axis=-2))


def band_power(psd: PSDResult, band: tuple[float, float], n_samples: int) -> np.ndarray:
    """Sum of PSD bins in ``[lo, hi)`` divided by the window length in samples."""
    lo, hi = band
    nyquist = psd.freqs[-1]
    if lo < 0 or hi <= lo or hi > nyquist + 1e-9:
        raise SignalError(f"band {band} outside [0, {nyquist}] Hz")
    sel = (psd.freqs >= lo) & (psd.freqs < hi)
    if not sel.any():
        raise SignalError(f"band {band} contains no frequency bins")
    return psd.power[..., sel].sum(axis=-1) / n_samples


def band_powers(psd: PSDResult, n_samples: int) -> BandPowers:
    return BandPowers(**{name: band_power(psd, b, n_samples) for name, b in BANDS.items()})


def statistical_moments(x):
    """Population mean, std, skewness and excess kurtosis.

    A zero-variance signal gets skewness = kurtosis = 0.
    """
    x = _as_float(x)
    if x.shape[-1] < 2:
        raise SignalError("moments need at least 2 samples")
    mean = x.mean(axis=-1)
    centred = x - mean[..., None]
    var = np.mean(centred ** 2, axis=-1)
    std = np.sqrt(var)
    flat = var <= np.finfo(float).tiny
    safe = np.where(flat, 1.0, std)
    z = centred / safe[..., None]
    skew = np.where(flat, 0.0, np.mean(z ** 3, axis=-1))
    kurt = np.where(flat, 0.0, np.mean(z ** 4, axis=-1) - 3.0)
    return mean, np.where(flat, 0.0, std), skew, kurt


def hjorth(x) -> Hjorth:
    """Hjorth activity, mobility and complexity. Flat signals map to (0, 0, 0)."""
    x = _as_float(x)
    if x.shape[-1] < 3:
        raise SignalError("Hjorth parameters need at least 3 samples")
    dx = np.diff(x, axis=-1)
    ddx = np.diff(dx, axis=-1)
    v0, v1, v2 = x.var(axis=-1), dx.var(axis=-1), ddx.var(axis=-1)
    tiny = np.finfo(float).tiny
    ok0 = v0 > tiny
    ok1 = ok0 & (v1 > tiny)
    mobility = np.where(ok0, np.sqrt(v1 / np.where(ok0, v0, 1.0)), 0.0)
    mob_d = np.where(ok1, np.sqrt(v2 / np.where(ok1, v1, 1.0)), 0.0)
    complexity = np.where(ok1, mob_d / np.where(ok1, mobility, 1.0), 0.0)
    return Hjorth(activity=np.where(ok0, v0, 0.0), mobility=mobility, complexity=complexity)


def _dwt_step(a: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    n = a.shape[-1]
    if n % 2:
        a = np.concatenate([a, a[..., -1:]], axis=-1)
        n += 1
    L = lo.shape[0]
    idx = (2 * np.arange(n // 2)[:, None] - np.arange(L)[None, :] + L // 2) % n
    blocks = a[..., idx]  # (..., n/2, L)
    return blocks @ lo, blocks @ hi


def dwt(x, levels: int = 4, filt: np.ndarray = DB4):
    """Periodized orthogonal DWT. Returns (approximation, [d1, ..., d_levels])."""
    x = _as_float(x)
    if x.shape[-1] < 2 ** levels:
        raise SignalError(f"signal too short for a {levels}-level decomposition")
    dec_lo = filt[::-1]
    dec_hi = np.array([(-1) ** (k + 1) * c for k, c in enumerate(filt)])
    a = x
    details = []
    for _ in range(levels):
        a, d = _dwt_step(a, dec_lo, dec_hi)
        details.append(d)
    return a, details


def dwt_energies(x, levels: int = 4) -> WaveletEnergies:
    approx, details = dwt(x, levels)
    energies = np.stack([np.sum(d ** 2, axis=-1) for d in details], axis=-1)
    return WaveletEnergies(energies=energies, approx=np.sum(approx ** 2, axis=-1))


def analytic_signal(x) -> np.ndarray:
    x = _as_float(x)
    n = x.shape[-1]
    if n < 4:
        raise SignalError("analytic signal needs at least 4 samples")
    spec = np.fft.fft(x, axis=-1)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spec * h, axis=-1)


def instantaneous_phase(x) -> np.ndarray:
    """Phase of the analytic signal, in (-pi, pi]."""
    phase = np.angle(analytic_signal(x))
    phase[phase <= -np.pi] += 2 * np.pi
    return phase
