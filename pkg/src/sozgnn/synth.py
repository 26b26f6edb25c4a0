"""Synthetic labeled cohorts.

Every channel carries 1/f background noise, mixed with its neighbour on the same
electrode shaft. Seizure-onset channels additionally share a band-limited
oscillation whose phase is jittered per channel; the jitter is smaller (phase
locking stronger) for patients without seizure freedom (outcome 0).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from .data import Dataset, Recording, WindowSpec


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 20
    n_seizure_free: int = 10
    channels_min: int = 24
    channels_max: int = 40
    soz_fraction: float = 0.1
    seizures_min: int = 2
    seizures_max: int = 3
    duration_s: float = 300.0
    fs: int = 512
    class0_plv_target: float = 0.92
    class1_plv_target: float = 0.4
    plv_spread: float = 0.08
    burst_band_hz: tuple[float, float] = (4.0, 12.0)
    burst_amplitude: float = 2.0
    noise_exponent: float = 1.0
    neighbor_mixing: float = 0.5
    shaft_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.burst_band_hz, list):
            object.__setattr__(self, "burst_band_hz", tuple(self.burst_band_hz))
        self.validate()

    def validate(self):
        if self.n_patients < 1 or not 0 <= self.n_seizure_free <= self.n_patients:
            raise SynthError("n_seizure_free must lie in [0, n_patients] with n_patients >= 1")
        if self.channels_min < 2 or self.channels_max < self.channels_min:
            raise SynthError("need 2 <= channels_min <= channels_max")
        if not 0 < self.soz_fraction < 0.5:
            raise SynthError("soz_fraction must be in (0, 0.5)")
        if self.seizures_min < 1 or self.seizures_max < self.seizures_min:
            raise SynthError("need 1 <= seizures_min <= seizures_max")
        if self.duration_s <= 0 or self.fs <= 0:
            raise SynthError("duration_s and fs must be positive")
        for name in ("class0_plv_target", "class1_plv_target"):
            if not 0 < getattr(self, name) < 1:
                raise SynthError(f"{name} must be in (0, 1)")
        if not self.class0_plv_target > self.class1_plv_target:
            raise SynthError("class0_plv_target must exceed class1_plv_target")
        lo, hi = self.burst_band_hz
        if not 0 < lo < hi < self.fs / 2:
            raise SynthError("burst_band_hz must lie inside (0, fs/2)")
        if self.plv_spread < 0:
            raise SynthError("plv_spread must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["burst_band_hz"] = list(self.burst_band_hz)
        return d


def pink_noise(n_samples: int, exponent: float = 1.0, seed=None, shape=()) -> np.ndarray:
    """Zero-mean noise with power spectral density proportional to 1/f**exponent.

    ``shape`` prepends leading dimensions (e.g. channels). Output has unit std.
    """
    if n_samples < 2:
        raise SynthError("n_samples must be > 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    white = rng.standard_normal(tuple(shape) + (n_samples,))
    spec = np.fft.rfft(white, axis=-1)
    f = np.fft.rfftfreq(n_samples)
    gain = np.zeros_like(f)
    gain[1:] = f[1:] ** (-exponent / 2.0)
    x = np.fft.irfft(spec * gain, n=n_samples, axis=-1)
    x -= x.mean(axis=-1, keepdims=True)
    return x / x.std(axis=-1, keepdims=True)


def jitter_sigma(plv_target: float) -> float:
    """Per-channel Gaussian phase jitter giving the requested pairwise PLV.

    Two channels with independent jitter of std s differ by a Gaussian phase of
    variance 2 s**2, and E[exp(i d)] = exp(-var/2) = exp(-s**2).
    """
    return float(np.sqrt(-np.log(plv_target)))


def _smooth_gaussian(rng, n_rows, n, fs, cutoff_hz=2.0):
    sos = sps.butter(2, cutoff_hz, fs=fs, output="sos")
    raw = sps.sosfiltfilt(sos, rng.standard_normal((n_rows, n)), axis=-1)
    return raw / raw.std(axis=-1, keepdims=True)


def _oscillation_source(rng, n, fs, band):
    sos = sps.butter(4, band, btype="bandpass", fs=fs, output="sos")
    narrow = sps.sosfiltfilt(sos, rng.standard_normal(n))
    analytic = sps.hilbert(narrow)
    envelope = np.abs(analytic)
    return np.angle(analytic), envelope / envelope.mean()


@dataclass
class PatientPlan:
    patient_id: str
    outcome: int
    n_channels: int
    soz_channels: np.ndarray
    plv_target: float
    n_seizures: int
    seed_seq: np.random.SeedSequence = field(repr=False)


def plan_patients(cfg: SynthConfig) -> list[PatientPlan]:
    root = np.random.SeedSequence(cfg.seed)
    label_rng = np.random.default_rng(root.spawn(1)[0])
    free = set(label_rng.permutation(cfg.n_patients)[: cfg.n_seizure_free].tolist())
    plans = []
    for p, ss in enumerate(root.spawn(cfg.n_patients + 1)[1:]):
        rng = np.random.default_rng(ss.spawn(1)[0])
        outcome = int(p in free)
        n_ch = int(rng.integers(cfg.channels_min, cfg.channels_max + 1))
        n_soz = min(max(2, int(round(cfg.soz_fraction * n_ch))), n_ch - 1)
        soz = np.sort(rng.choice(n_ch, size=n_soz, replace=False))
        target = cfg.class1_plv_target if outcome else cfg.class0_plv_target
        target = float(np.clip(target + rng.uniform(-cfg.plv_spread, cfg.plv_spread), 0.05, 0.99))
        plans.append(PatientPlan(
            patient_id=f"P{p:02d}",
            outcome=outcome,
            n_channels=n_ch,
            soz_channels=soz,
            plv_target=target,
            n_seizures=int(rng.integers(cfg.seizures_min, cfg.seizures_max + 1)),
            seed_seq=ss,
        ))
    return plans


def generate_recording(cfg: SynthConfig, plan: PatientPlan, seizure: int) -> Recording:
    rng = np.random.default_rng(plan.seed_seq.spawn(seizure + 2)[-1])
    n = int(round(cfg.duration_s * cfg.fs))
    n_ch = plan.n_channels
    noise = pink_noise(n, cfg.noise_exponent, rng, shape=(n_ch,))
    mixed = noise.copy()
    for i in range(1, n_ch):
        if i % cfg.shaft_size:
            mixed[i] += cfg.neighbor_mixing * noise[i - 1]
    mixed /= mixed.std(axis=-1, keepdims=True)

    phase, envelope = _oscillation_source(rng, n, cfg.fs, cfg.burst_band_hz)
    sigma = jitter_sigma(plan.plv_target)
    jitter = sigma * _smooth_gaussian(rng, plan.soz_channels.size, n, cfg.fs)
    burst = cfg.burst_amplitude * envelope * np.cos(phase[None, :] + jitter)
    mixed[plan.soz_channels] += burst

    soz_mask = np.zeros(n_ch, dtype=bool)
    soz_mask[plan.soz_channels] = True
    return Recording(
        patient_id=plan.patient_id,
        seizure_id=f"S{seizure}",
        fs=cfg.fs,
        channels=tuple(f"{chr(ord('A') + i // cfg.shaft_size)}{i % cfg.shaft_size + 1}" for i in range(n_ch)),
        samples=mixed.astype(np.float32),
        soz_mask=soz_mask,
        outcome=plan.outcome,
    )


def iter_recordings(cfg: SynthConfig):
    """Yield recordings patient by patient without holding the cohort in memory."""
    for plan in plan_patients(cfg):
        for s in range(plan.n_seizures):
            yield generate_recording(cfg, plan, s)


def generate_cohort(cfg: SynthConfig, spec: WindowSpec = WindowSpec()) -> Dataset:
    return Dataset.from_recordings(iter_recordings(cfg), spec)
