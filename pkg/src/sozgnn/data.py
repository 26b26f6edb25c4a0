"""Recordings, fixed-length windows, cohort I/O and cross-validation splits."""
from __future__ import annotations

import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAYLOAD_DTYPE = "<f4"


class DataError(ValueError):
    """Invalid recording, manifest or split request."""


@dataclass(frozen=True, eq=False)
class Recording:
    patient_id: str
    seizure_id: str
    fs: int
    channels: tuple[str, ...]
    samples: np.ndarray  # channels x time, float32
    soz_mask: np.ndarray  # bool per channel
    outcome: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        soz = np.asarray(self.soz_mask, dtype=bool)
        object.__setattr__(self, "channels", tuple(self.channels))
        if samples.ndim != 2:
            raise DataError("samples must be a channels x time matrix")
        if not (samples.shape[0] == len(self.channels) == soz.shape[0]):
            raise DataError(
                f"shape mismatch: {samples.shape[0]} sample rows, "
                f"{len(self.channels)} channel names, {soz.shape[0]} soz flags"
            )
        if len(set(self.channels)) != len(self.channels):
            raise DataError("duplicate channel names")
        if int(self.fs) <= 0:
            raise DataError("fs must be positive")
        if self.outcome not in (0, 1):
            raise DataError("outcome must be 0 or 1")
        if not np.all(np.isfinite(samples)):
            raise DataError("samples contain non-finite values")
        samples.setflags(write=False)
        soz.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "soz_mask", soz)
        object.__setattr__(self, "fs", int(self.fs))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.samples.shape[1] / self.fs

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.patient_id == other.patient_id
            and self.seizure_id == other.seizure_id
            and self.fs == other.fs
            and self.channels == other.channels
            and self.outcome == other.outcome
            and np.array_equal(self.soz_mask, other.soz_mask)
            and self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
        )


@dataclass(frozen=True)
class WindowSpec:
    length_s: float = 10.0
    overlap_s: float = 0.0

    def __post_init__(self):
        if self.length_s <= 0 or not (0 <= self.overlap_s < self.length_s):
            raise DataError("window spec requires 0 <= overlap_s < length_s")

    def n_samples(self, fs: int) -> int:
        return int(round(self.length_s * fs))


@dataclass(frozen=True, eq=False)
class LabeledWindow:
    patient_id: str
    seizure_id: str
    window_index: int
    fs: int
    data: np.ndarray  # channels x T_w
    soz_mask: np.ndarray
    outcome: int
    channels: tuple[str, ...] = ()

    @property
    def source(self) -> tuple[str, str, int]:
        return (self.patient_id, self.seizure_id, self.window_index)


def segment_windows(rec: Recording, spec: WindowSpec = WindowSpec()) -> list[LabeledWindow]:
    """Cut a recording into fixed-length windows; a trailing partial window is dropped."""
    n_win = spec.n_samples(rec.fs)
    hop = n_win - int(round(spec.overlap_s * rec.fs))
    total = rec.samples.shape[1]
    if total < n_win:
        raise DataError(
            f"recording {rec.patient_id}/{rec.seizure_id} is {rec.duration_s:.2f} s, "
            f"shorter than one {spec.length_s} s window"
        )
    out = []
    for k, start in enumerate(range(0, total - n_win + 1, hop)):
        out.append(
            LabeledWindow(
                patient_id=rec.patient_id,
                seizure_id=rec.seizure_id,
                window_index=k,
                fs=rec.fs,
                data=rec.samples[:, start:start + n_win],
                soz_mask=rec.soz_mask,
                outcome=rec.outcome,
                channels=rec.channels,
            )
        )
    return out


class Dataset:
    """Windows in canonical (patient, seizure, window) order with lookup indices."""

    def __init__(self, windows: Iterable[LabeledWindow]):
        self.windows: list[LabeledWindow] = sorted(windows, key=lambda w: w.source)
        sources = [w.source for w in self.windows]
        if len(set(sources)) != len(sources):
            raise DataError("duplicate window sources in dataset")
        self.by_patient: dict[str, list[int]] = defaultdict(list)
        self.by_seizure: dict[tuple[str, str], list[int]] = defaultdict(list)
        outcomes: dict[str, int] = {}
        for i, w in enumerate(self.windows):
            self.by_patient[w.patient_id].append(i)
            self.by_seizure[(w.patient_id, w.seizure_id)].append(i)
            if outcomes.setdefault(w.patient_id, w.outcome) != w.outcome:
                raise DataError(f"patient {w.patient_id} has inconsistent outcome labels")
        self.by_patient = dict(self.by_patient)
        self.by_seizure = dict(self.by_seizure)

    @classmethod
    def from_recordings(cls, recordings: Iterable[Recording], spec: WindowSpec = WindowSpec()) -> "Dataset":
        windows: list[LabeledWindow] = []
        for rec in recordings:
            windows.extend(segment_windows(rec, spec))
        return cls(windows)

    def __len__(self):
        return len(self.windows)

    def __getitem__(self, i):
        return self.windows[i]

    @property
    def patients(self) -> list[str]:
        return sorted(self.by_patient)


# -- on-disk format -----------------------------------------------------------

def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def save_recording(rec: Recording, path: str | os.PathLike) -> Path:
    """Write ``<path>`` (JSON manifest) and a sibling ``.f32`` payload."""
    path = Path(path)
    payload_name = path.with_suffix(".f32").name
    manifest = {
        "patient_id": rec.patient_id,
        "seizure_id": rec.seizure_id,
        "fs": rec.fs,
        "channel_names": list(rec.channels),
        "soz_mask": [int(v) for v in rec.soz_mask],
        "outcome": int(rec.outcome),
        "n_samples": int(rec.samples.shape[1]),
        "payload_file": payload_name,
        "dtype": "f32le",
        "layout": "channel-major",
    }
    _atomic_write_bytes(path.parent / payload_name, np.ascontiguousarray(rec.samples, dtype=PAYLOAD_DTYPE).tobytes())
    _atomic_write_bytes(path, (json.dumps(manifest, indent=2) + "\n").encode())
    return path


def load_recording(path: str | os.PathLike) -> Recording:
    path = Path(path)
    manifest = json.loads(path.read_text())
    if manifest.get("dtype", "f32le") != "f32le" or manifest.get("layout", "channel-major") != "channel-major":
        raise DataError(f"{path}: unsupported dtype/layout")
    names = manifest["channel_names"]
    raw = np.fromfile(path.parent / manifest["payload_file"], dtype=PAYLOAD_DTYPE)
    n_ch = len(names)
    n_samples = manifest.get("n_samples")
    if n_samples is None:
        if n_ch == 0 or raw.size % n_ch:
            raise DataError(f"{path}: payload of {raw.size} values does not fit {n_ch} channels")
        n_samples = raw.size // n_ch
    if raw.size != n_ch * n_samples:
        raise DataError(
            f"{path}: manifest declares {n_ch} x {n_samples} values, payload has {raw.size}"
        )
    return Recording(
        patient_id=manifest["patient_id"],
        seizure_id=manifest["seizure_id"],
        fs=manifest["fs"],
        channels=tuple(names),
        samples=raw.reshape(n_ch, n_samples).astype(np.float32),
        soz_mask=np.asarray(manifest["soz_mask"], dtype=bool),
        outcome=int(manifest["outcome"]),
    )


def save_cohort(recordings: Iterable[Recording], directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for rec in recordings:
        name = f"{rec.patient_id}_{rec.seizure_id}.json"
        save_recording(rec, directory / name)
        names.append(name)
    index = {"recordings": names}
    _atomic_write_bytes(directory / "cohort.json", (json.dumps(index, indent=2) + "\n").encode())
    return directory


def cohort_manifests(directory: str | os.PathLike) -> list[Path]:
    directory = Path(directory)
    index = json.loads((directory / "cohort.json").read_text())
    return [directory / name for name in index["recordings"]]


def iter_cohort(directory: str | os.PathLike):
    for manifest in cohort_manifests(directory):
        yield load_recording(manifest)


# -- splits -------------------------------------------------------------------

def kfold_split(
    ds: Dataset | Sequence, k: int = 10, train_frac: float = 0.6, seed: int = 0
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Window-level rotating splits: each fold holds out a contiguous slice of a
    seeded permutation, half for validation and half for test.

    With k=10 and train_frac=0.6 every fold is 60/20/20, and the test slices of
    consecutive folds overlap by half so every window is tested exactly twice.
    """
    n = len(ds)
    if k < 2:
        raise DataError("k must be >= 2")
    if n == 0:
        raise DataError("empty dataset")
    if k > n:
        raise DataError(f"k={k} exceeds the number of windows ({n})")
    if not 0 < train_frac < 1:
        raise DataError("train_frac must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * (1 - train_frac) / 2))
    n_val = int(round(n * (1 - train_frac))) - n_test
    folds = []
    for f in range(k):
        rolled = np.roll(order, -int(round(f * n / k)))
        test = np.sort(rolled[:n_test])
        val = np.sort(rolled[n_test:n_test + n_val])
        train = np.sort(rolled[n_test + n_val:])
        folds.append((train, val, test))
    return folds


def leave_one_patient_out(ds: Dataset) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """One (held-out patient, train indices, test indices) triple per patient."""
    patients = ds.patients
    if len(patients) < 2:
        raise DataError("leave-one-patient-out needs at least 2 patients")
    out = []
    for p in patients:
        test = np.asarray(ds.by_patient[p])
        train = np.asarray([i for q in patients if q != p for i in ds.by_patient[q]])
        out.append((p, np.sort(train), np.sort(test)))
    return out
