"""Data pipeline: recordings -> fixed-length labeled samples.

Stages: optional head-crop, non-overlapping windowing (trailing
remainder discarded), label encoding, seeded shuffle + train/validation
split, and per-channel z-score standardization fitted on the training
split only. Every stage is deterministic given its inputs and seed.

Also hosts the synthetic signal generators the test suite and the
example configs are built on, plus the on-disk formats: recording CSVs
(header ``t,ch0[,ch1,...]``), manifest CSVs (``file,label``), and the
dataset bundle directory written by ``prepare``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DataError

BUNDLE_VERSION = "1"

Target = Union[int, float, str]


@dataclass
class RawRecording:
    """One sensor recording: series [channels, length] plus its label."""

    series: np.ndarray
    label: Union[str, float]
    source_id: str = ""

    def __post_init__(self):
        self.series = np.atleast_2d(np.asarray(self.series, dtype=np.float64))
        if self.series.ndim != 2 or self.series.shape[1] < 1:
            raise DataError(f"recording series must be [channels, length], "
                            f"got shape {self.series.shape}")

    @property
    def channels(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]


@dataclass
class Sample:
    """A fixed-length window with its target (class index or scalar)."""

    window: np.ndarray
    target: Target


@dataclass
class SplitDataset:
    train: list
    validation: list
    seed: int
    train_fraction: float


class LabelMap:
    """Ordered bijection class-name <-> index; index 0 is the first
    (positive) class."""

    def __init__(self, classes: Sequence[str]):
        classes = [str(c) for c in classes]
        if len(set(classes)) != len(classes):
            raise DataError(f"duplicate class names: {classes}")
        if not classes:
            raise DataError("label map needs at least one class")
        self.classes = list(classes)
        self._index = {name: i for i, name in enumerate(self.classes)}

    def __len__(self) -> int:
        return len(self.classes)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelMap) and self.classes == other.classes

    def index(self, name: str) -> int:
        try:
            return self._index[str(name)]
        except KeyError:
            raise DataError(f"unknown label {name!r}; known classes: {self.classes}") from None

    def name(self, index: int) -> str:
        return self.classes[index]

    def to_dict(self) -> dict:
        return {"classes": list(self.classes)}

    @classmethod
    def from_dict(cls, obj: dict) -> "LabelMap":
        return cls(obj["classes"])

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "LabelMap":
        """First-appearance order; put the intended positive class first
        in the manifest (or pin an explicit class list in the config)."""
        seen: list[str] = []
        for label in labels:
            label = str(label)
            if label not in seen:
                seen.append(label)
        return cls(seen)


@dataclass
class ChannelStats:
    """Per-channel mean/std fitted on the training split.

    A zero-variance channel is only mean-shifted and flagged so the
    degenerate scaling never silently divides by zero.
    """

    mean: np.ndarray
    std: np.ndarray
    zero_std: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "zero_std": [bool(z) for z in self.zero_std]}

    @classmethod
    def from_dict(cls, obj: dict) -> "ChannelStats":
        return cls(mean=np.asarray(obj["mean"], dtype=np.float64),
                   std=np.asarray(obj["std"], dtype=np.float64),
                   zero_std=[bool(z) for z in obj["zero_std"]])


def crop_head(recording: RawRecording, n: int) -> RawRecording:
    """Truncate a recording to its first n measurements."""
    if n < 1 or n > recording.length:
        raise DataError(f"cannot crop to first {n} of {recording.length} measurements")
    return RawRecording(series=recording.series[:, :n].copy(),
                        label=recording.label, source_id=recording.source_id)


def segment(recording: RawRecording, window_len: int) -> list:
    """Cut consecutive non-overlapping windows of exactly window_len.

    The trailing remainder shorter than window_len is discarded; each
    window inherits the recording's label.
    """
    if window_len < 1 or window_len > recording.length:
        raise DataError(f"window length {window_len} does not fit recording "
                        f"{recording.source_id!r} of length {recording.length}")
    count = recording.length // window_len
    return [Sample(window=recording.series[:, i * window_len:(i + 1) * window_len].copy(),
                   target=recording.label)
            for i in range(count)]


def encode_targets(samples: list, label_map: LabelMap) -> list:
    return [Sample(window=s.window, target=label_map.index(s.target)) for s in samples]


def fit_stats(samples: list) -> ChannelStats:
    """Per-channel mean/std over every value of the given (training)
    samples. Never hand this the validation split."""
    if len(samples) < 2:
        raise DataError(f"need >= 2 samples to fit standardization stats, got {len(samples)}")
    stacked = np.stack([s.window for s in samples])  # [n, channels, window]
    mean = stacked.mean(axis=(0, 2))
    std = stacked.std(axis=(0, 2))
    zero = std == 0.0
    return ChannelStats(mean=mean, std=std, zero_std=list(zero))


def apply_stats(samples: list, stats: ChannelStats) -> list:
    divisor = np.where(np.asarray(stats.zero_std), 1.0, stats.std)
    return [Sample(window=(s.window - stats.mean[:, None]) / divisor[:, None],
                   target=s.target) for s in samples]


def standardize(samples: list, stats: Optional[ChannelStats] = None):
    """Z-score samples; fit stats when none are given. Returns
    (samples, stats) so the stats can be persisted for inference."""
    if stats is None:
        stats = fit_stats(samples)
    return apply_stats(samples, stats), stats


def invert_stats(window: np.ndarray, stats: ChannelStats) -> np.ndarray:
    divisor = np.where(np.asarray(stats.zero_std), 1.0, stats.std)
    return window * divisor[:, None] + stats.mean[:, None]


def split(samples: list, train_fraction: float, seed: int) -> SplitDataset:
    """Seeded uniform shuffle, then prefix/suffix split.

    The training side gets round(train_fraction * n) samples
    (half-up); both sides come out in shuffled order.
    """
    n = len(samples)
    if n < 2:
        raise DataError(f"need >= 2 samples to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise DataError(f"fraction {train_fraction} leaves an empty side for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return SplitDataset(
        train=[samples[i] for i in order[:n_train]],
        validation=[samples[i] for i in order[n_train:]],
        seed=seed,
        train_fraction=train_fraction,
    )


# ---------------------------------------------------------------------------
# Synthetic signal generators (test fixtures and example data)
# ---------------------------------------------------------------------------

@dataclass
class SyntheticClass:
    name: str
    frequency: float
    amplitude: float
    noise_std: float
    count: int
    length: int


@dataclass
class SyntheticSpec:
    classes: list
    sample_rate: float
    seed: int = 0
    random_phase: bool = False


def generate_synthetic(spec: SyntheticSpec) -> list:
    """Sinusoid-per-class recordings: A * sin(2 pi f t [+ phase]) plus
    Gaussian noise. Deterministic under ``spec.seed``."""
    if spec.sample_rate <= 0:
        raise DataError(f"sample rate must be positive, got {spec.sample_rate}")
    rng = np.random.default_rng(spec.seed)
    recordings = []
    for cls in spec.classes:
        if cls.frequency <= 0 or cls.length <= 0 or cls.count <= 0:
            raise DataError(f"class {cls.name!r} needs positive frequency/length/count")
        if cls.noise_std < 0:
            raise DataError(f"class {cls.name!r} has negative noise std")
        t = np.arange(cls.length) / spec.sample_rate
        for i in range(cls.count):
            phase = rng.uniform(0.0, 2.0 * np.pi) if spec.random_phase else 0.0
            signal = cls.amplitude * np.sin(2.0 * np.pi * cls.frequency * t + phase)
            if cls.noise_std > 0:
                signal = signal + rng.normal(0.0, cls.noise_std, size=cls.length)
            recordings.append(RawRecording(series=signal[None, :], label=cls.name,
                                           source_id=f"{cls.name}-{i}"))
    return recordings


def generate_degradation(count: int, length: int, sample_rate: float,
                         frequency: float, noise_std: float, seed: int,
                         amp_range: tuple = (0.2, 1.2)) -> list:
    """Monotone-degradation fixture for regression: the scalar target in
    [0, 1] drives the oscillation amplitude linearly."""
    if count < 2 or length < 1 or frequency <= 0 or sample_rate <= 0:
        raise DataError("degradation fixture needs count >= 2 and positive "
                        "length/frequency/sample rate")
    rng = np.random.default_rng(seed)
    lo, hi = amp_range
    t = np.arange(length) / sample_rate
    recordings = []
    for i in range(count):
        target = float(rng.uniform(0.0, 1.0))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amplitude = lo + (hi - lo) * target
        signal = amplitude * np.sin(2.0 * np.pi * frequency * t + phase)
        signal = signal + rng.normal(0.0, noise_std, size=length)
        recordings.append(RawRecording(series=signal[None, :], label=target,
                                       source_id=f"degradation-{i}"))
    return recordings


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------

def write_recording_csv(path, series: np.ndarray, sample_rate: float = 1.0) -> None:
    """Write a recording as ``t,ch0[,ch1,...]``, one row per time step."""
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    frame = pd.DataFrame({"t": np.arange(series.shape[1]) / sample_rate})
    for c in range(series.shape[0]):
        frame[f"ch{c}"] = series[c]
    frame.to_csv(path, index=False, float_format="%.10g")


def read_recording_csv(path) -> np.ndarray:
    """Read a recording CSV back into a [channels, length] array."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"recording file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"cannot parse recording {path}: {exc}") from exc
    columns = list(frame.columns)
    if not columns or columns[0] != "t" or len(columns) < 2:
        raise DataError(f"recording {path} must start with header 't,ch0[,ch1,...]', "
                        f"got {columns}")
    channels = frame[columns[1:]].to_numpy(dtype=np.float64).T
    if np.isnan(channels).any():
        raise DataError(f"recording {path} contains missing values")
    return np.ascontiguousarray(channels)


def read_manifest(path) -> list:
    """Read ``file,label`` rows; file paths resolve relative to the
    manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["file", "label"]:
            raise DataError(f"manifest {path} must have header 'file,label', "
                            f"got {reader.fieldnames}")
        rows = [(row["file"], row["label"]) for row in reader]
    if not rows:
        raise DataError(f"manifest {path} lists no recordings")
    return [(str(path.parent / f), label) for f, label in rows]


def load_recordings(manifest_path, task: str = "classification") -> list:
    """Load every manifest row; all recordings must agree on channel
    count. Regression manifests carry decimal targets as labels.

    Bad rows are collected and reported together, one line per row."""
    rows = read_manifest(manifest_path)
    recordings = []
    row_errors = []
    for file_path, label in rows:
        try:
            series = read_recording_csv(file_path)
            if task == "regression":
                try:
                    label = float(label)
                except ValueError:
                    raise DataError(f"regression target {label!r} for {file_path} "
                                    f"is not a number") from None
            recordings.append(RawRecording(series=series, label=label,
                                           source_id=str(file_path)))
        except DataError as exc:
            row_errors.append(str(exc))
    if row_errors:
        detail = "\n  ".join(row_errors)
        raise DataError(f"{len(row_errors)} manifest row(s) failed to load:\n  {detail}")
    channel_counts = {r.channels for r in recordings}
    if len(channel_counts) > 1:
        raise DataError(f"inconsistent channel counts across recordings: "
                        f"{sorted(channel_counts)}")
    return recordings


def prepare_dataset(recordings: list, window_len: int, train_fraction: float,
                    seed: int, crop_n: Optional[int] = None,
                    do_standardize: bool = True, task: str = "classification",
                    classes: Optional[Sequence[str]] = None):
    """Full pipeline: crop -> segment -> encode -> split -> standardize.

    Returns (SplitDataset, LabelMap | None, ChannelStats | None). The
    stats are fitted on the training split and already applied to both
    sides.
    """
    if task not in ("classification", "regression"):
        raise DataError(f"unknown task {task!r}")
    if crop_n is not None:
        recordings = [crop_head(r, crop_n) for r in recordings]
    samples = [s for r in recordings for s in segment(r, window_len)]
    label_map = None
    if task == "classification":
        label_map = (LabelMap(classes) if classes is not None
                     else LabelMap.from_labels([r.label for r in recordings]))
        samples = encode_targets(samples, label_map)
    else:
        samples = [Sample(window=s.window, target=float(s.target)) for s in samples]
    dataset = split(samples, train_fraction, seed)
    stats = None
    if do_standardize:
        dataset.train, stats = standardize(dataset.train)
        dataset.validation = apply_stats(dataset.validation, stats)
    return dataset, label_map, stats


def class_counts(samples: list, label_map: LabelMap) -> dict:
    counts = {name: 0 for name in label_map.classes}
    for s in samples:
        counts[label_map.name(int(s.target))] += 1
    return counts


# ---------------------------------------------------------------------------
# Dataset bundles: a directory of CSV + JSON written by `prepare`
# ---------------------------------------------------------------------------

def _samples_frame(samples: list, task: str) -> pd.DataFrame:
    windows = np.stack([s.window.reshape(-1) for s in samples])
    frame = pd.DataFrame(windows, columns=[f"x{i}" for i in range(windows.shape[1])])
    if task == "classification":
        frame.insert(0, "target", [int(s.target) for s in samples])
    else:
        frame.insert(0, "target", [float(s.target) for s in samples])
    return frame


def write_bundle(bundle_dir, dataset: SplitDataset, label_map: Optional[LabelMap],
                 stats: Optional[ChannelStats], task: str, window_len: int,
                 channels: int) -> None:
    bundle_dir = Path(bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": BUNDLE_VERSION,
        "task": task,
        "window_len": int(window_len),
        "channels": int(channels),
        "seed": int(dataset.seed),
        "train_fraction": float(dataset.train_fraction),
        "standardized": stats is not None,
        "n_train": len(dataset.train),
        "n_validation": len(dataset.validation),
    }
    if label_map is not None:
        meta["class_counts"] = class_counts(dataset.train + dataset.validation, label_map)
        with open(bundle_dir / "label_map.json", "w") as fh:
            json.dump(label_map.to_dict(), fh, indent=2, sort_keys=True)
    if stats is not None:
        with open(bundle_dir / "stats.json", "w") as fh:
            json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
    with open(bundle_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    # %.17g round-trips any double exactly, keeping the bundle the
    # bit-level source of truth for training.
    _samples_frame(dataset.train, task).to_csv(
        bundle_dir / "train.csv", index=False, float_format="%.17g")
    _samples_frame(dataset.validation, task).to_csv(
        bundle_dir / "validation.csv", index=False, float_format="%.17g")


@dataclass
class Bundle:
    train: list
    validation: list
    label_map: Optional[LabelMap]
    stats: Optional[ChannelStats]
    meta: dict


def _read_samples_csv(path, task: str, channels: int, window_len: int) -> list:
    # round_trip parsing: together with the %.17g writer, window values
    # survive the bundle bit-exactly
    frame = pd.read_csv(path, float_precision="round_trip")
    expected = 1 + channels * window_len
    if frame.shape[1] != expected:
        raise DataError(f"{path} has {frame.shape[1]} columns, expected {expected}")
    windows = frame.iloc[:, 1:].to_numpy(dtype=np.float64)
    targets = frame["target"].to_numpy()
    samples = []
    for row, target in zip(windows, targets):
        target = int(target) if task == "classification" else float(target)
        samples.append(Sample(window=row.reshape(channels, window_len), target=target))
    return samples


def load_bundle(bundle_dir) -> Bundle:
    bundle_dir = Path(bundle_dir)
    meta_path = bundle_dir / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"not a dataset bundle (missing meta.json): {bundle_dir}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("format_version") != BUNDLE_VERSION:
        raise DataError(f"bundle format {meta.get('format_version')!r} is not "
                        f"supported (expected {BUNDLE_VERSION!r})")
    task = meta["task"]
    channels, window_len = int(meta["channels"]), int(meta["window_len"])
    label_map = None
    if (bundle_dir / "label_map.json").is_file():
        with open(bundle_dir / "label_map.json") as fh:
            label_map = LabelMap.from_dict(json.load(fh))
    stats = None
    if (bundle_dir / "stats.json").is_file():
        with open(bundle_dir / "stats.json") as fh:
            stats = ChannelStats.from_dict(json.load(fh))
    train = _read_samples_csv(bundle_dir / "train.csv", task, channels, window_len)
    validation = _read_samples_csv(bundle_dir / "validation.csv", task, channels, window_len)
    return Bundle(train=train, validation=validation, label_map=label_map,
                  stats=stats, meta=meta)
