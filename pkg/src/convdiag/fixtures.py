"""Ready-made synthetic corpora and matching model/training configs.

Three fixtures cover the shipped example configs and the test suite:

* two_tone    - 2-class sinusoid corpus, 200 windows of 1024 points
* bearing     - a bearing-rig style corpus: 4 "normal" plus 52 faulty
                recordings (9 fault classes = 3 fault types x 3
                severities), windowed at 6000 points into 1320 samples;
                also view-able as a 4-way (fault type) or binary task
* degradation - scalar-target recordings whose oscillation amplitude
                tracks a degradation level in [0, 1]

Each class is a distinct carrier frequency with Gaussian noise and a
random phase per recording, so nothing but the waveform separates the
classes. All corpora are deterministic under their seed.
"""

from __future__ import annotations

from pathlib import Path

from .data import (RawRecording, SyntheticClass, SyntheticSpec,
                   generate_degradation, generate_synthetic, write_recording_csv)
from .layers import LayerSpec
from .trainer import ModelConfig, TrainConfig

TWO_TONE_SAMPLE_RATE = 1024.0
BEARING_SAMPLE_RATE = 12000.0
BEARING_WINDOW = 6000

FAULT_TYPES = ("ball", "inner", "outer")
FAULT_SEVERITIES = ("07", "14", "21")

# carrier frequency per ten-way class, Hz
_BEARING_FREQS = {"normal": 60.0}
_BEARING_FREQS.update({
    f"{fault}-{sev}": 400.0 * (1 + i)
    for i, (fault, sev) in enumerate(
        (fault, sev) for fault in FAULT_TYPES for sev in FAULT_SEVERITIES)
})


def two_tone_corpus(seed: int = 0, window: int = 1024, windows_per_class: int = 100,
                    noise_std: float = 0.3) -> list:
    """Two sinusoid classes: 32 Hz vs 96 Hz at a 1024 Hz sample rate.

    Each class yields `windows_per_class` windows (default 100 + 100 =
    200 samples at the given window length).
    """
    recordings_per_class = min(10, windows_per_class)
    if windows_per_class % recordings_per_class:
        recordings_per_class = windows_per_class
    length = window * (windows_per_class // recordings_per_class)
    spec = SyntheticSpec(
        classes=[
            SyntheticClass("tone-low", 32.0, 1.0, noise_std,
                           recordings_per_class, length),
            SyntheticClass("tone-high", 96.0, 1.0, noise_std,
                           recordings_per_class, length),
        ],
        sample_rate=TWO_TONE_SAMPLE_RATE, seed=seed, random_phase=True)
    return generate_synthetic(spec)


def two_tone_model() -> ModelConfig:
    return ModelConfig(layers=[
        LayerSpec("conv1d", num_filters=8, kernel_size=64, stride=8),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool_size=2, stride=2),
        LayerSpec("flatten"),
        LayerSpec("softmax_head"),
    ])


def two_tone_train_config(seed: int = 0, max_iterations: int = 200) -> TrainConfig:
    return TrainConfig(loss="cross_entropy", optimizer="adam", learning_rate=3e-3,
                       batch_size=32, max_iterations=max_iterations, seed=seed,
                       eval_every=50)


def bearing_corpus(seed: int = 0, task: str = "tenway") -> list:
    """Bearing-style corpus: 56 recordings that window into exactly 1320
    samples of 6000 points (4 normal recordings of 31 windows, 52 faulty
    of 23 windows; trailing tails are left in to exercise discard).

    task selects the labeling: "tenway" keeps the 10 class names,
    "fourway" collapses severities into the fault type, "binary" maps
    every fault to "fault". "normal" always comes first, so class 0 is
    the positive class in every view.
    """
    normal_len = 31 * BEARING_WINDOW + 1234
    fault_len = 23 * BEARING_WINDOW + 567
    fault_names = [f"{fault}-{sev}" for fault in FAULT_TYPES for sev in FAULT_SEVERITIES]
    # 52 faulty recordings over 9 classes: the first seven get 6 each,
    # the last two get 5 (6*7 + 5*2 = 52)
    counts = [6] * 7 + [5] * 2
    classes = [SyntheticClass("normal", _BEARING_FREQS["normal"], 1.0, 0.2, 4, normal_len)]
    classes += [SyntheticClass(name, _BEARING_FREQS[name], 1.0, 0.2, count, fault_len)
                for name, count in zip(fault_names, counts)]
    spec = SyntheticSpec(classes=classes, sample_rate=BEARING_SAMPLE_RATE,
                         seed=seed, random_phase=True)
    recordings = generate_synthetic(spec)
    if task == "tenway":
        return recordings
    if task == "fourway":
        mapper = lambda name: name.split("-")[0]
    elif task == "binary":
        mapper = lambda name: "normal" if name == "normal" else "fault"
    else:
        raise ValueError(f"unknown bearing task {task!r}")
    return [RawRecording(series=r.series, label=mapper(r.label), source_id=r.source_id)
            for r in recordings]


def bearing_model() -> ModelConfig:
    return ModelConfig(layers=[
        LayerSpec("conv1d", num_filters=16, kernel_size=100, stride=50),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool_size=2, stride=2),
        LayerSpec("flatten"),
        LayerSpec("dense", units=32),
        LayerSpec("relu"),
        LayerSpec("softmax_head"),
    ])


def bearing_train_config(seed: int = 0, max_iterations: int = 600) -> TrainConfig:
    return TrainConfig(loss="cross_entropy", optimizer="adam", learning_rate=1e-3,
                       batch_size=32, max_iterations=max_iterations, seed=seed,
                       eval_every=100)


def degradation_corpus(seed: int = 0, count: int = 220, window: int = 512) -> list:
    """Recordings whose amplitude grows linearly with a degradation
    target in [0, 1]; one window per recording."""
    return generate_degradation(count=count, length=window,
                                sample_rate=TWO_TONE_SAMPLE_RATE, frequency=48.0,
                                noise_std=0.05, seed=seed)


def degradation_model() -> ModelConfig:
    return ModelConfig(layers=[
        LayerSpec("conv1d", num_filters=8, kernel_size=32, stride=8),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool_size=2, stride=2),
        LayerSpec("flatten"),
        LayerSpec("dense", units=16),
        LayerSpec("relu"),
        LayerSpec("sigmoid_head"),
    ])


def degradation_train_config(seed: int = 0, max_iterations: int = 2000) -> TrainConfig:
    return TrainConfig(loss="least_squares", optimizer="adam", learning_rate=3e-3,
                       batch_size=32, max_iterations=max_iterations, seed=seed,
                       eval_every=200)


def write_corpus(directory, recordings: list, sample_rate: float) -> Path:
    """Write recordings as CSVs plus a `file,label` manifest; returns
    the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["file,label"]
    for i, rec in enumerate(recordings):
        name = f"rec{i:03d}.csv"
        write_recording_csv(directory / name, rec.series, sample_rate)
        lines.append(f"{name},{rec.label}")
    manifest = directory / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
