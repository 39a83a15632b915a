"""Datasets: synthetic benchmark generation, binary persistence, labels.

A dataset is a (T, D) float64 matrix of flattened frames with pixel values
in [0, 1], plus optional boolean labels (True = anomaly) that exist purely
for reporting metrics; nothing in training may read them.

The generator produces a desk-scale stand-in for single-scene camera
footage: a smooth, slowly drifting bright blob over a flat background, plus
pixel noise. Anomalies arrive as contiguous runs of frames (events, the way
real anomalies arrive) and come in three modes: an occluding dark disk, a
global intensity (gamma) shift, and a high-frequency checkerboard patch.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataFormatError
from .linalg import make_rng

__all__ = [
    "Dataset",
    "SyntheticSpec",
    "ANOMALY_MODES",
    "generate_synthetic",
    "subsample_to_ratio",
    "save_dataset",
    "load_dataset",
    "load_labels_csv",
    "strip_labels",
    "normalize",
]

DATASET_MAGIC = b"MLEDS1"

ANOMALY_MODES = ("occlusion", "intensity", "texture")

# Normal-scene composition: flat background with a drifting, gently pulsing
# Gaussian blob. The drift is small and slow so the normal frames form a
# compact, low-dimensional manifold a narrow latent code can cover; the
# amplitude pulse varies each frame's signal-to-noise ratio, so even perfect
# reconstructions have a spread of attainable correlation scores.
_BACKGROUND = 0.35
_BLOB_AMPLITUDE = 0.55
_BLOB_WIDTH_FRACTION = 0.22  # blob sigma as a fraction of the short frame side
_DRIFT_PERIODS = (641.0, 409.0)  # coprime-ish so the path fills its box
_DRIFT_EXTENT = 0.10  # path half-width as a fraction of each side
_PULSE_PERIOD = 101.0
_PULSE_BASE, _PULSE_SWING = 0.6, 0.4  # amplitude factor 0.2 .. 1.0

# Anomaly events are runs of consecutive frames in this length range.
_RUN_MIN, _RUN_MAX = 24, 56

_OCCLUSION_DARKEN = 0.08  # occluded pixels keep this fraction of their value
_OCCLUSION_AREA = 0.12  # disk area as a fraction of the frame, >= the 10% floor
_OCCLUSION_SPEED = (0.25, 0.6)  # disk drift, pixels per frame
_GAMMA_RANGE = (2.0, 2.8)
_CHECKER_LOW, _CHECKER_HIGH = 0.15, 0.85


@dataclass
class Dataset:
    """Flattened frames plus geometry and metrics-only labels."""

    frames: np.ndarray  # (T, D) float64 in [0, 1]
    channels: int
    height: int
    width: int
    labels: np.ndarray | None = None  # (T,) bool, True = anomaly

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_dim(self) -> int:
        return self.frames.shape[1]

    def validate(self):
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {self.frames.shape}")
        if self.channels * self.height * self.width != self.frame_dim:
            raise ValueError(
                f"geometry {self.channels}x{self.height}x{self.width} does not match "
                f"frame dim {self.frame_dim}"
            )
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        if self.labels is not None and self.labels.shape != (self.frame_count,):
            raise ValueError(
                f"labels length {self.labels.shape} does not match {self.frame_count} frames"
            )

    @property
    def anomaly_count(self) -> int:
        return 0 if self.labels is None else int(self.labels.sum())


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs of the synthetic benchmark; defaults are the desk-scale setup."""

    height: int = 24
    width: int = 24
    frame_count: int = 2000
    anomaly_ratio: float = 0.125
    anomaly_mode: str = "occlusion"
    noise_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.height < 4 or self.width < 4:
            raise ValueError(f"frames must be at least 4x4, got {self.height}x{self.width}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if not 0.0 <= self.anomaly_ratio < 1.0:
            raise ValueError(f"anomaly_ratio must be in [0, 1), got {self.anomaly_ratio}")
        if self.anomaly_mode not in ANOMALY_MODES:
            raise ValueError(
                f"unknown anomaly mode {self.anomaly_mode!r}, expected one of {ANOMALY_MODES}"
            )
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be nonnegative")


def _event_runs(total: int, horizon: int, rng) -> list[tuple[int, int]]:
    """Split ``total`` anomalous frames into non-adjacent runs inside ``horizon``.

    Run lengths are drawn first, then the free frames are distributed over
    the gaps with a multinomial draw, which places every run without any
    rejection sampling. Interior gaps get one guaranteed frame so distinct
    events never touch.
    """
    lengths = []
    remaining = total
    while remaining > 0:
        run = min(remaining, int(rng.integers(_RUN_MIN, _RUN_MAX)))
        lengths.append(run)
        remaining -= run
    n_runs = len(lengths)
    free = horizon - total
    reserved = max(n_runs - 1, 0)
    if free < reserved:
        raise ValueError(
            f"cannot place {n_runs} anomaly runs of {total} frames in {horizon} frames"
        )
    gaps = np.ones(n_runs + 1, dtype=np.int64)
    gaps[0] = gaps[-1] = 0
    gaps += rng.multinomial(free - reserved, np.full(n_runs + 1, 1.0 / (n_runs + 1)))
    runs = []
    cursor = 0
    for gap, length in zip(gaps[:-1], lengths):
        cursor += int(gap)
        runs.append((cursor, length))
        cursor += length
    return runs


def _disk_mask(height, width, cy, cx, radius):
    yy, xx = np.ogrid[:height, :width]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def _bounce(value: float, lo: float, hi: float) -> float:
    """Reflect ``value`` into [lo, hi] (triangle wave)."""
    if hi <= lo:
        return lo
    span = hi - lo
    t = (value - lo) % (2.0 * span)
    return lo + (span - abs(t - span))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministically generate a labeled benchmark dataset.

    The anomalous frame count is exactly ``round(anomaly_ratio * frame_count)``.
    Occlusion events are disks that creep slowly across the frame from a
    fresh random spot per event (an object sliding over the lens); intensity
    events apply a per-event gamma shift; texture events paste a jittered
    checkerboard patch.
    """
    rng = make_rng(spec.seed)
    h, w, t = spec.height, spec.width, spec.frame_count
    dim = h * w

    phases = rng.uniform(0.0, 2.0 * math.pi, size=3)  # drift x, drift y, pulse
    blob_sigma = _BLOB_WIDTH_FRACTION * min(h, w)
    yy, xx = np.mgrid[:h, :w]

    n_anomalies = round(spec.anomaly_ratio * t)
    labels = np.zeros(t, dtype=bool)
    runs = _event_runs(n_anomalies, t, rng) if n_anomalies > 0 else []
    for start, length in runs:
        labels[start : start + length] = True

    # One parameter draw per event, in run order.
    radius = math.ceil(math.sqrt(_OCCLUSION_AREA * dim / math.pi))
    patch = max(6, round(0.42 * min(h, w)))
    run_params = []
    if runs:
        if spec.anomaly_mode == "occlusion":
            # each event is a fully-visible disk creeping from a fresh random
            # spot, like an object sliding slowly across the lens
            lo_y, hi_y = radius, max(h - radius - 1, radius)
            lo_x, hi_x = radius, max(w - radius - 1, radius)
            for _ in runs:
                cy0 = float(rng.integers(lo_y, hi_y + 1))
                cx0 = float(rng.integers(lo_x, hi_x + 1))
                speed = float(rng.uniform(*_OCCLUSION_SPEED))
                angle = float(rng.uniform(0.0, 2.0 * math.pi))
                run_params.append(
                    (cy0, cx0, speed * math.sin(angle), speed * math.cos(angle))
                )
        elif spec.anomaly_mode == "intensity":
            for _ in runs:
                run_params.append(float(rng.uniform(*_GAMMA_RANGE)))
        else:  # texture
            py0 = int(rng.integers(0, max(h - patch, 1)))
            px0 = int(rng.integers(0, max(w - patch, 1)))
            for _ in runs:
                jy, jx = rng.integers(-2, 3, size=2)
                run_params.append(
                    (min(max(py0 + int(jy), 0), h - patch), min(max(px0 + int(jx), 0), w - patch))
                )

    run_of_frame = np.full(t, -1, dtype=np.int64)
    run_start = np.zeros(t, dtype=np.int64)
    for run_idx, (start, length) in enumerate(runs):
        run_of_frame[start : start + length] = run_idx
        run_start[start : start + length] = start

    checker = ((np.add.outer(np.arange(patch), np.arange(patch)) % 2) == 0).astype(np.float64)
    checker = _CHECKER_LOW + (_CHECKER_HIGH - _CHECKER_LOW) * checker

    frames = np.empty((t, dim), dtype=np.float64)
    for i in range(t):
        cx = w / 2.0 + _DRIFT_EXTENT * w * math.sin(2.0 * math.pi * i / _DRIFT_PERIODS[0] + phases[0])
        cy = h / 2.0 + _DRIFT_EXTENT * h * math.sin(2.0 * math.pi * i / _DRIFT_PERIODS[1] + phases[1])
        amp = _BLOB_AMPLITUDE * (
            _PULSE_BASE + _PULSE_SWING * math.sin(2.0 * math.pi * i / _PULSE_PERIOD + phases[2])
        )
        pattern = _BACKGROUND + amp * np.exp(
            -((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * blob_sigma**2)
        )
        if labels[i]:
            p = run_params[run_of_frame[i]]
            if spec.anomaly_mode == "occlusion":
                offset = i - run_start[i]
                cy_d = _bounce(p[0] + p[2] * offset, radius, h - radius - 1)
                cx_d = _bounce(p[1] + p[3] * offset, radius, w - radius - 1)
                pattern[_disk_mask(h, w, cy_d, cx_d, radius)] *= _OCCLUSION_DARKEN
            elif spec.anomaly_mode == "intensity":
                pattern = pattern**p
            else:
                pattern[p[0] : p[0] + patch, p[1] : p[1] + patch] = checker
        if spec.noise_std > 0.0:
            pattern = pattern + rng.normal(0.0, spec.noise_std, size=(h, w))
        frames[i] = np.clip(pattern, 0.0, 1.0).ravel()

    ds = Dataset(frames=frames, channels=1, height=h, width=w, labels=labels)
    ds.validate()
    return ds


def subsample_to_ratio(dataset: Dataset, target_ratio: float, seed: int) -> Dataset:
    """Resample to the requested anomaly fraction at fixed frame count.

    Keeps ``round(target_ratio * T)`` anomalies (sampled without replacement)
    and all normals, then duplicates uniformly drawn normals to restore the
    original length. Selected indices are sorted, so survivors keep their
    temporal order and duplicates sit next to their source frame.
    """
    if dataset.labels is None:
        raise ValueError("subsample_to_ratio requires a labeled dataset")
    t = dataset.frame_count
    target = round(float(target_ratio) * t)
    anom_idx = np.flatnonzero(dataset.labels)
    norm_idx = np.flatnonzero(~dataset.labels)
    if target > anom_idx.size:
        raise ValueError(
            f"cannot reach anomaly ratio {target_ratio}: need {target} anomalous frames "
            f"but only {anom_idx.size} are available (normals: {norm_idx.size})"
        )
    if norm_idx.size == 0 and target < t:
        raise ValueError("cannot pad with normals: dataset has none")
    rng = make_rng(seed)
    keep_anom = rng.choice(anom_idx, size=target, replace=False)
    extra = t - target - norm_idx.size
    padding = rng.choice(norm_idx, size=extra, replace=True) if extra > 0 else np.empty(0, np.int64)
    chosen = np.sort(np.concatenate([keep_anom, norm_idx, padding]))
    return Dataset(
        frames=dataset.frames[chosen].copy(),
        channels=dataset.channels,
        height=dataset.height,
        width=dataset.width,
        labels=dataset.labels[chosen].copy(),
    )


def strip_labels(dataset: Dataset) -> Dataset:
    """The same dataset without labels (for unsupervised-purity checks)."""
    return replace(dataset, labels=None)


def save_dataset(dataset: Dataset, path):
    """Write the binary dataset file (magic, geometry, pixels, labels)."""
    dataset.validate()
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIB",
                dataset.frame_count,
                dataset.channels,
                dataset.height,
                dataset.width,
                1 if dataset.labels is not None else 0,
            )
        )
        fh.write(np.ascontiguousarray(dataset.frames, dtype="<f8").tobytes())
        if dataset.labels is not None:
            fh.write(dataset.labels.astype(np.uint8).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataFormatError(f"dataset file truncated while reading {what}")
    return buf


def load_dataset(path) -> Dataset:
    """Read a dataset file, enforcing every invariant the format promises."""
    with open(path, "rb") as fh:
        magic = fh.read(len(DATASET_MAGIC))
        if magic != DATASET_MAGIC:
            raise DataFormatError(f"not a dataset file: bad magic {magic!r}")
        t, c, h, w, has_labels = struct.unpack("<IIIIB", _read_exact(fh, 17, "header"))
        if t < 1 or c < 1 or h < 1 or w < 1:
            raise DataFormatError(f"invalid geometry T={t} C={c} H={h} W={w}")
        if has_labels not in (0, 1):
            raise DataFormatError(f"label flag must be 0 or 1, got {has_labels}")
        dim = c * h * w
        frames = np.frombuffer(
            _read_exact(fh, 8 * t * dim, "pixel data"), dtype="<f8"
        ).reshape(t, dim).copy()
        labels = None
        if has_labels:
            raw = np.frombuffer(_read_exact(fh, t, "labels"), dtype=np.uint8)
            if np.any(raw > 1):
                raise DataFormatError("labels must be 0 or 1 bytes")
            labels = raw.astype(bool)
        if fh.read(1) != b"":
            raise DataFormatError("dataset file has trailing bytes")
    if not np.isfinite(frames).all():
        raise DataFormatError("dataset contains non-finite pixel values")
    lo, hi = float(frames.min()), float(frames.max())
    if lo < 0.0 or hi > 1.0:
        raise DataFormatError(f"pixel values outside [0, 1]: min={lo}, max={hi}")
    return Dataset(frames=frames, channels=c, height=h, width=w, labels=labels)


def load_labels_csv(path, expected_count: int | None = None) -> np.ndarray:
    """Read a one-column 0/1 CSV with header row ``label``."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [col.strip() for col in header] != ["label"]:
            raise DataFormatError(f"labels file must have a single 'label' header, got {header}")
        values = []
        for row in reader:
            if len(row) != 1 or row[0].strip() not in ("0", "1"):
                raise DataFormatError(f"labels file row {len(values) + 2} is not 0 or 1: {row}")
            values.append(row[0].strip() == "1")
    labels = np.asarray(values, dtype=bool)
    if expected_count is not None and labels.size != expected_count:
        raise DataFormatError(
            f"labels file has {labels.size} rows but the dataset has {expected_count} frames"
        )
    return labels


def normalize(raw, lo: float, hi: float) -> np.ndarray:
    """Affine map of [lo, hi] onto [0, 1], clamping values outside the range."""
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        raise ValueError(f"normalize: need hi > lo, got lo={lo}, hi={hi}")
    arr = np.asarray(raw, dtype=np.float64)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
