"""Frame scoring and anomaly detection on top of a trained autoencoder.

Each frame is scored by the Pearson correlation between the frame and its
reconstruction: structure-sensitive, invariant to positive affine maps of
either signal, and bounded in [-1, 1]. Anomalies sit in the lower tail of
the correlation series, so the detection threshold is the variance-aware
rule ``tau = mu - kappa * sd`` over the whole series.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import AutoencoderParams, decode, encode

__all__ = [
    "ScoreSeries",
    "pcc",
    "pcc_rows",
    "score_series",
    "threshold",
    "classify",
    "with_threshold",
    "pcc_gap",
    "roc_auc",
    "write_scores_csv",
    "read_scores_csv",
]


@dataclass
class ScoreSeries:
    """Per-frame correlation scores plus, once thresholded, the decision state.

    ``anomaly_score`` is ``1 - pcc`` so that higher always means more
    anomalous. ``mu``, ``sd``, ``tau`` and ``flags`` are filled in by
    :func:`with_threshold`.
    """

    pcc: np.ndarray
    anomaly_score: np.ndarray
    mu: float | None = None
    sd: float | None = None
    kappa: float | None = None
    tau: float | None = None
    flags: np.ndarray | None = None


def pcc_rows(frames: np.ndarray, recons: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation between two (n, d) arrays.

    A row with zero centered norm on either side has undefined correlation;
    it is scored 0 (maximally non-committal) and a diagnostic warning is
    emitted, because blank frames do occur in real pipelines.
    """
    if frames.shape != recons.shape:
        raise ValueError(f"pcc: shape mismatch {frames.shape} vs {recons.shape}")
    if frames.ndim != 2 or frames.shape[1] < 2:
        raise ValueError(f"pcc: need rows of length >= 2, got shape {frames.shape}")
    fc = frames - frames.mean(axis=1, keepdims=True)
    rc = recons - recons.mean(axis=1, keepdims=True)
    denom = np.sqrt((fc * fc).sum(axis=1)) * np.sqrt((rc * rc).sum(axis=1))
    degenerate = denom == 0.0
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} constant frame(s) scored pcc=0",
            RuntimeWarning,
            stacklevel=2,
        )
    out = np.where(degenerate, 0.0, (fc * rc).sum(axis=1) / np.where(degenerate, 1.0, denom))
    return np.clip(out, -1.0, 1.0)


def pcc(frame, recon) -> float:
    """Pearson correlation between one frame and its reconstruction."""
    f = np.asarray(frame, dtype=np.float64).reshape(1, -1)
    r = np.asarray(recon, dtype=np.float64).reshape(1, -1)
    return float(pcc_rows(f, r)[0])


def score_series(params: AutoencoderParams, frames: np.ndarray) -> ScoreSeries:
    """Reconstruct every frame and score it, preserving dataset order."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise ValueError(f"score_series: need at least 2 frames, got shape {frames.shape}")
    latents, _ = encode(params, frames)
    recons, _ = decode(params, latents)
    correlations = pcc_rows(frames, recons)
    return ScoreSeries(pcc=correlations, anomaly_score=1.0 - correlations)


def threshold(pcc_values, kappa: float):
    """Series mean, population standard deviation, and ``tau = mu - kappa * sd``."""
    values = np.asarray(pcc_values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError(f"threshold: need a series of length >= 2, got shape {values.shape}")
    mu = float(values.mean())
    sd = float(np.sqrt(np.mean((values - mu) ** 2)))  # divide by T, not T-1
    return mu, sd, mu - float(kappa) * sd


def classify(pcc_values, tau: float) -> np.ndarray:
    """Flag frames strictly below the threshold."""
    return np.asarray(pcc_values, dtype=np.float64) < float(tau)


def with_threshold(series: ScoreSeries, kappa: float) -> ScoreSeries:
    """Return a copy of the series completed with threshold and flags."""
    mu, sd, tau = threshold(series.pcc, kappa)
    return replace(
        series, mu=mu, sd=sd, kappa=float(kappa), tau=tau, flags=classify(series.pcc, tau)
    )


def pcc_gap(pcc_values, labels) -> float:
    """Mean correlation of normal frames minus mean correlation of anomalies."""
    values = np.asarray(pcc_values, dtype=np.float64)
    mask = np.asarray(labels, dtype=bool)
    if mask.shape != values.shape:
        raise ValueError(f"pcc_gap: {values.shape} scores vs {mask.shape} labels")
    if mask.all() or not mask.any():
        raise ValueError("pcc_gap needs both normal and anomalous frames")
    return float(values[~mask].mean() - values[mask].mean())


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve, computed exactly from ranks.

    Equals the probability that a uniformly random anomalous frame receives
    a higher score than a uniformly random normal frame, with ties counted
    half (the Mann-Whitney statistic divided by n_pos * n_neg).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError(f"roc_auc: scores {s.shape} and labels {y.shape} must be equal 1-D")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < s.size:
        j = i
        while j < s.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)  # average 1-based rank of the tie group
        i = j
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def write_scores_csv(path, series: ScoreSeries, labels=None):
    """Export the per-frame scores, with the threshold summary as a comment row.

    Columns: frame_index, pcc, anomaly_score, flagged and, when labels are
    given, label. Requires a thresholded series.
    """
    if series.flags is None or series.tau is None:
        raise ValueError("write_scores_csv: series has no threshold; call with_threshold first")
    if labels is not None and len(labels) != series.pcc.size:
        raise ValueError(
            f"write_scores_csv: {len(labels)} labels for {series.pcc.size} frames"
        )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            f"# mu={series.mu!r},sd={series.sd!r},kappa={series.kappa!r},tau={series.tau!r}\n"
        )
        writer = csv.writer(fh, lineterminator="\n")
        header = ["frame_index", "pcc", "anomaly_score", "flagged"]
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(series.pcc.size):
            row = [i, repr(float(series.pcc[i])), repr(float(series.anomaly_score[i])),
                   int(series.flags[i])]
            if labels is not None:
                row.append(int(bool(labels[i])))
            writer.writerow(row)


def read_scores_csv(path):
    """Read a scores CSV back into a thresholded series plus optional labels."""
    summary = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            for part in first[1:].strip().split(","):
                key, _, value = part.partition("=")
                summary[key.strip()] = float(value)
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"scores file {path} has no data rows")
    correlations = np.array([float(r["pcc"]) for r in rows])
    scores = np.array([float(r["anomaly_score"]) for r in rows])
    flags = np.array([r["flagged"] == "1" for r in rows])
    labels = None
    if "label" in rows[0] and rows[0]["label"] is not None:
        labels = np.array([r["label"] == "1" for r in rows])
    series = ScoreSeries(
        pcc=correlations,
        anomaly_score=scores,
        mu=summary.get("mu"),
        sd=summary.get("sd"),
        kappa=summary.get("kappa"),
        tau=summary.get("tau"),
        flags=flags,
    )
    return series, labels
