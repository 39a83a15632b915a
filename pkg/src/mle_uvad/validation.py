"""Input validation helpers for the estimator surface."""

from __future__ import annotations

import numpy as np

__all__ = ["check_frames", "check_is_fitted"]


def check_frames(X, expected_dim: int | None = None, min_rows: int = 1) -> np.ndarray:
    """Validate a frame matrix: 2-D float64, finite, pixel values in [0, 1].

    Returns a float64 copy-on-demand view suitable for the pipeline.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D frame matrix, got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} frame(s), got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ValueError("frames contain NaN or Inf values")
    lo, hi = float(X.min()), float(X.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"pixel values must lie in [0, 1], got range [{lo}, {hi}]")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(f"frames have {X.shape[1]} pixels, the model expects {expected_dim}")
    return X


def check_is_fitted(estimator, attribute: str = "model_"):
    """Raise if ``fit`` has not been called on the estimator."""
    if getattr(estimator, attribute, None) is None:
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit(X) before using this method"
        )
