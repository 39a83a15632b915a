"""Dense float64 linear algebra and seeded randomness for the whole package.

Everything downstream works on 2-D, row-major float64 numpy arrays and a
single seeded PCG64 generator, so a run is reproducible bit for bit from
its seed. 64-bit floats are non-negotiable: the entropy loss takes the log
of kernel sums that get very small at narrow bandwidths.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["make_rng", "as_matrix", "matmul", "elementwise", "init_weights"]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator.

    The same seed yields the same draw sequence on every platform, which is
    what makes training runs and synthetic datasets reproducible.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name}: contains NaN or Inf entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check.

    Reduction order is fixed by the BLAS backend, so repeated calls on the
    same inputs give bitwise-identical results within a platform.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul: dimension mismatch, left is {a.shape}, right is {b.shape}"
        )
    return a @ b


def elementwise(a: np.ndarray, f) -> np.ndarray:
    """Apply a vectorized scalar function entry by entry.

    ``f`` must accept an ndarray and broadcast over it (every activation and
    activation derivative in this package does).
    """
    return np.asarray(f(np.asarray(a, dtype=np.float64)), dtype=np.float64)


def init_weights(rows: int, cols: int, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform He-style initialization on [-sqrt(6/fan_in), +sqrt(6/fan_in)].

    Consumes the generator state deterministically: the same (shape, seed)
    pair always produces the same matrix.
    """
    if fan_in < 1:
        raise ValueError(f"init_weights: fan_in must be >= 1, got {fan_in}")
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(int(rows), int(cols)))
