"""Latent-entropy estimation over batches of embeddings.

The quadratic (order-2) Renyi entropy of a latent batch is estimated
non-parametrically: place a Gaussian kernel of bandwidth ``sigma`` on every
embedding, square the resulting density estimate, and integrate. The Gaussian
convolution identity collapses the integral into a double sum of kernels with
bandwidth ``sqrt(2) * sigma`` over all embedding pairs (the "information
potential"). Minimizing the negative log of that potential pulls each
embedding toward the kernel-weighted average of its neighbours, which is what
concentrates sparse outlying embeddings onto the dominant cluster.

All functions treat a latent batch as an (n, d) float64 array. The kernel is
the isotropic d-variate Gaussian evaluated at squared Euclidean distance;
its normalization constant shifts the loss by a bandwidth-dependent constant
but cancels out of the gradient.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

__all__ = [
    "gaussian_kernel",
    "pairwise_sq_dists",
    "information_potential",
    "mle_loss",
    "mle_grad",
    "pairwise_affinities",
]

# Below this value the potential is treated as underflowed: the loss argument
# is clamped and a diagnostic warning signals that sigma is far too small for
# the data scale.
POTENTIAL_FLOOR = 1e-300


def _check_bandwidth(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ValueError(f"kernel bandwidth must be positive, got {sigma}")
    return sigma


def _as_latents(latents) -> np.ndarray:
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ValueError(f"latent batch must be a non-empty 2-D array, got shape {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("latent batch contains non-finite entries")
    return z


def gaussian_kernel(sq_dist, bandwidth: float, dim: int = 1):
    """Isotropic ``dim``-variate Gaussian density at squared distance ``sq_dist``.

    Returns ``(2*pi*bandwidth^2)^(-dim/2) * exp(-sq_dist / (2*bandwidth^2))``.
    Accepts a scalar or an array of squared distances.
    """
    sigma = _check_bandwidth(bandwidth)
    sq = np.asarray(sq_dist, dtype=np.float64)
    if np.any(sq < 0.0):
        raise ValueError("squared distance must be nonnegative")
    norm = (2.0 * math.pi * sigma * sigma) ** (-dim / 2.0)
    out = norm * np.exp(-sq / (2.0 * sigma * sigma))
    return float(out) if sq.ndim == 0 else out


def pairwise_sq_dists(z: np.ndarray, block: int = 256) -> np.ndarray:
    """Exact pairwise squared Euclidean distances, O(n^2 d).

    Uses the difference-and-sum form rather than the Gram-matrix expansion so
    each entry matches a naive per-pair loop to rounding error, and processes
    rows in blocks to bound the temporary (block, n, d) buffer.
    """
    n = z.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = z[start:stop, None, :] - z[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def information_potential(latents, bandwidth: float) -> float:
    """Mean pairwise Gaussian kernel at bandwidth ``sqrt(2) * sigma``.

    ``(1/n^2) * sum_ij K(||z_i - z_j||^2)`` including the i == j diagonal.
    This is the plug-in estimate of the integral of the squared kernel
    density estimate of the batch.
    """
    z = _as_latents(latents)
    sigma = _check_bandwidth(bandwidth)
    n, d = z.shape
    four_sig_sq = 4.0 * sigma * sigma  # variance doubles under self-convolution
    norm = (math.pi * four_sig_sq) ** (-d / 2.0)
    sq = pairwise_sq_dists(z)
    return float(norm * np.exp(-sq / four_sig_sq).sum() / (n * n))


def mle_loss(latents, bandwidth: float) -> float:
    """Negative log information potential: the Renyi-2 entropy estimate.

    Lower values mean a more concentrated latent batch. If the potential
    underflows to zero the argument is clamped at ``POTENTIAL_FLOOR`` and a
    warning is emitted; that only happens when sigma is orders of magnitude
    below the data scale.
    """
    potential = information_potential(latents, bandwidth)
    if potential < POTENTIAL_FLOOR:
        warnings.warn(
            f"information potential underflowed ({potential!r}); bandwidth "
            f"{bandwidth} is far too small for the latent scale",
            RuntimeWarning,
            stacklevel=2,
        )
        potential = POTENTIAL_FLOOR
    return float(-math.log(potential))


def mle_grad(latents, bandwidth: float) -> np.ndarray:
    """Exact gradient of :func:`mle_loss` with respect to each embedding.

    For embedding ``z_k`` the gradient is

        (1 / (sigma^2 * S)) * sum_j (z_k - z_j) * K(||z_k - z_j||^2)

    with ``K`` the ``sqrt(2) * sigma`` kernel and ``S`` the kernel sum over
    all pairs. The kernel normalization constant cancels between numerator
    and denominator, so the computation runs on raw affinities. Descent on
    this gradient moves each embedding toward the kernel-weighted average of
    its neighbours.
    """
    z = _as_latents(latents)
    sigma = _check_bandwidth(bandwidth)
    n, d = z.shape
    sq = pairwise_sq_dists(z)
    w = np.exp(-sq / (4.0 * sigma * sigma))
    total = float(w.sum())
    norm = (4.0 * math.pi * sigma * sigma) ** (-d / 2.0)
    if norm * total / (n * n) < POTENTIAL_FLOOR:
        warnings.warn(
            "information potential underflowed; returning a zero entropy gradient",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.zeros_like(z)
    pulled = w @ z
    return (z * w.sum(axis=1)[:, None] - pulled) / (sigma * sigma * total)


def pairwise_affinities(latents, bandwidth: float) -> np.ndarray:
    """Pairwise Gaussian affinities ``w_ij = exp(-||z_i - z_j||^2 / (4 sigma^2))``.

    Symmetric with a unit diagonal. Exposed as a diagnostic: at a glance it
    shows whether the bandwidth is so small that all off-diagonal weights
    vanish (training stalls) or so large that they all saturate at one (near
    and far pairs become indistinguishable).
    """
    z = _as_latents(latents)
    sigma = _check_bandwidth(bandwidth)
    sq = pairwise_sq_dists(z)
    return np.exp(-sq / (4.0 * sigma * sigma))
