"""Scikit-learn style estimator wrapping the training and scoring pipeline.

The estimator follows the outlier-detector conventions of the wider
ecosystem: ``fit`` trains unsupervised, ``score_samples`` returns a score
where higher means more normal, ``decision_function`` is that score shifted
by the fitted threshold, and ``predict`` returns +1 for normal frames and
-1 for anomalies. ``get_params``/``set_params`` make it clone-compatible
with pipeline and search utilities.
"""

from __future__ import annotations

import inspect

import numpy as np

from .detect import score_series, threshold
from .model import decode, encode
from .trainer import TrainConfig, run_training
from .validation import check_frames, check_is_fitted

__all__ = ["LatentEntropyAutoencoder"]


class LatentEntropyAutoencoder:
    """Unsupervised frame anomaly detector with an entropy-regularized latent space.

    Fitting trains a fully connected autoencoder on the raw, unlabeled frame
    matrix with a dual objective: reconstruction error plus ``mle_weight``
    times the latent-entropy estimate at kernel size ``bandwidth``. Because
    normal frames dominate, entropy minimization concentrates embeddings on
    the normal cluster; anomalies are then reconstructed as if they were
    normal and score a visibly lower input/reconstruction correlation.

    Parameters mirror :class:`mle_uvad.trainer.TrainConfig`; ``random_state``
    seeds everything. After ``fit`` the detection threshold ``threshold_``
    is frozen from the training series via ``mu - kappa * sd``.
    """

    def __init__(
        self,
        mle_weight: float = 1.0,
        bandwidth: float = 0.1,
        kappa: float = 0.5,
        learning_rate: float = 5e-4,
        batch_size: int = 64,
        epochs: int = 70,
        layer_sizes: tuple[int, ...] = (128, 64, 32),
        mse_variant: str = "norm",
        random_state: int = 0,
    ):
        self.mle_weight = mle_weight
        self.bandwidth = bandwidth
        self.kappa = kappa
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.layer_sizes = layer_sizes
        self.mse_variant = mse_variant
        self.random_state = random_state
        self.model_ = None

    @classmethod
    def _param_names(cls):
        signature = inspect.signature(cls.__init__)
        return sorted(name for name in signature.parameters if name != "self")

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = self._param_names()
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def _config(self) -> TrainConfig:
        return TrainConfig(
            mle_weight=self.mle_weight,
            bandwidth=self.bandwidth,
            kappa=self.kappa,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.random_state,
            layer_sizes=tuple(self.layer_sizes),
            mse_variant=self.mse_variant,
        )

    def fit(self, X, y=None):
        """Train on unlabeled frames; ``y`` is accepted and ignored."""
        X = check_frames(X, min_rows=2)
        config = self._config()
        config.validate()
        self.model_, self.history_ = run_training(X, config)
        series = score_series(self.model_, X)
        self.pcc_mean_, self.pcc_std_, self.threshold_ = threshold(series.pcc, self.kappa)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        """Latent embeddings of the given frames."""
        check_is_fitted(self)
        X = check_frames(X, expected_dim=self.n_features_in_)
        latents, _ = encode(self.model_, X)
        return latents

    def inverse_transform(self, Z) -> np.ndarray:
        """Reconstructions decoded from latent embeddings."""
        check_is_fitted(self)
        Z = np.asarray(Z, dtype=np.float64)
        recons, _ = decode(self.model_, Z)
        return recons

    def score_samples(self, X) -> np.ndarray:
        """Input/reconstruction correlation per frame (higher = more normal)."""
        check_is_fitted(self)
        X = check_frames(X, expected_dim=self.n_features_in_, min_rows=2)
        return score_series(self.model_, X).pcc

    def decision_function(self, X) -> np.ndarray:
        """Correlation minus the fitted threshold; negative means anomalous."""
        return self.score_samples(X) - self.threshold_

    def predict(self, X) -> np.ndarray:
        """+1 for normal frames, -1 for frames below the fitted threshold."""
        return np.where(self.decision_function(X) < 0.0, -1, 1)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).predict(X)
