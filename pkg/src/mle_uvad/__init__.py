"""Unsupervised video-frame anomaly detection via latent-entropy regularization.

Train an autoencoder on raw unlabeled frames with a dual objective
(reconstruction plus a kernel-density latent-entropy term), then flag the
frames whose input/reconstruction correlation falls in the lower tail.
"""

from .dataio import Dataset, SyntheticSpec, generate_synthetic, load_dataset, save_dataset, subsample_to_ratio
from .detect import ScoreSeries, classify, pcc, roc_auc, score_series, threshold, with_threshold
from .entropy import information_potential, mle_grad, mle_loss, pairwise_affinities
from .errors import DataFormatError, NumericalError
from .estimator import LatentEntropyAutoencoder
from .model import AutoencoderParams, build_autoencoder, decode, encode, load_model, save_model
from .trainer import EpochLog, TrainConfig, run_training, sweep

__version__ = "0.1.0"

__all__ = [
    "AutoencoderParams",
    "DataFormatError",
    "Dataset",
    "EpochLog",
    "LatentEntropyAutoencoder",
    "NumericalError",
    "ScoreSeries",
    "SyntheticSpec",
    "TrainConfig",
    "build_autoencoder",
    "classify",
    "decode",
    "encode",
    "generate_synthetic",
    "information_potential",
    "load_dataset",
    "load_model",
    "mle_grad",
    "mle_loss",
    "pairwise_affinities",
    "pcc",
    "roc_auc",
    "run_training",
    "save_dataset",
    "save_model",
    "score_series",
    "subsample_to_ratio",
    "sweep",
    "threshold",
    "with_threshold",
]
