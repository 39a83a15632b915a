"""Estimator facade: parameter protocol, fit/predict surface, validation."""

import numpy as np
import pytest

from mle_uvad.dataio import SyntheticSpec, generate_synthetic
from mle_uvad.detect import score_series, threshold
from mle_uvad.estimator import LatentEntropyAutoencoder
from mle_uvad.validation import check_frames

FAST = dict(layer_sizes=(12, 4), batch_size=16, epochs=2, random_state=5)


@pytest.fixture(scope="module")
def frames():
    spec = SyntheticSpec(height=6, width=6, frame_count=96, anomaly_ratio=0.125, seed=7)
    return generate_synthetic(spec).frames


@pytest.fixture(scope="module")
def fitted(frames):
    return LatentEntropyAutoencoder(**FAST).fit(frames)


class TestParamProtocol:
    def test_get_params_round_trips_through_init(self):
        est = LatentEntropyAutoencoder(bandwidth=0.3, epochs=9)
        clone = LatentEntropyAutoencoder(**est.get_params())
        assert clone.get_params() == est.get_params()

    def test_set_params_returns_self_and_applies(self):
        est = LatentEntropyAutoencoder()
        assert est.set_params(bandwidth=0.7) is est
        assert est.get_params()["bandwidth"] == 0.7

    def test_set_params_rejects_unknown_names(self):
        with pytest.raises(ValueError, match="invalid parameter"):
            LatentEntropyAutoencoder().set_params(kernel="rbf")

    def test_sklearn_clone_compatible(self, frames):
        sklearn_base = pytest.importorskip("sklearn.base")
        est = LatentEntropyAutoencoder(**FAST)
        clone = sklearn_base.clone(est)
        assert clone.get_params() == est.get_params()


class TestFitSurface:
    def test_fit_returns_self_and_sets_attributes(self, fitted, frames):
        assert fitted.model_ is not None
        assert fitted.n_features_in_ == frames.shape[1]
        assert fitted.threshold_ == pytest.approx(
            fitted.pcc_mean_ - 0.5 * fitted.pcc_std_
        )
        assert len(fitted.history_) == FAST["epochs"]

    def test_fit_is_deterministic_in_random_state(self, frames):
        a = LatentEntropyAutoencoder(**FAST).fit(frames)
        b = LatentEntropyAutoencoder(**FAST).fit(frames)
        assert a.threshold_ == b.threshold_
        np.testing.assert_array_equal(a.score_samples(frames), b.score_samples(frames))

    def test_labels_argument_is_ignored(self, frames):
        y = np.zeros(frames.shape[0])
        a = LatentEntropyAutoencoder(**FAST).fit(frames, y)
        b = LatentEntropyAutoencoder(**FAST).fit(frames)
        assert a.threshold_ == b.threshold_

    def test_score_samples_matches_pipeline_functions(self, fitted, frames):
        expected = score_series(fitted.model_, frames).pcc
        np.testing.assert_array_equal(fitted.score_samples(frames), expected)

    def test_threshold_matches_detect_module(self, fitted, frames):
        mu, sd, tau = threshold(score_series(fitted.model_, frames).pcc, 0.5)
        assert fitted.threshold_ == tau

    def test_predict_signs_follow_decision_function(self, fitted, frames):
        decision = fitted.decision_function(frames)
        predictions = fitted.predict(frames)
        np.testing.assert_array_equal(predictions, np.where(decision < 0.0, -1, 1))
        assert set(np.unique(predictions)) <= {-1, 1}

    def test_fit_predict_equals_fit_then_predict(self, frames):
        a = LatentEntropyAutoencoder(**FAST).fit_predict(frames)
        est = LatentEntropyAutoencoder(**FAST).fit(frames)
        np.testing.assert_array_equal(a, est.predict(frames))

    def test_transform_and_inverse_transform_shapes(self, fitted, frames):
        latents = fitted.transform(frames)
        assert latents.shape == (frames.shape[0], FAST["layer_sizes"][-1])
        recons = fitted.inverse_transform(latents)
        assert recons.shape == frames.shape
        assert np.all((recons > 0.0) & (recons < 1.0))


class TestValidation:
    def test_unfitted_estimator_raises(self, frames):
        with pytest.raises(RuntimeError, match="not fitted"):
            LatentEntropyAutoencoder().predict(frames)

    def test_wrong_feature_count_rejected(self, fitted, frames):
        with pytest.raises(ValueError, match="expects"):
            fitted.score_samples(frames[:, :-1])

    def test_check_frames_rejects_bad_input(self):
        with pytest.raises(ValueError, match="2-D"):
            check_frames(np.zeros(4))
        with pytest.raises(ValueError, match="NaN"):
            check_frames(np.array([[np.nan, 0.0]]))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            check_frames(np.array([[0.5, 1.4]]))

    def test_invalid_config_rejected_at_fit(self, frames):
        with pytest.raises(ValueError, match="batch_size"):
            LatentEntropyAutoencoder(batch_size=1).fit(frames)
