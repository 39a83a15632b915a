"""Training loop: Adam, dual-loss steps, epoch logs, sweeps.

Full-scale behavior (benchmark AUC, ablation gap) lives in the acceptance
suite; here everything runs on tiny frames for speed.
"""

import numpy as np
import pytest

from mle_uvad.dataio import SyntheticSpec, generate_synthetic
from mle_uvad.errors import NumericalError
from mle_uvad.linalg import make_rng
from mle_uvad.model import build_autoencoder, param_arrays
from mle_uvad.trainer import (
    AdamState,
    TrainConfig,
    adam_update,
    init_adam,
    run_training,
    sweep,
    train_step,
    write_epoch_log_csv,
    write_sweep_csv,
)

TINY = dict(layer_sizes=(12, 4), batch_size=16, epochs=2, seed=5)


def tiny_dataset(frame_count=96, seed=7):
    spec = SyntheticSpec(height=6, width=6, frame_count=frame_count,
                         anomaly_ratio=0.125, seed=seed)
    return generate_synthetic(spec)


class TestTrainConfig:
    def test_defaults_are_valid(self):
        TrainConfig().validate()

    def test_single_sample_batch_with_entropy_rejected(self):
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(mle_weight=1.0, batch_size=1).validate()

    def test_single_sample_batch_allowed_without_entropy(self):
        TrainConfig(mle_weight=0.0, batch_size=1).validate()

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError, match="bandwidth"):
            TrainConfig(bandwidth=0.0).validate()
        with pytest.raises(ValueError, match="epochs"):
            TrainConfig(epochs=0).validate()
        with pytest.raises(ValueError, match="mse_variant"):
            TrainConfig(mse_variant="huber").validate()


class TestAdam:
    def test_zero_gradients_leave_parameters_unchanged(self):
        params = build_autoencoder(6, (4, 2), make_rng(1))
        before = [a.copy() for a in param_arrays(params)]
        grads = build_autoencoder(6, (4, 2), make_rng(2))
        for g in param_arrays(grads):
            g[:] = 0.0
        adam_update(init_adam(params), params, grads, learning_rate=0.1)
        for a, b in zip(param_arrays(params), before):
            np.testing.assert_array_equal(a, b)

    def test_first_step_magnitude_is_learning_rate(self):
        # bias-corrected first step moves each parameter by -lr * sign(g)
        # up to the epsilon correction, negligible for |g| >> eps
        params = build_autoencoder(6, (4, 2), make_rng(3))
        before = [a.copy() for a in param_arrays(params)]
        grads = build_autoencoder(6, (4, 2), make_rng(4))
        rng = make_rng(5)
        for g in param_arrays(grads):
            g[:] = rng.choice([-2.0, -0.5, 0.5, 2.0], size=g.shape)
        lr = 1e-3
        adam_update(init_adam(params), params, grads, learning_rate=lr)
        for a, b, g in zip(param_arrays(params), before, param_arrays(grads)):
            np.testing.assert_allclose(a - b, -lr * np.sign(g), rtol=1e-3)

    def test_equal_gradients_get_equal_updates(self):
        params = build_autoencoder(6, (4, 2), make_rng(6))
        grads = build_autoencoder(6, (4, 2), make_rng(7))
        for g in param_arrays(grads):
            g[:] = 0.7
        before = [a.copy() for a in param_arrays(params)]
        adam_update(init_adam(params), params, grads, learning_rate=1e-2)
        deltas = [a - b for a, b in zip(param_arrays(params), before)]
        flat = np.concatenate([d.ravel() for d in deltas])
        np.testing.assert_allclose(flat, flat[0])

    def test_step_counter_advances(self):
        params = build_autoencoder(6, (4, 2), make_rng(8))
        adam = init_adam(params)
        grads = build_autoencoder(6, (4, 2), make_rng(9))
        adam_update(adam, params, grads, 1e-3)
        adam_update(adam, params, grads, 1e-3)
        assert adam.step == 2


class TestTrainStep:
    def make_state(self, mle_weight=1.0, **overrides):
        config = TrainConfig(mle_weight=mle_weight, **{**TINY, **overrides})
        ds = tiny_dataset()
        params = build_autoencoder(ds.frame_dim, config.layer_sizes, make_rng(config.seed))
        return params, init_adam(params), ds.frames[:16], config

    def test_zero_weight_matches_reconstruction_only_update(self):
        params_a, adam_a, batch, config_a = self.make_state(mle_weight=0.0)
        params_b, adam_b, _, _ = self.make_state(mle_weight=0.0)
        # manual reconstruction-only step: identical forward, zero latent grad
        from mle_uvad.model import backward, decode, encode, mse_grad

        latents, ce = encode(params_b, batch)
        recons, cd = decode(params_b, latents)
        grads = backward(params_b, ce, cd, mse_grad(batch, recons, "norm"),
                         np.zeros_like(latents))
        adam_update(adam_b, params_b, grads, config_a.learning_rate)
        train_step(params_a, adam_a, batch, config_a)
        for a, b in zip(param_arrays(params_a), param_arrays(params_b)):
            np.testing.assert_array_equal(a, b)

    def test_reported_total_is_exact_decomposition(self):
        params, adam, batch, config = self.make_state(mle_weight=0.37)
        _, _, metrics = train_step(params, adam, batch, config)
        assert metrics.total == pytest.approx(metrics.mse + 0.37 * metrics.mle, abs=1e-12)

    def test_single_step_decreases_loss_on_frozen_batch(self):
        params, adam, batch, config = self.make_state(mle_weight=1.0, learning_rate=1e-4)
        from mle_uvad.entropy import mle_loss
        from mle_uvad.model import decode, encode, mse_loss

        def total():
            latents, _ = encode(params, batch)
            recons, _ = decode(params, latents)
            return mse_loss(batch, recons, "norm") + mle_loss(latents, config.bandwidth)

        before = total()
        train_step(params, adam, batch, config)
        assert total() < before

    def test_divergence_aborts_with_component_name(self):
        import warnings

        params, adam, batch, config = self.make_state(learning_rate=1e150)
        with pytest.raises(NumericalError, match="non-finite"):
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore")  # the blow-up itself is the point
                for _ in range(8):
                    train_step(params, adam, batch, config)


class TestRunTraining:
    def test_deterministic_logs_and_parameters(self):
        ds = tiny_dataset()
        config = TrainConfig(**TINY)
        params_a, logs_a = run_training(ds.frames, config, ds.labels)
        params_b, logs_b = run_training(ds.frames, config, ds.labels)
        assert logs_a == logs_b
        for a, b in zip(param_arrays(params_a), param_arrays(params_b)):
            np.testing.assert_array_equal(a, b)

    def test_labels_never_touch_parameters(self):
        ds = tiny_dataset()
        config = TrainConfig(**TINY)
        with_labels, logs_l = run_training(ds.frames, config, ds.labels)
        without, logs_u = run_training(ds.frames, config, None)
        for a, b in zip(param_arrays(with_labels), param_arrays(without)):
            np.testing.assert_array_equal(a, b)
        assert all(log.auc is not None for log in logs_l)
        assert all(log.auc is None for log in logs_u)

    def test_epoch_log_totals_decompose(self):
        ds = tiny_dataset()
        config = TrainConfig(mle_weight=0.5, **TINY)
        _, logs = run_training(ds.frames, config, ds.labels)
        for log in logs:
            assert log.total == pytest.approx(log.mse + 0.5 * log.mle, rel=1e-12)
            assert 0.0 <= log.auc <= 1.0

    def test_batch_size_larger_than_dataset_rejected(self):
        ds = tiny_dataset(frame_count=96)
        config = TrainConfig(**{**TINY, "batch_size": 200})
        with pytest.raises(ValueError, match="batch_size"):
            run_training(ds.frames, config)

    def test_label_length_mismatch_rejected(self):
        ds = tiny_dataset()
        with pytest.raises(ValueError, match="labels"):
            run_training(ds.frames, TrainConfig(**TINY), ds.labels[:-2])


class TestSweep:
    def test_one_cell_sweep_equals_plain_run(self):
        ds = tiny_dataset()
        base = TrainConfig(**TINY)
        _, logs = run_training(ds.frames, base, ds.labels)
        cells = sweep(ds.frames, base, [base.bandwidth], [base.mle_weight], ds.labels)
        assert len(cells) == 1
        assert cells[0].status == "ok"
        assert cells[0].auc == logs[-1].auc

    def test_cells_use_derived_seeds(self):
        ds = tiny_dataset()
        base = TrainConfig(**TINY)
        cells = sweep(ds.frames, base, [0.1, 0.1], [1.0], ds.labels)
        # same bandwidth twice: only the derived seed differs, so the cells
        # are independent runs rather than copies
        assert cells[0].auc != cells[1].auc

    def test_failed_cell_is_recorded_and_sweep_continues(self):
        ds = tiny_dataset()
        base = TrainConfig(**TINY)
        cells = sweep(ds.frames, base, [-1.0, 0.1], [1.0], ds.labels)
        assert cells[0].status.startswith("error:")
        assert cells[0].auc is None
        assert cells[1].status == "ok"

    def test_empty_grid_rejected(self):
        ds = tiny_dataset()
        with pytest.raises(ValueError, match="nonempty"):
            sweep(ds.frames, TrainConfig(**TINY), [], [1.0])


class TestCsvWriters:
    def test_epoch_log_columns_and_empty_auc(self, tmp_path):
        ds = tiny_dataset()
        _, logs = run_training(ds.frames, TrainConfig(**TINY), None)
        path = tmp_path / "log.csv"
        write_epoch_log_csv(path, logs)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,mse,mle,total,mean_pcc,auc"
        assert len(lines) == 1 + len(logs)
        assert all(line.endswith(",") for line in lines[1:])  # auc field empty

    def test_sweep_csv_round_numbers(self, tmp_path):
        ds = tiny_dataset()
        cells = sweep(ds.frames, TrainConfig(**TINY), [0.1], [0.0], ds.labels)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, cells)
        lines = path.read_text().splitlines()
        assert lines[0] == "sigma,lambda,auc,pcc_gap,status"
        assert lines[1].endswith("ok")


def test_adam_state_shapes_match_parameters():
    params = build_autoencoder(6, (4, 2), make_rng(0))
    adam = init_adam(params)
    assert isinstance(adam, AdamState)
    for m, v, p in zip(adam.m, adam.v, param_arrays(params)):
        assert m.shape == p.shape and v.shape == p.shape
