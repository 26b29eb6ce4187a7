"""Tests for the convolutional autoencoder, its loss, trainer and checkpoints."""
import dataclasses

import numpy as np
import pytest

from config.default_config import REFERENCE_SCALE_CAE_CONFIG
from src.cae import (
    CaeArchitecture,
    CaeModel,
    ReduceLROnPlateau,
    TrainConfig,
    build_model,
    decode,
    encode,
    encode_batched,
    load_model,
    lw_rmse,
    lw_rmse_node,
    lw_rmse_per_variable,
    lw_rmse_pooled,
    read_trace,
    save_model,
    train,
    write_trace,
)
from src.cae.trainer import evaluate_loss
from src.data.grid import LatitudeWeights, latitude_grid, latitude_weights
from src.tensor import Graph
from src.utils.error_handler import ConfigurationError, FormatError, NumericalError, ShapeError
from tests.oracles import finite_difference, lw_rmse_loop, relative_error


@pytest.fixture
def tiny_model(tiny_arch):
    return build_model(tiny_arch, seed=3)


@pytest.fixture
def tiny_fields(rng, tiny_arch):
    return rng.normal(size=(12,) + tiny_arch.input_shape)


@pytest.fixture
def quick_config():
    return TrainConfig(learning_rate=1e-3, batch_size=4, epochs=2, patience=1, val_fraction=0.25, seed=7)


class TestArchitecture:

    def test_reference_scale_extents(self):
        """4x121x240 pads to 128 rows and compresses to 8x8x15 = 960 values."""
        arch = CaeArchitecture(**REFERENCE_SCALE_CAE_CONFIG)
        assert arch.padded_height == 128
        assert arch.latent_shape == (8, 8, 15)
        assert arch.latent_dim == 960
        assert arch.compression_ratio == 121.0

    def test_desk_default_latent(self):
        arch = CaeArchitecture()
        assert arch.latent_shape == (8, 9, 12)
        assert arch.latent_dim == 864

    def test_padding_splits_south_first(self):
        arch = CaeArchitecture(channels=1, height=5, width=8, stem_channels=2, stage_channels=(2,),
                               latent_channels=1, reduction=1)
        assert arch.padded_height == 6
        assert (arch.pad_south, arch.pad_north) == (1, 0)

    def test_width_must_divide(self):
        with pytest.raises(ConfigurationError, match="grid.width"):
            CaeArchitecture(channels=1, height=8, width=6, stage_channels=(4, 4), stem_channels=4, reduction=2)

    def test_reduction_must_divide_block_widths(self):
        with pytest.raises(ConfigurationError, match="cae.reduction"):
            CaeArchitecture(channels=1, height=4, width=4, stem_channels=6, stage_channels=(6,), reduction=4)

    def test_reduction_ignored_without_cbam(self):
        arch = CaeArchitecture(channels=1, height=4, width=4, stem_channels=6, stage_channels=(6,),
                               reduction=4, cbam=False)
        assert arch.latent_dim == arch.latent_channels * 2 * 2

    def test_parameter_count_matches_allocation(self, tiny_arch):
        model = build_model(tiny_arch)
        assert tiny_arch.parameter_count() == model.params.size()

    def test_cbam_parameter_delta(self, tiny_arch):
        """Each attended block adds 2C²/r + C/r + C (perceptron) + 2·49 + 1 (7x7 conv)."""
        plain = dataclasses.replace(tiny_arch, cbam=False)
        per_block = {c: 2 * c * c // 2 + c // 2 + c + 2 * 49 + 1 for c in tiny_arch.attended_channels}
        delta = tiny_arch.parameter_count() - plain.parameter_count()
        assert delta == sum(per_block[c] for c in tiny_arch.attended_channels)

    def test_decoder_blocks_project_when_narrowing(self):
        arch = CaeArchitecture(channels=1, height=4, width=4, stem_channels=2, stage_channels=(4,),
                               latent_channels=1, reduction=2)
        shapes = arch.parameter_shapes()
        assert shapes["dec.stage0.block.proj.w"] == (2, 4, 1, 1)
        assert "enc.stage0.block.proj.w" not in shapes


class TestModel:

    def test_encode_decode_shapes(self, tiny_model, tiny_fields):
        z = encode(tiny_model, tiny_fields)
        assert z.shape == (12, 2, 3, 4)
        assert decode(tiny_model, z).shape == tiny_fields.shape

    def test_padded_grid_round_trips_extent(self, rng):
        arch = CaeArchitecture(channels=1, height=5, width=8, stem_channels=2, stage_channels=(2,),
                               latent_channels=1, reduction=1)
        model = build_model(arch)
        X = rng.normal(size=(2, 1, 5, 8))
        assert encode(model, X).shape == (2, 1, 3, 4)
        assert model.reconstruct(X).shape == X.shape

    def test_batched_matches_single_pass(self, tiny_model, tiny_fields):
        assert np.allclose(encode_batched(tiny_model, tiny_fields, batch_size=5), encode(tiny_model, tiny_fields))

    def test_rejects_wrong_grid(self, tiny_model, rng):
        with pytest.raises(ShapeError):
            encode(tiny_model, rng.normal(size=(1, 2, 7, 8)))

    def test_rejects_wrong_latent(self, tiny_model, rng):
        with pytest.raises(ShapeError):
            decode(tiny_model, rng.normal(size=(1, 3, 3, 4)))

    def test_same_seed_same_weights(self, tiny_arch):
        a, b = build_model(tiny_arch, seed=5), build_model(tiny_arch, seed=5)
        assert np.array_equal(a.params.flatten(), b.params.flatten())

    def test_parameter_names_are_checked(self, tiny_arch):
        params = build_model(tiny_arch).params.copy()
        params.pop("dec.head.b")
        with pytest.raises(ShapeError):
            CaeModel(tiny_arch, params)

    @pytest.mark.parametrize("init", ["zeros", "glorot"])
    def test_zero_field_maps_to_zero_without_attention(self, tiny_arch, init):
        """With zero biases and no attention the encoder and decoder fix the origin."""
        model = build_model(dataclasses.replace(tiny_arch, cbam=False), seed=2, init=init)
        z = encode(model, np.zeros((1,) + tiny_arch.input_shape))
        assert np.array_equal(z, np.zeros((1,) + tiny_arch.latent_shape))
        assert np.array_equal(decode(model, z), np.zeros((1,) + tiny_arch.input_shape))

    def test_parameter_gradient_matches_finite_differences(self, tiny_model, tiny_fields):
        """Sampled entries of the full-model loss gradient against central differences."""
        weights = latitude_weights(latitude_grid(6))
        batch = tiny_fields[:3]
        g = Graph()
        p = g.params(tiny_model.params)
        x = g.constant(batch)
        grads = g.backward(lw_rmse_node(g, tiny_model.reconstruct_node(g, x, p), x, weights))

        pick = np.random.default_rng(5)
        names = list(tiny_model.params)
        analytic, numeric = [], []
        for _ in range(16):
            name = names[pick.integers(len(names))]
            index = tuple(int(pick.integers(extent)) for extent in tiny_model.params[name].shape)

            def loss_at(value, name=name, index=index):
                params = {k: v.copy() for k, v in tiny_model.params.items()}
                params[name][index] = value[0]
                return lw_rmse(batch, tiny_model.with_params(params).reconstruct(batch), weights)

            analytic.append(grads[name][index])
            numeric.append(finite_difference(loss_at, np.array([tiny_model.params[name][index]]))[0])
        assert relative_error(analytic, numeric) <= 1e-3


class TestLoss:

    def test_matches_loop_oracle(self, rng):
        lat = latitude_grid(7)
        X, Xhat = rng.normal(size=(3, 2, 7, 5)), rng.normal(size=(3, 2, 7, 5))
        expected = lw_rmse_loop(X, Xhat, lat)
        weights = latitude_weights(lat)
        assert np.allclose(lw_rmse_per_variable(X, Xhat, weights), expected, rtol=0, atol=1e-12)
        assert abs(lw_rmse(X, Xhat, weights) - expected.mean()) <= 1e-12

    def test_uniform_weights_give_plain_rmse(self, rng):
        """With every latitude equal the weights are all one."""
        X, Xhat = rng.normal(size=(2, 3, 4, 4)), rng.normal(size=(2, 3, 4, 4))
        weights = latitude_weights(np.zeros(4))
        plain = np.sqrt(((X - Xhat) ** 2).mean(axis=(0, 2, 3)))
        assert np.allclose(lw_rmse_per_variable(X, Xhat, weights), plain)

    def test_pole_rows_are_ignored(self, rng):
        X = rng.normal(size=(1, 1, 5, 3))
        Xhat = X.copy()
        Xhat[:, :, 0] += 100.0
        Xhat[:, :, -1] -= 100.0
        assert lw_rmse(X, Xhat, latitude_weights(latitude_grid(5))) == 0.0

    def test_pooled_differs_from_mean_over_variables(self):
        X = np.zeros((1, 2, 1, 1))
        Xhat = np.array([1.0, 3.0]).reshape(1, 2, 1, 1)
        weights = LatitudeWeights.uniform(1)
        assert lw_rmse(X, Xhat, weights) == pytest.approx(2.0)
        assert lw_rmse_pooled(X, Xhat, weights) == pytest.approx(np.sqrt(5.0))

    def test_weights_length_checked(self, rng):
        with pytest.raises(ShapeError):
            lw_rmse(rng.normal(size=(1, 1, 3, 3)), rng.normal(size=(1, 1, 3, 3)), np.ones(4))

    def test_node_gradient(self, rng):
        lat = latitude_grid(5)
        weights = latitude_weights(lat)
        target = rng.normal(size=(2, 2, 5, 3))
        prediction = rng.normal(size=(2, 2, 5, 3))

        def value_and_graph(pred):
            g = Graph()
            p = g.param("prediction", pred)
            return g, lw_rmse_node(g, p, g.constant(target), weights)

        g, loss = value_and_graph(prediction)
        assert float(loss.value.reshape(())) == pytest.approx(lw_rmse(target, prediction, weights), abs=1e-12)
        analytic = g.backward(loss)["prediction"]
        numeric = finite_difference(lambda x: float(value_and_graph(x)[1].value.sum()), prediction)
        assert relative_error(analytic, numeric) <= 1e-5


class TestScheduler:

    def test_decays_after_patience(self):
        scheduler = ReduceLROnPlateau(1.0, patience=2, factor=0.5, min_lr=0.1)
        assert scheduler.step(1.0) == 1.0
        assert scheduler.step(1.0) == 1.0
        assert scheduler.step(1.0) == 0.5

    def test_improvement_resets_counter(self):
        scheduler = ReduceLROnPlateau(1.0, patience=2, factor=0.5)
        scheduler.step(1.0)
        scheduler.step(1.5)
        scheduler.step(0.9)
        assert scheduler.step(1.0) == 1.0

    def test_never_drops_below_floor(self):
        scheduler = ReduceLROnPlateau(1.0, patience=1, factor=0.5, min_lr=0.3)
        for _ in range(10):
            scheduler.step(1.0)
        assert scheduler.lr == 0.3


class TestTrainer:

    def test_config_validation(self):
        with pytest.raises(ConfigurationError, match="train.decay_factor"):
            TrainConfig(decay_factor=1.5).validate()
        with pytest.raises(ConfigurationError, match="train.batch_size"):
            TrainConfig(batch_size=0).validate()

    def test_short_run_records_trace(self, tiny_model, tiny_fields, quick_config):
        result = train(tiny_model, tiny_fields, quick_config)
        assert [r.epoch for r in result.trace] == [1, 2]
        assert all(np.isfinite(r.train_loss) and np.isfinite(r.val_loss) for r in result.trace)
        assert result.trace[0].lr == quick_config.learning_rate
        assert not np.array_equal(result.model.params.flatten(), tiny_model.params.flatten())

    def test_input_model_is_untouched(self, tiny_model, tiny_fields, quick_config):
        before = tiny_model.params.flatten().copy()
        train(tiny_model, tiny_fields, quick_config)
        assert np.array_equal(tiny_model.params.flatten(), before)

    def test_deterministic_for_a_seed(self, tiny_model, tiny_fields, quick_config):
        a = train(tiny_model, tiny_fields, quick_config)
        b = train(tiny_model, tiny_fields, quick_config)
        assert np.array_equal(a.model.params.flatten(), b.model.params.flatten())
        assert a.trace == b.trace

    def test_training_reduces_loss(self, tiny_model, rng, tiny_arch):
        """A smooth field is learnable in a handful of epochs."""
        lat = latitude_grid(tiny_arch.height)
        base = np.cos(np.deg2rad(lat))[:, None] * np.ones(tiny_arch.width)
        fields = np.stack([np.stack([a * base, -a * base]) for a in np.linspace(-1, 1, 16)])
        cfg = TrainConfig(learning_rate=1e-2, batch_size=8, epochs=15, val_fraction=0.0, seed=0)
        result = train(tiny_model, fields, cfg, weights=latitude_weights(lat))
        assert result.trace[-1].train_loss < result.trace[0].train_loss

    def test_zero_learning_rate_leaves_parameters(self, tiny_model, tiny_fields, quick_config):
        cfg = dataclasses.replace(quick_config, learning_rate=0.0, epochs=3)
        result = train(tiny_model, tiny_fields, cfg)
        assert np.array_equal(result.model.params.flatten(), tiny_model.params.flatten())
        assert all(r.lr == 0.0 for r in result.trace)

    @pytest.mark.slow
    def test_memorises_a_single_sample(self, tiny_arch):
        arch = dataclasses.replace(tiny_arch, cbam=False)
        lat = np.deg2rad(latitude_grid(arch.height))[:, None]
        lon = np.linspace(0.0, 2.0 * np.pi, arch.width, endpoint=False)[None, :]
        sample = np.stack([np.cos(lat) * np.sin(lon), np.sin(lat) + 0.5 * np.cos(lon)])[None]
        cfg = TrainConfig(learning_rate=1e-2, batch_size=1, epochs=200, val_fraction=0.0, seed=0)
        result = train(build_model(arch, seed=1), sample, cfg)
        assert result.trace[-1].train_loss < 0.1 * result.trace[0].train_loss

    @pytest.mark.slow
    def test_trained_round_trip_beats_mean_field(self, tiny_model, tiny_arch):
        """Held-out amplitudes reconstruct better than the training mean does."""
        lat = latitude_grid(tiny_arch.height)
        base = np.cos(np.deg2rad(lat))[:, None] * np.ones(tiny_arch.width)

        def family(amplitudes):
            return np.stack([np.stack([a * base, -a * base]) for a in amplitudes])

        training = family(np.linspace(-1, 1, 16))
        held_out = family([-0.7, -0.3, 0.3, 0.7])
        weights = latitude_weights(lat)
        cfg = TrainConfig(learning_rate=1e-2, batch_size=8, epochs=150, val_fraction=0.0, seed=0)
        model = train(tiny_model, training, cfg, weights=weights).model
        mean_field = np.broadcast_to(training.mean(axis=0), held_out.shape)
        assert lw_rmse(held_out, model.reconstruct(held_out), weights) < lw_rmse(held_out, mean_field, weights)

    @pytest.mark.slow
    def test_wider_latent_fits_no_worse(self, tiny_arch):
        """Doubling the latent channels does not raise the training loss (3-seed average)."""
        fields = np.random.default_rng(9).normal(size=(16,) + tiny_arch.input_shape)
        cfg = TrainConfig(learning_rate=1e-2, batch_size=8, epochs=60, val_fraction=0.0)
        weights = LatitudeWeights.uniform(tiny_arch.height)

        def final_loss(latent_channels):
            arch = dataclasses.replace(tiny_arch, latent_channels=latent_channels)
            losses = []
            for seed in range(3):
                model = train(build_model(arch, seed=seed), fields, dataclasses.replace(cfg, seed=seed)).model
                losses.append(evaluate_loss(model, fields, weights))
            return np.mean(losses)

        assert final_loss(2 * tiny_arch.latent_channels) <= 1.05 * final_loss(tiny_arch.latent_channels)

    def test_resume_continues_numbering_and_rate(self, tiny_model, tiny_fields, quick_config):
        first = train(tiny_model, tiny_fields, quick_config)
        second = train(first.model, tiny_fields, quick_config, resume_trace=first.trace)
        assert [r.epoch for r in second.trace] == [3, 4]
        assert second.trace[0].lr == first.trace[-1].lr

    def test_non_finite_loss_raises(self, tiny_model, tiny_fields, quick_config):
        corrupt = tiny_fields.copy()
        corrupt[0, 0, 0, 0] = np.nan
        with np.errstate(all="ignore"), pytest.raises(NumericalError):
            train(tiny_model, corrupt, dataclasses.replace(quick_config, batch_size=len(corrupt)))

    def test_trace_csv_round_trip(self, tiny_model, tiny_fields, quick_config, tmp_path):
        result = train(tiny_model, tiny_fields, quick_config)
        path = write_trace(tmp_path / "loss.csv", result.trace)
        assert read_trace(path) == result.trace

    def test_trace_columns_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("epoch,loss\n1,0.5\n")
        with pytest.raises(FormatError):
            read_trace(path)


class TestCheckpoint:

    @pytest.mark.parametrize("cbam", [True, False])
    def test_round_trip(self, tiny_arch, tmp_path, rng, cbam):
        model = build_model(dataclasses.replace(tiny_arch, cbam=cbam), seed=11)
        path = save_model(tmp_path / "cae.bin", model)
        loaded = load_model(path)
        assert loaded.arch == model.arch
        X = rng.normal(size=(2,) + tiny_arch.input_shape)
        assert np.array_equal(loaded.reconstruct(X), model.reconstruct(X))

    def test_header_layout(self, tiny_model, tmp_path):
        raw = save_model(tmp_path / "cae.bin", tiny_model).read_bytes()
        assert raw[:7] == b"ROMCAE1"
        assert np.frombuffer(raw[7:27], dtype="<u4").tolist() == [2, 6, 8, 4, 1]

    def test_bad_magic(self, tiny_model, tmp_path):
        path = save_model(tmp_path / "cae.bin", tiny_model)
        path.write_bytes(b"ROMPOD1" + path.read_bytes()[7:])
        with pytest.raises(FormatError, match="bad magic"):
            load_model(path)

    def test_truncated(self, tiny_model, tmp_path):
        path = save_model(tmp_path / "cae.bin", tiny_model)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_model(path)

    def test_trailing_bytes(self, tiny_model, tmp_path):
        path = save_model(tmp_path / "cae.bin", tiny_model)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            load_model(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
