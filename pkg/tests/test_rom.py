"""Tests for delay embedding, operator inference, rollout and latent codecs."""
import logging

import numpy as np
import pytest

from src.cae import build_model, save_model
from src.pod import fit_pod, save_basis
from src.rom import (
    CaeCodec,
    DelayRom,
    IdentityCodec,
    LatentCodec,
    LatentSequence,
    PodCodec,
    build_delay_matrices,
    delay_vector,
    encode_sequence,
    equation_budget,
    fit_codec_operator,
    fit_operator,
    forecast,
    load_codec,
    load_operator,
    one_step_residual,
    rollout,
    save_operator,
)
from src.utils.error_handler import (
    ConfigurationError,
    FormatError,
    InsufficientDataError,
    NumericalError,
    ShapeError,
)
from tests.oracles import normal_equations, simulate_delayed, stable_delayed_operator


@pytest.fixture
def true_operator(rng):
    """n=6, d=3 operator whose companion matrix has spectral radius 0.95."""
    return stable_delayed_operator(6, 3, 0.95, rng)


class TestDelayEmbedding:

    def test_columns_are_newest_first(self):
        states = np.arange(10.0).reshape(5, 2)
        z_td, z_future = build_delay_matrices(LatentSequence(states), 2)
        assert z_td.shape == (4, 3) and z_future.shape == (2, 3)
        assert np.array_equal(z_td[:, 0], np.concatenate([states[1], states[0]]))
        assert np.array_equal(z_future[:, 0], states[2])
        assert np.array_equal(z_future[:, -1], states[4])

    def test_depth_one_pairs_consecutive_states(self):
        states = np.arange(4.0)[:, None]
        z_td, z_future = build_delay_matrices(states, 1)
        assert np.array_equal(z_td, [[0.0, 1.0, 2.0]])
        assert np.array_equal(z_future, [[1.0, 2.0, 3.0]])

    def test_delay_vector(self):
        window = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert np.array_equal(delay_vector(window), [5.0, 6.0, 3.0, 4.0, 1.0, 2.0])

    def test_depth_must_leave_a_target(self):
        with pytest.raises(InsufficientDataError):
            build_delay_matrices(np.zeros((4, 2)), 4)

    def test_depth_must_be_positive(self):
        with pytest.raises(ConfigurationError, match="rom.d"):
            build_delay_matrices(np.zeros((4, 2)), 0)

    def test_latent_sequence_flattens_channel_major(self):
        latents = np.arange(24.0).reshape(2, 3, 2, 2)
        seq = LatentSequence.from_latents(latents, dt=3.0, t0=12.0)
        assert seq.n == 12
        assert np.array_equal(seq.states[1], latents[1].ravel())
        assert np.array_equal(seq.timestamps, [12.0, 15.0])


class TestOperatorFit:

    def test_recovers_operator_from_exact_data(self, rng, true_operator):
        """500 exact (delay vector, next state) pairs determine L."""
        z_td = rng.normal(size=(18, 500))
        rom = fit_operator(z_td, true_operator @ z_td)
        assert rom.d == 3 and rom.n == 6
        assert np.max(np.abs(rom.L - true_operator)) <= 1e-8

    def test_recovered_rollout_tracks_truth(self, rng, true_operator):
        z_td = rng.normal(size=(18, 500))
        rom = fit_operator(z_td, true_operator @ z_td)
        initial = rng.normal(size=(3, 6))
        expected = simulate_delayed(true_operator, 3, initial, 50)[3:]
        assert np.max(np.abs(rollout(rom, initial, 50) - expected)) <= 1e-6

    def test_recovers_from_single_trajectory(self, rng):
        L = stable_delayed_operator(3, 2, 0.99, rng)
        states = simulate_delayed(L, 2, rng.normal(size=(2, 3)), 58)
        z_td, z_future = build_delay_matrices(states, 2)
        rom = fit_operator(z_td, z_future)
        assert np.allclose(rom.L, L, atol=1e-5)
        assert one_step_residual(rom, z_td, z_future) <= 1e-10

    def test_ridge_matches_normal_equations(self, rng):
        z_td, z_future = rng.normal(size=(8, 40)), rng.normal(size=(4, 40))
        rom = fit_operator(z_td, z_future, ridge=0.3)
        assert np.allclose(rom.L, normal_equations(z_td, z_future, 0.3), rtol=1e-10, atol=1e-12)

    def test_unregularized_matches_least_squares(self, rng):
        z_td, z_future = rng.normal(size=(6, 30)), rng.normal(size=(3, 30))
        rom = fit_operator(z_td, z_future)
        assert np.allclose(rom.L, normal_equations(z_td, z_future), atol=1e-10)

    def test_underdetermined_gives_minimum_norm(self, rng):
        z_td, z_future = rng.normal(size=(12, 3)), rng.normal(size=(4, 3))
        rom = fit_operator(z_td, z_future)
        assert np.allclose(rom.L, z_future @ np.linalg.pinv(z_td), atol=1e-10)
        assert one_step_residual(rom, z_td, z_future) <= 1e-10

    def test_rank_deficient_gives_minimum_norm(self, rng):
        """A delay row that is identically zero gets a zero column in L."""
        base = rng.normal(size=(3, 20))
        z_td = np.vstack([base, np.zeros((1, 20))])
        z_future = rng.normal(size=(2, 20))
        rom = fit_operator(z_td, z_future)
        expected = np.hstack([normal_equations(base, z_future), np.zeros((2, 1))])
        assert np.allclose(rom.L, expected, atol=1e-10)

    def test_least_squares_fit_is_not_improved_by_perturbation(self):
        """No small perturbation of the fitted L lowers the Frobenius residual."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            z_td, z_future = rng.normal(size=(6, 40)), rng.normal(size=(3, 40))
            L = fit_operator(z_td, z_future).L
            best = np.linalg.norm(z_future - L @ z_td)
            for _ in range(100):
                perturbed = L + 1e-3 * rng.normal(size=L.shape)
                assert np.linalg.norm(z_future - perturbed @ z_td) >= best

    def test_underdetermined_fit_warns_once(self, rng, caplog):
        fields = rng.normal(size=(4, 1, 2, 2))
        with caplog.at_level(logging.WARNING):
            fit_codec_operator(IdentityCodec((1, 2, 2)), fields, d=2)
        warnings = [r for r in caplog.records if "underdetermined" in r.getMessage()]
        assert len(warnings) == 1

    def test_negative_ridge(self, rng):
        with pytest.raises(ConfigurationError, match="rom.ridge"):
            fit_operator(rng.normal(size=(2, 5)), rng.normal(size=(2, 5)), ridge=-1.0)

    def test_shape_checks(self, rng):
        with pytest.raises(ShapeError):
            fit_operator(rng.normal(size=(5, 10)), rng.normal(size=(2, 10)))
        with pytest.raises(ShapeError):
            fit_operator(rng.normal(size=(4, 10)), rng.normal(size=(2, 9)))

    def test_non_finite_inputs(self, rng):
        z_td = rng.normal(size=(2, 5))
        z_td[0, 0] = np.nan
        with pytest.raises(NumericalError):
            fit_operator(z_td, rng.normal(size=(2, 5)))

    def test_equation_budget(self):
        budget = equation_budget(864, 8, 1800)
        assert budget.as_dict() == {
            "unknowns_per_row": 6912,
            "equations": 1792,
            "total_unknowns": 864 * 864 * 8,
            "underdetermined": True,
        }
        assert not equation_budget(10, 2, 100).underdetermined


class TestDelayRom:

    def test_spectral_radius(self, rng, true_operator):
        assert DelayRom(true_operator, 3).spectral_radius() == pytest.approx(0.95, rel=1e-9)

    def test_companion_layout(self):
        rom = DelayRom(np.arange(6.0).reshape(2, 6), 3)
        companion = rom.companion()
        assert companion.shape == (6, 6)
        assert np.array_equal(companion[:2], rom.L)
        assert np.array_equal(companion[2:, :4], np.eye(4))
        assert not companion[2:, 4:].any()

    def test_persistence_repeats_newest(self, rng):
        window = rng.normal(size=(2, 3))
        out = rollout(DelayRom.persistence(3, 2), window, 4)
        assert np.array_equal(out, np.repeat(window[-1:], 4, axis=0))

    def test_operator_is_read_only(self):
        rom = DelayRom(np.eye(2), 1)
        with pytest.raises(ValueError):
            rom.L[0, 0] = 5.0

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            DelayRom(np.zeros((2, 5)), 2)

    def test_rollout_window_shape(self):
        with pytest.raises(ShapeError):
            rollout(DelayRom.persistence(3, 2), np.zeros((3, 3)), 2)

    def test_zero_horizon(self):
        assert rollout(DelayRom.persistence(2, 1), np.zeros((1, 2)), 0).shape == (0, 2)

    def test_zero_operator_rolls_out_zeros(self, rng):
        out = rollout(DelayRom(np.zeros((3, 6)), 2), rng.normal(size=(2, 3)), 5)
        assert np.array_equal(out, np.zeros((5, 3)))

    @pytest.mark.parametrize("horizon", [1, 3, 7])
    def test_final_window_is_recoverable_from_outputs(self, rng, true_operator, horizon):
        """Continuing from the window rebuilt out of the outputs matches one longer rollout."""
        rom = DelayRom(true_operator, 3)
        initial = rng.normal(size=(3, 6))
        longer = rollout(rom, initial, horizon + 4)
        window = np.vstack([initial, longer[:horizon]])[-3:]
        assert np.array_equal(rollout(rom, window, 4), longer[horizon:])

    def test_scalar_state_window(self):
        rom = DelayRom(np.array([[0.5, 0.25]]), 2)
        assert np.allclose(rollout(rom, np.array([4.0, 2.0]), 1), [[0.5 * 2.0 + 0.25 * 4.0]])


class TestCodecs:

    def test_identity_round_trip(self, rng):
        codec = IdentityCodec((2, 3, 4))
        fields = rng.normal(size=(5, 2, 3, 4))
        assert codec.latent_dim == 24
        assert np.array_equal(codec.decode(codec.encode(fields)), fields)

    def test_pod_codec_is_lossless_at_full_rank(self, rng):
        fields = rng.normal(size=(6, 1, 3, 4))
        codec = PodCodec(fit_pod(fields, 5))
        assert codec.latent_dim == 5 and codec.field_shape == (1, 3, 4)
        assert np.allclose(codec.decode(codec.encode(fields)), fields, atol=1e-10)

    def test_cae_codec_shapes(self, rng, tiny_arch):
        codec = CaeCodec(build_model(tiny_arch))
        fields = rng.normal(size=(3,) + tiny_arch.input_shape)
        latents = codec.encode(fields)
        assert latents.shape == (3, 24)
        assert codec.decode(latents).shape == fields.shape

    def test_codecs_satisfy_protocol(self, tiny_arch, rng):
        assert isinstance(IdentityCodec((1, 1, 1)), LatentCodec)
        assert isinstance(CaeCodec(build_model(tiny_arch)), LatentCodec)
        assert isinstance(PodCodec(fit_pod(rng.normal(size=(4, 3)), 2)), LatentCodec)

    def test_field_shape_checked(self, rng):
        with pytest.raises(ShapeError):
            IdentityCodec((2, 3, 4)).encode(rng.normal(size=(1, 2, 3, 5)))

    def test_load_codec_dispatches_on_magic(self, tmp_path, tiny_arch, rng):
        cae_path = save_model(tmp_path / "cae.bin", build_model(tiny_arch))
        pod_path = save_basis(tmp_path / "pod.bin", fit_pod(rng.normal(size=(5, 2, 3, 4)), 2))
        assert isinstance(load_codec(cae_path), CaeCodec)
        assert isinstance(load_codec(pod_path), PodCodec)

    def test_load_codec_rejects_other_artifacts(self, tmp_path):
        path = save_operator(tmp_path / "op.bin", DelayRom.persistence(2, 1))
        with pytest.raises(FormatError, match="neither"):
            load_codec(path)


class TestForecast:

    def test_persistence_forecast_repeats_newest_field(self, rng):
        codec = IdentityCodec((1, 2, 2))
        initial = rng.normal(size=(2, 1, 2, 2))
        out = forecast(codec, DelayRom.persistence(4, 2), initial, 3)
        assert out.shape == (3, 1, 2, 2)
        assert np.array_equal(out[2], initial[-1])

    def test_latent_size_must_match(self, rng):
        with pytest.raises(ShapeError):
            forecast(IdentityCodec((1, 2, 2)), DelayRom.persistence(3, 1), rng.normal(size=(1, 1, 2, 2)), 2)

    def test_needs_exactly_d_fields(self, rng):
        with pytest.raises(ShapeError):
            forecast(IdentityCodec((1, 1, 2)), DelayRom.persistence(2, 2), rng.normal(size=(3, 1, 1, 2)), 2)

    def test_zero_horizon(self, rng):
        out = forecast(IdentityCodec((1, 1, 2)), DelayRom.persistence(2, 1), rng.normal(size=(1, 1, 1, 2)), 0)
        assert out.shape == (0, 1, 1, 2)

    def test_fit_codec_operator_on_linear_fields(self, rng):
        L = stable_delayed_operator(4, 2, 0.98, rng)
        states = simulate_delayed(L, 2, rng.normal(size=(2, 4)), 40)
        fields = states.reshape(len(states), 1, 2, 2)
        rom, budget, residual = fit_codec_operator(IdentityCodec((1, 2, 2)), fields, d=2)
        assert budget.unknowns_per_row == 8 and budget.equations == 40
        assert residual <= 1e-9
        assert np.allclose(rom.L, L, atol=1e-5)

    def test_encode_sequence_keeps_timing(self, rng, make_sequence):
        seq = make_sequence(rng.normal(size=(4, 1, 2, 2)), dt=3.0)
        latents = encode_sequence(IdentityCodec((1, 2, 2)), seq, dt=3.0)
        assert len(latents) == 4 and latents.n == 4 and latents.dt == 3.0


class TestCheckpoint:

    def test_round_trip(self, tmp_path, true_operator):
        rom = DelayRom(true_operator, 3)
        path = save_operator(tmp_path / "op.bin", rom)
        loaded = load_operator(path)
        assert loaded.d == 3
        assert np.array_equal(loaded.L, rom.L)
        assert path.read_bytes()[:6] == b"ROMOP1"
        assert path.stat().st_size == 6 + 8 + 8 * 6 * 18

    def test_zero_header(self, tmp_path):
        path = tmp_path / "op.bin"
        path.write_bytes(b"ROMOP1" + (0).to_bytes(4, "little") + (1).to_bytes(4, "little"))
        with pytest.raises(FormatError):
            load_operator(path)

    def test_payload_length_checked(self, tmp_path):
        path = save_operator(tmp_path / "op.bin", DelayRom.persistence(2, 2))
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(FormatError, match="truncated"):
            load_operator(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
