"""Tests for grids, synthetic generation, ROMDAT1 I/O, splitting, normalization and manifests."""
import numpy as np
import pytest

from src.data import (
    DatasetDescriptor,
    GridSnapshot,
    ManifestEntry,
    SnapshotSequence,
    SynthConfig,
    denormalize,
    discrete_divergence,
    draw_components,
    holdout_boundary,
    latitude_grid,
    latitude_weights,
    longitude_grid,
    normalize,
    normalize_splits,
    read_manifest,
    read_snapshots,
    record_in_manifest,
    split,
    synth_fields_at,
    synth_generate,
    write_snapshots,
)
from src.utils.error_handler import ConfigurationError, DataError, FormatError, ShapeError


@pytest.fixture
def synth_sequence(small_synth):
    return synth_generate(small_synth, seed=7)


class TestGrid:

    def test_latitudes_include_poles(self):
        lat = latitude_grid(5)
        assert np.array_equal(lat, [-90.0, -45.0, 0.0, 45.0, 90.0])

    def test_longitudes_exclude_360(self):
        lon = longitude_grid(8)
        assert lon[0] == 0.0 and lon[-1] == 315.0

    def test_weights_have_unit_mean(self):
        weights = latitude_weights(latitude_grid(33))
        assert weights.w.mean() == pytest.approx(1.0, abs=1e-14)
        assert weights.w[0] == 0.0 and weights.w[-1] == 0.0
        assert np.allclose(weights.w, weights.w[::-1])

    def test_equator_weight(self):
        weights = latitude_weights(np.array([-60.0, 0.0, 60.0]))
        assert np.allclose(weights.w, [0.75, 1.5, 0.75])

    def test_rejects_out_of_range_latitudes(self):
        with pytest.raises(DataError):
            latitude_weights(np.array([0.0, 95.0]))

    def test_rejects_pole_only_grid(self):
        with pytest.raises(DataError, match="pole"):
            latitude_weights(np.array([-90.0, 90.0]))


class TestSynthetic:

    def test_deterministic_for_a_seed(self, small_synth):
        a, b = synth_generate(small_synth, seed=3), synth_generate(small_synth, seed=3)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, synth_generate(small_synth, seed=4).values)

    def test_shape_and_timing(self, synth_sequence, small_synth):
        assert synth_sequence.values.shape == (240, 4, 12, 16)
        assert synth_sequence.descriptor.variables == ("u10", "v10", "T2m", "Pmsl")
        assert np.array_equal(synth_sequence.timestamps, np.arange(240) * 6.0)

    def test_matches_closed_form(self, synth_sequence, small_synth):
        """Any snapshot can be re-evaluated directly from the component draws."""
        comp = draw_components(small_synth, seed=7)
        times = synth_sequence.timestamps[[0, 100, 239]]
        direct = synth_fields_at(small_synth, comp, times)
        assert np.allclose(direct, synth_sequence.values[[0, 100, 239]], rtol=1e-12, atol=1e-9)

    def test_chunk_boundaries_are_seamless(self):
        cfg = SynthConfig(height=8, width=8, steps=300, n_waves=2, n_noise=1)
        seq = synth_generate(cfg, seed=0)
        direct = synth_fields_at(cfg, draw_components(cfg, 0), seq.timestamps[254:258])
        assert np.allclose(direct, seq.values[254:258], rtol=1e-12, atol=1e-9)

    def test_winds_are_non_divergent(self, synth_sequence):
        u, v = synth_sequence.values[:, 0], synth_sequence.values[:, 1]
        div = discrete_divergence(u, v)
        assert div.shape == (240, 10, 16)
        assert np.max(np.abs(div)) <= 1e-9 * max(1.0, np.max(np.abs(u)))

    def test_physical_ranges(self, synth_sequence):
        t2m, pmsl = synth_sequence.values[:, 2], synth_sequence.values[:, 3]
        assert 200.0 < t2m.min() and t2m.max() < 330.0
        assert 95000.0 < pmsl.min() and pmsl.max() < 108000.0

    def test_fields_evolve(self, synth_sequence):
        assert not np.allclose(synth_sequence.values[0], synth_sequence.values[10])

    def test_single_wave_repeats_after_one_period(self):
        """Without noise or season, snapshots one wave period apart agree."""
        cfg = SynthConfig(height=8, width=8, steps=1, n_waves=1, n_noise=0, season_amplitude=0.0)
        comp = draw_components(cfg, seed=2)
        period = 2.0 * np.pi / abs(comp.wave_omega[0])
        pair = synth_fields_at(cfg, comp, [5.0, 5.0 + period])
        assert np.allclose(pair[0], pair[1], rtol=0, atol=1e-6)

    @pytest.mark.parametrize("override,key", [
        ({"height": 4}, "grid.height"),
        ({"n_waves": 8}, "grid.n_waves"),
        ({"dt_hours": 0.0}, "grid.dt_hours"),
    ])
    def test_config_validation(self, override, key):
        with pytest.raises(ConfigurationError, match=key):
            SynthConfig(width=16, **override).validate()


class TestSnapshotFile:

    def test_round_trip(self, synth_sequence, tmp_path):
        path = write_snapshots(tmp_path / "data.bin", synth_sequence[:20])
        loaded = read_snapshots(path)
        assert loaded.descriptor.variables == synth_sequence.descriptor.variables
        assert np.array_equal(loaded.values, synth_sequence.values[:20])
        assert np.array_equal(loaded.timestamps, synth_sequence.timestamps[:20])
        assert np.array_equal(loaded.descriptor.lat, synth_sequence.descriptor.lat)

    def test_header(self, make_sequence, tmp_path):
        seq = make_sequence(np.zeros((3, 2, 4, 5)), t0=12.0)
        raw = write_snapshots(tmp_path / "data.bin", seq).read_bytes()
        assert raw[:7] == b"ROMDAT1"
        assert np.frombuffer(raw[7:23], dtype="<u4").tolist() == [2, 4, 5, 3]
        names_end = 23 + 2 * (4 + 2)
        assert np.frombuffer(raw[names_end + 8 * 9:names_end + 8 * 11], dtype="<f8").tolist() == [12.0, 6.0]
        assert len(raw) == names_end + 8 * (4 + 5 + 2 + 3 * 2 * 4 * 5)

    def test_zero_snapshots(self, make_sequence, tmp_path):
        seq = make_sequence(np.zeros((0, 1, 2, 2)))
        loaded = read_snapshots(write_snapshots(tmp_path / "empty.bin", seq))
        assert len(loaded) == 0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "data.bin"
        path.write_bytes(b"ROMDATX" + bytes(16))
        with pytest.raises(FormatError, match="bad magic"):
            read_snapshots(path)

    def test_truncated_payload(self, make_sequence, rng, tmp_path):
        path = write_snapshots(tmp_path / "data.bin", make_sequence(rng.normal(size=(4, 1, 2, 2))))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError, match="declares 4 snapshots"):
            read_snapshots(path)

    def test_empty_extents(self, tmp_path):
        path = tmp_path / "data.bin"
        path.write_bytes(b"ROMDAT1" + np.array([0, 2, 2, 1], dtype="<u4").tobytes())
        with pytest.raises(FormatError, match="empty extents"):
            read_snapshots(path)

    def test_irregular_timestamps_are_refused(self, make_sequence, tmp_path):
        seq = make_sequence(np.zeros((3, 1, 2, 2)))
        irregular = SnapshotSequence(seq.descriptor, [0.0, 6.0, 18.0], seq.values)
        with pytest.raises(DataError, match="uniformly spaced"):
            write_snapshots(tmp_path / "data.bin", irregular)


class TestContainers:

    def test_descriptor_validation(self):
        with pytest.raises(DataError):
            DatasetDescriptor(("a",), [0.0, 10.0, 5.0], [0.0])
        with pytest.raises(DataError):
            DatasetDescriptor(("a",), [0.0], [0.0, 360.0])

    def test_sequence_rejects_non_finite(self, make_sequence):
        values = np.zeros((2, 1, 2, 2))
        values[1, 0, 0, 0] = np.nan
        with pytest.raises(DataError, match="finite"):
            make_sequence(values)

    def test_sequence_rejects_wrong_shape(self, make_sequence):
        seq = make_sequence(np.zeros((2, 1, 2, 2)))
        with pytest.raises(ShapeError):
            SnapshotSequence(seq.descriptor, seq.timestamps, np.zeros((2, 1, 2, 3)))

    def test_indexing(self, synth_sequence):
        snap = synth_sequence[5]
        assert isinstance(snap, GridSnapshot)
        assert snap.timestamp == 30.0
        assert len(synth_sequence[10:20]) == 10

    def test_from_snapshots(self, synth_sequence):
        rebuilt = SnapshotSequence.from_snapshots(synth_sequence.descriptor, [synth_sequence[i] for i in range(3)])
        assert np.array_equal(rebuilt.values, synth_sequence.values[:3])


class TestSplit:

    def test_boundary_goes_to_test_side(self, synth_sequence):
        train, test = split(synth_sequence, 60.0)
        assert len(train) == 10 and test.timestamps[0] == 60.0
        assert train.timestamps[-1] < 60.0

    def test_boundary_between_snapshots(self, synth_sequence):
        train, test = split(synth_sequence, 61.0)
        assert len(train) == 11

    def test_empty_side_raises(self, synth_sequence):
        with pytest.raises(DataError, match="training side"):
            split(synth_sequence, 0.0)
        with pytest.raises(DataError, match="test side"):
            split(synth_sequence, 1e6)

    def test_holdout_boundary(self, synth_sequence):
        boundary = holdout_boundary(synth_sequence, 0.1)
        assert boundary == synth_sequence.timestamps[216]
        train, test = split(synth_sequence, boundary)
        assert (len(train), len(test)) == (216, 24)

    def test_holdout_fraction_range(self, synth_sequence):
        with pytest.raises(DataError):
            holdout_boundary(synth_sequence, 1.0)


class TestNormalization:

    def test_training_statistics(self, synth_sequence):
        train, test = split(synth_sequence, holdout_boundary(synth_sequence))
        descriptor, (ntrain, ntest) = normalize_splits(train, test)
        assert np.allclose(ntrain.values.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        assert np.allclose(ntrain.values.std(axis=(0, 2, 3)), 1.0, atol=1e-10)
        assert np.allclose(descriptor.mean, train.values.mean(axis=(0, 2, 3)))
        expected = (test.values - descriptor.mean[:, None, None]) / descriptor.std[:, None, None]
        assert np.allclose(ntest.values, expected)

    def test_denormalize_inverts(self, synth_sequence):
        normalized, descriptor = normalize(synth_sequence)
        assert np.allclose(denormalize(normalized.values, descriptor), synth_sequence.values, rtol=1e-12)
        assert np.allclose(denormalize(normalized.values[0], descriptor), synth_sequence.values[0], rtol=1e-12)

    def test_constant_variable_raises(self, make_sequence, rng):
        values = rng.normal(size=(5, 2, 2, 2))
        values[:, 1] = 3.0
        with pytest.raises(DataError, match="zero variance"):
            normalize(make_sequence(values, variables=("a", "flat")))

    def test_denormalize_needs_statistics(self, synth_sequence):
        with pytest.raises(DataError):
            denormalize(synth_sequence.values, synth_sequence.descriptor)

    def test_positive_std_required(self):
        with pytest.raises(DataError):
            DatasetDescriptor(("a",), [0.0], [0.0], mean=[0.0], std=[0.0])


class TestManifest:

    def test_record_and_replace(self, synth_sequence, tmp_path):
        manifest = tmp_path / "manifest.csv"
        record_in_manifest(manifest, ManifestEntry.for_sequence("a.bin", synth_sequence))
        record_in_manifest(manifest, ManifestEntry.for_sequence("b.bin", synth_sequence[:10]))
        record_in_manifest(manifest, ManifestEntry.for_sequence("a.bin", synth_sequence[:5]))
        entries = read_manifest(manifest)
        assert [e.path for e in entries] == ["b.bin", "a.bin"]
        assert entries[1].count == 5 and entries[1].t_end == 24.0
        assert entries[0].variables == "u10;v10;T2m;Pmsl"

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("path,count\na.bin,3\n")
        with pytest.raises(FormatError, match="lacks columns"):
            read_manifest(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
