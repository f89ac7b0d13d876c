"""Binary dataset format, splitting, and feature assembly."""

import json
import os

import numpy as np
import pytest

from sslpos.dataset import (
    FILE_SUFFIX,
    Dataset,
    FormatError,
    feature_dim,
    featurize,
    featurize_batch,
    read_dataset,
    split,
    subset_labeled,
    write_dataset,
)


class TestRoundTrip:
    def test_labeled_round_trip_is_exact(self, tiny_labeled, tmp_path):
        path = str(tmp_path / ("a" + FILE_SUFFIX))
        write_dataset(tiny_labeled, path)
        back = read_dataset(path)
        np.testing.assert_array_equal(back.cirs, tiny_labeled.cirs)
        np.testing.assert_array_equal(back.positions, tiny_labeled.positions)
        assert back.manifest == tiny_labeled.manifest

    def test_unlabeled_round_trip(self, tiny_unlabeled, tmp_path):
        path = str(tmp_path / ("u" + FILE_SUFFIX))
        write_dataset(tiny_unlabeled, path)
        back = read_dataset(path)
        assert back.positions is None
        np.testing.assert_array_equal(back.cirs, tiny_unlabeled.cirs)

    def test_manifest_sidecar_is_json(self, tiny_labeled, tmp_path):
        path = str(tmp_path / ("a" + FILE_SUFFIX))
        write_dataset(tiny_labeled, path)
        with open(path + ".manifest.json") as f:
            sidecar = json.load(f)
        assert sidecar == tiny_labeled.manifest

    def test_missing_sidecar_still_reads(self, tiny_labeled, tmp_path):
        path = str(tmp_path / ("a" + FILE_SUFFIX))
        write_dataset(tiny_labeled, path)
        os.remove(path + ".manifest.json")
        back = read_dataset(path)
        np.testing.assert_array_equal(back.cirs, tiny_labeled.cirs)


class TestCorruption:
    def _written(self, ds, tmp_path):
        path = str(tmp_path / ("a" + FILE_SUFFIX))
        write_dataset(ds, path)
        return path

    def test_bad_magic_names_offset_zero(self, tiny_labeled, tmp_path):
        path = self._written(tiny_labeled, tmp_path)
        blob = bytearray(open(path, "rb").read())
        blob[:4] = b"NOPE"
        open(path, "wb").write(bytes(blob))
        with pytest.raises(FormatError, match="byte offset 0"):
            read_dataset(path)

    def test_unsupported_version(self, tiny_labeled, tmp_path):
        path = self._written(tiny_labeled, tmp_path)
        blob = bytearray(open(path, "rb").read())
        blob[4:8] = (99).to_bytes(4, "little")
        open(path, "wb").write(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            read_dataset(path)

    def test_truncated_payload_names_offset(self, tiny_labeled, tmp_path):
        path = self._written(tiny_labeled, tmp_path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-10])
        with pytest.raises(FormatError, match="byte offset"):
            read_dataset(path)


class TestShardDirectory:
    def test_lexicographic_concatenation(self, tiny_scenario, tiny_params, tmp_path):
        from sslpos.channel_sim import generate_dataset

        a = generate_dataset(tiny_scenario, tiny_params, 5, True, seed=1)
        b = generate_dataset(tiny_scenario, tiny_params, 3, True, seed=2)
        write_dataset(b, str(tmp_path / ("part_b" + FILE_SUFFIX)))
        write_dataset(a, str(tmp_path / ("part_a" + FILE_SUFFIX)))
        merged = read_dataset(str(tmp_path))
        assert len(merged) == 8
        np.testing.assert_array_equal(merged.cirs[:5], a.cirs)
        np.testing.assert_array_equal(merged.cirs[5:], b.cirs)
        assert len(merged.manifest["shards"]) == 2

    def test_empty_directory_raises(self, tmp_path):
        with pytest.raises(FormatError, match="shards"):
            read_dataset(str(tmp_path))

    def test_mismatched_shards_raise(self, tiny_scenario, tiny_params, tmp_path):
        from sslpos.channel_sim import generate_dataset

        a = generate_dataset(tiny_scenario, tiny_params, 4, True, seed=1)
        b = generate_dataset(tiny_scenario, tiny_params, 4, False, seed=2)
        write_dataset(a, str(tmp_path / ("a" + FILE_SUFFIX)))
        write_dataset(b, str(tmp_path / ("b" + FILE_SUFFIX)))
        with pytest.raises(FormatError, match="disagree"):
            read_dataset(str(tmp_path))


class TestSplit:
    def test_sizes_and_disjointness(self, tiny_labeled):
        train, test = split(tiny_labeled, 16, 8, seed=5)
        assert len(train) == 16 and len(test) == 8
        train_keys = {bytes(c.tobytes()) for c in train.cirs}
        test_keys = {bytes(c.tobytes()) for c in test.cirs}
        assert not train_keys & test_keys

    def test_split_is_deterministic(self, tiny_labeled):
        a1, b1 = split(tiny_labeled, 16, 8, seed=5)
        a2, b2 = split(tiny_labeled, 16, 8, seed=5)
        np.testing.assert_array_equal(a1.cirs, a2.cirs)
        np.testing.assert_array_equal(b1.positions, b2.positions)

    def test_labels_travel_with_samples(self, tiny_labeled):
        train, _ = split(tiny_labeled, 16, 8, seed=5)
        lookup = {
            bytes(c.tobytes()): tuple(p)
            for c, p in zip(tiny_labeled.cirs, tiny_labeled.positions)
        }
        for c, p in zip(train.cirs, train.positions):
            assert lookup[bytes(c.tobytes())] == tuple(p)

    def test_oversubscription_raises(self, tiny_labeled):
        with pytest.raises(ValueError):
            split(tiny_labeled, 20, 8, seed=5)

    def test_subset_counts_nest(self, tiny_labeled):
        small = subset_labeled(tiny_labeled, 6, seed=9)
        large = subset_labeled(tiny_labeled, 12, seed=9)
        np.testing.assert_array_equal(small.cirs, large.cirs[:6])


class TestFeaturize:
    def test_feature_dim(self):
        assert feature_dim((18, 4, 64)) == 18432
        assert feature_dim((9, 4, 32)) == 4608
        assert feature_dim((4, 4, 16)) == 1024

    def test_unit_energy_halves(self, tiny_labeled):
        x = featurize(tiny_labeled.cirs[0], tiny_labeled.cirs[1])
        assert x.shape == (1024,)
        assert x.dtype == np.float64
        half = x.size // 2
        assert np.sum(x[:half] ** 2) == pytest.approx(1.0, abs=1e-9)
        assert np.sum(x[half:] ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_interleaved_layout(self):
        cir = np.zeros((1, 2, 3), dtype=np.complex64)
        cir[0, 0, 0] = 3.0 + 4.0j  # single element, energy 25 -> (0.6, 0.8)
        x = featurize(cir, cir)
        assert x[0] == pytest.approx(0.6)
        assert x[1] == pytest.approx(0.8)
        assert not np.any(x[2 : x.size // 2])

    def test_reference_half_mirrors_measured_when_equal(self, tiny_labeled):
        x = featurize(tiny_labeled.cirs[0], tiny_labeled.cirs[0])
        half = x.size // 2
        np.testing.assert_array_equal(x[:half], x[half:])

    def test_batch_matches_single(self, tiny_labeled):
        xs = featurize_batch(tiny_labeled.cirs[:3], tiny_labeled.cirs[3:6])
        for i in range(3):
            np.testing.assert_allclose(
                xs[i], featurize(tiny_labeled.cirs[i], tiny_labeled.cirs[3 + i])
            )

    def test_zero_energy_sample_raises_with_index(self, tiny_labeled):
        cirs = tiny_labeled.cirs[:3].copy()
        cirs[2] = 0
        with pytest.raises(ValueError, match="2"):
            featurize_batch(cirs, cirs)

    def test_scale_invariance(self, tiny_labeled):
        a = featurize(tiny_labeled.cirs[0], tiny_labeled.cirs[1])
        b = featurize(7.0 * tiny_labeled.cirs[0], 0.1 * tiny_labeled.cirs[1])
        np.testing.assert_allclose(a, b, rtol=1e-6)


class TestTake:
    def test_take_records_history_note(self, tiny_labeled):
        sub = tiny_labeled.take(np.array([3, 1, 2]), note="reorder")
        assert len(sub) == 3
        np.testing.assert_array_equal(sub.cirs[0], tiny_labeled.cirs[3])
        assert sub.manifest["history"][-1] == "reorder"

    def test_dataset_validates_position_pairing(self, tiny_labeled):
        with pytest.raises(ValueError):
            Dataset(
                cirs=tiny_labeled.cirs,
                positions=tiny_labeled.positions[:3],
                manifest={},
            )
