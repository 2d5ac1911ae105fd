import json

import numpy as np
import pytest

from v2xest.channel import default_channel_model, frame_rng, generate_response
from v2xest.dataset import (DatasetManifest, deinterleave, generate_dataset,
                            interleave, load_split, make_sample, read_samples,
                            split_paths, write_samples)
from v2xest.ofdm import build_frame_spec, qam16

SPEC = build_frame_spec()
C = qam16()
CH = default_channel_model()


class TestInterleave:
    def test_real_grid_zero_odd_columns(self):
        g = np.arange(6.0).reshape(2, 3) + 0j
        out = interleave(g)
        assert out.shape == (2, 6)
        assert np.all(out[:, 1::2] == 0.0)

    def test_hand_unrolled_layout(self):
        g = np.array([[0 + 0j, 1 + 0j],
                      [0 + 0j, 1 + 1j]])
        want = np.array([[0.0, 0.0, 1.0, 0.0],
                         [0.0, 0.0, 1.0, 1.0]])
        assert np.array_equal(interleave(g), want)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        g = rng.normal(size=(52, 50)) + 1j * rng.normal(size=(52, 50))
        assert np.array_equal(deinterleave(interleave(g)), g)

    def test_deinterleave_odd_columns_raises(self):
        with pytest.raises(ValueError):
            deinterleave(np.zeros((4, 5)))


class TestManifest:
    def test_default_split_sizes(self):
        m = DatasetManifest()
        assert (m.total, m.train, m.val, m.test) == (18_000, 12_000, 4_000, 2_000)
        assert m.train_snr_db == 40.0

    def test_split_ranges_contiguous_disjoint(self):
        m = DatasetManifest(total=10, train=6, val=2, test=2)
        r = [m.split_range(s) for s in ("train", "val", "test")]
        assert list(r[0]) == list(range(0, 6))
        assert list(r[1]) == list(range(6, 8))
        assert list(r[2]) == list(range(8, 10))

    def test_mismatched_split_rejected(self):
        with pytest.raises(ValueError):
            DatasetManifest(total=10, train=5, val=2, test=2)


class TestSample:
    def test_shapes_and_dtype(self):
        inp, tgt = make_sample(0, 0, 40.0, SPEC, CH, C)
        assert inp.shape == (52, 100) and inp.dtype == np.float32
        assert tgt.shape == (48, 100) and tgt.dtype == np.float32

    def test_target_is_true_channel(self):
        # targets must be the noiseless channel response, not an estimate
        seed, f = 5, 3
        _, tgt = make_sample(seed, f, 40.0, SPEC, CH, C)
        resp = generate_response(CH, SPEC, frame_rng(seed, f, 1))
        want = resp[SPEC.data_rows, 2:]
        got = deinterleave(tgt.astype(float))
        assert np.allclose(got, want, rtol=1e-6)

    def test_deterministic_per_frame(self):
        a = make_sample(1, 7, 40.0, SPEC, CH, C)
        b = make_sample(1, 7, 40.0, SPEC, CH, C)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestFiles:
    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        samples = rng.normal(size=(5, 3, 4)).astype(np.float32)
        path = tmp_path / "x.v2xds"
        write_samples(path, iter(samples))
        back = read_samples(path)
        assert np.array_equal(back, samples)

    def test_magic_enforced(self, tmp_path):
        path = tmp_path / "bad.v2xds"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError):
            read_samples(path)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_samples(tmp_path / "e.v2xds", iter([]))


class TestGenerate:
    def test_counts_and_shapes(self, tmp_path):
        m = DatasetManifest(total=10, train=6, val=2, test=2, seed=2)
        generate_dataset(m, SPEC, CH, C, tmp_path)
        for split, n in (("train", 6), ("val", 2), ("test", 2)):
            inp, tgt = load_split(tmp_path, split)
            assert inp.shape == (n, 52, 100)
            assert tgt.shape == (n, 48, 100)

    def test_byte_determinism(self, tmp_path):
        m = DatasetManifest(total=6, train=4, val=1, test=1, seed=9)
        generate_dataset(m, SPEC, CH, C, tmp_path / "a")
        generate_dataset(m, SPEC, CH, C, tmp_path / "b")
        for split in ("train", "val", "test"):
            for pa, pb in zip(split_paths(tmp_path / "a", split),
                              split_paths(tmp_path / "b", split)):
                assert pa.read_bytes() == pb.read_bytes()

    def test_workers_do_not_change_bytes(self, tmp_path):
        m = DatasetManifest(total=6, train=4, val=1, test=1, seed=10)
        generate_dataset(m, SPEC, CH, C, tmp_path / "s", workers=1)
        generate_dataset(m, SPEC, CH, C, tmp_path / "p", workers=3)
        for split in ("train", "val", "test"):
            for pa, pb in zip(split_paths(tmp_path / "s", split),
                              split_paths(tmp_path / "p", split)):
                assert pa.read_bytes() == pb.read_bytes()

    def test_manifest_sidecar(self, tmp_path):
        m = DatasetManifest(total=6, train=4, val=1, test=1, seed=11)
        generate_dataset(m, SPEC, CH, C, tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["total"] == 6 and doc["seed"] == 11
        assert doc["format_version"] == 1
        assert len(doc["config_hash"]) == 64

    def test_split_frames_differ(self, tmp_path):
        m = DatasetManifest(total=6, train=4, val=1, test=1, seed=12)
        generate_dataset(m, SPEC, CH, C, tmp_path)
        inp, _ = load_split(tmp_path, "train")
        assert not np.array_equal(inp[0], inp[1])
