import os
import struct

import numpy as np
import pytest
from scipy import stats

from seedrelay import dataset as ds


def _write_idx_pair(tmp_path, images, labels):
    img_path = tmp_path / "images-idx3-ubyte"
    lab_path = tmp_path / "labels-idx1-ubyte"
    n = len(images)
    img_path.write_bytes(
        struct.pack(">IIII", ds.IDX_IMAGES_MAGIC, n, 28, 28) + images.astype(np.uint8).tobytes()
    )
    lab_path.write_bytes(
        struct.pack(">II", ds.IDX_LABELS_MAGIC, len(labels)) + bytes(labels)
    )
    return img_path, lab_path


def test_load_idx_fixture_round_trip(tmp_path, rng):
    images = rng.integers(0, 256, size=(4, 28, 28)).astype(np.uint8)
    labels = [3, 1, 4, 1]
    img_path, lab_path = _write_idx_pair(tmp_path, images, labels)
    pool = ds.load_idx(img_path, lab_path)
    assert len(pool) == 4
    assert np.array_equal(pool.images, images)
    assert list(pool.labels) == labels


def test_load_idx_bad_magic(tmp_path, rng):
    images = rng.integers(0, 256, size=(2, 28, 28)).astype(np.uint8)
    img_path, lab_path = _write_idx_pair(tmp_path, images, [0, 1])
    data = bytearray(img_path.read_bytes())
    data[3] = 0x99
    img_path.write_bytes(bytes(data))
    with pytest.raises(ds.IdxMagicError):
        ds.load_idx(img_path, lab_path)


def test_load_idx_truncated(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 28, 28)).astype(np.uint8)
    img_path, lab_path = _write_idx_pair(tmp_path, images, [0, 1, 2])
    img_path.write_bytes(img_path.read_bytes()[:-100])
    with pytest.raises(ds.IdxTruncatedError):
        ds.load_idx(img_path, lab_path)


def test_load_idx_count_mismatch(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 28, 28)).astype(np.uint8)
    img_path, _ = _write_idx_pair(tmp_path, images, [0, 1, 2])
    lab_path = tmp_path / "short-labels-idx1-ubyte"
    lab_path.write_bytes(struct.pack(">II", ds.IDX_LABELS_MAGIC, 2) + bytes([0, 1]))
    with pytest.raises(ds.IdxCountMismatchError):
        ds.load_idx(img_path, lab_path)


@pytest.mark.skipif(
    "SEEDRELAY_MNIST_DIR" not in os.environ, reason="set SEEDRELAY_MNIST_DIR to run against real MNIST"
)
def test_load_idx_official_training_set():
    d = os.environ["SEEDRELAY_MNIST_DIR"]
    pool = ds.load_idx(
        os.path.join(d, "train-images-idx3-ubyte"), os.path.join(d, "train-labels-idx1-ubyte")
    )
    assert len(pool) == 60_000


def test_synth_digits_counts(rng):
    pool = ds.synth_digits(rng, per_label=4)
    assert len(pool) == 40
    assert sorted(np.bincount(pool.labels, minlength=10)) == [4] * 10


def test_synth_digits_deterministic():
    a = ds.synth_digits(np.random.default_rng(5), per_label=3)
    b = ds.synth_digits(np.random.default_rng(5), per_label=3)
    assert np.array_equal(a.images, b.images)
    assert np.array_equal(a.labels, b.labels)


def test_synth_digits_template_oracle_accuracy(rng):
    pool = ds.synth_digits(rng, per_label=50)
    hits = sum(
        ds.nearest_template_label(img) == lab for img, lab in zip(pool.images, pool.labels)
    )
    assert hits / len(pool) >= 0.95


def test_synth_digits_background_stays_sparse(rng):
    pool = ds.synth_digits(rng, per_label=10)
    nnz = (pool.images > 0).reshape(len(pool), -1).sum(axis=1)
    assert nnz.max() < 200  # glyph strokes only, no noise floor


def test_partition_default_counts(glyph_pool):
    rng = np.random.default_rng(0)
    pool = ds.synth_digits(rng, per_label=1000)
    devices = ds.partition_non_iid(pool, 4, target_count=4, full_count=200, rng=rng)
    for dev in devices:
        assert len(dev) == 1804
        counts = dev.label_counts()
        for lab in range(10):
            expected = 4 if dev.target_labels.contains(lab) else 200
            assert counts[lab] == expected
        assert dev.target_labels.popcount() == 1


def test_partition_iid_degenerate_keeps_target_marked(glyph_pool):
    rng = np.random.default_rng(1)
    devices = ds.partition_non_iid(glyph_pool, 2, target_count=5, full_count=5, rng=rng)
    for dev in devices:
        assert set(dev.label_counts()) == {5}
        assert dev.target_labels.popcount() == 1


def test_partition_devices_draw_disjoint_instances(glyph_pool):
    rng = np.random.default_rng(2)
    devices = ds.partition_non_iid(glyph_pool, 3, target_count=2, full_count=10, rng=rng)
    all_idx = np.concatenate([dev.indices for dev in devices])
    assert len(all_idx) == len(set(all_idx.tolist()))


def test_partition_shortage_names_label():
    pool = ds.synth_digits(np.random.default_rng(3), per_label=5)
    with pytest.raises(ds.PoolShortageError) as err:
        ds.partition_non_iid(pool, 3, target_count=1, full_count=4, rng=np.random.default_rng(0))
    assert 0 <= err.value.label <= 9


def test_target_labels_uniform_chi_square():
    pool = ds.synth_digits(np.random.default_rng(4), per_label=8)
    observed = np.zeros(10)
    for run in range(1000):
        rng = np.random.default_rng(10_000 + run)
        devices = ds.partition_non_iid(pool, 2, target_count=1, full_count=2, rng=rng)
        for dev in devices:
            observed[dev.target_labels.labels()[0]] += 1
    _, p = stats.chisquare(observed)
    assert p > 0.01


def test_take_returns_requested_label(glyph_pool):
    rng = np.random.default_rng(6)
    (dev,) = ds.partition_non_iid(glyph_pool, 1, target_count=3, full_count=6, rng=rng)
    imgs = dev.take(4, 3)
    assert imgs.shape == (3, 28, 28)
    lab4 = dev.pool.labels[dev.indices[dev.labels == 4][:3]]
    assert np.all(lab4 == 4)


def test_label_indicator_algebra():
    a = ds.LabelIndicator.from_labels([1, 3])
    b = ds.LabelIndicator.from_labels([3, 7])
    assert (a | b).labels() == [1, 3, 7]
    assert (a & b).labels() == [3]
    assert a.popcount() == 2
    assert ds.LabelIndicator.from_labels([3]).issubset(a)
    assert not a.issubset(b)
    assert ds.LabelIndicator.from_mask(a.to_mask()) == a
    assert ds.LabelIndicator.empty().popcount() == 0
    with pytest.raises(ValueError):
        ds.LabelIndicator.from_labels([10])
