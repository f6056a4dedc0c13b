import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgn import dataset_io as io
from sgn.trainer import EpochStats


def idx_bytes(n=3, magic=0x803, rows=28, cols=28, payload=None):
    header = struct.pack(">IIII", magic, n, rows, cols)
    if payload is None:
        payload = bytes(range(256)) * (n * rows * cols // 256 + 1)
        payload = payload[: n * rows * cols]
    return header + payload


def test_parse_scales_to_unit_interval():
    a = io.parse_idx_images(idx_bytes())
    assert a.shape == (3, 784)
    assert a.min() == 0.0 and a.max() == 1.0
    assert a[0, 1] == pytest.approx(1 / 255)


def test_load_file_and_gzip(tmp_path):
    import gzip
    raw = idx_bytes(2)
    (tmp_path / "a").write_bytes(raw)
    (tmp_path / "a.gz").write_bytes(gzip.compress(raw))
    ds = io.load_idx_images(tmp_path / "a")
    assert ds.count == 2
    np.testing.assert_array_equal(ds.images, io.load_idx_images(tmp_path / "a.gz").images)
    assert len(ds.checksum) == 64


def test_labels_magic_rejected():
    with pytest.raises(io.IdxFormatError, match="expected image magic"):
        io.parse_idx_images(idx_bytes(magic=0x801))


def test_bad_dims_rejected():
    with pytest.raises(io.IdxFormatError):
        io.parse_idx_images(idx_bytes(n=1, rows=14, cols=14))


def test_missing_file():
    with pytest.raises(FileNotFoundError, match="dataset not found"):
        io.load_idx_images("/nonexistent/train-images")


@given(st.integers(0, 16 + 784 * 2 - 1))
def test_truncation_rejected(cut):
    with pytest.raises(io.IdxFormatError):
        io.parse_idx_images(idx_bytes(2)[:cut])


@given(st.integers(0, 15), st.integers(0, 255))
def test_header_mutations_rejected_or_consistent(pos, value):
    raw = bytearray(idx_bytes(2))
    if raw[pos] == value:
        return
    raw[pos] = value
    # any header change breaks magic, dims, or the count/payload agreement
    with pytest.raises(io.IdxFormatError):
        io.parse_idx_images(bytes(raw))


def test_grid_minimal(tmp_path):
    path = tmp_path / "one.pgm"
    io.export_grid(np.full((1, 784), 0.5), 1, 1, path)
    raw = path.read_bytes()
    assert raw.split()[:4] == [b"P5", b"28", b"28", b"255"]
    assert io.read_pgm(path).shape == (28, 28)


def test_grid_clamps(tmp_path):
    img = np.zeros((1, 784))
    img[0, 0], img[0, 1] = 1.7, -0.3
    path = tmp_path / "c.pgm"
    io.export_grid(img, 1, 1, path)
    px = io.read_pgm(path)
    assert px[0, 0] == 1.0 and px[0, 1] == 0.0


def test_grid_layout(tmp_path, rng):
    imgs = rng.random((100, 784))
    path = tmp_path / "g.pgm"
    io.export_grid(imgs, 10, 10, path)
    px = io.read_pgm(path)
    assert px.shape == (280, 280)
    # cell (r, c) holds image r*cols + c
    np.testing.assert_allclose(px[28:56, 56:84], imgs[12].reshape(28, 28), atol=0.5 / 255 + 1e-12)


def test_grid_too_few_images():
    with pytest.raises(ValueError):
        io.grid_image(np.zeros((3, 784)), 2, 2)


def test_load_export_reload(tmp_path):
    ds = io.parse_idx_images(idx_bytes(4))
    path = tmp_path / "g.pgm"
    io.export_grid(ds, 2, 2, path)
    back = io.read_pgm(path)
    np.testing.assert_allclose(back[:28, 28:56].reshape(-1), ds[1], atol=1 / 255)


def test_idx_write_round_trip(tmp_path):
    ds = io.parse_idx_images(idx_bytes(3))
    io.write_idx_images(ds, tmp_path / "x")
    np.testing.assert_array_equal(io.load_idx_images(tmp_path / "x").images, ds)


def test_convergence_csv_round_trip(tmp_path):
    stats = [EpochStats(1, -0.123456789012345678, 1.5e-7, 0, 0.25),
             EpochStats(2, 3.0, -2.0, 4, 12.5)]
    path = tmp_path / "c.csv"
    io.write_convergence_csv(stats[:1], path)
    assert len(path.read_text().splitlines()) == 2
    io.write_convergence_csv(stats, path)
    assert io.read_convergence_csv(path) == stats


def test_convergence_append(tmp_path):
    path = tmp_path / "c.csv"
    s = [EpochStats(i, i / 3, -i / 7, 0, 0.1) for i in range(1, 4)]
    for st_ in s:
        io.append_convergence_row(st_, path)
    assert io.read_convergence_csv(path) == s


def test_convergence_csv_empty(tmp_path):
    with pytest.raises(ValueError):
        io.write_convergence_csv([], tmp_path / "c.csv")


@pytest.mark.parametrize("name", ["s.bin", "s.csv"])
def test_samples_round_trip(tmp_path, rng, name):
    a = rng.normal(size=(7, 3))
    io.write_samples(a, tmp_path / name)
    np.testing.assert_array_equal(io.read_samples(tmp_path / name), a)


def test_samples_corrupt(tmp_path, rng):
    path = tmp_path / "s.bin"
    io.write_samples(rng.normal(size=(4, 2)), path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(io.SampleFormatError):
        io.read_samples(path)


def test_read_samples_accepts_idx(tmp_path):
    (tmp_path / "imgs").write_bytes(idx_bytes(2))
    assert io.read_samples(tmp_path / "imgs").shape == (2, 784)


def test_split_validation_disjoint():
    train, val = io.split_validation(100, 20, seed=3)
    assert len(val) == 20 and len(train) == 80
    assert not set(train) & set(val)
    t2, v2 = io.split_validation(100, 20, seed=3)
    np.testing.assert_array_equal(val, v2)
