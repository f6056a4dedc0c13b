"""MNIST IDX ingestion, PGM grid export, convergence CSV, and sample dumps."""

from __future__ import annotations

import csv
import gzip
import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IMAGE_SIDE = 28
IMAGE_DIM = IMAGE_SIDE * IMAGE_SIDE

SAMPLES_MAGIC = b"SGNSAMP1"
_SAMPLES_HEADER = struct.Struct("<8sQQ")

CONVERGENCE_HEADER = ("epoch", "mean_d_i", "mean_d_kl_i", "floored_rows", "wall_time")


class IdxFormatError(ValueError):
    pass


class SampleFormatError(ValueError):
    pass


@dataclass
class ImageDataset:
    images: np.ndarray  # (count, 784), values in [0, 1]
    checksum: str       # sha256 of the raw (uncompressed) file bytes

    @property
    def count(self) -> int:
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    path = os.fspath(path)
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx_images(raw: bytes) -> np.ndarray:
    """Decode an IDX3 unsigned-byte image buffer into an (n, 784) float array in [0, 1]."""
    if len(raw) < 16:
        raise IdxFormatError(f"truncated header: {len(raw)} bytes, need 16")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(f"expected image magic 0x{IDX_IMAGE_MAGIC:08x}, got 0x{magic:08x}")
    if rows != IMAGE_SIDE or cols != IMAGE_SIDE:
        raise IdxFormatError(f"expected {IMAGE_SIDE}x{IMAGE_SIDE} images, got {rows}x{cols}")
    need = n * IMAGE_DIM
    if len(raw) - 16 != need:
        raise IdxFormatError(f"payload has {len(raw) - 16} bytes, header implies {need}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=need, offset=16)
    return pixels.reshape(n, IMAGE_DIM).astype(np.float64) / 255.0


def load_idx_images(path) -> ImageDataset:
    """Load an MNIST image file (raw or gzipped)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    raw = _read_bytes(path)
    return ImageDataset(parse_idx_images(raw), hashlib.sha256(raw).hexdigest())


def write_idx_images(images, path) -> None:
    """Write images in [0, 1] as an uncompressed IDX3 file (used for fixtures and round trips)."""
    a = np.asarray(images, dtype=np.float64).reshape(-1, IMAGE_DIM)
    payload = np.rint(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, a.shape[0], IMAGE_SIDE, IMAGE_SIDE))
        f.write(payload.tobytes())


def split_validation(n_rows: int, n_validation: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle of row indices; the last ``n_validation`` become the validation set.

    Returns (train_indices, validation_indices).
    """
    if not 0 <= n_validation < n_rows:
        raise ValueError(f"cannot hold out {n_validation} of {n_rows} rows")
    perm = np.random.Generator(np.random.PCG64(int(seed))).permutation(n_rows)
    cut = n_rows - n_validation
    return perm[:cut], perm[cut:]


def grid_image(images, rows: int, cols: int, side: int = IMAGE_SIDE) -> np.ndarray:
    """Tile the first rows*cols images into one (rows*side, cols*side) array, clamped to [0, 1]."""
    a = np.asarray(images, dtype=np.float64).reshape(-1, side * side)
    if rows < 1 or cols < 1:
        raise ValueError("grid must have at least one row and column")
    if rows * cols > a.shape[0]:
        raise ValueError(f"{rows}x{cols} grid needs {rows * cols} images, got {a.shape[0]}")
    tiles = np.clip(a[:rows * cols], 0.0, 1.0).reshape(rows, cols, side, side)
    return tiles.transpose(0, 2, 1, 3).reshape(rows * side, cols * side)


def write_pgm(pixels: np.ndarray, path) -> None:
    """Binary PGM (P5), 8-bit; values in [0, 1] map to 0..255."""
    h, w = pixels.shape
    data = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = map(int, tokens[1:])
    pos += 1
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / maxval


def export_grid(images, rows: int, cols: int, path) -> None:
    write_pgm(grid_image(images, rows, cols), path)


def write_convergence_csv(stats, path) -> None:
    """One row per epoch; floats use repr so a re-parse is exact."""
    stats = list(stats)
    if not stats:
        raise ValueError("no epoch statistics to write")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CONVERGENCE_HEADER)
        for s in stats:
            w.writerow([s.epoch, repr(float(s.mean_d_i)), repr(float(s.mean_d_kl_i)),
                        s.floored_rows, repr(float(s.wall_time))])


def append_convergence_row(stat, path) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(CONVERGENCE_HEADER)
        w.writerow([stat.epoch, repr(float(stat.mean_d_i)), repr(float(stat.mean_d_kl_i)),
                    stat.floored_rows, repr(float(stat.wall_time))])


def read_convergence_csv(path) -> list:
    from .trainer import EpochStats

    with open(path, newline="") as f:
        r = csv.reader(f)
        header = tuple(next(r))
        if header != CONVERGENCE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [EpochStats(int(e), float(a), float(b), int(c), float(t)) for e, a, b, c, t in r]


def write_samples(samples, path) -> None:
    """Dump an (n, d) float array; ``.csv`` gives text rows, anything else the binary layout."""
    a = np.asarray(samples, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("samples must be a 2-D array")
    if os.fspath(path).endswith(".csv"):
        # "# rows cols" comment line keeps the shape even when there are no rows
        np.savetxt(path, a, delimiter=",", fmt="%.17g", header=f"{a.shape[0]} {a.shape[1]}",
                   comments="# ")
        return
    with open(path, "wb") as f:
        f.write(_SAMPLES_HEADER.pack(SAMPLES_MAGIC, a.shape[0], a.shape[1]))
        f.write(a.astype("<f8").tobytes())


def _read_csv_samples(path: str) -> np.ndarray:
    with open(path) as f:
        first = f.readline()
    shape = None
    if first.startswith("#"):
        try:
            n, d = (int(v) for v in first[1:].split())
            shape = (n, d)
        except ValueError:
            shape = None
    if shape is not None and shape[0] == 0:
        return np.zeros(shape)
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as e:
        raise SampleFormatError(f"{path}: {e}") from e
    if shape is not None and a.shape != shape:
        raise SampleFormatError(f"{path}: header says {shape}, found {a.shape}")
    return a


def read_samples(path) -> np.ndarray:
    """Read a dump written by :func:`write_samples` (by extension) or an IDX image file."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.endswith(".csv"):
        return _read_csv_samples(path)
    raw = _read_bytes(path)
    if raw[:8] != SAMPLES_MAGIC:
        if raw[:4] == struct.pack(">I", IDX_IMAGE_MAGIC):
            return parse_idx_images(raw)
        raise SampleFormatError(f"{path}: unrecognized sample file")
    if len(raw) < _SAMPLES_HEADER.size:
        raise SampleFormatError(f"{path}: truncated header")
    _, n, d = _SAMPLES_HEADER.unpack_from(raw)
    if len(raw) - _SAMPLES_HEADER.size != n * d * 8:
        raise SampleFormatError(f"{path}: payload size does not match {n}x{d}")
    return np.frombuffer(raw, dtype="<f8", offset=_SAMPLES_HEADER.size).reshape(n, d).copy()
