"""Dataset ingestion and sampling.

IDX files (MNIST family), big-endian:
    i32  magic (0x00000803 images / 0x00000801 labels)
    i32  item count, then i32 rows, i32 cols for images
    u8[] pixels row-wise / labels
Gzip-wrapped IDX files are accepted. CIFAR-10 binary: 3073-byte records,
one label byte then 1024 R + 1024 G + 1024 B plane bytes.

Pixels are scaled to [0, 1] by /255; no further normalization.
"""

import gzip
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError, ShapeError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073


@dataclass
class Dataset:
    inputs: np.ndarray  # [n, N] float64 in [0, 1]
    labels: np.ndarray  # [n] int64
    class_count: int
    split: str = "train"

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(f"{self.inputs.shape[0]} inputs vs {self.labels.shape[0]} labels")
        if self.labels.size and int(self.labels.max()) >= self.class_count:
            raise InputError("label out of range")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def feature_count(self) -> int:
        return self.inputs.shape[1]


def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Load an IDX image/label file pair (gzipped or raw)."""
    img = _read_maybe_gzip(images_path)
    if len(img) < 16:
        raise FormatError(f"{images_path}: truncated header at offset {len(img)}")
    magic, count, rows, cols = struct.unpack_from(">IIII", img, 0)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{images_path}: bad magic 0x{magic:08x} at offset 0")
    if rows < 1 or cols < 1:
        raise FormatError(f"{images_path}: bad dims {rows}x{cols} at offset 8")
    need = 16 + count * rows * cols
    if len(img) < need:
        raise FormatError(f"{images_path}: truncated at offset {len(img)}, need {need}")

    lbl = _read_maybe_gzip(labels_path)
    if len(lbl) < 8:
        raise FormatError(f"{labels_path}: truncated header at offset {len(lbl)}")
    lmagic, lcount = struct.unpack_from(">II", lbl, 0)
    if lmagic != IDX_LABEL_MAGIC:
        raise FormatError(f"{labels_path}: bad magic 0x{lmagic:08x} at offset 0")
    if lcount != count:
        raise FormatError(f"{labels_path}: {lcount} labels for {count} images")
    if len(lbl) < 8 + count:
        raise FormatError(f"{labels_path}: truncated at offset {len(lbl)}, need {8 + count}")

    pixels = np.frombuffer(img, np.uint8, count * rows * cols, offset=16)
    labels = np.frombuffer(lbl, np.uint8, count, offset=8).astype(np.int64)
    if labels.size and int(labels.max()) > 9:
        raise FormatError(f"{labels_path}: label {int(labels.max())} exceeds 9")
    inputs = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(inputs, labels, 10, split)


def load_cifar10_bin(paths, split: str = "train") -> Dataset:
    """Load and concatenate CIFAR-10 binary batch files, in the given order."""
    pixel_parts, label_parts = [], []
    for path in paths:
        raw = _read_maybe_gzip(path)
        if len(raw) % CIFAR_RECORD_BYTES != 0:
            raise FormatError(f"{path}: size {len(raw)} not a multiple of {CIFAR_RECORD_BYTES}")
        records = np.frombuffer(raw, np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        label_parts.append(records[:, 0])
        pixel_parts.append(records[:, 1:])
    labels = np.concatenate(label_parts).astype(np.int64) if label_parts else np.zeros(0, np.int64)
    if labels.size and int(labels.max()) > 9:
        raise FormatError(f"label {int(labels.max())} exceeds 9")
    if pixel_parts:
        inputs = np.concatenate(pixel_parts).astype(np.float64) / 255.0
    else:
        inputs = np.zeros((0, CIFAR_RECORD_BYTES - 1))
    return Dataset(inputs, labels, 10, split)


def one_hot(label: int, class_count: int) -> np.ndarray:
    if not 0 <= label < class_count:
        raise InputError(f"label {label} out of range for {class_count} classes")
    vec = np.zeros(class_count)
    vec[label] = 1.0
    return vec


def take_uniform(dataset: Dataset, count: int, rng: np.random.Generator) -> Dataset:
    """Uniform subset without replacement, kept in original order."""
    if not 0 <= count <= dataset.n:
        raise ConfigError(f"cannot take {count} of {dataset.n} examples")
    idx = np.sort(rng.choice(dataset.n, size=count, replace=False))
    return replace(dataset, inputs=dataset.inputs[idx], labels=dataset.labels[idx])


def subsample(dataset: Dataset, ratio: float, rng: np.random.Generator) -> Dataset:
    """floor(ratio * n) examples drawn uniformly without replacement.

    ratio == 1 returns the dataset unchanged (same order, no draw)."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"ratio must be in (0, 1], got {ratio}")
    if ratio == 1.0:
        return dataset
    return take_uniform(dataset, int(math.floor(ratio * dataset.n)), rng)


def batches(dataset: Dataset, batch_size: int, rng: np.random.Generator):
    """One epoch: a fresh uniform shuffle cut into consecutive index batches;
    the final short batch is kept."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    perm = rng.permutation(dataset.n)
    for start in range(0, dataset.n, batch_size):
        yield perm[start:start + batch_size]


def pad_crop_flip(image: np.ndarray, offset_y: int, offset_x: int, flip: bool) -> np.ndarray:
    """Deterministic core of the augmentation: zero-pad 4 px per side, crop a
    32x32 window at the given offset, optionally mirror horizontally.

    Images are channel-planes-first (3, 32, 32), matching the binary layout.
    Offsets (4, 4) without flip reproduce the input exactly."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (3, 32, 32):
        raise ShapeError(f"expected (3, 32, 32) image, got {image.shape}")
    if not (0 <= offset_y <= 8 and 0 <= offset_x <= 8):
        raise InputError(f"crop offsets must be in [0, 8], got ({offset_y}, {offset_x})")
    padded = np.zeros((3, 40, 40))
    padded[:, 4:36, 4:36] = image
    crop = padded[:, offset_y:offset_y + 32, offset_x:offset_x + 32]
    if flip:
        crop = crop[:, :, ::-1]
    return np.ascontiguousarray(crop)


def augment_pad_crop_flip(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random crop of the zero-padded image plus a fair-coin horizontal flip."""
    offset_y = int(rng.integers(0, 9))
    offset_x = int(rng.integers(0, 9))
    flip = bool(rng.random() < 0.5)
    return pad_crop_flip(image, offset_y, offset_x, flip)
