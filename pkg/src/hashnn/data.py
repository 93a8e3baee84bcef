"""Dataset ingestion (IDX image/label files) and synthetic generation."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Row-major samples with integer labels and optional soft targets.

    Features are float64 in [0, 1]. ``image_shape`` keeps the original
    (rows, cols) of image data so a loaded set can be written back
    byte-identically; synthetic data leaves it None.
    """

    samples: np.ndarray
    labels: np.ndarray
    n_classes: int
    soft_targets: np.ndarray | None = None
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {self.samples.shape}")
        if self.labels.shape != (self.samples.shape[0],):
            raise ValueError("labels must be one integer per sample")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels out of range for declared class count")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_features(self) -> int:
        return self.samples.shape[1]

    def subset(self, index) -> "Dataset":
        """New dataset restricted to ``index`` (slice or integer array)."""
        soft = None if self.soft_targets is None else self.soft_targets[index]
        return Dataset(self.samples[index], self.labels[index], self.n_classes,
                       soft_targets=soft, image_shape=self.image_shape)

    def with_soft_targets(self, soft: np.ndarray) -> "Dataset":
        soft = np.asarray(soft, dtype=np.float64)
        if soft.shape != (len(self), self.n_classes):
            raise ValueError(f"soft targets must be ({len(self)}, {self.n_classes})")
        return Dataset(self.samples, self.labels, self.n_classes,
                       soft_targets=soft, image_shape=self.image_shape)


def _read_exact(f, count: int, path: str) -> bytes:
    offset = f.tell()
    data = f.read(count)
    if len(data) != count:
        raise ValueError(
            f"{path}: truncated file, wanted {count} bytes at offset {offset}, got {len(data)}")
    return data


def _read_header(f, expected_magic: int, n_dims: int, path: str) -> tuple[int, ...]:
    magic = struct.unpack(">i", _read_exact(f, 4, path))[0]
    if magic != expected_magic:
        raise ValueError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    return struct.unpack(f">{n_dims}i", _read_exact(f, 4 * n_dims, path))


def load_idx(images_path, labels_path, n_classes: int = 10) -> Dataset:
    """Load an IDX image/label pair into a [0, 1]-scaled dataset.

    Images flatten row-major to (count, rows*cols); pixels divide by 255.
    """
    images_path, labels_path = str(images_path), str(labels_path)
    with open(images_path, "rb") as f:
        count, rows, cols = _read_header(f, IDX_IMAGE_MAGIC, 3, images_path)
        raw = _read_exact(f, count * rows * cols, images_path)
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as f:
        (label_count,) = _read_header(f, IDX_LABEL_MAGIC, 1, labels_path)
        labels = np.frombuffer(_read_exact(f, label_count, labels_path), dtype=np.uint8)
    if label_count != count:
        raise ValueError(
            f"image/label count mismatch: {count} images vs {label_count} labels")
    return Dataset(images / 255.0, labels.astype(np.int64), n_classes,
                   image_shape=(rows, cols))


def save_idx(dataset: Dataset, images_path, labels_path) -> None:
    """Write a dataset back to an IDX pair (inverse of ``load_idx``)."""
    if dataset.image_shape is None:
        raise ValueError("dataset has no image shape; cannot write IDX images")
    rows, cols = dataset.image_shape
    if rows * cols != dataset.n_features:
        raise ValueError("image shape inconsistent with feature count")
    pixels = np.round(dataset.samples * 255.0).astype(np.uint8)
    with open(str(images_path), "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, len(dataset), rows, cols))
        f.write(pixels.tobytes())
    with open(str(labels_path), "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, len(dataset)))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def synth_blobs(n_per_class: int, classes: int, dim: int, seed: int,
                noise: float) -> Dataset:
    """Gaussian blobs around seeded random class centers, scaled into [0, 1].

    Deterministic in ``seed``; with noise 0 every sample sits exactly on its
    class center.
    """
    if n_per_class < 1 or classes < 1 or dim < 1:
        raise ValueError("n_per_class, classes, and dim must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.25, 0.75, size=(classes, dim))
    samples = np.repeat(centers, n_per_class, axis=0)
    if noise > 0.0:
        samples = samples + rng.normal(0.0, noise, size=samples.shape)
    samples = np.clip(samples, 0.0, 1.0)
    labels = np.repeat(np.arange(classes), n_per_class)
    return Dataset(samples, labels, classes)
