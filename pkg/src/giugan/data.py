"""Datasets, deterministic batching and PPM image output."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

CIFAR_RECORD = 3073
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILES = ["test_batch.bin"]
GUTTER = 2


def to_unit(pixels: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float64 [-1, 1] via x / 127.5 - 1."""
    return pixels.astype(np.float64) / 127.5 - 1.0


def to_bytes(images: np.ndarray) -> np.ndarray:
    """float [-1, 1] -> uint8 [0, 255], rounded and clamped."""
    return np.clip(np.rint((np.asarray(images) + 1.0) * 127.5), 0, 255).astype(np.uint8)


@dataclass
class ImageDataset:
    """Images kept either as raw uint8 or as float64 already in [-1, 1]."""

    images: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_size(self) -> int:
        return int(self.images.shape[-1])

    @property
    def num_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1

    def pixels(self, index=slice(None)) -> np.ndarray:
        imgs = self.images[index]
        return to_unit(imgs) if imgs.dtype == np.uint8 else np.asarray(imgs, dtype=np.float64)

    def subset(self, index) -> "ImageDataset":
        labels = None if self.labels is None else self.labels[index]
        return ImageDataset(self.images[index], labels, self.name)


@dataclass
class ImageBatch:
    pixels: np.ndarray  # N x 3 x H x W in [-1, 1]
    labels: Optional[np.ndarray] = None


# -- CIFAR-10 ---------------------------------------------------------------


def read_cifar10_file(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Parse one binary-version batch file into (uint8 N x 3 x 32 x 32, labels)."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % CIFAR_RECORD:
        raise ValueError(f"{path}: size {raw.size} is not a multiple of {CIFAR_RECORD}")
    records = raw.reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise ValueError(f"{path}: label {labels.max()} out of range 0..9")
    images = records[:, 1:].reshape(-1, 3, 32, 32)
    return images, labels


def resolve_data_dir(path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    if path:
        return Path(path)
    env = os.environ.get("GIU_DATA_DIR")
    return Path(env) if env else None


def find_cifar10_dir(path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    root = resolve_data_dir(path)
    if root is None:
        return None
    for cand in (root, root / "cifar-10-batches-bin"):
        if (cand / CIFAR_TRAIN_FILES[0]).exists():
            return cand
    return None


def load_cifar10(path: Optional[Union[str, Path]] = None, split: str = "train") -> ImageDataset:
    """Load the train (5 files) or test split from the binary distribution."""
    root = find_cifar10_dir(path)
    if root is None:
        raise FileNotFoundError(f"no CIFAR-10 binary files under {resolve_data_dir(path)}")
    names = {"train": CIFAR_TRAIN_FILES, "test": CIFAR_TEST_FILES}.get(split)
    if names is None:
        raise ValueError(f"unknown split {split!r}")
    parts = [read_cifar10_file(root / n) for n in names]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return ImageDataset(images, labels, f"cifar10-{split}")


# -- synthetic blobs ----------------------------------------------------------


def blob_centers(size: int, classes: int, offset: float) -> np.ndarray:
    """Class centroids (row, col) on a grid with spacing ``offset``, centered in the image."""
    ncols = math.ceil(math.sqrt(classes))
    nrows = math.ceil(classes / ncols)
    mid = (size - 1) / 2.0
    out = np.empty((classes, 2))
    for k in range(classes):
        r, c = divmod(k, ncols)
        out[k] = (mid + offset * (r - (nrows - 1) / 2.0), mid + offset * (c - (ncols - 1) / 2.0))
    return out


def synth_blobs(
    n: int,
    size: int = 8,
    classes: int = 2,
    seed: int = 0,
    offset: Optional[float] = None,
    jitter: float = 0.25,
) -> ImageDataset:
    """Colored Gaussian blobs whose position encodes the class.

    Classes are balanced; each image gets a jittered center, a random RGB
    amplitude in [0.6, 0.9] and multiplicative pixel noise.  Background is -1.
    """
    if size not in (8, 16, 32):
        raise ValueError(f"blob size must be 8, 16 or 32, got {size}")
    if classes < 1:
        raise ValueError("need at least one class")
    rng = np.random.default_rng(seed)
    offset = 3.0 * size / 8.0 if offset is None else float(offset)
    sigma = size / 8.0
    centers = blob_centers(size, classes, offset)
    labels = rng.permutation(np.arange(n) % classes)
    pos = centers[labels] + rng.normal(0.0, jitter * sigma, (n, 2))
    amp = rng.uniform(0.6, 0.9, (n, 3))
    yy, xx = np.mgrid[0:size, 0:size]
    d2 = (yy[None] - pos[:, 0, None, None]) ** 2 + (xx[None] - pos[:, 1, None, None]) ** 2
    profile = np.exp(-d2 / (2 * sigma * sigma))[:, None]  # N x 1 x S x S
    noise = 1.0 + 0.1 * rng.standard_normal((n, 3, size, size))
    images = np.clip(-1.0 + 2.0 * amp[:, :, None, None] * profile * noise, -1.0, 1.0)
    return ImageDataset(images, labels.astype(np.int64), f"blobs{size}x{classes}")


# -- batching -------------------------------------------------------------------


class Batcher:
    """Seeded shuffling batch stream; the trailing partial batch is dropped.

    Iterating wraps epochs forever with a fresh permutation each time.
    """

    def __init__(self, dataset: ImageDataset, m: int, seed: Union[int, np.random.Generator] = 0):
        if m < 1 or m > len(dataset):
            raise ValueError(f"batch size {m} invalid for dataset of {len(dataset)} items")
        self.dataset = dataset
        self.m = m
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.epochs = 0

    def epoch_indices(self) -> list[np.ndarray]:
        perm = self.rng.permutation(len(self.dataset))
        nb = len(perm) // self.m
        self.epochs += 1
        return [perm[i * self.m : (i + 1) * self.m] for i in range(nb)]

    def epoch(self) -> Iterator[ImageBatch]:
        for idx in self.epoch_indices():
            labels = None if self.dataset.labels is None else self.dataset.labels[idx]
            yield ImageBatch(self.dataset.pixels(idx), labels)

    def __iter__(self) -> Iterator[ImageBatch]:
        while True:
            yield from self.epoch()


def batcher(dataset: ImageDataset, m: int, seed: Union[int, np.random.Generator] = 0) -> Batcher:
    return Batcher(dataset, m, seed)


# -- PPM output -----------------------------------------------------------------


def grid_shape(n: int, cols: Optional[int] = None) -> tuple[int, int]:
    if n < 1:
        raise ValueError("image grid needs at least one image")
    cols = cols or max(1, round(math.sqrt(n)))
    cols = min(cols, n)
    return math.ceil(n / cols), cols


def tile_images(images: np.ndarray, cols: Optional[int] = None) -> np.ndarray:
    """N x 3 x H x W in [-1, 1] -> uint8 canvas (rows*H + gutters) x (cols*W + gutters) x 3."""
    images = np.asarray(getattr(images, "data", images))
    n, _, h, w = images.shape
    rows, cols = grid_shape(n, cols)
    canvas = np.zeros((rows * h + (rows - 1) * GUTTER, cols * w + (cols - 1) * GUTTER, 3), np.uint8)
    tiles = to_bytes(images).transpose(0, 2, 3, 1)
    for i in range(n):
        r, c = divmod(i, cols)
        y, x = r * (h + GUTTER), c * (w + GUTTER)
        canvas[y : y + h, x : x + w] = tiles[i]
    return canvas


def write_ppm(path: Union[str, Path], canvas: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w, _ = canvas.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(canvas, dtype=np.uint8).tobytes())
    return path


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit P6 file")
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + w * h * 3], dtype=np.uint8)
    return pixels.reshape(h, w, 3)


def write_image_grid(batch, path: Union[str, Path], grid_cols: Optional[int] = None) -> Path:
    return write_ppm(path, tile_images(batch, grid_cols))
