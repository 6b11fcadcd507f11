"""
Reader for the big-endian IDX image/label pair format of handwritten
character corpora.
"""
import logging
import struct
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .exceptions import (
    IdxCountMismatchError, IdxMagicError, IdxTruncatedError,
)

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


def _read_header(raw: bytes, path: Path, expected_magic: int, n_dims: int):
    header_size = 4 * (1 + n_dims)
    if len(raw) < header_size:
        raise IdxTruncatedError(f"{path}: file shorter than its {header_size}-byte header")
    values = struct.unpack(f'>{1 + n_dims}I', raw[:header_size])
    if values[0] != expected_magic:
        raise IdxMagicError(f"{path}: magic {values[0]} but expected {expected_magic}")
    return values[1:], header_size


def load_idx(images_path, labels_path, n_classes: int = None) -> Dataset:
    """
    Load an image file (magic 2051: count, rows, cols, uint8 pixels) and a
    label file (magic 2049: count, uint8 labels). Pixels are scaled to [0, 1]
    and flattened row-major.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    image_raw = images_path.read_bytes()
    label_raw = labels_path.read_bytes()

    (count, rows, cols), offset = _read_header(image_raw, images_path, IMAGE_MAGIC, 3)
    expected = offset + count * rows * cols
    if len(image_raw) < expected:
        raise IdxTruncatedError(f"{images_path}: expected {expected} bytes, found {len(image_raw)}")
    pixels = np.frombuffer(image_raw, dtype=np.uint8, count=count * rows * cols, offset=offset)

    (label_count,), offset = _read_header(label_raw, labels_path, LABEL_MAGIC, 1)
    if label_count != count:
        raise IdxCountMismatchError(f"{count} images but {label_count} labels")
    if len(label_raw) < offset + label_count:
        raise IdxTruncatedError(f"{labels_path}: expected {offset + label_count} bytes, found {len(label_raw)}")
    labels = np.frombuffer(label_raw, dtype=np.uint8, count=label_count, offset=offset).astype(np.int64)

    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if count else 1
    logger.info(f"Loaded {count} IDX samples of {rows}x{cols} from {images_path.name}")
    return Dataset(features, labels, n_classes)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images (count, rows, cols) and labels in IDX layout."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack('>4I', IMAGE_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack('>2I', LABEL_MAGIC, labels.size) + labels.tobytes())
