"""IDX containers as distributed for digit datasets.

    [offset] [type]          [value]
    0000     32 bit integer  0x00000801 / 0x00000803 / 0x00000804 (magic)
    0004     32 bit integer  dimension 0 (item count)
    ...      32 bit integer  remaining dimensions
    ....     unsigned byte   data, row-major

All integers are big-endian. Files may be gzip-compressed.
"""
import gzip
import logging
import struct
from pathlib import Path

import numpy as np

from explainer_app.data.dataset import Dataset
from explainer_app.exceptions import FormatError

logger = logging.getLogger(__name__)

LABELS_MAGIC = 0x00000801
IMAGES_MAGIC = 0x00000803
COLOR_IMAGES_MAGIC = 0x00000804      # N x H x W x C
_UBYTE = 0x08


def _read_bytes(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}", field="path") from exc
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise FormatError(f"{path}: broken gzip stream: {exc}", field="gzip", offset=0) from exc
    return data


def read_idx(path, magics=(LABELS_MAGIC, IMAGES_MAGIC, COLOR_IMAGES_MAGIC)):
    """uint8 array with the container's shape."""
    data = _read_bytes(path)
    if len(data) < 4:
        raise FormatError(f"{path}: truncated magic", field="magic", offset=len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in magics or (magic >> 8) != _UBYTE:
        raise FormatError(f"{path}: bad magic 0x{magic:08x}", field="magic", offset=0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise FormatError(f"{path}: truncated header", field="header", offset=len(data))
    shape = struct.unpack(f">{ndim}I", data[4:header])
    expected = int(np.prod(shape, dtype=np.int64))
    if len(data) - header < expected:
        raise FormatError(f"{path}: truncated data, needs {expected} bytes after the header",
                          field="data", offset=len(data))
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=header).reshape(shape)


def load_idx(images_path, labels_path, split="train", class_count=None) -> Dataset:
    images = read_idx(images_path, (IMAGES_MAGIC, COLOR_IMAGES_MAGIC))
    labels = read_idx(labels_path, (LABELS_MAGIC,))
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}",
            field="count", offset=4,
        )
    logger.info("idx loaded images=%s labels=%s count=%d geometry=%s",
                images_path, labels_path, images.shape[0], images.shape[1:])
    return Dataset(images.astype(np.float64) / 255.0, labels, split, class_count,
                   source=str(images_path))


def write_idx(path, array):
    """Write a uint8 array of rank 1, 3 or 4; a ``.gz`` suffix compresses."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim not in (1, 3, 4):
        raise FormatError(f"IDX rank {array.ndim} is not supported", field="rank")
    payload = struct.pack(">I", (_UBYTE << 8) | array.ndim)
    payload += struct.pack(f">{array.ndim}I", *array.shape) + array.tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(gzip.compress(payload, mtime=0) if path.suffix == ".gz" else payload)
    return path


def write_dataset(dataset, images_path, labels_path):
    """Quantize a [0, 1] dataset to bytes; single-channel sets use the 3-D image container."""
    images = np.rint(np.clip(dataset.images, 0.0, 1.0) * 255.0).astype(np.uint8)
    if images.shape[3] == 1:
        images = images[..., 0]
    write_idx(images_path, images)
    write_idx(labels_path, dataset.labels.astype(np.uint8))
