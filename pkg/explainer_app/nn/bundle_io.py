"""Model bundle on disk: a YAML manifest plus one little-endian float64 blob.

The manifest lists layer specs, geometry, class count and the named weight
entries with shapes; the blob holds the entries concatenated in manifest
order. ``load_model(save_model(m))`` reproduces ``m`` bit for bit.
"""
import logging
from pathlib import Path

import numpy as np
import yaml

from explainer_app.exceptions import FormatError
from explainer_app.nn.layers import LayerSpec
from explainer_app.nn.network import ModelBundle
from explainer_app.serializers import validate_document
from explainer_app.serializers.manifest_serializer import (
    MANIFEST_FORMAT, MANIFEST_VERSION, ModelManifestSerializer,
)

logger = logging.getLogger(__name__)

BLOB_DTYPE = np.dtype("<f8")


def plain(value):
    """numpy scalars/arrays → YAML-safe Python values."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def save_model(model: ModelBundle, path):
    path = Path(path)
    blob_path = path.with_suffix(".bin")
    entries = list(model.named_params())
    names = [name for name, _ in entries]
    arrays = [array for _, array in entries]
    height, width, channels = model.input_geometry
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "input_geometry": {"height": height, "width": width, "channels": channels},
        "class_count": model.class_count,
        "blob": blob_path.name,
        "extractor": [spec.to_dict() for spec in model.extractor],
        "head": [spec.to_dict() for spec in model.head],
        "weights": [{"name": name, "shape": list(array.shape)} for name, array in zip(names, arrays)],
        "metrics": plain(model.metrics),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(blob_path, "wb") as fh:
        for array in arrays:
            fh.write(np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes())
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(plain(manifest), fh, sort_keys=False)
    logger.info("model saved manifest=%s blob=%s entries=%d", path, blob_path, len(names))
    return path


def load_model(path) -> ModelBundle:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}", field="manifest") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"manifest {path} is not valid YAML: {exc}", field="manifest") from exc
    manifest = validate_document(ModelManifestSerializer, raw, "manifest")

    extractor = tuple(LayerSpec.from_dict(item) for item in manifest["extractor"])
    head = tuple(LayerSpec.from_dict(item) for item in manifest["head"])

    blob_path = path.parent / manifest["blob"]
    try:
        blob = np.frombuffer(blob_path.read_bytes(), dtype=np.uint8)
    except OSError as exc:
        raise FormatError(f"cannot read weight blob {blob_path}: {exc}", field="blob") from exc
    expected = sum(int(np.prod(entry["shape"])) for entry in manifest["weights"])
    if blob.size != expected * BLOB_DTYPE.itemsize:
        raise FormatError(
            f"weight blob holds {blob.size} bytes, manifest needs {expected} float64 values",
            field="blob", offset=int(blob.size),
        )
    values = blob.view(BLOB_DTYPE)

    extractor_params = [{} for _ in extractor]
    head_params = [{} for _ in head]
    cursor = 0
    for entry in manifest["weights"]:
        prefix, index, name = _split_name(entry["name"])
        owner = extractor_params if prefix == "extractor" else head_params
        if index >= len(owner):
            raise FormatError(f"weight {entry['name']!r} names a missing layer", field="weights")
        count = int(np.prod(entry["shape"]))
        owner[index][name] = values[cursor:cursor + count].astype(np.float64).reshape(entry["shape"])
        cursor += count

    geometry = manifest["input_geometry"]
    return ModelBundle(
        extractor, head, extractor_params, head_params, manifest["class_count"],
        (geometry["height"], geometry["width"], geometry["channels"]),
        manifest.get("metrics") or {},
    )


def _split_name(name):
    parts = name.split(".")
    if len(parts) != 3 or parts[0] not in ("extractor", "head") or not parts[1].isdigit():
        raise FormatError(f"malformed weight name {name!r}", field="weights")
    return parts[0], int(parts[1]), parts[2]
