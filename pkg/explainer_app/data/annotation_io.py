"""YAML annotation files (masks as PGM references) and class attribute tables."""
import logging
from pathlib import Path

import numpy as np
import yaml

from explainer_app.data.annotations import AnnotationSet, ImageAnnotation, Keypoint
from explainer_app.exceptions import FormatError
from explainer_app.rendering.pnm import read_pnm, write_pnm
from explainer_app.serializers import validate_document
from explainer_app.serializers.annotation_serializer import (
    ANNOTATIONS_FORMAT, DOCUMENT_VERSION, AnnotationFileSerializer, AttributeTableSerializer,
)

logger = logging.getLogger(__name__)

MASK_DIR = "masks"


def _load_yaml(path, document):
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {document} {path}: {exc}", field=document) from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"{document} {path} is not valid YAML: {exc}", field=document) from exc


def write_annotations(path, annotations: AnnotationSet):
    path = Path(path)
    images = []
    for image_id in sorted(annotations.images):
        annotation = annotations[image_id]
        mask_name = f"{MASK_DIR}/{image_id.replace(':', '_').replace('/', '_')}.pgm"
        write_pnm(path.parent / mask_name, annotation.mask.astype(np.float64))
        images.append({
            "id": image_id,
            "mask": mask_name,
            "keypoints": [
                {"name": p.name, "x": p.x, "y": p.y, "visible": p.visible} for p in annotation.keypoints
            ],
        })
    document = {"format": ANNOTATIONS_FORMAT, "version": DOCUMENT_VERSION, "images": images}
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(document, fh, sort_keys=False)
    logger.info("annotations written path=%s images=%d", path, len(images))
    return path


def load_annotations(path) -> AnnotationSet:
    path = Path(path)
    document = validate_document(AnnotationFileSerializer, _load_yaml(path, "annotations"), "annotations")
    images = {}
    for entry in document["images"]:
        mask = read_pnm(path.parent / entry["mask"])
        if mask.ndim == 3:
            mask = mask.mean(axis=2)
        keypoints = tuple(
            Keypoint(k["name"], k["x"], k["y"], k["visible"]) for k in entry.get("keypoints", ())
        )
        images[entry["id"]] = ImageAnnotation(mask >= 0.5, keypoints)
    return AnnotationSet(images)


def load_attributes(path):
    """(class_count, k) array of per-class attribute means."""
    document = validate_document(AttributeTableSerializer, _load_yaml(Path(path), "attributes"), "attributes")
    rows = sorted(document["classes"], key=lambda entry: entry["label"])
    return np.array([entry["values"] for entry in rows], dtype=np.float64)
