"""Synthetic colored-shape datasets with segmentation masks and keypoints.

Each image holds one filled shape on a dark, lightly noised background. The
grammar decides which attribute carries the label:

    position  shape in the left half (0) or right half (1)
    shape     circle (0), square (1), triangle (2)
    color     red (0), green (1), blue (2)
    single    everything is class 0
"""
import logging

import numpy as np

from explainer_app.data.annotations import AnnotationSet, ImageAnnotation, Keypoint
from explainer_app.data.dataset import Dataset
from explainer_app.exceptions import ConfigError
from explainer_app.models import ShapeGrammar
from explainer_app.seeding import seeded_stream

logger = logging.getLogger(__name__)

SHAPES = ("circle", "square", "triangle")
PALETTE = (
    (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0), (0.0, 1.0, 1.0), (1.0, 0.0, 1.0),
)
CLASS_COUNTS = {
    ShapeGrammar.POSITION: 2,
    ShapeGrammar.SHAPE: 3,
    ShapeGrammar.COLOR: 3,
    ShapeGrammar.SINGLE: 1,
}
NOISE = 0.03


def shape_mask(kind, height, width, cy, cx, radius):
    ys, xs = np.mgrid[0:height, 0:width]
    dy, dx = ys - cy, xs - cx
    if kind == "circle":
        return dy ** 2 + dx ** 2 <= radius ** 2
    if kind == "square":
        return (np.abs(dy) <= radius) & (np.abs(dx) <= radius)
    # apex up, base on row cy + radius
    half_width = (dy + radius) / 2.0
    return (np.abs(dy) <= radius) & (np.abs(dx) <= half_width)


def _draw(grammar, label, height, width, rng):
    radius = int(rng.integers(max(2, min(height, width) // 8), max(3, min(height, width) // 5) + 1))
    kind = SHAPES[label] if grammar == ShapeGrammar.SHAPE else SHAPES[int(rng.integers(len(SHAPES)))]
    color = PALETTE[label] if grammar == ShapeGrammar.COLOR else PALETTE[int(rng.integers(len(PALETTE)))]
    cy = int(rng.integers(radius, height - radius))
    if grammar == ShapeGrammar.POSITION:
        high = max(radius, width // 2 - radius - 1)
        cx = int(rng.integers(radius, high + 1))
        if label == 1:
            cx = width - 1 - cx
    else:
        cx = int(rng.integers(radius, width - radius))
    return kind, color, cy, cx, radius


def gen_shapes(count, geometry=(28, 28), grammar=ShapeGrammar.POSITION, seed=0, split="train") -> Dataset:
    """``count`` labeled RGB images drawn from the "shapes" substream of ``seed``.

    Splits other than "train" use their own substream, so a test set never
    repeats training images.
    """
    if count <= 0:
        raise ConfigError("count must be positive", field="count")
    if grammar not in ShapeGrammar.values:
        raise ConfigError(f"unknown shape grammar {grammar!r}", field="grammar")
    height, width = geometry[:2]
    if min(height, width) < 8:
        raise ConfigError("shape images need at least 8x8 pixels", field="geometry")

    rng = seeded_stream(seed, "shapes" if split == "train" else f"shapes-{split}")
    class_count = CLASS_COUNTS[grammar]
    labels = rng.integers(class_count, size=count)
    images = np.zeros((count, height, width, 3))
    ids, annotations = [], {}
    for index, label in enumerate(labels):
        kind, color, cy, cx, radius = _draw(grammar, int(label), height, width, rng)
        mask = shape_mask(kind, height, width, cy, cx, radius)
        background = np.clip(rng.normal(0.0, NOISE, size=(height, width, 3)), 0.0, 1.0)
        images[index] = np.where(mask[:, :, None], np.asarray(color), background)
        image_id = f"{split}:{index}"
        ids.append(image_id)
        annotations[image_id] = ImageAnnotation(mask, (
            Keypoint("center", cx, cy),
            Keypoint("top", cx, cy - radius),
            Keypoint("bottom", cx, cy + radius),
            Keypoint("left", cx - radius, cy),
            Keypoint("right", cx + radius, cy),
        ))
    logger.info("shapes generated count=%d grammar=%s geometry=%dx%d seed=%d",
                count, grammar, height, width, seed)
    return Dataset(images, labels, split, class_count, tuple(ids), AnnotationSet(annotations),
                   source=f"shapes:{grammar}")
