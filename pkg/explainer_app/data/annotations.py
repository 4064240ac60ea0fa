"""Per-image segmentation masks and named keypoints."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from explainer_app.exceptions import BoundsError, ShapeError


class Keypoint(NamedTuple):
    name:    str
    x:       float
    y:       float
    visible: bool = True


@dataclass(frozen=True, eq=False)
class ImageAnnotation:
    mask:      np.ndarray                  # (H, W) bool, True inside the object
    keypoints: tuple = field(default=())

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool, copy=True)
        if mask.ndim != 2:
            raise ShapeError("segmentation mask must be a 2-D raster", dimension="mask")
        mask.setflags(write=False)
        height, width = mask.shape
        keypoints = tuple(Keypoint(str(k[0]), float(k[1]), float(k[2]), bool(k[3])) for k in self.keypoints)
        for point in keypoints:
            if point.visible and not (0 <= point.x < width and 0 <= point.y < height):
                raise BoundsError(f"visible keypoint {point.name!r} at ({point.x}, {point.y}) outside image")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "keypoints", keypoints)

    def visible_keypoints(self):
        return [point for point in self.keypoints if point.visible]

    def keypoint_vector(self, names):
        """Coordinates for ``names`` in order; NaN for missing or hidden points."""
        lookup = {point.name: point for point in self.visible_keypoints()}
        coords = []
        for name in names:
            point = lookup.get(name)
            coords.extend((point.x, point.y) if point else (np.nan, np.nan))
        return np.array(coords)


@dataclass(frozen=True)
class AnnotationSet:
    images: dict = field(default_factory=dict)     # image id -> ImageAnnotation

    def __contains__(self, image_id):
        return image_id in self.images

    def __getitem__(self, image_id):
        return self.images[image_id]

    def __len__(self):
        return len(self.images)

    def get(self, image_id):
        return self.images.get(image_id)

    def restricted(self, image_ids):
        return AnnotationSet({image_id: self.images[image_id] for image_id in image_ids if image_id in self.images})
