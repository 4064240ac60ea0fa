"""Pixel rectangles seen by each feature cell of a conv/pool extractor.

Walks the layers keeping field size, jump (cumulative stride) and the pixel
offset of cell (0, 0):

    field += (kernel - 1) * jump
    start -= padding * jump
    jump  *= stride
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from explainer_app.exceptions import BoundsError, ShapeError, UnsupportedLayerError
from explainer_app.models import LayerKind
from explainer_app.nn.layers import build_layer


class Rect(NamedTuple):
    """Inclusive pixel bounds."""

    top:    int
    left:   int
    bottom: int
    right:  int

    @property
    def center(self):
        return ((self.top + self.bottom) / 2.0, (self.left + self.right) / 2.0)

    def contains(self, y, x):
        return self.top <= y <= self.bottom and self.left <= x <= self.right

    def distance(self, y, x):
        """Euclidean distance from pixel (y, x) to the rectangle; 0 inside."""
        dy = max(self.top - y, 0.0, y - self.bottom)
        dx = max(self.left - x, 0.0, x - self.right)
        return float(np.hypot(dy, dx))


def field_parameters(extractor):
    """(field size, jump, start offset) of the extractor's output cells."""
    field, jump, start = 1, 1, 0
    for spec in extractor:
        if spec.kind == LayerKind.CONV2D:
            field += (spec.kernel_size - 1) * jump
            start -= spec.padding * jump
            jump *= spec.stride
        elif spec.kind == LayerKind.MAXPOOL2D:
            field += (spec.window - 1) * jump
            jump *= spec.stride
        elif spec.kind != LayerKind.RELU:
            raise UnsupportedLayerError(
                f"receptive fields need a conv/pool/relu extractor, found {spec.kind!r}", kind=spec.kind,
            )
    return field, jump, start


def _grid_size(extractor, image_height, image_width):
    shape = (1, image_height, image_width)
    for spec in extractor:
        shape = build_layer(spec).output_shape(shape)
    return shape[1], shape[2]


def receptive_field(extractor, cell, image_geometry):
    """Clipped rectangle for ``cell`` = (row, col); ``image_geometry`` = (height, width[, channels])."""
    image_height, image_width = image_geometry[:2]
    field, jump, start = field_parameters(extractor)
    row, col = cell
    top, left = start + row * jump, start + col * jump
    rect = Rect(max(top, 0), max(left, 0),
                min(top + field - 1, image_height - 1), min(left + field - 1, image_width - 1))
    if rect.top > rect.bottom or rect.left > rect.right:
        raise ShapeError(f"cell {cell} maps outside the {image_height}x{image_width} image", dimension="cell")
    return rect


@dataclass(frozen=True, eq=False)
class ReceptiveFieldMap:
    grid_height:  int
    grid_width:   int
    image_height: int
    image_width:  int
    field_size:   int
    stride:       int
    offset:       int
    rectangles:   tuple      # one Rect per cell, row-major

    @classmethod
    def for_extractor(cls, extractor, image_geometry):
        image_height, image_width = image_geometry[:2]
        field, jump, start = field_parameters(extractor)
        grid_height, grid_width = _grid_size(extractor, image_height, image_width)
        rectangles = tuple(
            receptive_field(extractor, (row, col), (image_height, image_width))
            for row in range(grid_height) for col in range(grid_width)
        )
        return cls(grid_height, grid_width, image_height, image_width, field, jump, start, rectangles)

    @classmethod
    def for_model(cls, model):
        return cls.for_extractor(model.extractor, model.input_geometry)

    @property
    def cells(self):
        return self.grid_height * self.grid_width

    def rectangle(self, cell):
        if not 0 <= cell < self.cells:
            raise BoundsError(f"cell index {cell} outside [0, {self.cells})")
        return self.rectangles[cell]

    def center(self, cell):
        return self.rectangle(cell).center
