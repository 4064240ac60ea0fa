"""Feature-space edits: f(I*) = (1 - a) ∘ f(I) + a ∘ P f(I').

All functions are pure; inputs are immutable value types from ``models``.
"""
import numpy as np

from explainer_app.exceptions import BoundsError, ModeError, ShapeError
from explainer_app.models import (
    AlignmentMatrix, AlignmentMode, Edit, EditList, FeatureGrid, GateMode, GateVector,
)


def check_same_geometry(grid, distractor):
    for name, mine, theirs in zip(("height", "width", "depth"), grid.geometry, distractor.geometry):
        if mine != theirs:
            raise ShapeError(f"{name} mismatch: query {mine} vs distractor {theirs}", dimension=name)


def apply_edits(grid: FeatureGrid, distractor: FeatureGrid, gate: GateVector,
                alignment: AlignmentMatrix) -> FeatureGrid:
    """Blend ``distractor`` cells into ``grid`` through gate ``a`` and alignment ``P``.

    Works for both discrete and relaxed parameters; the gate is broadcast
    across the depth columns.
    """
    check_same_geometry(grid, distractor)
    if len(gate) != grid.cells:
        raise ShapeError(f"gate length {len(gate)} != {grid.cells} cells", dimension="gate")
    if len(alignment) != grid.cells:
        raise ShapeError(f"alignment is {len(alignment)}x{len(alignment)}, expected {grid.cells}",
                         dimension="alignment")
    a = gate.weights[:, None]
    blended = (1.0 - a) * grid.values + a * (alignment.entries @ distractor.values)
    return grid.with_values(blended)


def single_edit(grid: FeatureGrid, distractor: FeatureGrid, query_cell: int, source_cell: int) -> FeatureGrid:
    """Copy distractor row ``source_cell`` over query row ``query_cell``."""
    check_same_geometry(grid, distractor)
    for index in (query_cell, source_cell):
        if not 0 <= index < grid.cells:
            raise BoundsError(f"cell index {index} outside [0, {grid.cells})")
    values = grid.values.copy()
    values[query_cell] = distractor.values[source_cell]
    return grid.with_values(values)


def edited_batch(values, distractor_values, query_cell, source_cells):
    """Stack of raw hw×d matrices, one per source cell copied into ``query_cell``.

    Used by the candidate evaluators; shape (len(source_cells), hw, d).
    """
    batch = np.repeat(values[None, :, :], len(source_cells), axis=0)
    batch[:, query_cell, :] = distractor_values[np.asarray(source_cells, dtype=np.intp)]
    return batch


def extract_edit_set(gate: GateVector, alignment: AlignmentMatrix, *, width: int) -> EditList:
    """The pairs {(i, j, i', j') | a_(i,j) = 1 and P maps (i',j') onto (i,j)}, by query cell."""
    if gate.mode != GateMode.DISCRETE or alignment.mode != AlignmentMode.PERMUTATION:
        raise ModeError("edit sets need a discrete gate and a permutation alignment; round first")
    cells = len(gate)
    if len(alignment) != cells:
        raise ShapeError(f"alignment is {len(alignment)}x{len(alignment)}, expected {cells}",
                         dimension="alignment")
    if width <= 0 or cells % width:
        raise ShapeError(f"width {width} does not divide {cells} cells", dimension="width")
    edits = []
    for query_cell in np.flatnonzero(gate.weights == 1.0):
        source_cell = int(np.argmax(alignment.entries[query_cell]))
        edits.append(Edit(*divmod(int(query_cell), width), *divmod(source_cell, width)))
    return EditList(cells // width, width, tuple(edits))
