from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from django.db import models

from explainer_app.exceptions import BoundsError, ModeError, ShapeError

SIMPLEX_TOL = 1e-6


# ── Lookup / Enum helpers ────────────────────────────────────────────────


class GateMode(models.TextChoices):
    DISCRETE = "discrete", "Discrete"
    RELAXED  = "relaxed",  "Relaxed (simplex)"

class AlignmentMode(models.TextChoices):
    PERMUTATION    = "permutation",    "Permutation"
    ROW_STOCHASTIC = "row-stochastic", "Row-stochastic"

class ExclusionPolicy(models.TextChoices):
    QUERY_CELLS          = "query-cells-only",           "Query cells only"
    QUERY_AND_DISTRACTOR = "query-and-distractor-cells", "Query and distractor cells"

class SearchStrategy(models.TextChoices):
    EXHAUSTIVE = "exhaustive", "Exhaustive search"
    RELAXED    = "relaxed",    "Continuous relaxation"

class StopRule(models.TextChoices):
    ARGMAX   = "argmax",   "argmax g(F*) = c'"
    PAIRWISE = "pairwise", "g_c'(F*) > g_c(F*)"

class ExplanationStatus(models.TextChoices):
    FLIPPED   = "flipped",   "Flipped"
    EXHAUSTED = "exhausted", "Exhausted"

class LayerKind(models.TextChoices):
    CONV2D      = "conv2d",      "Convolution"
    RELU        = "relu",        "ReLU"
    MAXPOOL2D   = "maxpool2d",   "Max pooling"
    FLATTEN     = "flatten",     "Flatten"
    DENSE       = "dense",       "Fully connected"
    LOG_SOFTMAX = "log-softmax", "Log-softmax"

class HighlightMode(models.TextChoices):
    SOFT = "soft", "Radial falloff"
    HARD = "hard", "Hard box"

class DistractorClassPolicy(models.TextChoices):
    RANDOM     = "random",     "Random class"
    ATTRIBUTES = "attributes", "Nearest class by mean attributes"

class DistractorImagePolicy(models.TextChoices):
    RANDOM    = "random",    "Random image"
    KEYPOINTS = "keypoints", "Nearest image by keypoint locations"

class RoundingRule(models.TextChoices):
    ROW_BEST = "row-best", "Best discrete edit among the rows' alignment argmaxes"
    LEAD     = "lead",     "Argmax gate cell, then its alignment argmax"

class ShapeGrammar(models.TextChoices):
    POSITION = "position", "Shape left vs right"
    SHAPE    = "shape",    "Circle vs square vs triangle"
    COLOR    = "color",    "Red vs green vs blue"
    SINGLE   = "single",   "One class"


def _frozen_array(values):
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


# ── Feature-space value types ────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """h×w×d spatial features stored as an hw×d matrix, cell i = row*w + col."""

    height: int
    width:  int
    depth:  int
    values: np.ndarray

    def __post_init__(self):
        for name in ("height", "width", "depth"):
            if int(getattr(self, name)) <= 0:
                raise ShapeError(f"{name} must be positive", dimension=name)
        values = _frozen_array(self.values)
        if values.ndim != 2 or values.shape[0] != self.height * self.width:
            raise ShapeError(
                f"values must have {self.height * self.width} rows, got shape {values.shape}",
                dimension="cells",
            )
        if values.shape[1] != self.depth:
            raise ShapeError(
                f"values must have {self.depth} columns, got {values.shape[1]}",
                dimension="depth",
            )
        if not np.all(np.isfinite(values)):
            raise ShapeError("feature values must be finite", dimension="values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_hwd(cls, array):
        """Build from an (h, w, d) array."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 3:
            raise ShapeError(f"expected an (h, w, d) array, got shape {array.shape}", dimension="rank")
        h, w, d = array.shape
        return cls(h, w, d, array.reshape(h * w, d))

    @property
    def cells(self):
        return self.height * self.width

    @property
    def geometry(self):
        return (self.height, self.width, self.depth)

    def cell_index(self, row, col):
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise BoundsError(f"cell ({row}, {col}) outside {self.height}x{self.width} grid")
        return row * self.width + col

    def cell_coords(self, index):
        if not 0 <= index < self.cells:
            raise BoundsError(f"cell index {index} outside [0, {self.cells})")
        return divmod(int(index), self.width)

    def as_hwd(self):
        return self.values.reshape(self.height, self.width, self.depth)

    def with_values(self, values):
        return FeatureGrid(self.height, self.width, self.depth, values)

    def same_geometry(self, other):
        return self.geometry == other.geometry

    def __eq__(self, other):
        if not isinstance(other, FeatureGrid):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class GateVector:
    """The per-cell replacement gate ``a``."""

    weights: np.ndarray
    mode:    str = GateMode.DISCRETE

    def __post_init__(self):
        weights = _frozen_array(self.weights)
        if weights.ndim != 1:
            raise ShapeError("gate weights must be a vector", dimension="gate")
        if self.mode == GateMode.DISCRETE:
            if not np.all((weights == 0.0) | (weights == 1.0)):
                raise ModeError("discrete gate entries must be exactly 0 or 1")
        elif self.mode == GateMode.RELAXED:
            if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > SIMPLEX_TOL:
                raise ModeError("relaxed gate must be nonnegative and sum to 1")
        else:
            raise ModeError(f"unknown gate mode {self.mode!r}")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n))

    @classmethod
    def one_hot(cls, n, index):
        if not 0 <= index < n:
            raise BoundsError(f"cell index {index} outside [0, {n})")
        weights = np.zeros(n)
        weights[index] = 1.0
        return cls(weights)

    def __len__(self):
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class AlignmentMatrix:
    """The hw×hw matrix ``P``; row i says which distractor cell feeds query cell i."""

    entries: np.ndarray
    mode:    str = AlignmentMode.PERMUTATION

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"alignment must be square, got shape {entries.shape}", dimension="alignment")
        if self.mode == AlignmentMode.PERMUTATION:
            binary = np.all((entries == 0.0) | (entries == 1.0))
            if not (binary and np.all(entries.sum(axis=0) == 1.0) and np.all(entries.sum(axis=1) == 1.0)):
                raise ModeError("permutation alignment needs exactly one 1 per row and column")
        elif self.mode == AlignmentMode.ROW_STOCHASTIC:
            if np.any(entries < 0.0) or np.any(np.abs(entries.sum(axis=1) - 1.0) > SIMPLEX_TOL):
                raise ModeError("row-stochastic alignment rows must be nonnegative and sum to 1")
        else:
            raise ModeError(f"unknown alignment mode {self.mode!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def from_sources(cls, sources):
        """Permutation whose row i selects distractor cell ``sources[i]``."""
        sources = np.asarray(sources, dtype=np.intp)
        n = sources.shape[0]
        if sorted(sources.tolist()) != list(range(n)):
            raise ModeError("sources must be a permutation of the cell indices")
        entries = np.zeros((n, n))
        entries[np.arange(n), sources] = 1.0
        return cls(entries)

    @classmethod
    def transposition(cls, n, query_cell, source_cell):
        """Identity with rows swapped so that row ``query_cell`` selects ``source_cell``."""
        for index in (query_cell, source_cell):
            if not 0 <= index < n:
                raise BoundsError(f"cell index {index} outside [0, {n})")
        sources = np.arange(n)
        sources[query_cell], sources[source_cell] = source_cell, query_cell
        return cls.from_sources(sources)

    def __len__(self):
        return self.entries.shape[0]


class Edit(NamedTuple):
    """One copy: query cell (row, col) receives distractor cell (row, col)."""

    query_row:  int
    query_col:  int
    source_row: int
    source_col: int

    def query_cell(self, width):
        return self.query_row * width + self.query_col

    def source_cell(self, width):
        return self.source_row * width + self.source_col


@dataclass(frozen=True)
class EditList:
    height: int
    width:  int
    edits:  tuple = ()

    def __post_init__(self):
        edits = tuple(Edit(*(int(v) for v in edit)) for edit in self.edits)
        seen = set()
        for edit in edits:
            if not (0 <= edit.query_row < self.height and 0 <= edit.query_col < self.width
                    and 0 <= edit.source_row < self.height and 0 <= edit.source_col < self.width):
                raise BoundsError(f"edit {tuple(edit)} outside {self.height}x{self.width} grid")
            if (edit.query_row, edit.query_col) in seen:
                raise ModeError(f"query cell ({edit.query_row}, {edit.query_col}) edited twice")
            seen.add((edit.query_row, edit.query_col))
        object.__setattr__(self, "edits", edits)

    def __len__(self):
        return len(self.edits)

    def __iter__(self):
        return iter(self.edits)

    def __getitem__(self, index):
        return self.edits[index]

    def appended(self, edit):
        return EditList(self.height, self.width, self.edits + (edit,))

    def query_cells(self):
        return [edit.query_cell(self.width) for edit in self.edits]

    def source_cells(self):
        return [edit.source_cell(self.width) for edit in self.edits]


# ── Search results ───────────────────────────────────────────────────────


class TrajectoryPoint(NamedTuple):
    """(g_c, g_c') of the evolving grid; c is the query's original class."""

    query_logprob:  float
    target_logprob: float


@dataclass(frozen=True)
class ExplanationResult:
    edits:          EditList
    trajectory:     tuple
    status:         str
    query_class:    int
    target_class:   int
    query_id:       str = "query"
    distractor_id:  str = "distractor"
    strategy:       str = SearchStrategy.EXHAUSTIVE
    notes:          tuple = field(default=())

    def __post_init__(self):
        trajectory = tuple(TrajectoryPoint(float(a), float(b)) for a, b in self.trajectory)
        if len(trajectory) != len(self.edits) + 1:
            raise ShapeError(
                f"trajectory has {len(trajectory)} points for {len(self.edits)} edits",
                dimension="trajectory",
            )
        if self.status not in ExplanationStatus.values:
            raise ModeError(f"unknown status {self.status!r}")
        object.__setattr__(self, "trajectory", trajectory)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def flipped(self):
        return self.status == ExplanationStatus.FLIPPED

    @property
    def edit_count(self):
        return len(self.edits)
