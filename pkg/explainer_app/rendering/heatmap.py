"""Highlight heatmaps and pixel-space composites of feature edits.

All functions are pure and deterministic; rasters are float64 in [0, 1].
"""
from dataclasses import dataclass

import numpy as np

from explainer_app.exceptions import ShapeError
from explainer_app.models import ExplanationResult, HighlightMode

HIGHLIGHT_COLOR = (1.0, 0.0, 0.0)


def as_raster(image):
    """(H, W) or (H, W, C) image → float64 (H, W, C) copy."""
    raster = np.array(image, dtype=np.float64, copy=True)
    if raster.ndim == 2:
        raster = raster[:, :, None]
    if raster.ndim != 3:
        raise ShapeError(f"expected an (H, W[, C]) image, got shape {raster.shape}", dimension="rank")
    return raster


def to_rgb(image):
    raster = as_raster(image)
    if raster.shape[2] == 1:
        return np.repeat(raster, 3, axis=2)
    if raster.shape[2] != 3:
        raise ShapeError(f"cannot show {raster.shape[2]} channels as RGB", dimension="channels")
    return raster


def _falloff(rect, mode):
    height, width = rect.bottom - rect.top + 1, rect.right - rect.left + 1
    if mode == HighlightMode.HARD:
        return np.ones((height, width))
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    ys = (np.arange(height) - cy) / (cy + 0.5)
    xs = (np.arange(width) - cx) / (cx + 0.5)
    distance = np.hypot(ys[:, None], xs[None, :])
    return np.clip(1.0 - distance, 0.0, 1.0)


def highlight_intensity(image_shape, cells, rf, mode=HighlightMode.SOFT):
    """(H, W) intensity map; ``cells`` maps cell index → weight, overlaps keep the max."""
    height, width = image_shape[:2]
    intensity = np.zeros((height, width))
    for cell, weight in dict(cells).items():
        weight = float(np.clip(weight, 0.0, 1.0))
        rect = rf.rectangle(int(cell))
        window = intensity[rect.top:rect.bottom + 1, rect.left:rect.right + 1]
        np.maximum(window, weight * _falloff(rect, mode), out=window)
    return intensity


def render_heatmap(image, cells, rf, mode=HighlightMode.SOFT, color=HIGHLIGHT_COLOR):
    """RGB raster with each cell's receptive field tinted toward ``color``."""
    rgb = to_rgb(image)
    if not cells:
        return rgb
    alpha = highlight_intensity(rgb.shape, cells, rf, mode)[:, :, None]
    return (1.0 - alpha) * rgb + alpha * np.asarray(color, dtype=np.float64)


def _center_offset(query_rect, source_rect):
    # twice the center difference is an integer; floor keeps the shift integral
    dy = ((query_rect.top + query_rect.bottom) - (source_rect.top + source_rect.bottom)) // 2
    dx = ((query_rect.left + query_rect.right) - (source_rect.left + source_rect.right)) // 2
    return dy, dx


def blend_patch(canvas, distractor, alpha, offset):
    """Alpha-blend ``distractor`` shifted by ``offset`` onto ``canvas``.

    ``alpha`` lives in distractor coordinates; query pixels whose source falls
    outside the distractor are left alone.
    """
    height, width = canvas.shape[:2]
    dy, dx = offset
    source_rows, source_cols = np.arange(height) - dy, np.arange(width) - dx
    rows_ok = (source_rows >= 0) & (source_rows < distractor.shape[0])
    cols_ok = (source_cols >= 0) & (source_cols < distractor.shape[1])
    target = np.ix_(np.flatnonzero(rows_ok), np.flatnonzero(cols_ok))
    source = np.ix_(source_rows[rows_ok], source_cols[cols_ok])
    weight = alpha[source][:, :, None]
    out = canvas.copy()
    out[target] = (1.0 - weight) * canvas[target] + weight * distractor[source]
    return out


def render_composite(query_image, distractor_image, edit, rf_query, rf_distractor, mode=HighlightMode.SOFT):
    """Paste the distractor's highlighted patch for ``edit`` onto the query."""
    query, distractor = as_raster(query_image), as_raster(distractor_image)
    if query.shape != distractor.shape:
        raise ShapeError(f"query {query.shape} and distractor {distractor.shape} differ", dimension="image")
    query_cell = edit.query_cell(rf_query.grid_width)
    source_cell = edit.source_cell(rf_distractor.grid_width)
    alpha = highlight_intensity(distractor.shape, {source_cell: 1.0}, rf_distractor, mode)
    offset = _center_offset(rf_query.rectangle(query_cell), rf_distractor.rectangle(source_cell))
    return blend_patch(query, distractor, alpha, offset)


@dataclass(frozen=True, eq=False)
class RenderedExplanation:
    query_heatmap:      np.ndarray
    distractor_heatmap: np.ndarray
    composite:          np.ndarray
    result:             ExplanationResult

    def rasters(self):
        return {
            "query_heatmap": self.query_heatmap,
            "distractor_heatmap": self.distractor_heatmap,
            "composite": self.composite,
        }


def render_explanation(result, query_image, distractor_image, rf_query, rf_distractor,
                       mode=HighlightMode.SOFT) -> RenderedExplanation:
    """Heatmaps of every edited cell and the composite of all edits in selection order."""
    width = result.edits.width
    query_cells = {cell: 1.0 for cell in result.edits.query_cells()}
    source_cells = {cell: 1.0 for cell in result.edits.source_cells()}
    if rf_query.grid_width != width:
        raise ShapeError(f"record grid width {width} != receptive-field grid width {rf_query.grid_width}",
                         dimension="width")
    composite = as_raster(query_image)
    for edit in result.edits:
        composite = render_composite(composite, distractor_image, edit, rf_query, rf_distractor, mode)
    return RenderedExplanation(
        render_heatmap(query_image, query_cells, rf_query, mode),
        render_heatmap(distractor_image, source_cells, rf_distractor, mode),
        np.clip(composite, 0.0, 1.0),
        result,
    )
