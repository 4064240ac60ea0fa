"""Best single edit by exhaustive search over (query cell, distractor cell) pairs.

Each query cell is scored as one batch of edited grids through the head; the
batches may run on a thread pool. The reduction is a row-major argmax, so
the winner is the smallest query cell, then the smallest distractor cell,
whatever the completion order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from explainer_app.exceptions import ExhaustedError
from explainer_app.features import check_same_geometry, edited_batch
from explainer_app.nn.network import head_logprobs_batch
from explainer_app.search.config import CandidateFilter

logger = logging.getLogger(__name__)


class BestEdit(NamedTuple):
    query_cell:  int
    source_cell: int
    score:       float           # g_c' of the edited grid


def candidate_scores(model, grid, distractor, target_class, excluded=CandidateFilter(), workers=1):
    """(hw, hw) matrix of g_c' per candidate edit; -inf where the pair is excluded."""
    check_same_geometry(grid, distractor)
    allowed = excluded.allowed(grid.cells)
    scores = np.full(allowed.shape, -np.inf)
    rows = [i for i in range(grid.cells) if allowed[i].any()]

    def score_row(query_cell):
        sources = np.flatnonzero(allowed[query_cell])
        batch = edited_batch(grid.values, distractor.values, query_cell, sources)
        return query_cell, sources, head_logprobs_batch(model, batch)[:, target_class]

    if workers > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score_row, rows))
    else:
        results = [score_row(i) for i in rows]
    for query_cell, sources, row_scores in results:
        scores[query_cell, sources] = row_scores
    return scores, allowed


def best_edit_exhaustive(model, grid, distractor, target_class, excluded=CandidateFilter(), workers=1) -> BestEdit:
    """argmax over non-excluded pairs of g_c'(single_edit(F, F', i, j'))."""
    scores, allowed = candidate_scores(model, grid, distractor, target_class, excluded, workers)
    candidates = np.flatnonzero(allowed)
    if candidates.size == 0:
        raise ExhaustedError("every candidate edit is excluded")
    best = int(candidates[np.argmax(scores.flat[candidates])])
    query_cell, source_cell = divmod(best, grid.cells)
    logger.debug("exhaustive best query_cell=%d source_cell=%d score=%.6f candidates=%d",
                 query_cell, source_cell, scores.flat[best], candidates.size)
    return BestEdit(query_cell, source_cell, float(scores.flat[best]))
