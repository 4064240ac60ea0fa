"""Greedy sequential editing until the model's decision becomes the distractor class."""
import logging

import numpy as np

from explainer_app.exceptions import ExhaustedError
from explainer_app.features import check_same_geometry, single_edit
from explainer_app.models import (
    Edit, EditList, ExplanationResult, ExplanationStatus, SearchStrategy, StopRule,
)
from explainer_app.nn.network import forward_features, head_logprobs
from explainer_app.search.config import CandidateFilter, SearchConfig
from explainer_app.search.exhaustive import best_edit_exhaustive
from explainer_app.search.relaxed import best_edit_relaxed

logger = logging.getLogger(__name__)


def best_edit(model, grid, distractor, target_class, excluded, config: SearchConfig):
    """(query cell, distractor cell, score) from the configured strategy."""
    if config.strategy == SearchStrategy.RELAXED:
        found = best_edit_relaxed(model, grid, distractor, target_class, excluded, config.relax)
        return found.query_cell, found.source_cell, found.score
    found = best_edit_exhaustive(model, grid, distractor, target_class, excluded, config.workers)
    return found.query_cell, found.source_cell, found.score


def _decided(logprobs, query_class, target_class, stop_rule):
    if stop_rule == StopRule.PAIRWISE:
        return logprobs[target_class] > logprobs[query_class]
    return int(np.argmax(logprobs)) == target_class


def greedy_counterfactual(model, query_image, distractor_image, target_class, config=SearchConfig(),
                          query_id="query", distractor_id="distractor") -> ExplanationResult:
    """Explain "why not ``target_class``" for ``query_image`` using ``distractor_image``."""
    grid = forward_features(model, query_image)
    distractor = forward_features(model, distractor_image)
    notes = []
    distractor_class = int(np.argmax(head_logprobs(model, distractor)))
    if distractor_class != target_class:
        logger.warning("distractor misclassified distractor_id=%s predicted=%d target=%d",
                       distractor_id, distractor_class, target_class)
        notes.append(f"distractor predicted {distractor_class}, not {target_class}")
    return greedy_counterfactual_features(model, grid, distractor, target_class, config,
                                          query_id, distractor_id, notes)


def greedy_counterfactual_features(model, grid, distractor, target_class, config=SearchConfig(),
                                   query_id="query", distractor_id="distractor", notes=()) -> ExplanationResult:
    """The greedy loop on precomputed feature grids F = f(I) and F' = f(I')."""
    check_same_geometry(grid, distractor)
    notes = list(notes)
    logprobs = head_logprobs(model, grid)
    query_class = int(np.argmax(logprobs))
    trajectory = [(logprobs[query_class], logprobs[target_class])]
    edits = EditList(grid.height, grid.width)

    def result(status):
        return ExplanationResult(edits, trajectory, status, query_class, target_class,
                                 query_id, distractor_id, config.strategy, tuple(notes))

    if query_class == target_class:
        logger.info("query already predicted as target query_id=%s class=%d", query_id, target_class)
        return result(ExplanationStatus.FLIPPED)

    budget = config.edit_budget(grid.cells)
    excluded = CandidateFilter()
    current = grid
    status = ExplanationStatus.EXHAUSTED
    while True:
        if _decided(logprobs, query_class, target_class, config.stop_rule):
            status = ExplanationStatus.FLIPPED
            winner = int(np.argmax(logprobs))
            if winner != target_class:
                # pairwise flips only promise target over query class, not the overall argmax
                notes.append(f"stopped by pairwise rule: argmax is class {winner}, not {target_class}")
                logger.info("pairwise stop without argmax query_id=%s argmax=%d target=%d",
                            query_id, winner, target_class)
            break
        if len(edits) >= budget:
            break
        try:
            query_cell, source_cell, score = best_edit(model, current, distractor, target_class, excluded, config)
        except ExhaustedError:
            break
        current = single_edit(current, distractor, query_cell, source_cell)
        logprobs = head_logprobs(model, current)
        edits = edits.appended(Edit(*grid.cell_coords(query_cell), *grid.cell_coords(source_cell)))
        trajectory.append((logprobs[query_class], logprobs[target_class]))
        excluded = excluded.after_edit(query_cell, source_cell, config.exclusion_policy)
        logger.info("greedy step=%d query_cell=%d source_cell=%d score=%.6f query_id=%s",
                    len(edits), query_cell, source_cell, score, query_id)

    logger.info("greedy done query_id=%s distractor_id=%s status=%s edits=%d",
                query_id, distractor_id, status, len(edits))
    return result(status)
