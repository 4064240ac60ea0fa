"""Quantitative analysis of explanations.

Every report carries its per-sample records so numbers can be audited; rates
are computed from sorted sample values so they do not depend on input order.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from explainer_app.exceptions import EvaluationError
from explainer_app.features import check_same_geometry
from explainer_app.models import SearchStrategy
from explainer_app.nn.bundle_io import plain
from explainer_app.nn.network import forward_features
from explainer_app.search.config import CandidateFilter, RelaxOptConfig, SearchConfig
from explainer_app.search.exhaustive import best_edit_exhaustive
from explainer_app.search.greedy import best_edit
from explainer_app.search.relaxed import best_edit_relaxed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricReport:
    name:         str
    value:        float | None        # None for a degenerate report
    sample_count: int
    samples:      tuple = ()
    details:      dict = field(default_factory=dict)
    notes:        tuple = ()
    rate:         bool = True

    def __post_init__(self):
        if self.sample_count <= 0:
            raise EvaluationError(f"{self.name}: no samples")
        if self.rate and self.value is not None and not 0.0 <= self.value <= 1.0:
            raise EvaluationError(f"{self.name}: rate {self.value} outside [0, 1]")
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "notes", tuple(self.notes))

    def to_dict(self):
        return plain({
            "name": self.name,
            "value": self.value,
            "sample_count": self.sample_count,
            "details": self.details,
            "notes": list(self.notes),
            "samples": list(self.samples),
        })


def _mean(values):
    return float(np.mean(sorted(values)))


# ── edit counts ──────────────────────────────────────────────────────────


def avg_edit_count(results, name="avg_edit_count") -> MetricReport:
    """Mean/median/histogram of edits among flipped results plus the flip rate."""
    results = list(results)
    if not results:
        raise EvaluationError("avg_edit_count needs at least one result")
    counts = sorted(result.edit_count for result in results if result.flipped)
    flip_rate = len(counts) / len(results)
    histogram = {count: counts.count(count) for count in sorted(set(counts))}
    details = {
        "flip_rate": flip_rate,
        "flipped": len(counts),
        "exhausted": len(results) - len(counts),
        "mean": _mean(counts) if counts else None,
        "median": float(np.median(counts)) if counts else None,
        "histogram": histogram,
    }
    samples = [
        {"query_id": r.query_id, "distractor_id": r.distractor_id, "status": str(r.status), "edits": r.edit_count}
        for r in results
    ]
    notes = () if counts else ("no result flipped; mean undefined",)
    return MetricReport(name, details["mean"], len(results), samples, details, notes, rate=False)


# ── distractor agreement ─────────────────────────────────────────────────


class AgreementQuery(NamedTuple):
    """One query image and its distractors as (target class, image) pairs."""

    query_id:    str
    image:       np.ndarray
    distractors: tuple


def _selected_query_cells(model, query, config):
    grid = forward_features(model, query.image)
    cells = []
    for target_class, distractor_image in query.distractors:
        distractor = forward_features(model, distractor_image)
        query_cell, _, _ = best_edit(model, grid, distractor, int(target_class), CandidateFilter(), config)
        cells.append((int(target_class), query_cell))
    return cells


def _agreement(name, model, queries, config, pair_filter, usable):
    samples, notes, agree, total = [], [], 0, 0
    for query in queries:
        if not usable(query):
            notes.append(f"{query.query_id}: skipped, not enough usable distractors")
            logger.warning("agreement skipped query_id=%s distractors=%d", query.query_id, len(query.distractors))
            continue
        cells = _selected_query_cells(model, query, config)
        pairs = [(a, b) for a, b in combinations(cells, 2) if pair_filter(a, b)]
        hits = sum(a[1] == b[1] for a, b in pairs)
        agree += hits
        total += len(pairs)
        samples.append({"query_id": query.query_id, "cells": cells, "pairs": len(pairs), "agreeing": hits})
    if total == 0:
        raise EvaluationError(f"{name}: no query had enough usable distractors")
    return MetricReport(name, agree / total, total, samples, {"queries": len(samples)}, notes)


def agreement_same_class(model, queries, config=SearchConfig()) -> MetricReport:
    """Fraction of distractor pairs (same c') whose best edit picks the same query cell."""
    queries = list(queries)
    return _agreement(
        "agreement_same_class", model, queries, config,
        pair_filter=lambda a, b: a[0] == b[0],
        usable=lambda q: len(q.distractors) >= 2,
    )


def agreement_cross_class(model, queries, config=SearchConfig()) -> MetricReport:
    """As ``agreement_same_class`` but over distractor pairs with different classes c'."""
    queries = list(queries)
    classes = {int(target) for query in queries for target, _ in query.distractors}
    if len(classes) < 2:
        raise EvaluationError("cross-class agreement needs at least 2 distractor classes")
    return _agreement(
        "agreement_cross_class", model, queries, config,
        pair_filter=lambda a, b: a[0] != b[0],
        usable=lambda q: len({int(target) for target, _ in q.distractors}) >= 2,
    )


# ── relaxation fidelity ──────────────────────────────────────────────────


class BestEditInstance(NamedTuple):
    grid:         object
    distractor:   object
    target_class: int
    excluded:     CandidateFilter = CandidateFilter()
    instance_id:  str = ""


def relaxation_fidelity(model, instances, opt=RelaxOptConfig(), compare=SearchStrategy.RELAXED,
                        workers=1) -> MetricReport:
    """Exact-match rate of (i, j') and mean probability ratio, ``compare`` vs exhaustive.

    ``compare=exhaustive`` runs the exhaustive search against itself.
    """
    instances = list(instances)
    if not instances:
        raise EvaluationError("relaxation_fidelity needs at least one instance")
    samples, matches, ratios = [], 0, []
    for index, instance in enumerate(instances):
        check_same_geometry(instance.grid, instance.distractor)
        args = (model, instance.grid, instance.distractor, instance.target_class, instance.excluded)
        optimal = best_edit_exhaustive(*args, workers=workers)
        if compare == SearchStrategy.EXHAUSTIVE:
            candidate = best_edit_exhaustive(*args, workers=workers)
        else:
            candidate = best_edit_relaxed(*args, opt=opt)
        matched = (candidate.query_cell, candidate.source_cell) == (optimal.query_cell, optimal.source_cell)
        ratio = float(np.exp(candidate.score - optimal.score))
        matches += matched
        ratios.append(ratio)
        samples.append({
            "instance": instance.instance_id or str(index),
            "exhaustive": [optimal.query_cell, optimal.source_cell],
            "candidate": [candidate.query_cell, candidate.source_cell],
            "match": matched,
            "ratio": ratio,
        })
    match_rate = matches / len(instances)
    details = {"match_rate": match_rate, "probability_ratio": _mean(ratios), "compare": str(compare)}
    logger.info("fidelity instances=%d match_rate=%.4f ratio=%.4f", len(instances), match_rate, details["probability_ratio"])
    return MetricReport("relaxation_fidelity", match_rate, len(instances), samples, details)


# ── annotation hit rates ─────────────────────────────────────────────────


def _center_pixel(rect):
    cy, cx = rect.center
    return int(np.floor(cy)), int(np.floor(cx))


def _near_keypoint(rect, annotation, radius):
    return any(rect.distance(point.y, point.x) <= radius for point in annotation.visible_keypoints())


def _nearest_keypoint(rect, annotation):
    cy, cx = rect.center
    points = annotation.visible_keypoints()
    if not points:
        return None
    distances = [(float(np.hypot(point.y - cy, point.x - cx)), point.name) for point in points]
    return min(distances)[1]


def region_annotation_hit_rate(results, annotations, rf_query, rf_distractor=None, radius=None) -> dict:
    """Segmentation, keypoint-proximity and same-keypoint rates of the edited cells.

    Returns name → MetricReport; a rate with no samples is left out.
    """
    rf_distractor = rf_distractor or rf_query
    if radius is None:
        radius = rf_query.stride / 2.0
    tallies = {name: [] for name in (
        "segmentation_query", "segmentation_distractor",
        "keypoint_query", "keypoint_distractor", "same_keypoint",
    )}
    notes = []
    for result in results:
        query_ann = annotations.get(result.query_id)
        distractor_ann = annotations.get(result.distractor_id)
        if query_ann is None or distractor_ann is None:
            missing = result.query_id if query_ann is None else result.distractor_id
            notes.append(f"{missing}: no annotation, skipped")
            logger.warning("hit rate skipped image_id=%s reason=missing-annotation", missing)
            continue
        mismatched = [
            (image_id, ann.mask.shape, (rf.image_height, rf.image_width))
            for image_id, ann, rf in ((result.query_id, query_ann, rf_query),
                                      (result.distractor_id, distractor_ann, rf_distractor))
            if ann.mask.shape != (rf.image_height, rf.image_width)
        ]
        if mismatched:
            image_id, mask_shape, image_shape = mismatched[0]
            notes.append(f"{image_id}: mask {mask_shape} does not match image {image_shape}, skipped")
            logger.warning("hit rate skipped image_id=%s reason=mask-shape mask=%s image=%s",
                           image_id, mask_shape, image_shape)
            continue
        width = result.edits.width
        for edit in result.edits:
            query_rect = rf_query.rectangle(edit.query_cell(width))
            source_rect = rf_distractor.rectangle(edit.source_cell(width))
            tallies["segmentation_query"].append(bool(query_ann.mask[_center_pixel(query_rect)]))
            tallies["segmentation_distractor"].append(bool(distractor_ann.mask[_center_pixel(source_rect)]))
            if query_ann.visible_keypoints():
                tallies["keypoint_query"].append(_near_keypoint(query_rect, query_ann, radius))
            if distractor_ann.visible_keypoints():
                tallies["keypoint_distractor"].append(_near_keypoint(source_rect, distractor_ann, radius))
            query_name = _nearest_keypoint(query_rect, query_ann)
            source_name = _nearest_keypoint(source_rect, distractor_ann)
            if query_name is not None and source_name is not None:
                tallies["same_keypoint"].append(query_name == source_name)

    reports = {}
    for name, hits in tallies.items():
        if not hits:
            continue
        reports[name] = MetricReport(name, sum(hits) / len(hits), len(hits), (), {"radius": radius}, notes)
    return reports
