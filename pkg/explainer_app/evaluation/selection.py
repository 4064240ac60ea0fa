"""Choosing distractor classes, distractor images and query/distractor pairs."""
import logging
from typing import NamedTuple

import numpy as np

from explainer_app.evaluation.metrics import AgreementQuery
from explainer_app.exceptions import ConfigError, EvaluationError
from explainer_app.models import DistractorClassPolicy, DistractorImagePolicy

logger = logging.getLogger(__name__)


class PairSpec(NamedTuple):
    query_index:      int
    distractor_index: int
    target_class:     int
    class_policy:     str


def pick_distractor_class(query_class, class_count, rng, policy=DistractorClassPolicy.RANDOM, attributes=None):
    """c' != query_class; ``attributes`` is a (class_count, k) table of class means."""
    others = [c for c in range(class_count) if c != query_class]
    if not others:
        raise EvaluationError("need at least 2 classes to pick a distractor class")
    if policy == DistractorClassPolicy.RANDOM:
        return int(rng.choice(others))
    if policy != DistractorClassPolicy.ATTRIBUTES:
        raise ConfigError(f"unknown distractor class policy {policy!r}", field="class_policy")
    if attributes is None:
        raise ConfigError("the attributes policy needs an attribute table", field="attributes")
    table = np.asarray(attributes, dtype=np.float64)
    if table.shape[0] != class_count:
        raise ConfigError(f"attribute table has {table.shape[0]} rows for {class_count} classes", field="attributes")
    distances = np.linalg.norm(table[others] - table[query_class], axis=1)
    return others[int(np.argmin(distances))]


def keypoint_distance(a, b):
    """RMS gap over coordinates visible in both vectors; inf when none are shared."""
    shared = np.isfinite(a) & np.isfinite(b)
    if not shared.any():
        return np.inf
    return float(np.sqrt(np.mean((a[shared] - b[shared]) ** 2)))


def pick_distractor_image(query_index, candidates, rng, policy=DistractorImagePolicy.RANDOM,
                          dataset=None, keypoint_names=()):
    """Index into the dataset among ``candidates`` (images predicted c')."""
    candidates = [int(c) for c in candidates if int(c) != query_index]
    if not candidates:
        raise EvaluationError(f"no distractor candidate for query {query_index}")
    if policy == DistractorImagePolicy.RANDOM:
        return int(rng.choice(candidates))
    if policy != DistractorImagePolicy.KEYPOINTS:
        raise ConfigError(f"unknown distractor image policy {policy!r}", field="image_policy")
    if dataset is None or dataset.annotations is None:
        raise ConfigError("the keypoints policy needs annotations", field="annotations")
    annotations = dataset.annotations
    query_annotation = annotations.get(dataset.ids[query_index])
    if query_annotation is None:
        return int(rng.choice(candidates))
    names = list(keypoint_names) or sorted({p.name for p in query_annotation.keypoints})
    query_vector = query_annotation.keypoint_vector(names)
    distances = []
    for index in candidates:
        other = annotations.get(dataset.ids[index])
        distances.append(np.inf if other is None else keypoint_distance(query_vector, other.keypoint_vector(names)))
    if not np.isfinite(distances).any():
        return int(rng.choice(candidates))
    return candidates[int(np.argmin(distances))]


def sample_pairs(dataset, predictions, count, rng, class_policy=DistractorClassPolicy.RANDOM,
                 image_policy=DistractorImagePolicy.RANDOM, attributes=None, query_indices=None):
    """Up to ``count`` query/distractor pairs; the distractor is predicted c' by the model.

    Queries whose c' has no predicted image are skipped with a warning.
    """
    predictions = np.asarray(predictions)
    if query_indices is None:
        take = min(count, len(dataset))
        query_indices = rng.choice(len(dataset), size=take, replace=False)
    pairs = []
    for query_index in (int(i) for i in query_indices):
        query_class = int(predictions[query_index])
        target = pick_distractor_class(query_class, dataset.class_count, rng, class_policy, attributes)
        candidates = np.flatnonzero(predictions == target)
        candidates = candidates[candidates != query_index]
        if candidates.size == 0:
            logger.warning("pair skipped query_index=%d target=%d reason=no-distractor", query_index, target)
            continue
        distractor = pick_distractor_image(query_index, candidates, rng, image_policy, dataset)
        pairs.append(PairSpec(query_index, distractor, target, str(class_policy)))
    return pairs


def agreement_queries(dataset, predictions, query_count, per_query, rng):
    """(same-class, cross-class) AgreementQuery lists over one seeded query sample.

    Same-class queries get ``per_query`` images of one random class c' != c;
    cross-class queries get one image from each of up to ``per_query`` classes.
    """
    predictions = np.asarray(predictions)
    by_class = {c: np.flatnonzero(predictions == c) for c in range(dataset.class_count)}
    take = min(query_count, len(dataset))
    same, cross = [], []
    for query_index in (int(i) for i in rng.choice(len(dataset), size=take, replace=False)):
        query_class = int(predictions[query_index])
        pools = {c: members[members != query_index] for c, members in by_class.items() if c != query_class}

        rich = sorted(c for c, members in pools.items() if members.size >= per_query)
        distractors = ()
        if rich:
            target = int(rng.choice(rich))
            chosen = rng.choice(pools[target], size=per_query, replace=False)
            distractors = tuple((target, dataset.images[int(i)]) for i in chosen)
        same.append(AgreementQuery(dataset.ids[query_index], dataset.images[query_index], distractors))

        available = sorted(c for c, members in pools.items() if members.size)
        classes = rng.choice(available, size=min(per_query, len(available)), replace=False) if available else []
        cross.append(AgreementQuery(dataset.ids[query_index], dataset.images[query_index], tuple(
            (int(c), dataset.images[int(rng.choice(pools[int(c)]))]) for c in sorted(int(c) for c in classes)
        )))
    return same, cross
