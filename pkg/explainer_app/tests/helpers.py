"""Small hand-built and random models for tests.

Models here have an empty extractor, so the "image" is the feature grid
itself (h, w, d) and the head is exercised directly.
"""
import numpy as np

from explainer_app.models import EditList, ExplanationResult, ExplanationStatus, FeatureGrid
from explainer_app.nn.layers import dense, flatten, log_softmax, relu
from explainer_app.nn.network import ModelBundle, initialize_model


def linear_model(cell_weights, bias=None):
    """Head logit_k = Σ_cell Σ_ch F[cell, ch] · cell_weights[cell, ch, k] + bias_k.

    ``cell_weights`` has shape (h, w, d, K); flatten order of the head input is
    (d, h, w), i.e. index = ch * hw + cell.
    """
    cell_weights = np.asarray(cell_weights, dtype=np.float64)
    h, w, d, k = cell_weights.shape
    weight = cell_weights.reshape(h * w, d, k).transpose(1, 0, 2).reshape(d * h * w, k)
    bias = np.zeros(k) if bias is None else np.asarray(bias, dtype=np.float64)
    return ModelBundle((), (flatten(), dense(k), log_softmax()), (), ({}, {"weight": weight, "bias": bias}, {}),
                       k, (h, w, d))


def random_head_model(rng, h, w, d, classes, hidden=8):
    """flatten → dense(hidden) → relu → dense(classes) → log-softmax, random weights."""
    head = (flatten(), dense(hidden), relu(), dense(classes), log_softmax())
    model = initialize_model((), head, (h, w, d), classes, rng)
    # widen the init so argmax decisions are not all near-ties
    scaled = tuple({name: value * 3.0 for name, value in layer.items()} for layer in model.head_params)
    return ModelBundle((), head, (), scaled, classes, (h, w, d))


def random_grid(rng, h, w, d, low=0.0, high=1.0):
    return FeatureGrid.from_hwd(rng.uniform(low, high, size=(h, w, d)))


def random_result(rng, h=3, w=3, edits=None, status=None):
    """A structurally valid ExplanationResult with random content."""
    count = int(rng.integers(0, h * w + 1)) if edits is None else edits
    query_cells = rng.permutation(h * w)[:count]
    source_cells = rng.integers(0, h * w, size=count)
    edit_list = EditList(h, w, tuple(
        (int(q) // w, int(q) % w, int(s) // w, int(s) % w) for q, s in zip(query_cells, source_cells)
    ))
    trajectory = tuple((float(a), float(b)) for a, b in -rng.exponential(size=(count + 1, 2)))
    status = status or (ExplanationStatus.FLIPPED if rng.random() < 0.5 else ExplanationStatus.EXHAUSTED)
    return ExplanationResult(edit_list, trajectory, status, int(rng.integers(10)), int(rng.integers(10)),
                             f"query:{rng.integers(1000)}", f"distractor:{rng.integers(1000)}")
