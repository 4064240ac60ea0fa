"""A classifier split into a spatial feature extractor f and a decision head g.

``g(f(image))`` gives log-probabilities; the split point is where the explainer
edits features. The head is evaluated either on one FeatureGrid or on a stack
of raw hw×d matrices (candidate edits).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from explainer_app.exceptions import FormatError, ShapeError
from explainer_app.models import FeatureGrid, LayerKind
from explainer_app.nn.layers import build_layer

logger = logging.getLogger(__name__)


def _layer_shapes(specs, in_shape):
    shapes = [tuple(in_shape)]
    for spec in specs:
        shapes.append(tuple(build_layer(spec).output_shape(shapes[-1])))
    return shapes


def _freeze_params(params):
    frozen = []
    for layer_params in params:
        layer_frozen = {}
        for name, value in layer_params.items():
            arr = np.array(value, dtype=np.float64, copy=True)
            arr.setflags(write=False)
            layer_frozen[name] = arr
        frozen.append(layer_frozen)
    return tuple(frozen)


@dataclass(frozen=True, eq=False)
class ModelBundle:
    extractor:        tuple
    head:             tuple
    extractor_params: tuple
    head_params:      tuple
    class_count:      int
    input_geometry:   tuple          # (height, width, channels) in pixels
    metrics:          dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "extractor", tuple(self.extractor))
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "input_geometry", tuple(int(v) for v in self.input_geometry))
        object.__setattr__(self, "extractor_params", _freeze_params(self.extractor_params))
        object.__setattr__(self, "head_params", _freeze_params(self.head_params))
        if len(self.extractor_params) != len(self.extractor) or len(self.head_params) != len(self.head):
            raise FormatError("one parameter dict per layer is required", field="weights")

        height, width, channels = self.input_geometry
        extractor_shapes = _layer_shapes(self.extractor, (channels, height, width))
        feature_shape = extractor_shapes[-1]
        if len(feature_shape) != 3:
            raise ShapeError("extractor must end on a spatial (C, H, W) map", dimension="extractor")
        head_shapes = _layer_shapes(self.head, feature_shape)
        if not self.head or self.head[-1].kind != LayerKind.LOG_SOFTMAX:
            raise ShapeError("head must end with log-softmax", dimension="head")
        if head_shapes[-1] != (self.class_count,):
            raise ShapeError(
                f"head outputs {head_shapes[-1]} but class count is {self.class_count}",
                dimension="class_count",
            )
        for specs, params, shapes in ((self.extractor, self.extractor_params, extractor_shapes),
                                      (self.head, self.head_params, head_shapes)):
            for index, (spec, layer_params) in enumerate(zip(specs, params)):
                expected = build_layer(spec).param_shapes(shapes[index])
                got = {name: value.shape for name, value in layer_params.items()}
                if got != {name: tuple(shape) for name, shape in expected.items()}:
                    raise FormatError(f"layer {index} ({spec.kind}) expects parameters {expected}, got {got}",
                                      field="weights")

    @property
    def feature_geometry(self):
        """(h, w, d) of f(image)."""
        height, width, channels = self.input_geometry
        c, h, w = _layer_shapes(self.extractor, (channels, height, width))[-1]
        return (h, w, c)

    def named_params(self):
        """(name, array) pairs in manifest order: extractor layers first, then head."""
        for prefix, params in (("extractor", self.extractor_params), ("head", self.head_params)):
            for index, layer_params in enumerate(params):
                for name in sorted(layer_params):
                    yield f"{prefix}.{index}.{name}", layer_params[name]

    def same_weights(self, other):
        mine, theirs = list(self.named_params()), list(other.named_params())
        return (len(mine) == len(theirs)
                and all(a == b and np.array_equal(x, y) for (a, x), (b, y) in zip(mine, theirs)))


def initialize_model(extractor, head, input_geometry, class_count, rng):
    """Fresh bundle, weights uniform in ±1/sqrt(fan_in)."""
    height, width, channels = input_geometry
    shapes = _layer_shapes(list(extractor) + list(head), (channels, height, width))
    params = [build_layer(spec).init_params(shapes[i], rng)
              for i, spec in enumerate(list(extractor) + list(head))]
    split = len(extractor)
    return ModelBundle(tuple(extractor), tuple(head), params[:split], params[split:],
                       class_count, input_geometry)


# ── forward / backward over a layer stack ───────────────────────────────


def run_forward(specs, params, x, keep_cache=False):
    caches = []
    for spec, layer_params in zip(specs, params):
        x, cache = build_layer(spec).forward(x, layer_params)
        if keep_cache:
            caches.append(cache)
    return x, caches


def run_backward(specs, params, caches, dout):
    """Returns (d input, per-layer gradient dicts) for a stack run with keep_cache."""
    grads = [None] * len(specs)
    for index in range(len(specs) - 1, -1, -1):
        dout, grads[index] = build_layer(specs[index]).backward(dout, caches[index], params[index])
    return dout, grads


def images_to_batch(model, images):
    """(N, H, W, C) or (N, H, W) pixels → NCHW float64, geometry-checked."""
    images = np.asarray(images, dtype=np.float64)
    height, width, channels = model.input_geometry
    if images.ndim == 3 and channels == 1:
        images = images[..., None]
    if images.ndim != 4 or images.shape[1:] != (height, width, channels):
        raise ShapeError(
            f"images must be {height}x{width}x{channels}, got {images.shape[1:]}", dimension="image",
        )
    return np.ascontiguousarray(images.transpose(0, 3, 1, 2))


def _grid_batch(model, values):
    """(N, hw, d) raw grid values → NCHW feature batch."""
    h, w, d = model.feature_geometry
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[1:] != (h * w, d):
        raise ShapeError(f"feature batch must be (N, {h * w}, {d}), got {values.shape}", dimension="features")
    return np.ascontiguousarray(values.reshape(-1, h, w, d).transpose(0, 3, 1, 2))


def _check_grid(model, grid):
    if grid.geometry != model.feature_geometry:
        dims = ("height", "width", "depth")
        bad = next(name for name, a, b in zip(dims, grid.geometry, model.feature_geometry) if a != b)
        raise ShapeError(
            f"feature grid {grid.geometry} does not match head input {model.feature_geometry}", dimension=bad,
        )


def forward_features(model: ModelBundle, image) -> FeatureGrid:
    """f(image) as an hw×d FeatureGrid."""
    pixels = np.asarray(image, dtype=np.float64)
    if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
        raise FormatError("pixel values must lie in [0, 1]", field="image")
    batch = images_to_batch(model, pixels[None])
    features, _ = run_forward(model.extractor, model.extractor_params, batch)
    return FeatureGrid.from_hwd(features[0].transpose(1, 2, 0))


def forward_features_batch(model, images):
    """f over an image stack; (N, hw, d) raw values."""
    features, _ = run_forward(model.extractor, model.extractor_params, images_to_batch(model, images))
    n, d, h, w = features.shape
    return features.transpose(0, 2, 3, 1).reshape(n, h * w, d)


def head_logprobs_batch(model, values):
    """g over a stack of raw hw×d matrices; (N, class_count)."""
    out, _ = run_forward(model.head, model.head_params, _grid_batch(model, values))
    return out


def head_logprobs(model: ModelBundle, grid: FeatureGrid) -> np.ndarray:
    """g(F): natural-log class probabilities (a LogProbVector)."""
    _check_grid(model, grid)
    return head_logprobs_batch(model, grid.values[None])[0]


def predict(model, grid):
    return int(np.argmax(head_logprobs(model, grid)))


def full_logprobs(model, images):
    """g(f(images)) run end to end; (N, class_count)."""
    batch = images_to_batch(model, images)
    out, _ = run_forward(list(model.extractor) + list(model.head),
                         list(model.extractor_params) + list(model.head_params), batch)
    return out


def head_value_and_gradient(model, values, objective):
    """(g(F) log-probs, ∂objective/∂F) for one raw hw×d matrix.

    ``objective`` is a class index (objective = g_c(F)) or a vector of
    upstream weights w over the log-probabilities (objective = w·g(F)).
    """
    if np.ndim(objective) == 0:
        upstream = np.zeros(model.class_count)
        upstream[int(objective)] = 1.0
    else:
        upstream = np.asarray(objective, dtype=np.float64)
        if upstream.shape != (model.class_count,):
            raise ShapeError(f"objective weights must have {model.class_count} entries", dimension="objective")
    batch = _grid_batch(model, np.asarray(values)[None])
    logprobs, caches = run_forward(model.head, model.head_params, batch, keep_cache=True)
    dx, _ = run_backward(model.head, model.head_params, caches, upstream[None, :])
    h, w, d = model.feature_geometry
    return logprobs[0], dx[0].transpose(1, 2, 0).reshape(h * w, d)


def head_input_gradient(model: ModelBundle, grid: FeatureGrid, objective) -> np.ndarray:
    """∂objective/∂F as an hw×d array, by reverse mode through the head layers."""
    _check_grid(model, grid)
    return head_value_and_gradient(model, grid.values, objective)[1]
