import numpy as np
from django.test import SimpleTestCase

from explainer_app.exceptions import FormatError, ShapeError, UnsupportedLayerError
from explainer_app.models import FeatureGrid
from explainer_app.nn.architectures import reference_layers
from explainer_app.nn.layers import LayerSpec, build_layer, conv2d, dense, flatten, log_softmax, maxpool2d, relu
from explainer_app.nn.network import (
    forward_features, full_logprobs, head_input_gradient, head_logprobs, head_logprobs_batch, initialize_model,
    run_backward, run_forward,
)
from explainer_app.tests.helpers import linear_model, random_grid, random_head_model

EPS = 1e-5


def numeric_gradient(fn, x):
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        bumped = x.copy()
        bumped[index] += EPS
        up = fn(bumped)
        bumped[index] -= 2 * EPS
        grad[index] = (up - fn(bumped)) / (2 * EPS)
    return grad


def relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


class LayerSpecTests(SimpleTestCase):
    def test_unknown_kind(self):
        with self.assertRaises(UnsupportedLayerError) as caught:
            LayerSpec("dropout")
        self.assertEqual(caught.exception.kind, "dropout")

    def test_conv_defaults(self):
        spec = conv2d(4, 3)
        self.assertEqual((spec.stride, spec.padding), (1, 0))

    def test_pool_stride_defaults_to_window(self):
        self.assertEqual(maxpool2d(3).stride, 3)

    def test_dict_round_trip(self):
        spec = conv2d(4, 3, stride=2, padding=1)
        self.assertEqual(LayerSpec.from_dict(spec.to_dict()), spec)

    def test_padding_must_be_smaller_than_kernel(self):
        with self.assertRaises(ShapeError):
            conv2d(4, 3, padding=3)


class LayerGradientTests(SimpleTestCase):
    """Backward passes against central differences of Σ upstream · forward."""

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def check_layer(self, spec, in_shape):
        layer = build_layer(spec)
        x = self.rng.normal(size=(2,) + in_shape)
        params = layer.init_params(in_shape, self.rng)
        out, cache = layer.forward(x, params)
        upstream = self.rng.normal(size=out.shape)
        dx, grads = layer.backward(upstream, cache, params)

        def loss_x(value):
            return float(np.sum(layer.forward(value, params)[0] * upstream))

        self.assertLess(relative_error(dx, numeric_gradient(loss_x, x)), 1e-4)
        for name, value in params.items():
            def loss_p(bumped, name=name):
                return float(np.sum(layer.forward(x, {**params, name: bumped})[0] * upstream))
            self.assertLess(relative_error(grads[name], numeric_gradient(loss_p, value)), 1e-4, name)

    def test_conv(self):
        self.check_layer(conv2d(3, 3), (2, 5, 5))

    def test_conv_strided_padded(self):
        self.check_layer(conv2d(2, 3, stride=2, padding=1), (2, 6, 6))

    def test_dense(self):
        self.check_layer(dense(4), (6,))

    def test_log_softmax(self):
        self.check_layer(log_softmax(), (5,))

    def test_maxpool(self):
        # distinct values keep the argmax away from ties under perturbation
        layer = build_layer(maxpool2d(2))
        x = self.rng.permutation(2 * 2 * 4 * 4).reshape(2, 2, 4, 4).astype(np.float64)
        out, cache = layer.forward(x, {})
        upstream = self.rng.normal(size=out.shape)
        dx, _ = layer.backward(upstream, cache, {})
        np.testing.assert_allclose(
            dx, numeric_gradient(lambda v: float(np.sum(layer.forward(v, {})[0] * upstream)), x), atol=1e-6,
        )

    def test_maxpool_tie_takes_first_in_scan_order(self):
        layer = build_layer(maxpool2d(2))
        x = np.ones((1, 1, 2, 2))
        _, cache = layer.forward(x, {})
        dx, _ = layer.backward(np.ones((1, 1, 1, 1)), cache, {})
        np.testing.assert_array_equal(dx[0, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_conv_matches_direct_loop(self):
        layer = build_layer(conv2d(2, 3))
        x = self.rng.normal(size=(1, 2, 5, 5))
        params = layer.init_params((2, 5, 5), self.rng)
        out, _ = layer.forward(x, params)
        for o in range(2):
            for r in range(3):
                for c in range(3):
                    expected = np.sum(x[0, :, r:r + 3, c:c + 3] * params["weight"][o]) + params["bias"][o]
                    self.assertAlmostEqual(out[0, o, r, c], expected, places=12)


class NetworkTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_reference_feature_geometry(self):
        extractor, head = reference_layers()
        model = initialize_model(extractor, head, (28, 28, 1), 10, self.rng)
        self.assertEqual(model.feature_geometry, (4, 4, 20))
        grid = forward_features(model, self.rng.random((28, 28)))
        self.assertEqual(grid.geometry, (4, 4, 20))

    def test_split_composition(self):
        extractor, head = reference_layers()
        model = initialize_model(extractor, head, (28, 28, 1), 10, self.rng)
        images = self.rng.random((3, 28, 28, 1))
        end_to_end = full_logprobs(model, images)
        for index in range(3):
            split = head_logprobs(model, forward_features(model, images[index]))
            np.testing.assert_allclose(split, end_to_end[index], rtol=1e-12, atol=1e-12)

    def test_logprobs_normalized(self):
        model = random_head_model(self.rng, 3, 3, 2, 4)
        logprobs = head_logprobs(model, random_grid(self.rng, 3, 3, 2))
        self.assertAlmostEqual(float(np.exp(logprobs).sum()), 1.0, places=12)

    def test_batch_matches_single(self):
        model = random_head_model(self.rng, 2, 3, 2, 3)
        grids = [random_grid(self.rng, 2, 3, 2) for _ in range(4)]
        batch = head_logprobs_batch(model, np.stack([g.values for g in grids]))
        for row, grid in zip(batch, grids):
            np.testing.assert_allclose(row, head_logprobs(model, grid), rtol=1e-13, atol=1e-13)

    def test_pixel_range_checked(self):
        extractor, head = reference_layers()
        model = initialize_model(extractor, head, (28, 28, 1), 10, self.rng)
        with self.assertRaises(FormatError):
            forward_features(model, np.full((28, 28), 1.5))

    def test_head_geometry_checked(self):
        model = random_head_model(self.rng, 2, 2, 3, 2)
        with self.assertRaises(ShapeError) as caught:
            head_logprobs(model, random_grid(self.rng, 2, 2, 4))
        self.assertEqual(caught.exception.dimension, "depth")

    def test_linear_helper_uses_depth_major_flatten(self):
        weights = np.zeros((2, 2, 3, 2))
        weights[1, 0, 2, 1] = 1.0          # cell (1, 0), channel 2 feeds class 1
        model = linear_model(weights)
        values = np.zeros((2, 2, 3))
        values[1, 0, 2] = 5.0
        logprobs = head_logprobs(model, FeatureGrid.from_hwd(values))
        self.assertAlmostEqual(float(logprobs[1] - logprobs[0]), 5.0, places=12)

    def test_head_input_gradient_matches_finite_differences(self):
        for trial in range(50):
            h, w, d = self.rng.integers(1, 4, size=3)
            classes = int(self.rng.integers(2, 5))
            model = random_head_model(self.rng, h, w, d, classes)
            grid = random_grid(self.rng, h, w, d)
            target = int(self.rng.integers(classes))
            analytic = head_input_gradient(model, grid, target)

            def value(values):
                return float(head_logprobs(model, grid.with_values(values))[target])

            numeric = numeric_gradient(value, grid.values.copy())
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7, err_msg=f"trial {trial}")

    def test_linear_head_gradient_closed_form(self):
        for _ in range(20):
            h, w, d = (int(v) for v in self.rng.integers(1, 4, size=3))
            classes = int(self.rng.integers(2, 5))
            cell_weights = self.rng.normal(size=(h, w, d, classes))
            bias = self.rng.normal(size=classes)
            model = linear_model(cell_weights, bias)
            grid = random_grid(self.rng, h, w, d)
            target = int(self.rng.integers(classes))

            per_cell = cell_weights.reshape(h * w, d, classes)
            logits = np.einsum("cdk,cd->k", per_cell, grid.values) + bias
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            expected = per_cell @ (np.eye(classes)[target] - probs)
            np.testing.assert_allclose(head_input_gradient(model, grid, target), expected, rtol=1e-10, atol=1e-12)

    def test_zero_weight_head(self):
        model = linear_model(np.zeros((2, 3, 2, 4)))
        grid = random_grid(self.rng, 2, 3, 2)
        np.testing.assert_array_equal(head_input_gradient(model, grid, 1), np.zeros((6, 2)))
        np.testing.assert_allclose(head_logprobs(model, grid), np.full(4, np.log(0.25)), rtol=0, atol=1e-15)

    def test_full_backward_shapes(self):
        extractor, head = reference_layers()
        model = initialize_model(extractor, head, (28, 28, 1), 10, self.rng)
        specs = list(model.extractor) + list(model.head)
        params = list(model.extractor_params) + list(model.head_params)
        x = self.rng.random((2, 1, 28, 28))
        out, caches = run_forward(specs, params, x, keep_cache=True)
        dx, grads = run_backward(specs, params, caches, np.ones_like(out))
        self.assertEqual(dx.shape, x.shape)
        for layer_params, layer_grads in zip(params, grads):
            self.assertEqual({k: v.shape for k, v in layer_params.items()},
                             {k: v.shape for k, v in layer_grads.items()})

    def test_relu_flatten_have_no_params(self):
        self.assertEqual(build_layer(relu()).param_shapes((3, 2, 2)), {})
        self.assertEqual(build_layer(flatten()).output_shape((3, 2, 2)), (12,))
