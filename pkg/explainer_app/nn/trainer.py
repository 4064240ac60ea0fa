"""Mini-batch SGD with momentum on mean negative log-likelihood."""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from explainer_app.exceptions import ShapeError, TrainingError
from explainer_app.nn.network import (
    ModelBundle, full_logprobs, images_to_batch, initialize_model, run_backward, run_forward,
)
from explainer_app.seeding import seeded_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    epochs:        int = 10
    learning_rate: float = 0.01
    momentum:      float = 0.9
    batch_size:    int = 64
    seed:          int = 0

    def as_dict(self):
        return asdict(self)


def predict_labels(model, images, batch_size=256):
    labels = []
    for start in range(0, len(images), batch_size):
        labels.append(np.argmax(full_logprobs(model, images[start:start + batch_size]), axis=1))
    return np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)


def accuracy(model, dataset):
    if len(dataset) == 0:
        return None
    return float(np.mean(predict_labels(model, dataset.images) == dataset.labels))


def train(extractor, head, dataset, config=TrainingConfig(), test_dataset=None) -> ModelBundle:
    """Train the stack ``extractor + head`` on ``dataset``; deterministic for a given seed.

    The final dense layer of ``head`` fixes the class count. Zero epochs return
    the seeded initialization unchanged.
    """
    if len(dataset) == 0:
        raise ShapeError("training set is empty", dimension="samples")
    model = initialize_model(extractor, head, dataset.geometry, _class_count(head),
                             seeded_stream(config.seed, "init"))
    if dataset.labels.max() >= model.class_count:
        raise ShapeError(f"labels must be < {model.class_count}", dimension="labels")

    specs = list(model.extractor) + list(model.head)
    params = [{name: value.copy() for name, value in layer.items()}
              for layer in list(model.extractor_params) + list(model.head_params)]
    velocity = [{name: np.zeros_like(value) for name, value in layer.items()} for layer in params]
    shuffle = seeded_stream(config.seed, "shuffle")

    epoch_losses = []
    step = 0
    for epoch in range(config.epochs):
        order = shuffle.permutation(len(dataset))
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            index = order[start:start + config.batch_size]
            labels = dataset.labels[index]
            logprobs, caches = run_forward(specs, params, images_to_batch(model, dataset.images[index]),
                                           keep_cache=True)
            loss = -float(np.mean(logprobs[np.arange(len(index)), labels]))
            if not np.isfinite(loss):
                raise TrainingError(f"loss became non-finite at step {step}", step=step)
            dout = np.zeros_like(logprobs)
            dout[np.arange(len(index)), labels] = -1.0 / len(index)
            _, grads = run_backward(specs, params, caches, dout)
            for layer_params, layer_grads, layer_velocity in zip(params, grads, velocity):
                for name in layer_params:
                    layer_velocity[name] = config.momentum * layer_velocity[name] + layer_grads[name]
                    layer_params[name] -= config.learning_rate * layer_velocity[name]
            batch_losses.append(loss)
            step += 1
        epoch_losses.append(float(np.mean(batch_losses)))
        logger.info("train epoch=%d loss=%.6f steps=%d", epoch + 1, epoch_losses[-1], step)

    split = len(model.extractor)
    trained = ModelBundle(model.extractor, model.head, params[:split], params[split:],
                          model.class_count, model.input_geometry)
    metrics = {
        "train_accuracy": accuracy(trained, dataset),
        "test_accuracy": accuracy(trained, test_dataset) if test_dataset is not None else None,
        "epoch_losses": epoch_losses,
        "training": config.as_dict(),
    }
    logger.info("train done train_accuracy=%s test_accuracy=%s",
                metrics["train_accuracy"], metrics["test_accuracy"])
    return ModelBundle(trained.extractor, trained.head, trained.extractor_params, trained.head_params,
                       trained.class_count, trained.input_geometry, metrics)


def _class_count(head):
    for spec in reversed(head):
        if spec.units is not None:
            return int(spec.units)
    raise ShapeError("head needs a dense layer to fix the class count", dimension="head")
