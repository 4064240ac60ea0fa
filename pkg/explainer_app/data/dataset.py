from dataclasses import dataclass

import numpy as np

from explainer_app.exceptions import ShapeError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled images in [0, 1], stored (N, H, W, C) float64."""

    images:      np.ndarray
    labels:      np.ndarray
    split:       str = "train"
    class_count: int | None = None
    ids:         tuple = ()
    annotations: object = None           # AnnotationSet or None
    source:      str = ""

    def __post_init__(self):
        images = np.array(self.images, dtype=np.float64, copy=True)
        if images.ndim == 3:
            images = images[..., None]
        if images.ndim != 4:
            raise ShapeError(f"images must be (N, H, W[, C]), got {images.shape}", dimension="images")
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if labels.shape[0] != images.shape[0]:
            raise ShapeError(f"{images.shape[0]} images but {labels.shape[0]} labels", dimension="labels")
        class_count = self.class_count
        if class_count is None:
            class_count = int(labels.max()) + 1 if labels.size else 0
        if labels.size and (labels.min() < 0 or labels.max() >= class_count):
            raise ShapeError(f"labels must lie in [0, {class_count})", dimension="labels")
        ids = tuple(self.ids) or tuple(f"{self.split}:{index}" for index in range(images.shape[0]))
        if len(ids) != images.shape[0]:
            raise ShapeError("one id per image is required", dimension="ids")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", class_count)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.images.shape[0]

    @property
    def geometry(self):
        """(height, width, channels)."""
        return tuple(self.images.shape[1:])

    def index_of(self, image_id):
        return self.ids.index(image_id)

    def subset(self, indices, split=None):
        indices = np.asarray(indices, dtype=np.intp)
        ids = tuple(self.ids[i] for i in indices)
        annotations = self.annotations.restricted(ids) if self.annotations is not None else None
        return Dataset(self.images[indices], self.labels[indices], split or self.split,
                       self.class_count, ids, annotations, self.source)

    def holdout(self, fraction, rng):
        """(train, test) split with ``fraction`` of the samples in test."""
        order = rng.permutation(len(self))
        cut = int(round(len(self) * (1.0 - fraction)))
        return self.subset(np.sort(order[:cut]), "train"), self.subset(np.sort(order[cut:]), "test")
