"""Reference layer stacks."""
from explainer_app.nn.layers import conv2d, dense, flatten, log_softmax, maxpool2d, relu


def reference_layers(class_count=10):
    """2 conv + 2 dense; 28×28 inputs give a 4×4×20 feature grid at the split point."""
    extractor = (
        conv2d(10, 5), relu(), maxpool2d(2),
        conv2d(20, 5), relu(), maxpool2d(2),
    )
    head = (flatten(), dense(50), relu(), dense(class_count), log_softmax())
    return extractor, head


def linear_head(class_count):
    return (flatten(), dense(class_count), log_softmax())
