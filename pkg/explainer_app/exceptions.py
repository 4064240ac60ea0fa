"""Typed errors raised by the explainer engine.

Management commands turn any ``ExplainerError`` into a one-line JSON error
message (see ``management/base.py``).
"""


class ExplainerError(Exception):
    """Base class; ``payload()`` gives the machine-readable fields."""

    def payload(self):
        return {"error": type(self).__name__, "detail": str(self)}


class ShapeError(ExplainerError, ValueError):
    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension

    def payload(self):
        return {**super().payload(), "dimension": self.dimension}


class BoundsError(ExplainerError, IndexError):
    pass


class ModeError(ExplainerError, ValueError):
    pass


class ExhaustedError(ExplainerError):
    """No candidate edit is left to evaluate."""


class UnsupportedLayerError(ExplainerError):
    def __init__(self, message, kind=None):
        super().__init__(message)
        self.kind = kind

    def payload(self):
        return {**super().payload(), "kind": self.kind}


class FormatError(ExplainerError, ValueError):
    """Malformed on-disk document: manifest, blob, record, IDX, raster, config."""

    def __init__(self, message, field=None, offset=None):
        super().__init__(message)
        self.field = field
        self.offset = offset

    def payload(self):
        data = {**super().payload(), "field": self.field}
        if self.offset is not None:
            data["offset"] = self.offset
        return data


class TrainingError(ExplainerError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

    def payload(self):
        return {**super().payload(), "step": self.step}


class EvaluationError(ExplainerError, ValueError):
    pass


class ConfigError(ExplainerError, ValueError):
    """Invalid or conflicting configuration values."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def payload(self):
        return {**super().payload(), "field": self.field}
