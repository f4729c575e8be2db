"""Exceptions raised by the diarization modules"""

from typing import Optional


class DiarizationError(ValueError):
    """Base error, tagged with the component that raised it.

    Args:
        message: Human readable description
        component: Component name as used by utils.debug_print
        index: Optional window, line, epoch or step index
    """
    component = 'main'

    def __init__(self, message: str, component: Optional[str] = None, index: Optional[int] = None):
        super().__init__(message)
        if component:
            self.component = component
        self.index = index

    def __str__(self) -> str:
        text = super().__str__()
        if self.index is not None:
            return f"[{self.component}] {text} (index {self.index})"
        return f"[{self.component}] {text}"


class GeometryError(DiarizationError):
    component = 'array'


class SingularCovariance(DiarizationError):
    component = 'sdb'


class ChannelMismatch(DiarizationError):
    component = 'beam'


class AudioTooShort(DiarizationError):
    component = 'beam'


class ParseError(DiarizationError):
    component = 'io'

    def __init__(self, message: str, component: Optional[str] = None, index: Optional[int] = None,
                 field: Optional[str] = None):
        if field:
            message = f"{message} [field '{field}']"
        super().__init__(message, component, index)
        self.field = field


class DimensionMismatch(DiarizationError):
    component = 'embed'


class ZeroVector(DiarizationError):
    component = 'cluster'


class ShapeMismatch(DiarizationError):
    component = 'cluster'


class LengthMismatch(DiarizationError):
    component = 'osd'


class NonFiniteLoss(DiarizationError):
    component = 'osd'

    def __init__(self, message: str, epoch: int, step: int):
        super().__init__(f"{message} at epoch {epoch}, step {step}", index=step)
        self.epoch = epoch
        self.step = step


class DirectionCollision(DiarizationError):
    component = 'sim'


class UnsupportedFormat(DiarizationError):
    component = 'io'


class CorruptHeader(DiarizationError):
    component = 'io'


class ConfigError(DiarizationError):
    component = 'main'


class PipelineError(DiarizationError):
    """Wraps a module error with the pipeline stage it happened in"""
    component = 'pipeline'

    def __init__(self, stage: str, cause: Exception, index: Optional[int] = None):
        if index is None:
            index = getattr(cause, 'index', None)
        super().__init__(f"stage '{stage}' failed: {cause}", index=index)
        self.stage = stage
        self.cause = cause
