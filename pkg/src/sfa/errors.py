"""Exception hierarchy shared by all pipeline stages.

Every error carries a ``stage`` name so batch reports and the CLI can say
which part of the pipeline failed without string-matching messages.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    stage = "pipeline"


class ConfigurationError(PipelineError):
    stage = "config"


class SourceError(PipelineError):
    """Frame source missing, unreadable, or malformed."""

    stage = "source"


class EmptyVideoError(SourceError):
    stage = "source"


class DegenerateRegionError(PipelineError):
    """A rectangle rasterized to zero area."""

    stage = "geometry"


class EncodingError(PipelineError):
    stage = "media"


class TransportError(PipelineError):
    """HTTP transport failed after all retries."""

    stage = "transport"

    def __init__(self, message, status=None, body_excerpt=None):
        super().__init__(message)
        self.status = status
        self.body_excerpt = body_excerpt


class ProtocolError(PipelineError):
    """Response arrived but did not match the expected wire shape."""

    stage = "transport"


class FixtureError(PipelineError):
    stage = "fixtures"


class DetectionError(PipelineError):
    stage = "scan"


class AnsweringError(PipelineError):
    stage = "amplify"


class ManifestError(PipelineError):
    stage = "eval"


class EvaluationError(PipelineError):
    stage = "eval"
