"""Text-aware video question answering via scan, focus, and amplify stages."""

from .amplify import AnswerResult, FallbackPolicy, RefinedVideo
from .backends import BackendSet, EndpointConfig, load_mock_fixtures
from .media import FrameImage, FrameSource, Rect
from .pipeline import PipelineConfig, run_baseline, run_sfa
from .scan import TextLineDetection, Window

__all__ = [
    "AnswerResult",
    "BackendSet",
    "EndpointConfig",
    "FallbackPolicy",
    "FrameImage",
    "FrameSource",
    "PipelineConfig",
    "Rect",
    "RefinedVideo",
    "TextLineDetection",
    "Window",
    "load_mock_fixtures",
    "run_baseline",
    "run_sfa",
]
