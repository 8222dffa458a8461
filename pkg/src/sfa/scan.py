"""Scan stage: corner-anchored candidate windows that grow to cover text.

Each text-bearing frame gets up to four windows anchored at the frame
corners, sized (w*alpha, h*alpha). A window that cuts through a text line is
grown uniformly (anchor pinned, aspect ratio kept) until every intersecting
line fits; windows containing no line are dropped, and survivors are
normalized to (round(w*alpha), round(h*alpha)) for scoring.

Geometry stays real-valued throughout; pixels are only touched when the
surviving windows are cropped.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .media import FrameImage, Rect, crop, resize, round_half_away


class Anchor(enum.Enum):
    TOP_LEFT = "top_left"
    TOP_RIGHT = "top_right"
    BOTTOM_LEFT = "bottom_left"
    BOTTOM_RIGHT = "bottom_right"


ANCHOR_ORDER = (Anchor.TOP_LEFT, Anchor.TOP_RIGHT, Anchor.BOTTOM_LEFT, Anchor.BOTTOM_RIGHT)


def anchor_rank(anchor: Anchor) -> int:
    return ANCHOR_ORDER.index(anchor)


@dataclass
class TextLineDetection:
    """One detected text line, clipped to its frame on ingestion."""

    bbox: Rect
    confidence: float
    transcription: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")

    @classmethod
    def clipped(cls, x0, y0, x1, y1, confidence, transcription=None,
                frame_w=None, frame_h=None):
        """Build a detection clipped to frame bounds; None if degenerate."""
        if frame_w is not None:
            x0 = max(0.0, min(float(frame_w), x0))
            x1 = max(0.0, min(float(frame_w), x1))
        if frame_h is not None:
            y0 = max(0.0, min(float(frame_h), y0))
            y1 = max(0.0, min(float(frame_h), y1))
        if x1 <= x0 or y1 <= y0:
            return None
        return cls(Rect(x0, y0, x1, y1), confidence, transcription)


@dataclass
class Window:
    """Corner-anchored rectangle with frame-proportional dimensions."""

    anchor: Anchor
    rect: Rect
    scale: float
    frame_index: int


@dataclass
class CandidateRegion:
    """A retained window plus its normalized raster and the lines it holds."""

    window: Window
    normalized_image: FrameImage
    contained_lines: list[TextLineDetection] = field(default_factory=list)


def _anchored_rect(anchor: Anchor, frame_w: float, frame_h: float, scale: float) -> Rect:
    ww = frame_w * scale
    wh = frame_h * scale
    if anchor is Anchor.TOP_LEFT:
        return Rect(0.0, 0.0, ww, wh)
    if anchor is Anchor.TOP_RIGHT:
        return Rect(frame_w - ww, 0.0, frame_w, wh)
    if anchor is Anchor.BOTTOM_LEFT:
        return Rect(0.0, frame_h - wh, ww, frame_h)
    return Rect(frame_w - ww, frame_h - wh, frame_w, frame_h)


def initial_windows(frame_w: int, frame_h: int, alpha: float,
                    frame_index: int = 0) -> list[Window]:
    """Up to four corner windows at scale alpha, deduplicated by geometry."""
    if not (0.5 <= alpha <= 1.0):
        raise ConfigurationError(f"alpha {alpha} outside [0.5, 1.0]")
    windows = []
    seen = set()
    for anchor in ANCHOR_ORDER:
        rect = _anchored_rect(anchor, frame_w, frame_h, alpha)
        key = rect.as_tuple()
        if key in seen:
            continue
        seen.add(key)
        windows.append(Window(anchor=anchor, rect=rect, scale=alpha, frame_index=frame_index))
    return windows


def _required_scale(anchor: Anchor, line: Rect, frame_w: float, frame_h: float) -> float:
    """Smallest scale at which the anchored window contains the line."""
    if anchor is Anchor.TOP_LEFT:
        return max(line.x1 / frame_w, line.y1 / frame_h)
    if anchor is Anchor.TOP_RIGHT:
        return max((frame_w - line.x0) / frame_w, line.y1 / frame_h)
    if anchor is Anchor.BOTTOM_LEFT:
        return max(line.x1 / frame_w, (frame_h - line.y0) / frame_h)
    return max((frame_w - line.x0) / frame_w, (frame_h - line.y0) / frame_h)


def adapt_window(window: Window, lines: list[TextLineDetection],
                 frame_w: int, frame_h: int) -> Window:
    """Grow the window to the minimal scale containing every intersecting line.

    Fixpoint iteration: growth can sweep in new lines, so required scales are
    recomputed until stable. The scale never decreases and is capped at 1
    (lines are clipped to the frame, so the full frame contains them all).
    """
    scale = window.scale
    while True:
        rect = _anchored_rect(window.anchor, frame_w, frame_h, scale)
        needed = scale
        for line in lines:
            if rect.intersects_interior(line.bbox):
                needed = max(needed, _required_scale(window.anchor, line.bbox, frame_w, frame_h))
        if needed > scale:
            # tiny relative margin so the recomputed rect really contains the
            # line despite float rounding; well inside the 1e-6 tolerance
            needed *= 1.0 + 1e-12
        needed = min(needed, 1.0)
        if needed == scale:
            break
        scale = needed
    return Window(anchor=window.anchor, rect=rect, scale=scale,
                  frame_index=window.frame_index)


def filter_and_build(frame: FrameImage, windows: list[Window],
                     lines: list[TextLineDetection], alpha: float) -> list[CandidateRegion]:
    """Keep windows fully containing at least one line; crop and normalize."""
    norm_w = round_half_away(frame.width * alpha)
    norm_h = round_half_away(frame.height * alpha)
    regions = []
    for window in sorted(windows, key=lambda w: anchor_rank(w.anchor)):
        contained = [ln for ln in lines if window.rect.contains(ln.bbox)]
        if not contained:
            continue
        raster = resize(crop(frame, window.rect), norm_w, norm_h)
        regions.append(CandidateRegion(window=window, normalized_image=raster,
                                       contained_lines=contained))
    return regions


def scan_frame(frame: FrameImage, lines: list[TextLineDetection],
               alpha: float) -> list[CandidateRegion]:
    """initial_windows -> adapt_window -> filter_and_build for one frame."""
    if not lines:
        return []
    adapted = [
        adapt_window(w, lines, frame.width, frame.height)
        for w in initial_windows(frame.width, frame.height, alpha, frame.frame_index)
    ]
    return filter_and_build(frame, adapted, lines, alpha)
