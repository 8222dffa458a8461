"""Focus stage: score candidate windows and keep at most one per frame.

The scorer backend sees the normalized window raster plus the rendered
question prompt and replies with free text; the first decimal number in the
reply becomes the relevance score. A frame's key region is the highest
scoring window strictly above the threshold; ties go to the earliest anchor
in TL, TR, BL, BR order so selection is order-independent.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import ProtocolError, TransportError
from .scan import CandidateRegion, anchor_rank

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)")


class ParseStatus(enum.Enum):
    PARSED = "parsed"
    CLAMPED = "clamped"
    DEFAULTED = "defaulted"


@dataclass
class RelevanceScore:
    value: float
    raw_response: str
    parse_status: ParseStatus

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"score {self.value} outside [0,1]")
        if self.parse_status is ParseStatus.DEFAULTED and self.value != 0.0:
            raise ValueError("defaulted scores must be 0")


@dataclass
class ScoredWindow:
    region: CandidateRegion
    score: RelevanceScore


@dataclass
class KeyRegion:
    frame_index: int
    region: CandidateRegion
    score: float


def parse_score(raw: str) -> RelevanceScore:
    """First decimal number in the reply, clamped to [0,1]; 0 if none."""
    m = _NUMBER_RE.search(raw)
    if m is None:
        return RelevanceScore(0.0, raw, ParseStatus.DEFAULTED)
    value = float(m.group())
    if 0.0 <= value <= 1.0:
        return RelevanceScore(value, raw, ParseStatus.PARSED)
    return RelevanceScore(min(1.0, max(0.0, value)), raw, ParseStatus.CLAMPED)


def score_window(region: CandidateRegion, question: str, scorer, template) -> ScoredWindow:
    """Ask the scorer backend for a relevance score for one window.

    Transport failures (after the backend's own retries) degrade to a
    defaulted zero score instead of aborting the run.
    """
    prompt = template.render(question)
    try:
        raw = scorer.score(region, prompt)
    except (TransportError, ProtocolError) as exc:
        return ScoredWindow(region, RelevanceScore(0.0, f"<error: {exc}>", ParseStatus.DEFAULTED))
    return ScoredWindow(region, parse_score(raw))


def select_key_region(scored: list[ScoredWindow], tau: float) -> KeyRegion | None:
    """Threshold-gated argmax; strict > tau, ties broken by anchor order."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau {tau} outside [0,1]")
    eligible = [sw for sw in scored if sw.score.value > tau]
    if not eligible:
        return None
    best = min(eligible, key=lambda sw: (-sw.score.value, anchor_rank(sw.region.window.anchor)))
    return KeyRegion(
        frame_index=best.region.window.frame_index,
        region=best.region,
        score=best.score.value,
    )
