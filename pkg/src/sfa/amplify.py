"""Amplify stage: blow selected regions up to frame size and ask the answerer.

Each key region is resampled once, straight from the original frame's
adapted crop, never from the smaller normalized raster used for scoring.
When no frame produced a key region the stage degrades: first to the
original text-bearing frames, then to all sampled frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AnsweringError, EmptyVideoError, ProtocolError, TransportError
from .focus import KeyRegion
from .media import FrameImage, crop, resize


@dataclass
class FallbackPolicy:
    """What to send when the focus stage selected nothing."""

    use_text_frames: bool = True
    use_all_frames: bool = True


@dataclass
class FrameProvenance:
    source_frame_index: int
    anchor: str | None = None
    rect: tuple[float, float, float, float] | None = None
    score: float | None = None


@dataclass
class RefinedVideo:
    frames: list[FrameImage]
    provenance: list[FrameProvenance]
    fallback_used: bool
    fallback_level: int = 0  # 0 = key regions, 1 = text frames, 2 = all frames


@dataclass
class AnswerResult:
    answer: str
    refined: RefinedVideo
    trace: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    # run metadata that may differ between otherwise identical runs
    # (backend call counts, cache warnings); kept out of the trace so the
    # trace is deterministic
    stats: dict = field(default_factory=dict)


def amplify_region(original_frame: FrameImage, key: KeyRegion) -> FrameImage:
    """Crop the adapted rect from the original frame and resize to (w, h)."""
    region_crop = crop(original_frame, key.region.window.rect)
    return resize(region_crop, original_frame.width, original_frame.height)


def assemble_refined_video(keys: list[KeyRegion], frames: list[FrameImage],
                           text_frame_indices: set[int],
                           policy: FallbackPolicy) -> RefinedVideo:
    """Amplify key regions in frame order, falling back when there are none."""
    if not frames:
        raise EmptyVideoError("no sampled frames to assemble from")
    by_index = {f.frame_index: f for f in frames}

    if keys:
        ordered = sorted(keys, key=lambda k: k.frame_index)
        amplified = []
        provenance = []
        for key in ordered:
            original = by_index[key.frame_index]
            amplified.append(amplify_region(original, key))
            provenance.append(FrameProvenance(
                source_frame_index=key.frame_index,
                anchor=key.region.window.anchor.value,
                rect=key.region.window.rect.as_tuple(),
                score=key.score,
            ))
        return RefinedVideo(amplified, provenance, fallback_used=False, fallback_level=0)

    text_frames = [f for f in frames if f.frame_index in text_frame_indices]
    if text_frames and policy.use_text_frames:
        return RefinedVideo(
            frames=list(text_frames),
            provenance=[FrameProvenance(f.frame_index) for f in text_frames],
            fallback_used=True,
            fallback_level=1,
        )
    if policy.use_all_frames:
        return RefinedVideo(
            frames=list(frames),
            provenance=[FrameProvenance(f.frame_index) for f in frames],
            fallback_used=True,
            fallback_level=2,
        )
    raise EmptyVideoError("no key regions and fallback disabled")


def answer(refined: RefinedVideo, question: str, answerer, template) -> AnswerResult:
    """Send the refined frames plus the rendered question to the answerer."""
    if not refined.frames:
        raise EmptyVideoError("refined video is empty")
    prompt = template.render(question)
    try:
        reply = answerer.answer(refined.frames, prompt)
    except (TransportError, ProtocolError) as exc:
        raise AnsweringError(f"answering failed: {exc}") from exc
    return AnswerResult(answer=reply.strip(), refined=refined)
