"""End-to-end orchestration: sample, detect, scan, score, select, answer.

The scan/score fan-out runs on a bounded thread pool but results are joined
in frame/window order, so output is independent of scheduling. With mock
backends the whole run is bit-deterministic, which the cache relies on:
detections and scores are content-addressed by pixel digests so a warm
rerun touches no backend at all.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .amplify import (
    AnswerResult,
    FallbackPolicy,
    answer,
    assemble_refined_video,
)
from .backends import BackendSet
from .errors import ConfigurationError, DetectionError
from .focus import score_window, select_key_region
from .media import FrameImage, FrameSource, sample_frames
from .scan import CandidateRegion, TextLineDetection, scan_frame
from .templates import (
    PromptTemplate,
    default_answer_template,
    default_relevance_template,
)


@dataclass
class PipelineConfig:
    alpha: float = 0.6
    tau: float = 0.7
    target_fps: Fraction = Fraction(1)
    fallback: FallbackPolicy = field(default_factory=FallbackPolicy)
    relevance_template: PromptTemplate | None = None
    answer_template: PromptTemplate | None = None
    max_in_flight: int = 4
    cache_dir: Path | None = None

    def __post_init__(self):
        if not (0.5 <= self.alpha <= 1.0):
            raise ConfigurationError(f"alpha {self.alpha} outside [0.5, 1.0]")
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigurationError(f"tau {self.tau} outside [0, 1]")
        self.target_fps = Fraction(self.target_fps)
        if self.target_fps <= 0:
            raise ConfigurationError(f"target_fps must be positive, got {self.target_fps}")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be at least 1")
        if self.relevance_template is None:
            self.relevance_template = default_relevance_template()
        if self.answer_template is None:
            self.answer_template = default_answer_template()

    def snapshot(self) -> dict:
        # semantic knobs only; operational settings (concurrency, cache
        # location) must not leak into the deterministic run output
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "target_fps": str(self.target_fps),
        }


class StageCache:
    """Content-addressed JSON store for detections and scores."""

    STAGES = ("detections", "scores")

    def __init__(self, root):
        self.root = Path(root)
        self.warnings: list[str] = []

    def _path(self, stage: str, key: str) -> Path:
        return self.root / stage / f"{key}.json"

    def get(self, stage: str, key: str):
        p = self._path(stage, key)
        if not p.is_file():
            return None
        try:
            return json.loads(p.read_text())
        except ValueError:
            self.warnings.append(f"corrupt cache entry {p}, treating as miss")
            return None

    def put(self, stage: str, key: str, value) -> None:
        p = self._path(stage, key)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(value))

    def clear(self) -> int:
        removed = 0
        for stage in self.STAGES:
            d = self.root / stage
            if d.is_dir():
                for p in d.glob("*.json"):
                    p.unlink()
                    removed += 1
        return removed


def _digest(*parts: bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
        h.update(b"\x00")
    return h.hexdigest()


def detection_cache_key(frame: FrameImage, detector_id: str) -> str:
    return _digest(frame.pixels.tobytes(), detector_id.encode())


def score_cache_key(region: CandidateRegion, question: str, scorer_id: str,
                    template: PromptTemplate) -> str:
    return _digest(
        region.normalized_image.pixels.tobytes(),
        question.encode(),
        scorer_id.encode(),
        template.text.encode(),
    )


def _detection_to_dict(det: TextLineDetection) -> dict:
    return {
        "bbox": list(det.bbox.as_tuple()),
        "confidence": det.confidence,
        "transcription": det.transcription,
    }


def _detect_cached(frame: FrameImage, detector, cache: StageCache | None) -> tuple[list[TextLineDetection], bool]:
    """Detections for one frame, via cache when available. Returns (dets, hit)."""
    key = None
    if cache is not None:
        key = detection_cache_key(frame, getattr(detector, "cache_id", "detector"))
        cached = cache.get("detections", key)
        if cached is not None:
            dets = []
            for entry in cached:
                det = TextLineDetection.clipped(
                    *entry["bbox"], entry["confidence"], entry.get("transcription"),
                    frame.width, frame.height,
                )
                if det is not None:
                    dets.append(det)
            return dets, True
    dets = detector.detect(frame)
    if cache is not None:
        cache.put("detections", key, [_detection_to_dict(d) for d in dets])
    return dets, False


def _score_cached(region: CandidateRegion, question: str, scorer,
                  template: PromptTemplate, cache: StageCache | None):
    key = None
    if cache is not None:
        key = score_cache_key(region, question, getattr(scorer, "cache_id", "scorer"), template)
        cached = cache.get("scores", key)
        if cached is not None:
            from .focus import ScoredWindow, parse_score
            return ScoredWindow(region, parse_score(cached["raw"])), True
    scored = score_window(region, question, scorer, template)
    if cache is not None:
        cache.put("scores", key, {"raw": scored.score.raw_response})
    return scored, False


def run_sfa(source: FrameSource, question: str, config: PipelineConfig,
            backends: BackendSet) -> AnswerResult:
    """Full scan/focus/amplify run for one question over one video."""
    cache = StageCache(config.cache_dir) if config.cache_dir else None
    timing = {}
    trace = {"mode": "sfa", "config": config.snapshot(), "frames": []}
    calls = {"detect": 0, "score": 0, "answer": 0}

    t0 = time.perf_counter()
    frames = sample_frames(source, config.target_fps)
    timing["sample_ms"] = (time.perf_counter() - t0) * 1000

    # Detect per frame; a failed detection degrades that frame to text-free.
    t0 = time.perf_counter()
    def detect_one(frame):
        try:
            dets, hit = _detect_cached(frame, backends.detector, cache)
            return dets, hit, None
        except DetectionError as exc:
            return [], False, str(exc)

    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        detection_results = list(pool.map(detect_one, frames))
    timing["detect_ms"] = (time.perf_counter() - t0) * 1000

    # Scan each text-bearing frame.
    t0 = time.perf_counter()
    frame_records = []
    candidates: list[tuple[int, CandidateRegion]] = []
    text_frame_indices: set[int] = set()
    for frame, (dets, hit, error) in zip(frames, detection_results):
        if not hit and error is None:
            calls["detect"] += 1
        record = {
            "frame_index": frame.frame_index,
            "timestamp": frame.timestamp,
            "detections": [_detection_to_dict(d) for d in dets],
            "detection_error": error,
            "windows": [],
            "scores": [],
            "selected_anchor": None,
        }
        if dets:
            text_frame_indices.add(frame.frame_index)
            regions = scan_frame(frame, dets, config.alpha)
            for region in regions:
                record["windows"].append({
                    "anchor": region.window.anchor.value,
                    "rect": list(region.window.rect.as_tuple()),
                    "scale": region.window.scale,
                    "contained_line_ids": [
                        dets.index(ln) for ln in region.contained_lines
                    ],
                })
                candidates.append((len(frame_records), region))
        frame_records.append(record)
    timing["scan_ms"] = (time.perf_counter() - t0) * 1000

    # Score all candidate windows with bounded fan-out, joined in order.
    t0 = time.perf_counter()
    def score_one(item):
        _, region = item
        return _score_cached(region, question, backends.scorer,
                             config.relevance_template, cache)

    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        score_results = list(pool.map(score_one, candidates))
    timing["score_ms"] = (time.perf_counter() - t0) * 1000

    per_frame_scored: dict[int, list] = {}
    for (record_idx, _), (scored, hit) in zip(candidates, score_results):
        if not hit:
            calls["score"] += 1
        frame_records[record_idx]["scores"].append({
            "anchor": scored.region.window.anchor.value,
            "value": scored.score.value,
            "status": scored.score.parse_status.value,
            "raw": scored.score.raw_response,
        })
        per_frame_scored.setdefault(record_idx, []).append(scored)

    # Select at most one key region per frame.
    keys = []
    for record_idx, scored_list in sorted(per_frame_scored.items()):
        selected = select_key_region(scored_list, config.tau)
        if selected is not None:
            frame_records[record_idx]["selected_anchor"] = selected.region.window.anchor.value
            keys.append(selected)

    # Amplify and answer.
    t0 = time.perf_counter()
    refined = assemble_refined_video(keys, frames, text_frame_indices, config.fallback)
    timing["amplify_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    result = answer(refined, question, backends.answerer, config.answer_template)
    calls["answer"] += 1
    timing["answer_ms"] = (time.perf_counter() - t0) * 1000

    trace["frames"] = frame_records
    trace["fallback_used"] = refined.fallback_used
    trace["fallback_level"] = refined.fallback_level
    result.trace = trace
    result.timing = timing
    result.stats = {
        "backend_calls": calls,
        "cache_warnings": cache.warnings if cache else [],
    }
    return result


def run_baseline(source: FrameSource, question: str, config: PipelineConfig,
                 answerer) -> AnswerResult:
    """Sampled frames straight to the answerer; no scan, focus, or amplify."""
    timing = {}
    t0 = time.perf_counter()
    frames = sample_frames(source, config.target_fps)
    timing["sample_ms"] = (time.perf_counter() - t0) * 1000

    from .amplify import FrameProvenance, RefinedVideo
    refined = RefinedVideo(
        frames=frames,
        provenance=[FrameProvenance(f.frame_index) for f in frames],
        fallback_used=False,
        fallback_level=0,
    )
    t0 = time.perf_counter()
    result = answer(refined, question, answerer, config.answer_template)
    timing["answer_ms"] = (time.perf_counter() - t0) * 1000
    result.trace = {
        "mode": "baseline",
        "config": config.snapshot(),
        "frames": [],
        "fallback_used": False,
        "fallback_level": 0,
    }
    result.timing = timing
    result.stats = {
        "backend_calls": {"detect": 0, "score": 0, "answer": 1},
        "cache_warnings": [],
    }
    return result
