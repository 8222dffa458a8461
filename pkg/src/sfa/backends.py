"""Model backends: an OpenAI-compatible vision-chat client and fixture mocks.

Three roles share one wire protocol: the detector returns JSON lines of
text-line boxes, the scorer returns a relevance number in free text, and the
answerer returns the answer text. Mocks are pure functions of the fixture
file plus the request, which makes the whole pipeline bit-deterministic and
lets tests count backend calls.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import DetectionError, FixtureError, ProtocolError, TransportError
from .media import FrameImage, encode_image
from .scan import Anchor, CandidateRegion, TextLineDetection

_BACKOFF_BASE = 0.5


@dataclass
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    max_tokens: int = 256

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")


def _default_transport(url, headers, payload, timeout):
    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return resp.status_code, resp.text


def chat_vision(config: EndpointConfig, images: list[bytes], text: str, *,
                max_tokens: int | None = None, transport=None,
                semaphore=None, backoff_base: float = _BACKOFF_BASE) -> str:
    """One chat-completion request: image parts in order, then the text part.

    Temperature is pinned to 0. Retries non-2xx responses and transport
    faults with exponential backoff up to config.max_retries.
    """
    if not images and not text:
        raise ValueError("need at least one image or nonempty text")
    transport = transport or _default_transport
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if config.api_key_env:
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    content = [
        {
            "type": "image_url",
            "image_url": {"url": "data:image/png;base64," + base64.b64encode(img).decode("ascii")},
        }
        for img in images
    ]
    content.append({"type": "text", "text": text})
    payload = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": content}],
        "temperature": 0,
        "max_tokens": max_tokens if max_tokens is not None else config.max_tokens,
    }

    last_error = None
    for attempt in range(config.max_retries + 1):
        if attempt > 0 and backoff_base > 0:
            time.sleep(backoff_base * (2 ** (attempt - 1)))
        try:
            if semaphore is not None:
                with semaphore:
                    status, body = transport(url, headers, payload, config.timeout)
            else:
                status, body = transport(url, headers, payload, config.timeout)
        except requests.RequestException as exc:
            last_error = TransportError(f"request failed: {exc}")
            continue
        if not (200 <= status < 300):
            last_error = TransportError(
                f"HTTP {status} from {url}", status=status, body_excerpt=body[:500]
            )
            continue
        try:
            data = json.loads(body)
            reply = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response: {exc}") from exc
        if not isinstance(reply, str):
            raise ProtocolError(f"assistant content is not text: {type(reply).__name__}")
        return reply
    raise last_error


class OpenAIVisionBackend:
    """Base for live backends sharing one endpoint and in-flight limit."""

    def __init__(self, config: EndpointConfig, transport=None,
                 backoff_base: float = _BACKOFF_BASE):
        self.config = config
        self.transport = transport
        self.backoff_base = backoff_base
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self.cache_id = config.model_name

    def _chat(self, images: list[bytes], text: str) -> str:
        return chat_vision(
            self.config, images, text,
            transport=self.transport, semaphore=self._semaphore,
            backoff_base=self.backoff_base,
        )


class OpenAIDetector(OpenAIVisionBackend):
    """Detector over the chat protocol; the reply is JSON lines of boxes.

    Each reply line must be an object with ``bbox`` [x0, y0, x1, y1],
    ``confidence``, and optional ``transcription``.
    """

    PROMPT = (
        "Detect every text line in this image. Reply with one JSON object per "
        'line of the form {"bbox": [x0, y0, x1, y1], "confidence": c, '
        '"transcription": "..."} and nothing else.'
    )

    def detect(self, frame: FrameImage) -> list[TextLineDetection]:
        try:
            reply = self._chat([encode_image(frame, "png")], self.PROMPT)
        except (TransportError, ProtocolError) as exc:
            raise DetectionError(f"detection failed for frame {frame.frame_index}: {exc}") from exc
        detections = []
        for line in reply.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                x0, y0, x1, y1 = (float(v) for v in obj["bbox"])
                conf = float(obj.get("confidence", 1.0))
            except (ValueError, KeyError, TypeError) as exc:
                raise DetectionError(f"bad detection line {line!r}: {exc}") from exc
            det = TextLineDetection.clipped(
                x0, y0, x1, y1, min(1.0, max(0.0, conf)),
                obj.get("transcription"), frame.width, frame.height,
            )
            if det is not None:
                detections.append(det)
        detections.sort(key=lambda d: (d.bbox.y0, d.bbox.x0))
        return detections


class OpenAIScorer(OpenAIVisionBackend):
    def score(self, region: CandidateRegion, prompt: str) -> str:
        return self._chat([encode_image(region.normalized_image, "png")], prompt)


class OpenAIAnswerer(OpenAIVisionBackend):
    def answer(self, frames: list[FrameImage], prompt: str) -> str:
        return self._chat([encode_image(f, "png") for f in frames], prompt)


# --- fixture-driven mocks ---------------------------------------------------

_ANCHOR_NAMES = {a.value for a in Anchor}


class _CallCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self.call_count = 0

    def _bump(self):
        with self._lock:
            self.call_count += 1


class MockDetector(_CallCounter):
    """Detections keyed by frame index; absent frames detect nothing."""

    def __init__(self, by_frame: dict[int, list[dict]]):
        super().__init__()
        self.by_frame = by_frame
        self.cache_id = "mock-detector"

    def detect(self, frame: FrameImage) -> list[TextLineDetection]:
        self._bump()
        detections = []
        for entry in self.by_frame.get(frame.frame_index, []):
            det = TextLineDetection.clipped(
                *entry["bbox"], entry.get("confidence", 1.0),
                entry.get("transcription"), frame.width, frame.height,
            )
            if det is not None:
                detections.append(det)
        detections.sort(key=lambda d: (d.bbox.y0, d.bbox.x0))
        return detections


class MockScorer(_CallCounter):
    """Raw score strings keyed by (frame index, anchor); missing keys score 0."""

    def __init__(self, by_window: dict[tuple[int, str], str]):
        super().__init__()
        self.by_window = by_window
        self.cache_id = "mock-scorer"

    def score(self, region: CandidateRegion, prompt: str) -> str:
        self._bump()
        key = (region.window.frame_index, region.window.anchor.value)
        return self.by_window.get(key, "0")


class MockAnswerer(_CallCounter):
    """Canned answer, optionally specialized by refined-frame count."""

    def __init__(self, default: str, by_frame_count: dict[int, str] | None = None):
        super().__init__()
        self.default = default
        self.by_frame_count = by_frame_count or {}
        self.cache_id = "mock-answerer"
        self.last_request: tuple[int, str] | None = None

    def answer(self, frames: list[FrameImage], prompt: str) -> str:
        self._bump()
        self.last_request = (len(frames), prompt)
        return self.by_frame_count.get(len(frames), self.default)


@dataclass
class BackendSet:
    detector: object
    scorer: object
    answerer: object


def _fixture_fail(path, message):
    raise FixtureError(f"{path}: {message}")


def load_mock_fixtures(path) -> BackendSet:
    """Parse the fixture file into a deterministic mock backend set.

    Schema (JSON object):
      detections: {"<frame index>": [{"bbox": [x0,y0,x1,y1],
                   "confidence": c, "transcription": "..."}]}
      scores:     {"<frame index>": {"<anchor>": number-or-string}}
      answer:     "text"  |  {"default": "text", "by_frame_count": {"3": "text"}}
    """
    path = Path(path)
    if not path.is_file():
        raise FixtureError(f"fixture file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except ValueError as exc:
        raise FixtureError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        _fixture_fail(path, "top level must be an object")

    by_frame: dict[int, list[dict]] = {}
    detections = data.get("detections", {})
    if not isinstance(detections, dict):
        _fixture_fail(path, "field 'detections' must be an object")
    for frame_key, entries in detections.items():
        try:
            frame_idx = int(frame_key)
        except ValueError:
            _fixture_fail(path, f"field 'detections': key {frame_key!r} is not an integer")
        if not isinstance(entries, list):
            _fixture_fail(path, f"field 'detections[{frame_key}]' must be a list")
        for i, entry in enumerate(entries):
            where = f"detections[{frame_key}][{i}]"
            if not isinstance(entry, dict):
                _fixture_fail(path, f"field '{where}' must be an object")
            bbox = entry.get("bbox")
            if (not isinstance(bbox, list) or len(bbox) != 4
                    or not all(isinstance(v, (int, float)) for v in bbox)):
                _fixture_fail(path, f"field '{where}.bbox' must be [x0, y0, x1, y1]")
            conf = entry.get("confidence", 1.0)
            if not isinstance(conf, (int, float)) or not (0 <= conf <= 1):
                _fixture_fail(path, f"field '{where}.confidence' must be in [0,1]")
        by_frame[frame_idx] = entries

    by_window: dict[tuple[int, str], str] = {}
    scores = data.get("scores", {})
    if not isinstance(scores, dict):
        _fixture_fail(path, "field 'scores' must be an object")
    for frame_key, anchors in scores.items():
        try:
            frame_idx = int(frame_key)
        except ValueError:
            _fixture_fail(path, f"field 'scores': key {frame_key!r} is not an integer")
        if not isinstance(anchors, dict):
            _fixture_fail(path, f"field 'scores[{frame_key}]' must be an object")
        for anchor_name, value in anchors.items():
            if anchor_name not in _ANCHOR_NAMES:
                _fixture_fail(path, f"field 'scores[{frame_key}]': unknown anchor {anchor_name!r}")
            if not isinstance(value, (int, float, str)):
                _fixture_fail(path, f"field 'scores[{frame_key}][{anchor_name}]' must be a number or string")
            by_window[(frame_idx, anchor_name)] = str(value)

    answer = data.get("answer", "")
    by_frame_count: dict[int, str] = {}
    if isinstance(answer, dict):
        default = answer.get("default")
        if not isinstance(default, str):
            _fixture_fail(path, "field 'answer.default' must be a string")
        for count_key, text in answer.get("by_frame_count", {}).items():
            try:
                count = int(count_key)
            except ValueError:
                _fixture_fail(path, f"field 'answer.by_frame_count': key {count_key!r} is not an integer")
            if not isinstance(text, str):
                _fixture_fail(path, f"field 'answer.by_frame_count[{count_key}]' must be a string")
            by_frame_count[count] = text
        answer_text = default
    elif isinstance(answer, str):
        answer_text = answer
    else:
        _fixture_fail(path, "field 'answer' must be a string or object")

    return BackendSet(
        detector=MockDetector(by_frame),
        scorer=MockScorer(by_window),
        answerer=MockAnswerer(answer_text, by_frame_count),
    )
