"""Shared fixtures: deterministic frames on disk plus mock backend files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sfa.media import FrameImage, encode_image


def make_frame(width=192, height=108, seed=0, frame_index=0, timestamp=0.0):
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return FrameImage(width=width, height=height, pixels=px,
                      frame_index=frame_index, timestamp=timestamp)


def write_frames_dir(dir_path: Path, frames: list[FrameImage], fps="1"):
    dir_path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        (dir_path / f"{i:06d}.png").write_bytes(encode_image(frame, "png"))
    (dir_path / "frames.meta").write_text(f"fps={fps}\ncount={len(frames)}\n")
    return dir_path


# The "poster" scenario: 6 frames at 1 fps, text in frames 1-3, one candidate
# window per text frame (top-left), scores peaking at frame 2.
POSTER_DETECTION = {"bbox": [10.0, 10.0, 60.0, 30.0], "confidence": 0.9,
                    "transcription": "HALF PRICE"}
POSTER_FIXTURE = {
    "detections": {
        "1": [POSTER_DETECTION],
        "2": [POSTER_DETECTION],
        "3": [POSTER_DETECTION],
    },
    "scores": {
        "1": {"top_left": "0.6"},
        "2": {"top_left": "0.9"},
        "3": {"top_left": "0.65"},
    },
    "answer": "half price",
}


@pytest.fixture
def poster_frames_dir(tmp_path):
    frames = [make_frame(seed=10 + i, frame_index=i, timestamp=float(i))
              for i in range(6)]
    return write_frames_dir(tmp_path / "poster_frames", frames)


@pytest.fixture
def poster_fixture_path(tmp_path):
    path = tmp_path / "poster_fixtures.json"
    path.write_text(json.dumps(POSTER_FIXTURE))
    return path


@pytest.fixture
def low_score_fixture_path(tmp_path):
    """Same detections as the poster scenario but every score below 0.7."""
    fixture = json.loads(json.dumps(POSTER_FIXTURE))
    fixture["scores"] = {
        "1": {"top_left": "0.3"},
        "2": {"top_left": "0.4"},
        "3": {"top_left": "0.2"},
    }
    fixture["answer"] = "half price"
    path = tmp_path / "low_score_fixtures.json"
    path.write_text(json.dumps(fixture))
    return path


# 4-sample eval scenario: no detections anywhere, so every sample falls back
# to its full frame set and the answerer keys its reply on the frame count.
# Sample i has i frames. Expected: 3 exact hits plus one near-miss
# ("mancester" vs "manchester": NL 0.1 -> ANLS 0.9), so ACC 75.00 and
# ANLS (1 + 1 + 1 + 0.9) / 4 * 100 = 97.5.
EVAL_ANSWERS = {1: "half price", 2: "manchester", 3: "buy one get one",
                4: "mancester"}
EVAL_GOLDS = {1: ["half price"], 2: ["manchester"], 3: ["buy one get one"],
              4: ["manchester"]}
EVAL_EXPECTED_ACC = 75.0
EVAL_EXPECTED_ANLS = 97.5


def write_eval_scenario(tmp_path):
    """Create frame dirs, fixture file, and manifest; return their paths."""
    fixture = {
        "detections": {},
        "scores": {},
        "answer": {"default": "dunno",
                   "by_frame_count": {str(k): v for k, v in EVAL_ANSWERS.items()}},
    }
    fixture_path = tmp_path / "eval_fixtures.json"
    fixture_path.write_text(json.dumps(fixture))

    manifest_lines = []
    for i in range(1, 5):
        frames = [make_frame(48, 32, seed=100 * i + j, frame_index=j,
                             timestamp=float(j)) for j in range(i)]
        write_frames_dir(tmp_path / f"sample{i}", frames)
        manifest_lines.append(json.dumps({
            "sample_id": f"s{i}",
            "frames_path": f"sample{i}",
            "fps": 1,
            "question": f"question {i}?",
            "answers": EVAL_GOLDS[i],
        }))
    manifest_path = tmp_path / "manifest.jsonl"
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    return manifest_path, fixture_path


@pytest.fixture
def eval_scenario(tmp_path):
    return write_eval_scenario(tmp_path)


@pytest.fixture
def no_text_fixture_path(tmp_path):
    path = tmp_path / "no_text_fixtures.json"
    path.write_text(json.dumps({"detections": {}, "scores": {}, "answer": "half price"}))
    return path
