"""Answer metrics, manifest loading, and batch evaluation.

Metrics follow the usual text-VQA pair: exact-match accuracy after
normalization, and average normalized Levenshtein similarity with the 0.5
cut-off. Manifests are JSON lines; evaluation isolates per-sample failures
so one broken sample never sinks a batch.
"""

from __future__ import annotations

import csv
import json
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .backends import BackendSet
from .errors import EvaluationError, ManifestError, PipelineError, SourceError
from .media import FrameSource
from .pipeline import PipelineConfig, run_baseline, run_sfa

ANLS_THRESHOLD = 0.5


def normalized_levenshtein(a: str, b: str) -> float:
    """Unit-cost edit distance over Unicode scalars, divided by max length."""
    if not a and not b:
        return 0.0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (0 if ca == cb else 1),
            ))
        prev = cur
    return prev[-1] / max(len(a), len(b))


def normalize_answer(text: str) -> str:
    """Lowercase, trim, collapse internal whitespace runs."""
    return " ".join(text.lower().split())


def _strip_edge_punctuation(text: str) -> str:
    return text.strip(string.punctuation + " ")


def anls_score(prediction: str, golds: list[str],
               nl_threshold: float = ANLS_THRESHOLD) -> float:
    """Max over golds of 1 - NL, clipped to 0 when NL >= threshold."""
    if not golds:
        raise ValueError("golds must be nonempty")
    pred = normalize_answer(prediction)
    best = 0.0
    for gold in golds:
        nl = normalized_levenshtein(pred, normalize_answer(gold))
        if nl < nl_threshold:
            best = max(best, 1.0 - nl)
    return best


def accuracy_match(prediction: str, golds: list[str]) -> int:
    """1 iff the normalized, edge-punctuation-stripped strings match a gold."""
    if not golds:
        raise ValueError("golds must be nonempty")
    pred = _strip_edge_punctuation(normalize_answer(prediction))
    for gold in golds:
        if pred == _strip_edge_punctuation(normalize_answer(gold)):
            return 1
    return 0


@dataclass
class QASample:
    sample_id: str
    frames: FrameSource
    question: str
    gold_answers: list[str]

    def __post_init__(self):
        if not self.question:
            raise ValueError("question must be nonempty")
        if not self.gold_answers:
            raise ValueError("gold_answers must be nonempty")


@dataclass
class SampleRow:
    sample_id: str
    prediction: str | None
    gold: list[str]
    accuracy_hit: int | None
    anls: float | None
    fallback_used: bool | None
    error: str | None = None


@dataclass
class EvalReport:
    per_sample: list[SampleRow]
    accuracy_percent: float
    anls_percent: float
    evaluated: int
    errored: int
    config: dict = field(default_factory=dict)


def load_manifest(path) -> list[QASample]:
    """One JSON object per line: sample_id, frames_path, fps, question, answers."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    samples = []
    seen_ids = set()
    base = path.parent
    lines = path.read_text().splitlines()
    if not any(line.strip() for line in lines):
        raise ManifestError(f"manifest {path} is empty")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise ManifestError(f"{path}:{lineno}: record must be an object")
        for fld in ("sample_id", "frames_path", "fps", "question", "answers"):
            if fld not in record:
                raise ManifestError(f"{path}:{lineno}: missing field '{fld}'")
        sample_id = str(record["sample_id"])
        if sample_id in seen_ids:
            raise ManifestError(f"{path}:{lineno}: duplicate sample_id '{sample_id}'")
        seen_ids.add(sample_id)
        answers = record["answers"]
        if not isinstance(answers, list) or not answers or not all(isinstance(a, str) for a in answers):
            raise ManifestError(f"{path}:{lineno}: 'answers' must be a nonempty list of strings")
        question = record["question"]
        if not isinstance(question, str) or not question:
            raise ManifestError(f"{path}:{lineno}: 'question' must be a nonempty string")
        try:
            fps = Fraction(str(record["fps"]))
        except (ValueError, ZeroDivisionError) as exc:
            raise ManifestError(f"{path}:{lineno}: bad fps value {record['fps']!r}") from exc
        frames_path = Path(record["frames_path"])
        if not frames_path.is_absolute():
            frames_path = base / frames_path
        try:
            source = FrameSource.from_manifest(frames_path, fps)
        except SourceError as exc:
            raise SourceError(f"sample '{sample_id}': {exc}") from exc
        samples.append(QASample(sample_id, source, question, answers))
    return samples


def evaluate(samples: list[QASample], config: PipelineConfig,
             backends: BackendSet, mode: str = "sfa",
             sample_concurrency: int = 1) -> EvalReport:
    """Run the chosen pipeline per sample and aggregate both metrics."""
    if mode not in ("sfa", "baseline"):
        raise ValueError(f"unknown mode {mode!r}")
    if not samples:
        raise EvaluationError("no samples to evaluate")

    def run_one(sample: QASample) -> SampleRow:
        try:
            if mode == "sfa":
                result = run_sfa(sample.frames, sample.question, config, backends)
            else:
                result = run_baseline(sample.frames, sample.question, config,
                                      backends.answerer)
        except PipelineError as exc:
            return SampleRow(sample.sample_id, None, sample.gold_answers,
                             None, None, None, error=f"{exc.stage}: {exc}")
        return SampleRow(
            sample_id=sample.sample_id,
            prediction=result.answer,
            gold=sample.gold_answers,
            accuracy_hit=accuracy_match(result.answer, sample.gold_answers),
            anls=anls_score(result.answer, sample.gold_answers),
            fallback_used=result.refined.fallback_used,
        )

    if sample_concurrency > 1:
        with ThreadPoolExecutor(max_workers=sample_concurrency) as pool:
            rows = list(pool.map(run_one, samples))
    else:
        rows = [run_one(s) for s in samples]

    ok = [r for r in rows if r.error is None]
    if not ok:
        raise EvaluationError("all samples failed")
    accuracy = 100.0 * sum(r.accuracy_hit for r in ok) / len(ok)
    anls = 100.0 * sum(r.anls for r in ok) / len(ok)
    snapshot = dict(config.snapshot())
    snapshot["mode"] = mode
    return EvalReport(
        per_sample=rows,
        accuracy_percent=accuracy,
        anls_percent=anls,
        evaluated=len(ok),
        errored=len(rows) - len(ok),
        config=snapshot,
    )


def write_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    """Emit summary.json plus per_sample.csv under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps({
        "accuracy_percent": report.accuracy_percent,
        "anls_percent": report.anls_percent,
        "evaluated": report.evaluated,
        "errored": report.errored,
        "config": report.config,
    }, indent=2))
    csv_path = out_dir / "per_sample.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "prediction", "gold", "acc", "anls", "fallback", "error"])
        for row in report.per_sample:
            writer.writerow([
                row.sample_id,
                "" if row.prediction is None else row.prediction,
                "|".join(row.gold),
                "" if row.accuracy_hit is None else row.accuracy_hit,
                "" if row.anls is None else f"{row.anls:.6f}",
                "" if row.fallback_used is None else int(row.fallback_used),
                row.error or "",
            ])
    return summary_path, csv_path
