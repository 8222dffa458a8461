"""Command-line driver: single runs, batch eval, scan debugging, cache tools.

Configuration precedence is defaults < config file < flags. Every numeric
hyperparameter is a flag so sweeps over alpha, tau, and fps are scriptable
without code changes.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click
import yaml

from . import backends as backends_mod
from .amplify import FallbackPolicy
from .backends import BackendSet, EndpointConfig, load_mock_fixtures
from .errors import (
    AnsweringError,
    ConfigurationError,
    DetectionError,
    EmptyVideoError,
    EvaluationError,
    FixtureError,
    ManifestError,
    PipelineError,
    ProtocolError,
    SourceError,
    TransportError,
)
from .eval import evaluate, load_manifest, write_report
from .media import FrameSource, encode_image, sample_frames
from .pipeline import PipelineConfig, StageCache, run_baseline, run_sfa
from .scan import scan_frame
from .templates import PromptTemplate

EXIT_CODES = (
    (ConfigurationError, 3),
    (EmptyVideoError, 5),
    (SourceError, 4),
    (ManifestError, 6),
    (AnsweringError, 7),
    (DetectionError, 8),
    (TransportError, 8),
    (ProtocolError, 8),
    (EvaluationError, 9),
    (FixtureError, 10),
)

EXIT_CODE_HELP = """\
Exit codes:
  0   success
  1   unexpected internal error
  3   configuration error (bad alpha/tau/fps or config file)
  4   frame source error
  5   empty video
  6   manifest error
  7   answering error
  8   backend transport/detection error
  9   evaluation error (all samples failed)
  10  mock fixture error
"""


def exit_code_for(exc: PipelineError) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def load_config_file(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"bad config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping")
    return data


def build_config(file_cfg: dict, overrides: dict) -> PipelineConfig:
    """Layer defaults < file < flags into a PipelineConfig."""
    merged = {"alpha": 0.6, "tau": 0.7, "fps": "1", "max_in_flight": 4, "cache_dir": None}
    for key in merged:
        if key in file_cfg and file_cfg[key] is not None:
            merged[key] = file_cfg[key]
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    try:
        fps = Fraction(str(merged["fps"]))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"bad fps value {merged['fps']!r}") from exc

    prompts = file_cfg.get("prompts") or {}
    relevance = prompts.get("relevance")
    answer = prompts.get("answer")
    return PipelineConfig(
        alpha=float(merged["alpha"]),
        tau=float(merged["tau"]),
        target_fps=fps,
        fallback=FallbackPolicy(),
        relevance_template=PromptTemplate.from_file(relevance) if relevance else None,
        answer_template=PromptTemplate.from_file(answer) if answer else None,
        max_in_flight=int(merged["max_in_flight"]),
        cache_dir=Path(merged["cache_dir"]) if merged["cache_dir"] else None,
    )


def build_backends(file_cfg: dict, mock_fixtures, transport=None) -> BackendSet:
    fixtures = mock_fixtures or file_cfg.get("mock_fixtures")
    if fixtures:
        return load_mock_fixtures(fixtures)
    endpoints = file_cfg.get("endpoints")
    if not endpoints:
        raise ConfigurationError(
            "no backends configured: give --mock-fixtures or an 'endpoints' config section"
        )

    def endpoint(role):
        spec = endpoints.get(role)
        if spec is None:
            raise ConfigurationError(f"endpoints section missing '{role}'")
        try:
            return EndpointConfig(**spec)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad endpoint config for '{role}': {exc}") from exc

    return BackendSet(
        detector=backends_mod.OpenAIDetector(endpoint("detector"), transport=transport),
        scorer=backends_mod.OpenAIScorer(endpoint("scorer"), transport=transport),
        answerer=backends_mod.OpenAIAnswerer(endpoint("answerer"), transport=transport),
    )


def _fail(exc: PipelineError):
    click.echo(f"error [{exc.stage}]: {exc}", err=True)
    sys.exit(exit_code_for(exc))


@click.group(epilog=EXIT_CODE_HELP)
def main():
    """Text-aware video question answering: scan, focus, amplify."""


def _common_options(fn):
    for option in reversed([
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="YAML config file."),
        click.option("--alpha", type=float, default=None,
                     help="Window scaling ratio in [0.5, 1.0]."),
        click.option("--tau", type=float, default=None,
                     help="Relevance threshold in [0, 1]."),
        click.option("--fps", default=None,
                     help="Target sampling rate (rational, e.g. 1 or 30000/1001)."),
        click.option("--mock-fixtures", type=click.Path(), default=None,
                     help="Fixture file for deterministic mock backends."),
        click.option("--cache-dir", type=click.Path(), default=None,
                     help="Content-addressed cache directory."),
        click.option("--max-in-flight", type=int, default=None,
                     help="Concurrent backend request limit."),
    ]):
        fn = option(fn)
    return fn


@main.command("run")
@click.option("--frames", "frames_path", type=click.Path(), required=True,
              help="Frame directory with a frames.meta sidecar.")
@click.option("--question", required=True)
@click.option("--mode", type=click.Choice(["sfa", "baseline"]), default="sfa")
@click.option("--trace-out", type=click.Path(), default="trace.json",
              help="Where to write the run trace.")
@_common_options
def cmd_run(frames_path, question, mode, trace_out, config_path, alpha, tau,
            fps, mock_fixtures, cache_dir, max_in_flight):
    """Answer one question about one video; print the answer."""
    try:
        file_cfg = load_config_file(config_path)
        config = build_config(file_cfg, {
            "alpha": alpha, "tau": tau, "fps": fps,
            "cache_dir": cache_dir, "max_in_flight": max_in_flight,
        })
        backends = build_backends(file_cfg, mock_fixtures)
        source = FrameSource.from_directory(frames_path)
        if mode == "sfa":
            result = run_sfa(source, question, config, backends)
        else:
            result = run_baseline(source, question, config, backends.answerer)
    except PipelineError as exc:
        _fail(exc)
    Path(trace_out).write_text(json.dumps(
        {"trace": result.trace, "timing": result.timing, "stats": result.stats},
        indent=2))
    click.echo(result.answer)


@main.command("eval")
@click.option("--manifest", "manifest_path", type=click.Path(), required=True,
              help="JSONL manifest of QA samples.")
@click.option("--mode", type=click.Choice(["sfa", "baseline"]), default="sfa")
@click.option("--report-dir", type=click.Path(), default="report",
              help="Directory for summary.json and per_sample.csv.")
@_common_options
def cmd_eval(manifest_path, mode, report_dir, config_path, alpha, tau, fps,
             mock_fixtures, cache_dir, max_in_flight):
    """Evaluate a manifest; print aggregate ACC(%) and ANLS(%)."""
    try:
        file_cfg = load_config_file(config_path)
        config = build_config(file_cfg, {
            "alpha": alpha, "tau": tau, "fps": fps,
            "cache_dir": cache_dir, "max_in_flight": max_in_flight,
        })
        samples = load_manifest(manifest_path)
        backends = build_backends(file_cfg, mock_fixtures)
        report = evaluate(samples, config, backends, mode=mode)
    except PipelineError as exc:
        _fail(exc)
    write_report(report, report_dir)
    click.echo(f"ACC: {report.accuracy_percent:.2f} ANLS: {report.anls_percent:.2f}")


@main.command("scan-debug")
@click.option("--frames", "frames_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), default="scan_debug",
              help="Directory for per-frame window dumps.")
@click.option("--save-crops", is_flag=True, default=False,
              help="Also write a png per candidate region.")
@_common_options
def cmd_scan_debug(frames_path, out_dir, save_crops, config_path, alpha, tau,
                   fps, mock_fixtures, cache_dir, max_in_flight):
    """Dump the scan stage's windows per frame for overlay tooling."""
    try:
        file_cfg = load_config_file(config_path)
        config = build_config(file_cfg, {
            "alpha": alpha, "tau": tau, "fps": fps,
            "cache_dir": cache_dir, "max_in_flight": max_in_flight,
        })
        backends = build_backends(file_cfg, mock_fixtures)
        source = FrameSource.from_directory(frames_path)
        frames = sample_frames(source, config.target_fps)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for frame in frames:
            detections = backends.detector.detect(frame)
            dump_path = out / f"frame_{frame.frame_index:06d}.windows.json"
            if not detections:
                dump_path.write_text(json.dumps(
                    {"frame_index": frame.frame_index, "discarded": "no text"}, indent=2))
                continue
            regions = scan_frame(frame, detections, config.alpha)
            dump = {
                "frame_index": frame.frame_index,
                "windows": [
                    {
                        "anchor": r.window.anchor.value,
                        "rect": list(r.window.rect.as_tuple()),
                        "scale": r.window.scale,
                        "contained_line_ids": [
                            detections.index(ln) for ln in r.contained_lines
                        ],
                    }
                    for r in regions
                ],
            }
            dump_path.write_text(json.dumps(dump, indent=2))
            if save_crops:
                for r in regions:
                    crop_path = out / (
                        f"frame_{frame.frame_index:06d}_{r.window.anchor.value}.png"
                    )
                    crop_path.write_bytes(encode_image(r.normalized_image, "png"))
    except PipelineError as exc:
        _fail(exc)


@main.group("cache")
def cmd_cache():
    """Manage the content-addressed result cache."""


@cmd_cache.command("clear")
@click.option("--cache-dir", type=click.Path(), required=True)
def cmd_cache_clear(cache_dir):
    """Delete all cached detections and scores."""
    removed = StageCache(cache_dir).clear()
    click.echo(f"removed {removed} cache entries")


@cmd_cache.command("stats")
@click.option("--cache-dir", type=click.Path(), required=True)
def cmd_cache_stats(cache_dir):
    """Count cached entries per stage."""
    root = Path(cache_dir)
    for stage in StageCache.STAGES:
        n = len(list((root / stage).glob("*.json"))) if (root / stage).is_dir() else 0
        click.echo(f"{stage}: {n}")


if __name__ == "__main__":
    main()
