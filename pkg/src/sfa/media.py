"""Frame acquisition and raster primitives: sampling, crop, resize, encode.

Frames come from a pre-decoded frame directory (``%06d.png`` / ``%06d.jpg``
from index 0) with a ``frames.meta`` sidecar carrying ``fps=`` and ``count=``
lines. Container demuxing is out of scope; an external tool produces the
directory.

All geometry is real-valued until a rect is rasterized against a frame, at
which point coordinates are rounded half away from zero and clamped to the
frame bounds. Resizing is bilinear with edge-clamped sampling at pixel
centers, implemented here so output bytes are fixed by this package rather
than by whichever imaging library happens to be installed.
"""

from __future__ import annotations

import enum
import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DegenerateRegionError,
    EmptyVideoError,
    EncodingError,
    SourceError,
)


def round_half_away(v: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if v >= 0:
        return int(math.floor(v + 0.5))
    return int(math.ceil(v - 0.5))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel coordinates, origin at top-left."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rect: {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def intersects_interior(self, other: "Rect") -> bool:
        """Positive-area overlap; mere boundary contact does not count."""
        return (
            self.x0 < other.x1
            and self.x1 > other.x0
            and self.y0 < other.y1
            and self.y1 > other.y0
        )

    def contains(self, other: "Rect") -> bool:
        return (
            other.x0 >= self.x0
            and other.y0 >= self.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def rasterize(self, frame_w: int, frame_h: int) -> tuple[int, int, int, int]:
        """Integer pixel bounds: round half away from zero, then clamp."""
        ix0 = max(0, min(frame_w, round_half_away(self.x0)))
        iy0 = max(0, min(frame_h, round_half_away(self.y0)))
        ix1 = max(0, min(frame_w, round_half_away(self.x1)))
        iy1 = max(0, min(frame_h, round_half_away(self.y1)))
        return ix0, iy0, ix1, iy1

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass
class FrameImage:
    """A decoded RGB raster plus its position in the sampled sequence."""

    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width, 3)
    frame_index: int
    timestamp: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        if self.timestamp < 0:
            raise ValueError("timestamp must be nonnegative")
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        self.pixels = px

    def copy_with(self, pixels: np.ndarray) -> "FrameImage":
        h, w = pixels.shape[:2]
        return FrameImage(
            width=w,
            height=h,
            pixels=pixels,
            frame_index=self.frame_index,
            timestamp=self.timestamp,
        )


class SourceKind(enum.Enum):
    FRAME_DIRECTORY = "frame_directory"
    MANIFEST_LISTED = "manifest_listed"


@dataclass
class FrameSource:
    """A directory of decoded frames plus its native frame rate."""

    kind: SourceKind
    path: Path
    native_fps: Fraction
    count: int | None = field(default=None)

    @classmethod
    def from_directory(cls, path) -> "FrameSource":
        """Read the ``frames.meta`` sidecar and build a source."""
        path = Path(path)
        meta = path / "frames.meta"
        if not path.is_dir():
            raise SourceError(f"frame directory not found: {path}")
        if not meta.is_file():
            raise SourceError(f"missing sidecar {meta}")
        fps = None
        count = None
        for line in meta.read_text().splitlines():
            line = line.strip()
            if line.startswith("fps="):
                fps = _parse_fraction(line[4:])
            elif line.startswith("count="):
                count = int(line[6:])
        if fps is None or fps <= 0:
            raise SourceError(f"sidecar {meta} missing a positive fps= line")
        return cls(SourceKind.FRAME_DIRECTORY, path, fps, count)

    @classmethod
    def from_manifest(cls, path, fps: Fraction) -> "FrameSource":
        path = Path(path)
        if not path.is_dir():
            raise SourceError(f"frame directory not found: {path}")
        if fps <= 0:
            raise SourceError(f"manifest fps must be positive, got {fps}")
        return cls(SourceKind.MANIFEST_LISTED, path, fps)

    def frame_paths(self) -> list[Path]:
        """Frame files named by zero-padded index, contiguous from 0."""
        files = {}
        for p in sorted(self.path.iterdir()):
            m = re.fullmatch(r"(\d{6})\.(png|jpg|jpeg)", p.name)
            if m:
                files[int(m.group(1))] = p
        if not files:
            raise EmptyVideoError(f"no frames in {self.path}")
        n = self.count if self.count is not None else len(files)
        ordered = []
        for i in range(n):
            if i not in files:
                raise SourceError(f"frame index {i} missing from {self.path}")
            ordered.append(files[i])
        return ordered


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise SourceError(f"bad rational value {text!r}") from exc


def sample_frames(source: FrameSource, target_fps) -> list[FrameImage]:
    """Load frames at source indices floor(k * native_fps / target_fps).

    Duplicate indices are emitted once; frame_index is renumbered from 0
    while timestamps keep the source clock.
    """
    target_fps = Fraction(target_fps)
    if target_fps <= 0:
        raise ValueError(f"target_fps must be positive, got {target_fps}")
    paths = source.frame_paths()
    step = source.native_fps / target_fps
    indices: list[int] = []
    k = 0
    while True:
        idx = math.floor(k * step)
        if idx >= len(paths):
            break
        if not indices or indices[-1] != idx:
            indices.append(idx)
        k += 1
    frames = []
    for new_index, src_index in enumerate(indices):
        px = _load_raster(paths[src_index])
        h, w = px.shape[:2]
        frames.append(
            FrameImage(
                width=w,
                height=h,
                pixels=px,
                frame_index=new_index,
                timestamp=float(Fraction(src_index) / source.native_fps),
            )
        )
    return frames


def _load_raster(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise SourceError(f"unreadable frame {path}: {exc}") from exc


def crop(frame: FrameImage, rect: Rect) -> FrameImage:
    """Extract the rasterized subrectangle as a new frame."""
    ix0, iy0, ix1, iy1 = rect.rasterize(frame.width, frame.height)
    if ix1 <= ix0 or iy1 <= iy0:
        raise DegenerateRegionError(
            f"rect {rect.as_tuple()} rasterizes to zero area on "
            f"{frame.width}x{frame.height}"
        )
    return frame.copy_with(frame.pixels[iy0:iy1, ix0:ix1].copy())


def resize(image: FrameImage, target_w: int, target_h: int) -> FrameImage:
    """Bilinear resample to exactly (target_w, target_h).

    Samples at destination pixel centers mapped into the source grid,
    edge-clamped; a same-size resize is pixel-identical.
    """
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target dimensions must be positive: {target_w}x{target_h}")
    if target_w == image.width and target_h == image.height:
        return image.copy_with(image.pixels.copy())

    src = image.pixels.astype(np.float64)
    xs = (np.arange(target_w, dtype=np.float64) + 0.5) * image.width / target_w - 0.5
    ys = (np.arange(target_h, dtype=np.float64) + 0.5) * image.height / target_h - 0.5
    xs = np.clip(xs, 0.0, image.width - 1.0)
    ys = np.clip(ys, 0.0, image.height - 1.0)

    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, image.width - 1)
    y1 = np.minimum(y0 + 1, image.height - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]

    top = src[y0[:, None], x0[None, :]] * (1 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1 - fx) + src[y1[:, None], x1[None, :]] * fx
    out = top * (1 - fy) + bot * fy
    return image.copy_with(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def encode_image(image: FrameImage, fmt: str = "png", quality: int = 90) -> bytes:
    """Encode to png (lossless) or jpeg bytes."""
    if fmt not in ("png", "jpeg"):
        raise ValueError(f"unsupported format {fmt!r}")
    buf = io.BytesIO()
    try:
        pil = Image.fromarray(image.pixels, mode="RGB")
        if fmt == "png":
            pil.save(buf, format="PNG")
        else:
            pil.save(buf, format="JPEG", quality=quality)
    except OSError as exc:
        raise EncodingError(f"{fmt} encoding failed: {exc}") from exc
    return buf.getvalue()


def decode_image(data: bytes, frame_index: int = 0, timestamp: float = 0.0) -> FrameImage:
    """Decode png/jpeg bytes back into a frame; inverse of encode for png."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            px = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise EncodingError(f"decoding failed: {exc}") from exc
    h, w = px.shape[:2]
    return FrameImage(width=w, height=h, pixels=px, frame_index=frame_index, timestamp=timestamp)
