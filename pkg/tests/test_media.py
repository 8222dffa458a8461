
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfa.errors import DegenerateRegionError, EmptyVideoError, SourceError
from sfa.media import (
    FrameSource,
    Rect,
    crop,
    decode_image,
    encode_image,
    resize,
    round_half_away,
    sample_frames,
)

from conftest import make_frame, write_frames_dir


def _gradient_frame(width, height):
    ys, xs = np.mgrid[0:height, 0:width]
    px = np.stack([xs % 256, ys % 256, (xs + ys) % 256], axis=-1).astype(np.uint8)
    return make_frame(width, height).copy_with(px)


class TestRect:
    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Rect(5, 5, 5, 10)

    def test_rasterize_rounds_half_away_then_clamps(self):
        # (-10, -10, 50.4, 50.6) on a 100x100 frame -> (0, 0, 50, 51)
        assert Rect(-10, -10, 50.4, 50.6).rasterize(100, 100) == (0, 0, 50, 51)

    def test_round_half_away(self):
        assert round_half_away(0.5) == 1
        assert round_half_away(1.5) == 2
        assert round_half_away(-0.5) == -1
        assert round_half_away(2.4) == 2


class TestSampleFrames:
    def _source(self, tmp_path, n, fps):
        frames = [make_frame(32, 24, seed=i, frame_index=i) for i in range(n)]
        d = write_frames_dir(tmp_path / "vid", frames, fps=fps)
        return FrameSource.from_directory(d)

    def test_30fps_to_1fps(self, tmp_path):
        src = self._source(tmp_path, 90, "30")
        frames = sample_frames(src, 1)
        assert len(frames) == 3
        assert [f.timestamp for f in frames] == [0.0, 1.0, 2.0]
        assert [f.frame_index for f in frames] == [0, 1, 2]

    def test_30fps_to_2fps(self, tmp_path):
        src = self._source(tmp_path, 90, "30")
        frames = sample_frames(src, 2)
        # source indices 0, 15, 30, 45, 60, 75
        assert len(frames) == 6
        assert [f.timestamp for f in frames] == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]

    def test_identity_rate_keeps_everything(self, tmp_path):
        src = self._source(tmp_path, 7, "5")
        frames = sample_frames(src, 5)
        assert len(frames) == 7
        assert [f.frame_index for f in frames] == list(range(7))

    def test_resampling_idempotent(self, tmp_path):
        src = self._source(tmp_path, 40, "10")
        a = sample_frames(src, 2)
        b = sample_frames(src, 2)
        assert [f.timestamp for f in a] == [f.timestamp for f in b]
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))

    def test_bad_target_fps(self, tmp_path):
        src = self._source(tmp_path, 10, "10")
        with pytest.raises(ValueError):
            sample_frames(src, 0)

    def test_empty_source(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        (d / "frames.meta").write_text("fps=30\ncount=0\n")
        with pytest.raises(EmptyVideoError):
            sample_frames(FrameSource.from_directory(d), 1)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(SourceError):
            FrameSource.from_directory(tmp_path / "nope")

    def test_missing_sidecar(self, tmp_path):
        d = tmp_path / "nosidecar"
        d.mkdir()
        with pytest.raises(SourceError):
            FrameSource.from_directory(d)


class TestCrop:
    def test_exact_integer_crop(self):
        frame = _gradient_frame(1920, 1080)
        out = crop(frame, Rect(0, 0, 1152, 648))
        assert (out.width, out.height) == (1152, 648)
        assert np.array_equal(out.pixels, frame.pixels[:648, :1152])

    def test_full_frame_is_identity(self):
        frame = make_frame(64, 48, seed=3)
        out = crop(frame, Rect(0, 0, 64, 48))
        assert np.array_equal(out.pixels, frame.pixels)

    def test_clamped_fractional_crop(self):
        frame = make_frame(100, 100, seed=4)
        out = crop(frame, Rect(-10, -10, 50.4, 50.6))
        assert (out.width, out.height) == (50, 51)
        assert np.array_equal(out.pixels, frame.pixels[0:51, 0:50])

    def test_degenerate_after_clamp(self):
        frame = make_frame(100, 100, seed=5)
        with pytest.raises(DegenerateRegionError):
            crop(frame, Rect(-20, -20, -5, -5))

    def test_metadata_inherited(self):
        frame = make_frame(64, 48, seed=6, frame_index=7, timestamp=3.5)
        out = crop(frame, Rect(0, 0, 10, 10))
        assert out.frame_index == 7
        assert out.timestamp == 3.5


class TestResize:
    def test_identity(self):
        frame = make_frame(37, 21, seed=7)
        out = resize(frame, 37, 21)
        assert np.array_equal(out.pixels, frame.pixels)

    def test_2x2_to_1x1_is_four_tap_average(self):
        px = np.array([[[0, 0, 0], [255, 255, 255]],
                       [[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
        frame = make_frame(2, 2).copy_with(px)
        out = resize(frame, 1, 1)
        # center sample lands exactly between the four pixels: mean 127.5,
        # rounded half-to-even by np.rint -> 128
        assert out.pixels.tolist() == [[[128, 128, 128]]]

    def test_upscale_shape_contract(self):
        frame = make_frame(1152, 648, seed=8)
        out = resize(frame, 1920, 1080)
        assert (out.width, out.height) == (1920, 1080)

    def test_nonpositive_target_rejected(self):
        frame = make_frame(8, 8)
        with pytest.raises(ValueError):
            resize(frame, 0, 4)

    def test_deterministic(self):
        frame = make_frame(33, 17, seed=9)
        a = resize(frame, 50, 29)
        b = resize(frame, 50, 29)
        assert np.array_equal(a.pixels, b.pixels)

    def test_crop_then_resize_hits_target_exactly(self):
        frame = make_frame(640, 360, seed=10)
        for rect, tw, th in [(Rect(0, 0, 500.5, 300.2), 123, 77),
                             (Rect(3.3, 7.7, 600, 350), 640, 360)]:
            out = resize(crop(frame, rect), tw, th)
            assert (out.width, out.height) == (tw, th)


class TestEncode:
    def test_png_round_trip(self):
        frame = make_frame(64, 64, seed=11)
        out = decode_image(encode_image(frame, "png"))
        assert np.array_equal(out.pixels, frame.pixels)

    def test_1x1_black(self):
        frame = make_frame(1, 1).copy_with(np.zeros((1, 1, 3), dtype=np.uint8))
        out = decode_image(encode_image(frame, "png"))
        assert out.pixels.tolist() == [[[0, 0, 0]]]

    def test_jpeg_shape(self):
        frame = _gradient_frame(64, 64)
        out = decode_image(encode_image(frame, "jpeg", quality=90))
        assert (out.width, out.height) == (64, 64)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            encode_image(make_frame(4, 4), "webp")

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**31 - 1))
    def test_png_round_trip_property(self, w, h, seed):
        frame = make_frame(w, h, seed=seed)
        assert np.array_equal(decode_image(encode_image(frame, "png")).pixels, frame.pixels)


def test_frame_buffer_invariant():
    from sfa.media import FrameImage

    with pytest.raises(ValueError):
        FrameImage(width=4, height=4, pixels=np.zeros((4, 5, 3), dtype=np.uint8),
                   frame_index=0, timestamp=0.0)


def test_sample_frames_strictly_increasing_timestamps(tmp_path):
    frames = [make_frame(16, 12, seed=i) for i in range(30)]
    src = FrameSource.from_directory(write_frames_dir(tmp_path / "v", frames, fps="12"))
    out = sample_frames(src, 5)
    ts = [f.timestamp for f in out]
    assert ts == sorted(ts)
    assert len(set(ts)) == len(ts)
    assert [f.frame_index for f in out] == list(range(len(out)))
