import numpy as np
import pytest

from lstmf import InputError, build_pyramid, load_frame_sequence, pyramid_level_sizes, rgb_to_gray
from lstmf.media import FrameSequence, save_y4m


def write_pgm(path, frame):
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.shape[1]} {frame.shape[0]}\n255\n".encode())
        fh.write(frame.tobytes())


class TestLuma:
    def test_endpoints(self):
        rgb = np.array([[[255, 255, 255], [0, 0, 0]]], dtype=np.uint8)
        assert rgb_to_gray(rgb).tolist() == [[255, 0]]

    def test_pure_red(self):
        # round(0.299 * 255) = 76
        rgb = np.array([[[255, 0, 0]]], dtype=np.uint8)
        assert rgb_to_gray(rgb)[0, 0] == 76

    def test_idempotent_on_gray(self, rng):
        values = rng.integers(0, 256, size=(13, 17, 1)).astype(np.uint8)
        rgb = np.repeat(values, 3, axis=2)
        assert np.array_equal(rgb_to_gray(rgb), values[:, :, 0])


class TestPyramid:
    def test_64_sqrt2_gives_three_levels(self):
        sizes = pyramid_level_sizes(64, 64, np.sqrt(2.0), 8)
        assert [h for _, h in sizes] == [64, 45, 32]

    def test_320x240_gives_six_levels(self):
        sizes = pyramid_level_sizes(320, 240, np.sqrt(2.0), 8)
        assert [h for _, h in sizes] == [240, 169, 120, 84, 60, 42]

    def test_32x32_single_level(self):
        frame = np.zeros((32, 32), dtype=np.uint8)
        assert len(build_pyramid(frame, 1.7)) == 1

    def test_max_levels_cap(self):
        sizes = pyramid_level_sizes(4096, 4096, np.sqrt(2.0), 3)
        assert len(sizes) == 3

    def test_levels_match_closed_form(self, textured_frame):
        pyr = build_pyramid(textured_frame, np.sqrt(2.0), 8)
        sizes = pyramid_level_sizes(100, 80, np.sqrt(2.0), 8)
        assert [lvl.shape for lvl in pyr.levels] == [(h, w) for w, h in sizes]

    def test_constant_frame_stays_constant(self):
        frame = np.full((64, 64), 137, dtype=np.uint8)
        pyr = build_pyramid(frame, np.sqrt(2.0), 8)
        for level in pyr.levels:
            assert (level == 137).all()

    def test_too_small_frame_rejected(self):
        with pytest.raises(InputError):
            build_pyramid(np.zeros((16, 64), dtype=np.uint8), np.sqrt(2.0))


class TestLoading:
    def test_missing_path(self, tmp_path):
        with pytest.raises(InputError):
            load_frame_sequence(tmp_path / "nope")

    def test_pgm_directory(self, tmp_path, rng):
        frames = rng.integers(0, 256, size=(5, 64, 64)).astype(np.uint8)
        for i, frame in enumerate(frames):
            write_pgm(tmp_path / f"f{i:04d}.pgm", frame)
        seq = load_frame_sequence(tmp_path)
        assert len(seq) == 5 and seq.width == 64 and seq.height == 64
        assert np.array_equal(seq.frames, frames)

    def test_identical_pgm_frames(self, tmp_path):
        frame = np.full((64, 64), 42, dtype=np.uint8)
        for i in range(120):
            write_pgm(tmp_path / f"{i:04d}.pgm", frame)
        seq = load_frame_sequence(tmp_path)
        assert len(seq) == 120
        assert (seq.frames == 42).all()

    def test_directory_is_lexicographic(self, tmp_path):
        write_pgm(tmp_path / "b.pgm", np.full((32, 32), 2, np.uint8))
        write_pgm(tmp_path / "a.pgm", np.full((32, 32), 1, np.uint8))
        seq = load_frame_sequence(tmp_path)
        assert seq.frames[0, 0, 0] == 1 and seq.frames[1, 0, 0] == 2

    def test_mismatched_dims_rejected(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.zeros((32, 32), np.uint8))
        write_pgm(tmp_path / "b.pgm", np.zeros((32, 48), np.uint8))
        with pytest.raises(InputError):
            load_frame_sequence(tmp_path)

    def test_pgm_maxval_rejected(self, tmp_path):
        with open(tmp_path / "a.pgm", "wb") as fh:
            fh.write(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(InputError):
            load_frame_sequence(tmp_path)

    def test_png_rgb_and_gray(self, tmp_path, rng):
        from PIL import Image

        gray = rng.integers(0, 256, size=(40, 40)).astype(np.uint8)
        rgb = rng.integers(0, 256, size=(40, 40, 3)).astype(np.uint8)
        Image.fromarray(gray, "L").save(tmp_path / "0.png")
        Image.fromarray(rgb, "RGB").save(tmp_path / "1.png")
        seq = load_frame_sequence(tmp_path)
        assert np.array_equal(seq.frames[0], gray)
        assert np.array_equal(seq.frames[1], rgb_to_gray(rgb))

    def test_unsupported_png_mode(self, tmp_path):
        from PIL import Image

        Image.new("RGBA", (32, 32)).save(tmp_path / "0.png")
        with pytest.raises(InputError):
            load_frame_sequence(tmp_path)

    def test_y4m_round_trip(self, tmp_path, rng):
        frames = rng.integers(0, 256, size=(7, 48, 64)).astype(np.uint8)
        seq = FrameSequence(frames=frames, fps=30.0)
        path = tmp_path / "clip.y4m"
        save_y4m(path, seq)
        loaded = load_frame_sequence(path)
        assert np.array_equal(loaded.frames, frames)
        assert loaded.fps == 30.0

    def test_y4m_c420(self, tmp_path):
        w, h = 64, 48
        y = np.arange(w * h, dtype=np.uint64) % 256
        y = y.astype(np.uint8)
        chroma = bytes((w // 2) * (h // 2) * 2)
        with open(tmp_path / "c.y4m", "wb") as fh:
            fh.write(f"YUV4MPEG2 W{w} H{h} F25:1 C420\n".encode())
            for _ in range(3):
                fh.write(b"FRAME\n" + y.tobytes() + chroma)
        seq = load_frame_sequence(tmp_path / "c.y4m")
        assert len(seq) == 3
        assert np.array_equal(seq.frames[0], y.reshape(h, w))

    def test_y4m_bad_colorspace(self, tmp_path):
        with open(tmp_path / "c.y4m", "wb") as fh:
            fh.write(b"YUV4MPEG2 W4 H4 F25:1 C444\nFRAME\n" + bytes(48))
        with pytest.raises(InputError):
            load_frame_sequence(tmp_path / "c.y4m")

    def test_unsupported_extension(self, tmp_path):
        path = tmp_path / "clip.mp4"
        path.write_bytes(b"not a video")
        with pytest.raises(InputError):
            load_frame_sequence(path)
