"""Frame-sequence ingestion and spatial pyramids.

Inputs are raw frame sequences only: a Y4M file or a directory of PGM/PNG
images in lexicographic order. Codec decoding is left to external tools so
that ingestion stays bit-reproducible.
"""

import os
import re
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InputError
from .validation import check_gray_frame

# BT.601 luma weights, applied with round-to-nearest.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class FrameSequence:
    """Ordered grayscale frames of a single video plus basic metadata."""

    frames: np.ndarray  # (T, H, W) uint8
    fps: float = 0.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.dtype != np.uint8:
            raise InputError(f"frames must be (T, H, W) uint8, got {self.frames.shape} {self.frames.dtype}")
        if len(self.frames) < 1:
            raise InputError("frame sequence is empty")

    def __len__(self):
        return len(self.frames)

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]


@dataclass
class Pyramid:
    """Spatial pyramid of one frame; level 0 is the input resolution."""

    levels: list
    scale_factor: float

    def __len__(self):
        return len(self.levels)


def rgb_to_gray(rgb):
    """BT.601 luma with integer rounding: Y = round(.299 R + .587 G + .114 B)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InputError(f"expected (H, W, 3) RGB array, got shape {rgb.shape}")
    y = rgb.astype(np.float64) @ _LUMA
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def pyramid_level_sizes(width, height, scale_factor, max_levels, min_size=32):
    """Level dimensions: floor(base / scale_factor**k), stopping below min_size.

    The epsilon absorbs float error in scale_factor**k (e.g. sqrt(2)**2 is a
    hair above 2, which would otherwise turn 64/2 into 31).
    """
    sizes = []
    for k in range(max_levels):
        w = int(width / scale_factor ** k + 1e-6)
        h = int(height / scale_factor ** k + 1e-6)
        if w < min_size or h < min_size:
            break
        sizes.append((w, h))
    return sizes


def build_pyramid(frame, scale_factor=np.sqrt(2.0), max_levels=8, min_size=32):
    """Downsample a frame with bilinear interpolation until min_size is hit."""
    frame = check_gray_frame(frame)
    h, w = frame.shape
    if w < min_size or h < min_size:
        raise InputError(f"frame {w}x{h} smaller than the {min_size}x{min_size} floor")
    if scale_factor <= 1.0:
        raise InputError("scale_factor must be > 1")
    levels = [frame]
    for wk, hk in pyramid_level_sizes(w, h, scale_factor, max_levels, min_size)[1:]:
        levels.append(cv2.resize(frame, (wk, hk), interpolation=cv2.INTER_LINEAR))
    return Pyramid(levels=levels, scale_factor=scale_factor)


def _load_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise InputError(f"{path}: only binary (P5) PGM is supported")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    pos, fields = 2, []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise InputError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise InputError(f"{path}: PGM maxval must be 255, got {maxval}")
    raw = data[pos:pos + width * height]
    if len(raw) != width * height:
        raise InputError(f"{path}: truncated PGM payload")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width)


def _load_png(path):
    from PIL import Image

    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        if img.mode == "RGB":
            return rgb_to_gray(np.asarray(img, dtype=np.uint8))
        raise InputError(f"{path}: unsupported PNG mode {img.mode} (need 8-bit gray or RGB)")


def _load_image_dir(path):
    names = sorted(n for n in os.listdir(path) if n.lower().endswith((".pgm", ".png")))
    if not names:
        raise InputError(f"{path}: no PGM/PNG frames found")
    frames = []
    for name in names:
        full = os.path.join(path, name)
        frame = _load_pgm(full) if name.lower().endswith(".pgm") else _load_png(full)
        if frames and frame.shape != frames[0].shape:
            raise InputError(f"{full}: frame dimensions {frame.shape} differ from {frames[0].shape}")
        frames.append(frame)
    return FrameSequence(frames=np.stack(frames), fps=0.0)


def _parse_y4m_fps(token):
    m = re.fullmatch(r"(\d+):(\d+)", token)
    if not m or int(m.group(2)) == 0:
        raise InputError(f"bad Y4M frame rate token F{token}")
    return int(m.group(1)) / int(m.group(2))


def _load_y4m(path):
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"YUV4MPEG2"):
        raise InputError(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    fps = 0.0
    colorspace = "C420"
    for token in data[9:nl].split():
        tok = token.decode("ascii", "replace")
        if tok.startswith("W"):
            width = int(tok[1:])
        elif tok.startswith("H"):
            height = int(tok[1:])
        elif tok.startswith("F"):
            fps = _parse_y4m_fps(tok[1:])
        elif tok.startswith("C"):
            colorspace = tok
    if width is None or height is None:
        raise InputError(f"{path}: Y4M header missing W/H")
    if colorspace in ("C420", "C420jpeg"):
        chroma = 2 * ((width // 2) * (height // 2))
    elif colorspace == "Cmono" or colorspace == "mono":
        chroma = 0
    else:
        raise InputError(f"{path}: unsupported Y4M colorspace {colorspace}")
    ysize = width * height
    frames = []
    pos = nl + 1
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0 or not data[pos:nl].startswith(b"FRAME"):
            raise InputError(f"{path}: corrupt FRAME header at byte {pos}")
        pos = nl + 1
        plane = data[pos:pos + ysize]
        if len(plane) != ysize:
            raise InputError(f"{path}: truncated frame payload")
        frames.append(np.frombuffer(plane, dtype=np.uint8).reshape(height, width))
        pos += ysize + chroma
    if not frames:
        raise InputError(f"{path}: Y4M stream has no frames")
    return FrameSequence(frames=np.stack(frames), fps=fps)


def load_frame_sequence(path):
    """Load a Y4M file or a directory of lexicographically ordered PGM/PNG frames."""
    if not os.path.exists(path):
        raise InputError(f"input not found: {path}")
    if os.path.isdir(path):
        return _load_image_dir(path)
    if str(path).lower().endswith(".y4m"):
        return _load_y4m(path)
    raise InputError(f"{path}: unsupported input format (need .y4m or an image directory)")


def save_y4m(path, seq: FrameSequence, fps=None):
    """Write a grayscale sequence as a mono-colorspace Y4M file."""
    fps = fps if fps is not None else (seq.fps or 25.0)
    num = int(round(fps * 1000))
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{seq.width} H{seq.height} F{num}:1000 Ip A1:1 Cmono\n".encode("ascii"))
        for frame in seq.frames:
            fh.write(b"FRAME\n")
            fh.write(frame.tobytes())
