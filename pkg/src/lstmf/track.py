"""Dense point tracking with multi-length block emission.

Points are sampled on a stride grid, advanced by the median-filtered flow,
and snapshotted into trajectory blocks at every configured length from one
tracking pass: a point tracked to length 90 emits the blocks for 15, 30, ...
along the way, so longer blocks cost no extra tracking work.
"""

from dataclasses import dataclass, field

import cv2
import numpy as np

from .config import TrackerConfig
from .flow import _median_flow_batch
from .validation import check_gray_frame

ACCEPT = "accept"
REJECT_STATIC = "reject_static"
REJECT_DRIFT = "reject_drift"

# Hard cap on a single-frame jump relative to the frame's short side.
_JUMP_FRAME_FRACTION = 0.7


@dataclass
class TrajectoryBlock:
    """A tracked path snapshot: l+1 points starting at start_frame."""

    points: np.ndarray  # (l+1, 2) float64, positions at the block's scale
    start_frame: int
    scale: int
    frame_size: tuple  # (width, height) at this scale

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise ValueError("block needs an (l+1, 2) point array with l >= 1")

    @property
    def length(self):
        return len(self.points) - 1

    def displacements(self):
        return np.diff(self.points, axis=0)


def dense_sample(frame, active_points, cfg: TrackerConfig):
    """Grid candidates not covered by an active point and textured enough.

    A candidate at (i*stride, j*stride) is kept when no active point lies
    within the stride radius and its smaller structure-tensor eigenvalue
    exceeds quality * (frame-wide maximum of that eigenvalue).
    """
    frame = check_gray_frame(frame)
    h, w = frame.shape
    stride = cfg.sample_stride
    eig = cv2.cornerMinEigenVal(frame, 3, 3)
    threshold = cfg.quality * float(eig.max())
    xs, ys = np.meshgrid(np.arange(0, w, stride), np.arange(0, h, stride))
    xs = xs.ravel()
    ys = ys.ravel()
    keep = eig[ys, xs] > threshold
    xs, ys = xs[keep], ys[keep]
    if len(xs) == 0:
        return np.empty((0, 2), dtype=np.float64)
    cand = np.stack([xs, ys], axis=1).astype(np.float64)
    active_points = np.asarray(active_points, dtype=np.float64).reshape(-1, 2)
    if len(active_points):
        d2 = ((cand[:, None, :] - active_points[None]) ** 2).sum(axis=2)
        cand = cand[d2.min(axis=1) >= stride ** 2]
    return cand


def extend_point(point, flow, margin=1.0):
    """Advance one point by the median flow; None when it leaves the frame."""
    from .flow import median_flow_at

    dx, dy = median_flow_at(flow, point)
    x, y = point[0] + dx, point[1] + dy
    if not (margin <= x <= flow.width - 1 - margin and margin <= y <= flow.height - 1 - margin):
        return None
    return (x, y)


def emit_blocks(points, start_frame, scale, frame_size, cfg: TrackerConfig):
    """All prefix blocks a finished path supports: one per length it reached."""
    points = np.asarray(points, dtype=np.float64)
    blocks = []
    for l in cfg.lengths:
        if len(points) >= l + 1:
            blocks.append(TrajectoryBlock(points=points[: l + 1].copy(),
                                          start_frame=start_frame, scale=scale,
                                          frame_size=frame_size))
    return blocks


def validate_block(block: TrajectoryBlock, cfg: TrackerConfig):
    """Gate a block on motion content: static paths and drifting jumps are out."""
    pts = block.points
    spread = np.sqrt(pts[:, 0].var() + pts[:, 1].var())
    if spread < cfg.static_threshold:
        return REJECT_STATIC
    steps = np.hypot(*np.diff(pts, axis=0).T)
    path_length = steps.sum()
    max_step = steps.max()
    if max_step > cfg.drift_fraction * path_length:
        return REJECT_DRIFT
    if max_step > _JUMP_FRAME_FRACTION * min(block.frame_size):
        return REJECT_DRIFT
    return ACCEPT


class _Track:
    __slots__ = ("points", "start_frame", "payloads")

    def __init__(self, x, y, start_frame):
        self.points = [(x, y)]
        self.start_frame = start_frame
        self.payloads = []


@dataclass
class PointTracker:
    """Tracking state for one pyramid level of one video."""

    width: int
    height: int
    cfg: TrackerConfig
    scale: int = 0
    tracks: list = field(default_factory=list)

    def heads(self):
        return np.array([t.points[-1] for t in self.tracks], dtype=np.float64).reshape(-1, 2)

    def seed(self, frame, frame_index):
        new_points = dense_sample(frame, self.heads(), self.cfg)
        for x, y in new_points:
            self.tracks.append(_Track(x, y, frame_index))
        return len(new_points)

    def attach_payloads(self, payloads):
        """Record one per-frame payload (descriptor rows) per active track."""
        if len(payloads) != len(self.tracks):
            raise ValueError("payload count does not match active tracks")
        for track, payload in zip(self.tracks, payloads):
            track.payloads.append(payload)

    def advance(self, flow):
        """Extend every track one frame; return (block, payloads) per length hit.

        Tracks that exit the frame are dropped; tracks reaching the maximum
        configured length are retired after their final emission. Blocks stay
        emitted even when the track is lost later.
        """
        emitted = []
        if not self.tracks:
            return emitted
        cfg = self.cfg
        lengths = set(cfg.lengths)
        max_len = cfg.lengths[-1]
        deltas = _median_flow_batch(flow, self.heads())
        survivors = []
        lo = cfg.margin
        hi_x = self.width - 1 - cfg.margin
        hi_y = self.height - 1 - cfg.margin
        for track, (dx, dy) in zip(self.tracks, deltas):
            x = track.points[-1][0] + dx
            y = track.points[-1][1] + dy
            if not (lo <= x <= hi_x and lo <= y <= hi_y):
                continue
            track.points.append((x, y))
            age = len(track.points) - 1
            if age in lengths:
                block = TrajectoryBlock(points=np.array(track.points, dtype=np.float64),
                                        start_frame=track.start_frame, scale=self.scale,
                                        frame_size=(self.width, self.height))
                emitted.append((block, list(track.payloads)))
            if age < max_len:
                survivors.append(track)
        self.tracks = survivors
        return emitted
