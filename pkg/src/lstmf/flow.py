"""Dense optical flow and camera-motion compensation.

Flow between consecutive frames comes from Farneback polynomial expansion.
Camera motion is modelled as a homography fit to flow correspondences with a
seeded RANSAC; subtracting the homography-induced displacement leaves the
residual (foreground) motion used by tracking, HOF and MBH.
"""

import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np

from .config import FlowConfig, StabilizerConfig
from .validation import check_gray_frame, check_same_shape, check_point_in_frame


@dataclass
class FlowField:
    """Per-pixel displacement from one frame to the next."""

    u: np.ndarray  # horizontal displacement, (H, W) float32
    v: np.ndarray  # vertical displacement, (H, W) float32

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError("u and v must be matching 2D grids")

    @property
    def height(self):
        return self.u.shape[0]

    @property
    def width(self):
        return self.u.shape[1]


@dataclass
class Homography:
    """3x3 projective map, normalized so h[2,2] == 1."""

    h: np.ndarray
    fallback: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        if self.h.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(np.linalg.det(self.h)) <= 1e-12:
            raise ValueError("homography is singular")
        self.h = self.h / self.h[2, 2]

    @classmethod
    def identity(cls, fallback=False):
        return cls(h=np.eye(3), fallback=fallback)

    def is_identity(self):
        return np.array_equal(self.h, np.eye(3))

    def apply(self, points):
        """Project (N, 2) points through the homography."""
        pts = np.asarray(points, dtype=np.float64)
        q = pts @ self.h[:2, :2].T + self.h[:2, 2]
        w = pts @ self.h[2, :2] + 1.0
        return q / w[:, None]


def estimate_flow(prev, next_frame, cfg: FlowConfig = None):
    """Farneback dense flow from prev to next_frame.

    Bit-identical frames short-circuit to an exactly zero field: no motion is
    observable, and duplicated frames are common in real footage.
    """
    cfg = cfg or FlowConfig()
    prev = check_gray_frame(prev, "prev")
    next_frame = check_gray_frame(next_frame, "next")
    check_same_shape(prev, next_frame)
    if np.array_equal(prev, next_frame):
        zero = np.zeros(prev.shape, dtype=np.float32)
        return FlowField(u=zero, v=zero.copy())
    raw = cv2.calcOpticalFlowFarneback(
        prev, next_frame, None,
        cfg.pyr_scale, cfg.levels, cfg.winsize,
        cfg.iterations, cfg.poly_n, cfg.poly_sigma, 0,
    )
    raw = np.nan_to_num(raw, nan=0.0, posinf=0.0, neginf=0.0)
    return FlowField(u=np.ascontiguousarray(raw[..., 0]), v=np.ascontiguousarray(raw[..., 1]))


def _median_flow_batch(flow, points):
    """Component-wise 3x3 neighborhood median for an (N, 2) point batch."""
    pts = np.asarray(points, dtype=np.float64)
    cx = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    cy = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    offs = np.array([-1, 0, 1])
    xs = np.clip(cx[:, None, None] + offs[None, None, :], 0, flow.width - 1)
    ys = np.clip(cy[:, None, None] + offs[None, :, None], 0, flow.height - 1)
    du = np.median(flow.u[ys, xs].reshape(len(pts), 9), axis=1)
    dv = np.median(flow.v[ys, xs].reshape(len(pts), 9), axis=1)
    return np.stack([du, dv], axis=1)


def median_flow_at(flow, point):
    """Median-filtered displacement at a subpixel point (3x3 neighborhood,
    indices clamped at the frame border)."""
    x, y = float(point[0]), float(point[1])
    check_point_in_frame(x, y, flow.width, flow.height)
    return tuple(_median_flow_batch(flow, np.array([[x, y]]))[0])


def _flow_correspondences(prev, flow, cfg: StabilizerConfig):
    """Stride-grid correspondences p -> p + flow(p), kept at strong-gradient pixels."""
    h, w = prev.shape
    xs = np.arange(0, w, cfg.grid_stride)
    ys = np.arange(0, h, cfg.grid_stride)
    gx, gy = np.meshgrid(xs, ys)
    gx = gx.ravel()
    gy = gy.ravel()
    img = prev.astype(np.float64)
    dy, dx = np.gradient(img)
    gmag = np.hypot(dx, dy)
    strong = gmag[gy, gx] > cfg.gradient_fraction * gmag.max()
    gx, gy = gx[strong], gy[strong]
    src = np.stack([gx, gy], axis=1).astype(np.float64)
    dst = src + np.stack([flow.u[gy, gx], flow.v[gy, gx]], axis=1)
    return src, dst


def _dlt(src, dst):
    """Direct linear transform with Hartley normalization; None if degenerate."""
    def normalize(pts):
        c = pts.mean(axis=0)
        scale = np.sqrt(2.0) / (np.sqrt(((pts - c) ** 2).sum(axis=1)).mean() + 1e-12)
        T = np.array([[scale, 0, -scale * c[0]], [0, scale, -scale * c[1]], [0, 0, 1.0]])
        return (pts - c) * scale, T

    sn, Ts = normalize(src)
    dn, Td = normalize(dst)
    n = len(sn)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = sn
    A[0::2, 2] = 1.0
    A[0::2, 6:8] = -dn[:, :1] * sn
    A[0::2, 8] = -dn[:, 0]
    A[1::2, 3:5] = sn
    A[1::2, 5] = 1.0
    A[1::2, 6:8] = -dn[:, 1:2] * sn
    A[1::2, 8] = -dn[:, 1]
    try:
        _, s, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    if n > 4 and s[7] < 1e-12 * s[0]:
        return None
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(H[2, 2]) < 1e-12 or abs(np.linalg.det(H)) < 1e-12:
        return None
    return H / H[2, 2]


def _batched_minimal_fits(src, dst, samples):
    """Exact 4-point homographies for many samples at once.

    Solves the 8x8 linear system with h[2,2] pinned to 1; callers pass
    similarity-normalized coordinates so the determinant guard is scale-free.
    Degenerate samples are flagged, not fatal.
    """
    m = len(samples)
    s4 = src[samples]  # (m, 4, 2)
    d4 = dst[samples]
    A = np.zeros((m, 8, 9))
    A[:, 0::2, 0:2] = s4
    A[:, 0::2, 2] = 1.0
    A[:, 0::2, 6:8] = -d4[:, :, :1] * s4
    A[:, 0::2, 8] = -d4[:, :, 0]
    A[:, 1::2, 3:5] = s4
    A[:, 1::2, 5] = 1.0
    A[:, 1::2, 6:8] = -d4[:, :, 1:2] * s4
    A[:, 1::2, 8] = -d4[:, :, 1]
    lhs = A[:, :, :8]
    rhs = -A[:, :, 8:]
    ok = np.abs(np.linalg.det(lhs)) > 1e-12
    H = np.tile(np.eye(3), (m, 1, 1))
    if ok.any():
        h8 = np.linalg.solve(lhs[ok], rhs[ok])[..., 0]
        H[ok] = np.concatenate([h8, np.ones((len(h8), 1))], axis=1).reshape(-1, 3, 3)
    return H, ok


def _projection_errors(H, src, dst):
    """Reprojection distance per correspondence for a stack of homographies."""
    q = np.einsum("mij,nj->mni", H[:, :2, :2], src) + H[:, None, :2, 2]
    w = np.einsum("mj,nj->mn", H[:, 2, :2], src) + H[:, None, 2, 2]
    w = np.where(np.abs(w) < 1e-12, np.nan, w)
    proj = q / w[..., None]
    return np.sqrt(((proj - dst[None]) ** 2).sum(axis=2))


def estimate_homography(prev, next_frame, flow, rng=None, cfg: StabilizerConfig = None):
    """Seeded RANSAC homography from dense-flow correspondences.

    Falls back to the identity (with `fallback=True`) when correspondences are
    degenerate or the best model explains less than `min_inlier_ratio` of them.
    """
    cfg = cfg or StabilizerConfig()
    rng = rng or np.random.default_rng(0)
    prev = check_gray_frame(prev, "prev")
    check_same_shape(prev, next_frame)
    src, dst = _flow_correspondences(prev, flow, cfg)
    n = len(src)
    if n < 4:
        warnings.warn("homography: fewer than 4 usable correspondences, using identity")
        return Homography.identity(fallback=True)

    # one shared similarity normalization; errors scale uniformly by `spread`
    center = src.mean(axis=0)
    spread = np.sqrt(((src - center) ** 2).sum(axis=1)).mean()
    if spread < 1e-9:
        warnings.warn("homography: degenerate correspondence layout, using identity")
        return Homography.identity(fallback=True)
    src_n = (src - center) / spread
    dst_n = (dst - center) / spread

    samples = np.argpartition(rng.random((cfg.ransac_iterations, n)), 3, axis=1)[:, :4]
    H, ok = _batched_minimal_fits(src_n, dst_n, samples)
    errors = _projection_errors(H, src_n, dst_n) * spread
    inliers = (errors < cfg.ransac_threshold) & ok[:, None]
    counts = inliers.sum(axis=1)
    best = int(np.argmax(counts))
    if counts[best] < max(4, cfg.min_inlier_ratio * n):
        warnings.warn("homography: inlier ratio below threshold, using identity")
        return Homography.identity(fallback=True)
    refined = _dlt(src[inliers[best]], dst[inliers[best]])
    if refined is None:
        warnings.warn("homography: degenerate refit, using identity")
        return Homography.identity(fallback=True)
    return Homography(h=refined)


def rescale_homography(h: Homography, from_size, to_size):
    """Re-express a homography for a resized frame.

    from_size/to_size are (width, height); points scale per axis by the
    resolution ratio.
    """
    sx = to_size[0] / from_size[0]
    sy = to_size[1] / from_size[1]
    S = np.diag([sx, sy, 1.0])
    Sinv = np.diag([1.0 / sx, 1.0 / sy, 1.0])
    return Homography(h=S @ h.h @ Sinv, fallback=h.fallback)


def stabilize_flow(flow, h: Homography):
    """Subtract the camera displacement induced by h at every pixel."""
    if h.is_identity():
        return FlowField(u=flow.u.copy(), v=flow.v.copy())
    ys, xs = np.mgrid[0:flow.height, 0:flow.width].astype(np.float64)
    q = np.empty((flow.height, flow.width, 2))
    denom = h.h[2, 0] * xs + h.h[2, 1] * ys + h.h[2, 2]
    q[..., 0] = (h.h[0, 0] * xs + h.h[0, 1] * ys + h.h[0, 2]) / denom
    q[..., 1] = (h.h[1, 0] * xs + h.h[1, 1] * ys + h.h[1, 2]) / denom
    u = (flow.u.astype(np.float64) - (q[..., 0] - xs)).astype(np.float32)
    v = (flow.v.astype(np.float64) - (q[..., 1] - ys)).astype(np.float32)
    return FlowField(u=u, v=v)
