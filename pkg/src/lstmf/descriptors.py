"""Per-block local descriptors: trajectory shape, HOG, HOF and MBH.

Around each tracked point a patch of `patch_size` pixels is split into a
2x2 cell grid; per frame and cell we keep orientation histograms (image
gradients for HOG, flow vectors for HOF, flow-component gradients for MBH).
Those per-frame cell histograms are cached along the track, so a long
block's descriptor is just a re-aggregation of rows already computed for
its shorter prefixes.
"""

from dataclasses import dataclass

import numpy as np

from .config import DescriptorConfig

_TWO_PI = 2.0 * np.pi


def root_normalize(v):
    """L1-normalize then take the element-wise square root.

    The output has unit L2 norm; an all-zero input stays zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if (v < 0).any():
        raise ValueError("root_normalize expects non-negative input")
    total = v.sum()
    if total <= 0.0:
        return np.zeros_like(v)
    return np.sqrt(v / total)


def trajectory_shape(block, target_steps=15):
    """Normalized displacement sequence, subsampled to a fixed step count.

    Displacements are summed over consecutive groups of l / target_steps
    frames and the concatenation is divided by the total group magnitude, so
    a constant-velocity path yields the same vector at every length.
    """
    diffs = block.displacements()
    l = len(diffs)
    if l % target_steps != 0:
        raise ValueError(f"block length {l} not divisible by {target_steps}")
    groups = diffs.reshape(target_steps, l // target_steps, 2).sum(axis=1)
    total = np.hypot(groups[:, 0], groups[:, 1]).sum()
    if total <= 1e-6:
        raise ValueError("zero total displacement (block should have been rejected as static)")
    return (groups / total).ravel()


def _orientation_planes(gx, gy, n_bins, weight=None):
    """Split per-pixel vectors into n_bins orientation planes.

    Full 360 degree range; weight (default: magnitude) is shared between the
    two nearest bin centers by linear interpolation.
    """
    mag = np.hypot(gx, gy)
    if weight is None:
        weight = mag
    ang = np.arctan2(gy, gx) % _TWO_PI
    pos = ang * (n_bins / _TWO_PI)
    low = np.floor(pos)
    i0 = low.astype(np.int64) % n_bins
    frac = pos - low
    i1 = (i0 + 1) % n_bins
    n_px = gx.size
    pix = np.arange(n_px)
    flat = np.bincount(i0.ravel() * n_px + pix, weights=(weight * (1.0 - frac)).ravel(),
                       minlength=n_bins * n_px)
    flat += np.bincount(i1.ravel() * n_px + pix, weights=(weight * frac).ravel(),
                        minlength=n_bins * n_px)
    return flat.reshape((n_bins,) + gx.shape)


def hog_planes(image, cfg: DescriptorConfig):
    gy, gx = np.gradient(image.astype(np.float64))
    return _orientation_planes(gx, gy, cfg.orientation_bins)


def hof_planes(flow, cfg: DescriptorConfig):
    """Orientation planes of the flow itself plus a trailing zero-motion bin.

    Pixels with flow magnitude below the threshold count 1 into the zero bin
    instead of contributing (near-nothing) to the orientation bins.
    """
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    mag = np.hypot(u, v)
    still = mag < cfg.hof_zero_threshold
    planes = _orientation_planes(u, v, cfg.orientation_bins)
    planes[:, still] = 0.0
    zero_plane = still.astype(np.float64)[None]
    return np.concatenate([planes, zero_plane], axis=0)


def mbh_planes(component, cfg: DescriptorConfig):
    gy, gx = np.gradient(component.astype(np.float64))
    return _orientation_planes(gx, gy, cfg.orientation_bins)


def _integral(planes, out=None):
    shape = (planes.shape[0], planes.shape[1] + 1, planes.shape[2] + 1)
    if out is None or out.shape != shape:
        out = np.zeros(shape)
    np.cumsum(planes, axis=1, out=planes)
    np.cumsum(planes, axis=2, out=out[:, 1:, 1:])
    return out


def kind_slices(cfg: DescriptorConfig):
    """Channel ranges of the four histogram kinds in the packed layout."""
    b = cfg.orientation_bins
    return {
        "hog": slice(0, b),
        "hof": slice(b, 2 * b + 1),
        "mbhx": slice(2 * b + 1, 3 * b + 1),
        "mbhy": slice(3 * b + 1, 4 * b + 1),
    }


def packed_frame_integral(image, flow, cfg: DescriptorConfig, out=None):
    """Integral histograms of all four kinds stacked along the channel axis."""
    planes = np.concatenate([
        hog_planes(image, cfg),
        hof_planes(flow, cfg),
        mbh_planes(flow.u, cfg),
        mbh_planes(flow.v, cfg),
    ], axis=0)
    return _integral(planes, out=out)


def frame_integrals(image, flow, cfg: DescriptorConfig):
    """Integral orientation histograms for one frame and its forward flow."""
    packed = packed_frame_integral(image, flow, cfg)
    return {kind: packed[sl] for kind, sl in kind_slices(cfg).items()}


def patch_origin(points, frame_size, patch_size):
    """Top-left corners of patches centered on the points, shifted fully inside."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    half = patch_size // 2
    x0 = np.clip(np.floor(pts[:, 0] + 0.5).astype(np.int64) - half, 0, frame_size[0] - patch_size)
    y0 = np.clip(np.floor(pts[:, 1] + 0.5).astype(np.int64) - half, 0, frame_size[1] - patch_size)
    return x0, y0


def cell_rows(integral, points, frame_size, cfg: DescriptorConfig):
    """Per-point cell histograms, (n, cells, bins), cells in row-major order."""
    n_cells = cfg.spatial_cells
    cell = cfg.patch_size // n_cells
    x0, y0 = patch_origin(points, frame_size, cfg.patch_size)
    n = len(x0)
    rows = np.empty((n, n_cells * n_cells, integral.shape[0]))
    idx = 0
    for cy in range(n_cells):
        for cx in range(n_cells):
            ya = y0 + cy * cell
            xa = x0 + cx * cell
            yb = ya + cell
            xb = xa + cell
            rows[:, idx, :] = (integral[:, yb, xb] - integral[:, ya, xb]
                               - integral[:, yb, xa] + integral[:, ya, xa]).T
            idx += 1
    # integral subtraction can leave -1e-13 where the true sum is zero
    np.maximum(rows, 0.0, out=rows)
    return rows


@dataclass
class CellHistogramCache:
    """Per-frame, per-cell histograms accumulated along one tracked path."""

    hog: np.ndarray   # (frames, cells, bins)
    hof: np.ndarray
    mbhx: np.ndarray
    mbhy: np.ndarray

    def __len__(self):
        return len(self.hog)

    def rows(self, kind):
        return getattr(self, kind)


def compute_cell_histograms(block, frames, flows, cfg: DescriptorConfig = None):
    """Build the histogram cache for a block from raw frames and flows.

    frames/flows are indexed by absolute frame number at the block's scale;
    row t uses the image at start_frame + t and the flow leaving that frame,
    both sampled around the tracked point of that frame.
    """
    cfg = cfg or DescriptorConfig()
    l = block.length
    per_kind = {"hog": [], "hof": [], "mbhx": [], "mbhy": []}
    for t in range(l):
        fi = block.start_frame + t
        ints = frame_integrals(frames[fi], flows[fi], cfg)
        point = block.points[t:t + 1]
        for kind in per_kind:
            per_kind[kind].append(cell_rows(ints[kind], point, block.frame_size, cfg)[0])
    return CellHistogramCache(**{k: np.array(v) for k, v in per_kind.items()})


def aggregate_descriptor(cache, length, kind, cfg: DescriptorConfig = None):
    """Sum cached rows into temporal cells and root-normalize.

    Uses the first `length` rows regardless of how much longer the cache is,
    which is what makes one cache serve every block length.
    """
    cfg = cfg or DescriptorConfig()
    n_t = cfg.temporal_cells
    if length % n_t != 0:
        raise ValueError(f"length {length} not divisible by {n_t} temporal cells")
    rows = cache.rows(kind)
    if len(rows) < length:
        raise ValueError(f"cache covers {len(rows)} frames, need {length}")
    cells = rows[:length].reshape(n_t, length // n_t, rows.shape[1], rows.shape[2]).sum(axis=1)
    return root_normalize(cells.ravel())


@dataclass
class DescriptorSet:
    """The five per-block descriptors plus placement metadata."""

    traj: np.ndarray
    hog: np.ndarray
    hof: np.ndarray
    mbhx: np.ndarray
    mbhy: np.ndarray
    length: int
    scale: int
    start_frame: int
    mean_x: float
    mean_y: float

    def vector(self, kind):
        return getattr(self, kind)


def describe_block(block, cache, cfg: DescriptorConfig = None, position_scale=(1.0, 1.0)):
    """Assemble the DescriptorSet for a validated block from its cache."""
    cfg = cfg or DescriptorConfig()
    l = block.length
    mean = block.points.mean(axis=0)
    return DescriptorSet(
        traj=trajectory_shape(block, cfg.trajectory_steps),
        hog=aggregate_descriptor(cache, l, "hog", cfg),
        hof=aggregate_descriptor(cache, l, "hof", cfg),
        mbhx=aggregate_descriptor(cache, l, "mbhx", cfg),
        mbhy=aggregate_descriptor(cache, l, "mbhy", cfg),
        length=l,
        scale=block.scale,
        start_frame=block.start_frame,
        mean_x=float(mean[0] * position_scale[0]),
        mean_y=float(mean[1] * position_scale[1]),
    )
