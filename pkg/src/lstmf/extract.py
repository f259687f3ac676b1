"""Per-video feature extraction: frames -> trajectory-block descriptor sets.

One tracking pass per pyramid level produces blocks at every configured
length; the per-frame histogram work is shared across lengths, so adding
lengths costs little beyond the single-length run.
"""

import cv2
import numpy as np

from . import track as tracking
from .config import PipelineConfig, derive_seed
from .descriptors import (CellHistogramCache, cell_rows, describe_block, kind_slices,
                          packed_frame_integral)
from .flow import Homography, estimate_flow, estimate_homography, rescale_homography, stabilize_flow
from .media import FrameSequence, pyramid_level_sizes


def _level_frames(seq: FrameSequence, sizes):
    """Per-level frame stacks; level 0 is the original resolution."""
    levels = [seq.frames]
    for w, h in sizes[1:]:
        levels.append(np.stack([cv2.resize(f, (w, h), interpolation=cv2.INTER_LINEAR)
                                for f in seq.frames]))
    return levels


def _unpack_cache(stacked, cfg):
    slices = kind_slices(cfg)
    return CellHistogramCache(**{kind: stacked[:, :, sl] for kind, sl in slices.items()})


def extract_features(seq: FrameSequence, cfg: PipelineConfig = None, stabilizer_seed=None):
    """Run the tracking/description pipeline over one frame sequence.

    Returns (descriptor_sets, stats) where stats counts accepted blocks per
    length and the rejection reasons.
    """
    cfg = (cfg or PipelineConfig()).validate()
    if stabilizer_seed is None:
        stabilizer_seed = derive_seed(cfg.seed, "ransac")
    rng = np.random.default_rng(stabilizer_seed)

    sizes = pyramid_level_sizes(seq.width, seq.height, cfg.pyramid.scale_factor,
                                cfg.pyramid.max_levels, cfg.pyramid.min_size)
    if not sizes:
        raise ValueError(f"frames {seq.width}x{seq.height} below the "
                         f"{cfg.pyramid.min_size}px pyramid floor")
    levels = _level_frames(seq, sizes)
    trackers = [tracking.PointTracker(w, h, cfg.tracker, scale=k)
                for k, (w, h) in enumerate(sizes)]
    stats = {
        "blocks_per_length": {l: 0 for l in cfg.tracker.lengths},
        "emitted_per_length": {l: 0 for l in cfg.tracker.lengths},
        "rejected_static": 0,
        "rejected_drift": 0,
        "levels": len(sizes),
    }
    out = []
    n_frames = len(seq)
    integral_buffers = [None] * len(sizes)
    for k, tracker in enumerate(trackers):
        tracker.seed(levels[k][0], 0)

    for t in range(n_frames - 1):
        flow0 = estimate_flow(levels[0][t], levels[0][t + 1], cfg.flow)
        if cfg.stabilize:
            hom = estimate_homography(levels[0][t], levels[0][t + 1], flow0, rng, cfg.stabilizer)
        else:
            hom = Homography.identity()
        for k, tracker in enumerate(trackers):
            flow_k = flow0 if k == 0 else estimate_flow(levels[k][t], levels[k][t + 1], cfg.flow)
            if cfg.stabilize and not hom.is_identity():
                flow_k = stabilize_flow(flow_k, rescale_homography(hom, sizes[0], sizes[k]))
            integral = packed_frame_integral(levels[k][t], flow_k, cfg.descriptor,
                                             out=integral_buffers[k])
            integral_buffers[k] = integral
            packed = cell_rows(integral, tracker.heads(), sizes[k], cfg.descriptor)
            tracker.attach_payloads([row.copy() for row in packed])
            for block, payloads in tracker.advance(flow_k):
                stats["emitted_per_length"][block.length] += 1
                status = tracking.validate_block(block, cfg.tracker)
                if status == tracking.REJECT_STATIC:
                    stats["rejected_static"] += 1
                    continue
                if status == tracking.REJECT_DRIFT:
                    stats["rejected_drift"] += 1
                    continue
                cache = _unpack_cache(np.stack(payloads), cfg.descriptor)
                position_scale = (sizes[0][0] / sizes[k][0], sizes[0][1] / sizes[k][1])
                out.append(describe_block(block, cache, cfg.descriptor, position_scale))
                stats["blocks_per_length"][block.length] += 1
            tracker.seed(levels[k][t + 1], t + 1)
    return out, stats
