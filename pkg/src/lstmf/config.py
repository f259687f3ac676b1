"""Pipeline configuration: one master seed and a JSON-round-trippable parameter tree.

The extraction-relevant subtree is hashed into every feature file header so
that downstream stages can refuse inputs produced under different settings.
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

DESCRIPTOR_TYPES = ("traj", "hog", "hof", "mbhx", "mbhy")


@dataclass
class PyramidConfig:
    scale_factor: float = math.sqrt(2.0)
    max_levels: int = 8
    min_size: int = 32


@dataclass
class FlowConfig:
    pyr_scale: float = 0.5
    levels: int = 3
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1


@dataclass
class StabilizerConfig:
    grid_stride: int = 16
    gradient_fraction: float = 0.05
    ransac_threshold: float = 1.5
    ransac_iterations: int = 500
    min_inlier_ratio: float = 0.25


@dataclass
class TrackerConfig:
    lengths: tuple = (15, 30, 45, 60, 75, 90)
    sample_stride: int = 5
    quality: float = 0.001
    static_threshold: float = math.sqrt(3.0)
    drift_fraction: float = 0.7
    margin: float = 1.0

    def __post_init__(self):
        self.lengths = tuple(int(l) for l in self.lengths)


@dataclass
class DescriptorConfig:
    patch_size: int = 32
    spatial_cells: int = 2
    temporal_cells: int = 3
    orientation_bins: int = 8
    hof_zero_threshold: float = 0.4
    trajectory_steps: int = 15

    @property
    def traj_dim(self):
        return 2 * self.trajectory_steps

    @property
    def hog_dim(self):
        return self.spatial_cells ** 2 * self.temporal_cells * self.orientation_bins

    @property
    def hof_dim(self):
        return self.spatial_cells ** 2 * self.temporal_cells * (self.orientation_bins + 1)

    @property
    def mbh_dim(self):
        return self.hog_dim

    def dims(self):
        return {
            "traj": self.traj_dim,
            "hog": self.hog_dim,
            "hof": self.hof_dim,
            "mbhx": self.mbh_dim,
            "mbhy": self.mbh_dim,
        }


@dataclass
class EncoderConfig:
    n_gaussians: int = 256
    sample_budget: int = 256000
    mode: str = "joint"


@dataclass
class PipelineConfig:
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    svm_c: float = 100.0
    stabilize: bool = True
    seed: int = 0

    def validate(self):
        p, t, d, e = self.pyramid, self.tracker, self.descriptor, self.encoder
        if p.scale_factor <= 1.0:
            raise ConfigError("pyramid.scale_factor must be > 1")
        if p.max_levels < 1 or p.min_size < 1:
            raise ConfigError("pyramid.max_levels and min_size must be >= 1")
        if not t.lengths:
            raise ConfigError("tracker.lengths must be non-empty")
        if list(t.lengths) != sorted(set(t.lengths)):
            raise ConfigError("tracker.lengths must be strictly ascending")
        lmin = t.lengths[0]
        if lmin <= 0:
            raise ConfigError("tracker.lengths must be positive")
        for l in t.lengths:
            if l % lmin != 0:
                raise ConfigError(f"length {l} is not a multiple of min length {lmin}")
            if l % d.temporal_cells != 0:
                raise ConfigError(f"length {l} not divisible by {d.temporal_cells} temporal cells")
            if l % d.trajectory_steps != 0:
                raise ConfigError(f"length {l} not divisible by {d.trajectory_steps} trajectory steps")
        if t.sample_stride < 1:
            raise ConfigError("tracker.sample_stride must be >= 1")
        if not 0.0 < t.drift_fraction:
            raise ConfigError("tracker.drift_fraction must be positive")
        if d.patch_size % (2 * d.spatial_cells) != 0:
            raise ConfigError("descriptor.patch_size must split evenly into spatial cells")
        if self.flow.winsize < 3 or self.flow.poly_n < 3:
            raise ConfigError("flow.winsize and poly_n must be >= 3")
        if e.mode not in ("joint", "concat"):
            raise ConfigError(f"encoder.mode must be 'joint' or 'concat', got {e.mode!r}")
        if e.n_gaussians < 1 or e.sample_budget < 1:
            raise ConfigError("encoder.n_gaussians and sample_budget must be >= 1")
        if self.svm_c <= 0:
            raise ConfigError("svm_c must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in u64")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        try:
            sections = dict(data)
            kwargs = {}
            for name, sub in (
                ("pyramid", PyramidConfig),
                ("flow", FlowConfig),
                ("stabilizer", StabilizerConfig),
                ("tracker", TrackerConfig),
                ("descriptor", DescriptorConfig),
                ("encoder", EncoderConfig),
            ):
                if name in sections:
                    kwargs[name] = sub(**sections.pop(name))
            for name in ("svm_c", "stabilize", "seed"):
                if name in sections:
                    kwargs[name] = sections.pop(name)
            if sections:
                raise ConfigError(f"unknown config keys: {sorted(sections)}")
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data).validate()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def extraction_hash(self):
        """Hash of every setting that influences feature-file contents."""
        relevant = {
            "pyramid": dataclasses.asdict(self.pyramid),
            "flow": dataclasses.asdict(self.flow),
            "stabilizer": dataclasses.asdict(self.stabilizer),
            "tracker": dataclasses.asdict(self.tracker),
            "descriptor": dataclasses.asdict(self.descriptor),
            "stabilize": self.stabilize,
            "seed": int(self.seed),
        }
        blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def derive_seed(master_seed, label):
    """Stable per-stage seed derived from the master seed and a stage label."""
    digest = hashlib.sha256(f"{int(master_seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
