"""Long-short term motion features: dense trajectories tracked at multiple
temporal lengths, described by trajectory/HOG/HOF/MBH histograms, encoded
with PCA + GMM Fisher vectors, and classified with one-vs-all linear SVMs.
"""

from .config import (DESCRIPTOR_TYPES, DescriptorConfig, EncoderConfig, FlowConfig,
                     PipelineConfig, PyramidConfig, StabilizerConfig, TrackerConfig,
                     derive_seed)
from .descriptors import (CellHistogramCache, DescriptorSet, aggregate_descriptor,
                          compute_cell_histograms, root_normalize, trajectory_shape)
from .encode import (DiagonalGmm, FisherVectorEncoder, LstmfEncoder, PcaReducer,
                     VideoRepresentation, fisher_vector, l2_normalize, power_normalize)
from .errors import (ConfigError, InputError, InsufficientDataError, LengthMismatchError,
                     ManifestError, PipelineError)
from .extract import extract_features
from .flow import (FlowField, Homography, estimate_flow, estimate_homography,
                   median_flow_at, rescale_homography, stabilize_flow)
from .media import (FrameSequence, Pyramid, build_pyramid, load_frame_sequence,
                    pyramid_level_sizes, rgb_to_gray, save_y4m)
from .metrics import (average_precision, leave_one_group_out, mean_accuracy,
                      mean_average_precision)
from .svm import OneVsRestLinearSVM, train_binary
from .track import (ACCEPT, REJECT_DRIFT, REJECT_STATIC, PointTracker, TrajectoryBlock,
                    dense_sample, emit_blocks, extend_point, validate_block)

__version__ = "0.1.0"
