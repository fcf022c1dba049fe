"""Light-projection adversarial attack simulator and experiment harness."""

from .classifier import (
    DEFAULT_LABELS,
    CentroidModel,
    ClassScores,
    LabelSet,
    fit_centroids,
    predict_centroid,
    predict_external,
    true_class_probability,
)
from .imaging import Image, Image8, dequantize, downsample_box, quantize, read_ppm, write_ppm
from .optimizer import DEConfig, DEHistory, Genome, de_init, de_run, de_step, genome_to_pattern
from .scene import (
    CameraSpec,
    ProjectionPattern,
    ProjectorSpec,
    SceneSpec,
    apply_camera,
    capture,
    pattern_off,
    pattern_single_pixel,
    pattern_white,
    projected_light,
    radiance,
)

__version__ = "0.1.0"
