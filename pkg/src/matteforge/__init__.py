"""Deterministic toolkit for flexible-guidance image matting.

Trimap synthesis, progressive trimap deformation into scribble and
click guidance, the matting loss with analytic gradients, the four
standard matting metrics, a toy semantic-fusion forward pass, and a
seeded batch harness tying it together.
"""

from .errors import (
    ConfigError,
    ContractViolationError,
    EmptyRegionError,
    FormatError,
    MatteForgeError,
    PaletteError,
    ShapeMismatchError,
)
from .guidance import (
    PointSet,
    ThicknessSchedule,
    clip_scribble,
    compose_guidance,
    deform,
    fit_scribble,
    make_clickmap,
    no_guidance,
    sample_points,
    stamp_disks,
    thickness_at,
)
from .harness import (
    EvalReport,
    Scene,
    StabilityReport,
    TestSetManifest,
    TestsetParams,
    blur_oracle_predictor,
    build_testset,
    gt_predictor,
    load_scenes,
    run_eval,
    save_scenes,
    stability_report,
    synth_scenes,
)
from .losses import LossBreakdown, grad_loss, loss_gradient, matting_loss
from .metrics import (
    GaussianDerivativeKernel,
    MetricReport,
    conn_metric,
    evaluate,
    gaussian_derivative_kernel,
    grad_metric,
    mse,
    sad,
)
from .raster import (
    composite,
    decode_image,
    decode_map,
    encode_image,
    encode_map,
    read_image,
    read_map,
    write_image,
    write_map,
)
from .rng import Rng, derive_seed
from .sfm import (
    FeaturePyramid,
    FpemWeights,
    JpuWeights,
    SepConvWeights,
    SfmWeights,
    feature_checksum,
    fpem,
    jpu,
    load_weights,
    make_pyramid,
    make_sfm_weights,
    save_weights,
    sep_conv,
    sfm_forward,
    upsample2x,
)
from .trimap import RegionPartition, make_trimap, masks, partition

__version__ = "0.1.0"
