"""fpp-forge: a virtual fringe-projection profilometry system.

Renders physically plausible fringe/depth image pairs from triangle
meshes with a deterministic ray caster, verifies them with a classical
demodulation pipeline (phase shifting, Fourier demodulation, temporal
unwrapping, triangulation), and ships the loss/metric suite and dataset
tooling for fringe-to-depth learning.
"""

from .datasetgen import (
    DatasetManifest,
    ParamRanges,
    Recipe,
    RECIPES,
    assign_groups,
    build_dataset,
    sample_group_params,
    split_train_test,
)
from .demod import (
    PhaseMap,
    ftp_wrapped_phase,
    geometric_phase,
    phase_to_depth,
    ps_wrapped_phase,
    temporal_unwrap,
    wrap_phase,
)
from .fringe import (
    FringeSpec,
    carrier_scale_to_period,
    centered_phase_shift,
    phase_coeffs,
    projector_uv,
    sample_pattern,
    synth_pattern,
)
from .metrics import (
    MetricConfig,
    laplacian,
    loss_t1,
    loss_t2,
    lsgan_d_loss,
    mae,
    minmax_normalize,
    msde,
    pix2pix_loss,
    ssim,
    unet_loss,
)
from .render import (
    ImagePair,
    SceneParams,
    make_scene,
    render_depth,
    render_fringe,
    render_pair,
    render_phase_sequence,
)
from .scene import (
    Mesh,
    PinholeDevice,
    PoseSchedule,
    RigidPose,
    change_frame,
    generate_pose_schedule,
    load_mesh,
    normalize_and_place,
    project_point,
)

__version__ = "0.1.0"
