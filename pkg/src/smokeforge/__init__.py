"""smokeforge: simulatable, renderable, editable smoke from 4D
Gaussian-particle assets."""

__version__ = "0.1.0"

from .asset import (AssetError, AssetFrame, SmokeAsset, apply_axis_flip,
                    load_asset, save_asset, voxel_downsample)
from .camera import (CameraPose, Intrinsics, TrajectorySpec,
                     convert_convention, multiview_pose_set,
                     offset_pose_about_pivot, perturbation_pair,
                     relative_rotation_angle, synthetic_trajectory)
from .grids import ScalarGrid, StaggeredVectorGrid, load_grids, save_grids
from .haze import (WeightSchedule, composite_haze, decay_weight,
                   estimate_atmospheric_light, extract_clean_smoke,
                   extract_coarse, frequency_loss, smooth_mask)
from .metrics import psnr, psnr_sequence, ssim
from .render import RenderSettings, composite_onto_background, render_density
from .service import Session, replay_log
from .solver import (SimConfig, SimState, SphereObstacle, SphereRegion,
                     WindForce, advect_maccormack, advect_particles,
                     add_buoyancy, add_wind, apply_obstacle, init_from_asset,
                     project, scenario_config, step)
from .splat import (GaussianKernelParams, kernel_eval, quat_to_rotmat,
                    restrict_bbox, splat_density, splat_velocity)
