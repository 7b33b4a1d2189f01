//! Built-in capture rig and demo stage used when no files are given.

use telestage_core::capture::{BoxObject, MovingSphere, Path, SceneConfig, Texture};
use telestage_core::fusion::{FusionError, VirtualCamera};
use telestage_core::geometry::{GeometryError, Intrinsics, Pose, UnitCalibration, Vec3};

pub const RIG_RADIUS_M: f64 = 3.0;
pub const RIG_HEIGHT_M: f64 = 1.3;
pub const RIG_HFOV_DEG: f64 = 70.0;
/// Units are spread evenly over this half-angle around the audience axis.
pub const RIG_SPREAD_DEG: f64 = 45.0;

fn stage_target() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

fn eye(theta_deg: f64) -> Vec3 {
    let t = theta_deg.to_radians();
    Vec3::new(RIG_RADIUS_M * t.sin(), -RIG_RADIUS_M * t.cos(), RIG_HEIGHT_M)
}

/// `units` cameras on an arc facing the stage center, ids `0..units`.
pub fn default_rig(units: u16, width: u32, height: u32) -> Result<Vec<UnitCalibration>, GeometryError> {
    let k = Intrinsics::from_hfov(width, height, RIG_HFOV_DEG)?;
    (0..units)
        .map(|i| {
            let theta = if units == 1 { 0.0 } else { -RIG_SPREAD_DEG + 2.0 * RIG_SPREAD_DEG * i as f64 / (units - 1) as f64 };
            let pose = Pose::look_at(eye(theta), stage_target(), Vec3::z())?;
            UnitCalibration::new(i, k, pose)
        })
        .collect()
}

/// Audience viewpoint on the rig's center line.
pub fn default_virtual_camera(width: u32, height: u32) -> Result<VirtualCamera, FusionError> {
    let k = Intrinsics::from_hfov(width, height, RIG_HFOV_DEG)?;
    VirtualCamera::new(k, Pose::look_at(eye(0.0), stage_target(), Vec3::z())?)
}

/// A room with a textured crate and a textured ball swinging left to right.
pub fn demo_scene() -> SceneConfig {
    let mut s = SceneConfig::empty([8.0, 8.0, 3.0]);
    s.room_color = Some([150, 140, 130]);
    s.boxes.push(BoxObject { min: [-1.0, 0.4, 0.0], max: [-0.3, 1.1, 0.8], color: [170, 110, 60], texture: Texture { amplitude: 40, cell_m: 0.1 } });
    s.spheres.push(MovingSphere {
        path: Path::Oscillate { center: [0.3, 0.0, 1.0], amplitude: [0.6, 0.0, 0.0], freq_hz: 0.5, phase_rad: 0.0 },
        radius: 0.3,
        color: [60, 90, 200],
        texture: Texture { amplitude: 50, cell_m: 0.08 },
    });
    s.seed = 1;
    s
}
