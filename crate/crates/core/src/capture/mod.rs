//! Synthetic multi-unit RGB-D capture.

mod frame;
mod sample;
mod scene;
mod sweep;

use thiserror::Error;

pub use frame::{is_valid_depth, Rgb, RgbdFrame, DEPTH_INVALID, DEPTH_MAX_MM, DEPTH_NONE};
pub use sample::{sample_unit, SampleParams};
pub use scene::{render_ground_truth, sphere_silhouette, GroundTruthRenderer, BoxObject, Lighting, MovingSphere, Path, PlaneObject, SceneConfig, Texture};
pub use sweep::{schedule_sweeps, SweepPhase, SweepPlan, SweepSchedule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaptureError {
    #[error("capture config: {0}")]
    Config(&'static str),
}
