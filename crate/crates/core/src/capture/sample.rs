use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::frame::{is_valid_depth, RgbdFrame, DEPTH_MAX_MM, DEPTH_NONE};
use super::sweep::SweepPhase;
use super::CaptureError;
use crate::math;
use crate::rng;

/// LiDAR sampling model applied to a ground-truth frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SampleParams {
    /// Standard deviation of range noise in meters.
    pub noise_sigma_m: f64,
    /// Probability that a pixel has no return in a given frame.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams { noise_sigma_m: 0.01, dropout: 0.5, seed: 0 }
    }
}

impl SampleParams {
    pub fn validate(&self) -> Result<(), CaptureError> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CaptureError::Config("dropout must be in [0, 1)"));
        }
        if !(self.noise_sigma_m >= 0.0 && self.noise_sigma_m.is_finite()) {
            return Err(CaptureError::Config("noise sigma must be >= 0"));
        }
        Ok(())
    }
}

/// Simulates one LiDAR sweep landing on the camera raster.
///
/// Which pixels return is drawn independently for every (unit, frame, LiDAR),
/// so a static surface is sampled at a different subset of pixels each frame.
/// Surviving depths get zero-mean Gaussian range noise. Color is untouched.
pub fn sample_unit(
    ground_truth: &RgbdFrame,
    phase: &SweepPhase,
    params: &SampleParams,
) -> Result<RgbdFrame, CaptureError> {
    params.validate()?;
    let mut out = ground_truth.clone();
    if params.dropout == 0.0 && params.noise_sigma_m == 0.0 {
        return Ok(out);
    }
    let mut rng = rng::derive(params.seed, &[ground_truth.unit_id as u64, phase.frame, phase.lidar as u64]);
    let noise = Normal::new(0.0, params.noise_sigma_m * 1000.0).map_err(|_| CaptureError::Config("bad noise sigma"))?;
    for d in out.depth.as_mut_slice() {
        // draw for every pixel so the pattern does not depend on scene content
        let keep = rng.random::<f64>() >= params.dropout;
        let n = noise.sample(&mut rng);
        if !is_valid_depth(*d) {
            continue;
        }
        *d = if keep { math::round(*d as f64 + n).clamp(1.0, DEPTH_MAX_MM as f64) as u16 } else { DEPTH_NONE };
    }
    Ok(out)
}
