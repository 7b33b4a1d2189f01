//! Staggered LiDAR sweep scheduling.
//!
//! Each capture unit carries several spinning LiDARs whose rotation phases are
//! evenly staggered, and a camera triggered once per sweep. Frame `f` is
//! therefore sampled by LiDAR `f mod n`, and any azimuth is revisited every
//! `1000 / (n * base_rate)` milliseconds.

use alloc::vec::Vec;

use super::CaptureError;
use crate::geometry::Intrinsics;
use crate::math;

const PHASE_TOL_DEG: f64 = 0.5;
const RATE_TOL_HZ: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepSchedule {
    pub n_lidars: u32,
    /// Rotation rate of one LiDAR in Hz.
    pub base_rate_hz: f64,
    pub phase_offsets_deg: Vec<f64>,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule::staggered(3, 10.0)
    }
}

impl SweepSchedule {
    /// `n` LiDARs evenly staggered over 360 degrees.
    pub fn staggered(n_lidars: u32, base_rate_hz: f64) -> Self {
        let step = 360.0 / n_lidars.max(1) as f64;
        SweepSchedule {
            n_lidars,
            base_rate_hz,
            phase_offsets_deg: (0..n_lidars).map(|k| k as f64 * step).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        if self.n_lidars == 0 {
            return Err(CaptureError::Config("n_lidars must be >= 1"));
        }
        if !(self.base_rate_hz > 0.0 && self.base_rate_hz.is_finite()) {
            return Err(CaptureError::Config("base_rate_hz must be positive"));
        }
        if self.phase_offsets_deg.len() != self.n_lidars as usize {
            return Err(CaptureError::Config("one phase offset per LiDAR required"));
        }
        let phases = &self.phase_offsets_deg;
        if phases.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CaptureError::Config("phase offsets must be strictly increasing"));
        }
        if phases[phases.len() - 1] - phases[0] >= 360.0 {
            return Err(CaptureError::Config("phase offsets must span less than 360 degrees"));
        }
        let step = 360.0 / self.n_lidars as f64;
        for (k, p) in phases.iter().enumerate() {
            if (p - phases[0] - k as f64 * step).abs() > PHASE_TOL_DEG {
                return Err(CaptureError::Config("phase offsets must be evenly staggered"));
            }
        }
        Ok(())
    }

    /// Combined frame rate of all LiDARs in Hz.
    pub fn frame_rate_hz(&self) -> f64 {
        self.n_lidars as f64 * self.base_rate_hz
    }

    pub fn revisit_interval_ms(&self) -> f64 {
        1000.0 / self.frame_rate_hz()
    }
}

/// Which LiDAR samples a given output frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPhase {
    pub frame: u64,
    pub lidar: u32,
    pub phase_deg: f64,
    /// Frame trigger time relative to the start of capture, microseconds.
    pub frame_ts_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    schedule: SweepSchedule,
    frame_period_us: f64,
}

/// Builds the per-frame sampling plan. `frame_rate_hz` must equal
/// `n_lidars * base_rate_hz`.
pub fn schedule_sweeps(schedule: &SweepSchedule, frame_rate_hz: f64) -> Result<SweepPlan, CaptureError> {
    schedule.validate()?;
    if (frame_rate_hz - schedule.frame_rate_hz()).abs() > RATE_TOL_HZ {
        return Err(CaptureError::Config("frame rate must equal n_lidars * base_rate"));
    }
    Ok(SweepPlan { schedule: schedule.clone(), frame_period_us: 1e6 / frame_rate_hz })
}

impl SweepPlan {
    pub fn schedule(&self) -> &SweepSchedule {
        &self.schedule
    }

    pub fn frame_period_us(&self) -> f64 {
        self.frame_period_us
    }

    pub fn phase(&self, frame: u64) -> SweepPhase {
        let lidar = (frame % self.schedule.n_lidars as u64) as u32;
        SweepPhase {
            frame,
            lidar,
            phase_deg: self.schedule.phase_offsets_deg[lidar as usize],
            frame_ts_us: frame as f64 * self.frame_period_us,
        }
    }

    pub fn phases(&self, n_frames: u64) -> impl Iterator<Item = SweepPhase> + '_ {
        (0..n_frames).map(move |f| self.phase(f))
    }

    /// Time at which the active LiDAR's beam crosses image column `col`.
    ///
    /// The beam is at the camera's optical axis at the trigger instant and
    /// sweeps left to right, so columns left of the principal point are
    /// sampled slightly before the trigger.
    pub fn column_ts_us(&self, phase: &SweepPhase, col: f64, k: &Intrinsics) -> f64 {
        let azimuth_deg = math::atan2(col - k.cx, k.fx).to_degrees();
        phase.frame_ts_us + azimuth_deg / 360.0 * 1e6 / self.schedule.base_rate_hz
    }

    /// Azimuth (degrees, in [0, 360)) of LiDAR `k`'s beam at time `t_us`,
    /// measured from the camera axis.
    pub fn beam_azimuth_deg(&self, lidar: u32, t_us: f64) -> f64 {
        let turns = t_us * 1e-6 * self.schedule.base_rate_hz;
        let a = 360.0 * turns - self.schedule.phase_offsets_deg[lidar as usize] + self.schedule.phase_offsets_deg[0];
        a - 360.0 * math::floor(a / 360.0)
    }
}
