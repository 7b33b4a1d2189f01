//! TOML configuration files for scenes and pipeline runs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use telestage_core::capture::SceneConfig;

pub fn load_scene(p: &Path) -> Result<SceneConfig> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let s: SceneConfig = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    s.validate()?;
    Ok(s)
}

pub fn scene_to_toml(s: &SceneConfig) -> Result<String> {
    Ok(toml::to_string_pretty(s)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub units: u16,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub duration_s: f64,
    pub n_lidars: u32,
    pub dropout: f64,
    pub noise_sigma_m: f64,
    pub tau: u8,
    /// Closing radius; scaled with width when absent.
    pub radius: Option<usize>,
    pub jpeg_quality: u8,
    /// Depth-bias scale, meters.
    pub s: f64,
    /// Receiver listen address; port 0 picks a free port.
    pub address: String,
    /// Artificial one-way network delay added at the receiver.
    pub delay_ms: f64,
    /// Uniform extra delay in `[0, jitter_ms]`.
    pub jitter_ms: f64,
    pub warmup_frames: u32,
    pub stall_timeout_s: f64,
    /// Shoe sensors streaming synthetic footsteps next to the video.
    pub haptic_sensors: u16,
    pub haptic_rate_hz: u32,
    pub seed: u64,
    /// Scene file; the built-in demo stage when absent.
    pub scene: Option<PathBuf>,
    /// Directory for rendered views of every fused frame.
    pub render_dir: Option<PathBuf>,
    /// Simulate all sensor frames before the clock starts, so the stand-in
    /// for capture hardware does not compete for CPU with the measured
    /// stages. Holds every frame in memory.
    pub presimulate: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            units: 2,
            width: 320,
            height: 240,
            fps: 30.0,
            duration_s: 10.0,
            n_lidars: 3,
            dropout: 0.5,
            noise_sigma_m: 0.01,
            tau: 25,
            radius: None,
            jpeg_quality: crate::frame::DEFAULT_JPEG_QUALITY,
            s: telestage_core::fusion::DEFAULT_BIAS_SCALE_M,
            address: "127.0.0.1:0".into(),
            delay_ms: 0.0,
            jitter_ms: 0.0,
            warmup_frames: 10,
            stall_timeout_s: 2.0,
            haptic_sensors: 0,
            haptic_rate_hz: 1000,
            seed: 1,
            scene: None,
            render_dir: None,
            presimulate: true,
        }
    }
}

impl PipelineConfig {
    pub fn load(p: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let c: PipelineConfig = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn frames(&self) -> u32 {
        (self.fps * self.duration_s).round() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            bail!("fps must be positive");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            bail!("duration must be positive");
        }
        if self.frames() == 0 {
            bail!("fps * duration yields zero frames");
        }
        if self.units == 0 && self.haptic_sensors == 0 {
            bail!("nothing to stream: no units and no haptic sensors");
        }
        if self.width == 0 || self.height == 0 {
            bail!("raster size must be non-zero");
        }
        if !(0.0..=1.0).contains(&self.dropout) || !(self.noise_sigma_m >= 0.0) {
            bail!("dropout must lie in [0, 1] and noise must be >= 0");
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            bail!("jpeg quality must be 1..=100");
        }
        if !(self.delay_ms >= 0.0 && self.jitter_ms >= 0.0) {
            bail!("delay and jitter must be >= 0");
        }
        if !(self.stall_timeout_s > 0.0) {
            bail!("stall timeout must be positive");
        }
        if self.haptic_sensors > 0 && self.haptic_rate_hz == 0 {
            bail!("haptic rate must be positive");
        }
        Ok(())
    }
}
