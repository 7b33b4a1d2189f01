//! Footstep vibration conditioning: envelope extraction, the gait-periodicity
//! gate and the equalizer.

mod eq;
mod gait;
mod synth;

use thiserror::Error;

pub use eq::{equalize, Biquad, Coeffs, EqConfig, Equalizer, Section};
pub use gait::{envelope, gait_gate, AccelStream, GateConfig, GateOutput, StepEvent, DEFAULT_SCALE};
pub use synth::{synth_gait, GaitSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HapticsError {
    #[error("empty stream")]
    Empty,
    #[error("stream of {have_s:.3} s is shorter than the {need_s:.3} s needed")]
    InsufficientData { have_s: f64, need_s: f64 },
    #[error("unstable filter section")]
    Unstable,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}
