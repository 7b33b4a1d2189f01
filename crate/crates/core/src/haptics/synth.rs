//! Synthetic footstep accelerometer traces with known onsets.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::gait::{AccelStream, DEFAULT_SCALE};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct GaitSpec {
    pub sensor_id: u16,
    pub cadence_hz: f64,
    pub n_steps: usize,
    /// Echo amplitude relative to the main burst.
    pub echo_amp: f64,
    pub echo_delay_s: f64,
    pub burst_hz: f64,
    pub decay_s: f64,
    /// Main burst amplitude, m/s^2; each step varies by +-10%.
    pub amplitude: f64,
    /// Per-axis white noise, m/s^2.
    pub noise: f64,
    pub lead_s: f64,
    pub tail_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for GaitSpec {
    fn default() -> Self {
        GaitSpec {
            sensor_id: 0,
            cadence_hz: 2.0,
            n_steps: 100,
            echo_amp: 0.6,
            echo_delay_s: 0.050,
            burst_hz: 80.0,
            decay_s: 0.020,
            amplitude: 20.0,
            noise: 0.05,
            lead_s: 0.5,
            tail_s: 0.5,
            sample_rate_hz: 1000.0,
            seed: 1,
        }
    }
}

/// Decaying sine bursts along a fixed direction on top of 1 g gravity.
/// Returns the stream and the true onsets in seconds. The trace is always at
/// least `max(4, 4 / cadence)` seconds plus lead and tail long.
pub fn synth_gait(spec: &GaitSpec) -> (AccelStream, Vec<f64>) {
    let fs = spec.sample_rate_hz;
    let period = 1.0 / spec.cadence_hz;
    let body = (spec.n_steps as f64 * period).max(4.0 * period).max(4.0);
    let n = math::ceil((spec.lead_s + body + spec.tail_s) * fs) as usize;
    let mut r = rng::derive(spec.seed, &[spec.sensor_id as u64, 0x6a17]);
    let onsets: Vec<f64> = (0..spec.n_steps).map(|k| spec.lead_s + k as f64 * period).collect();
    let gains: Vec<f64> = onsets.iter().map(|_| spec.amplitude * r.random_range(0.9..1.1)).collect();
    let dir = nalgebra::Vector3::new(0.3, 0.1, 1.0).normalize();
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite sigma");
    let burst_len = 8.0 * spec.decay_s;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let mut a = 0.0;
        for (o, g) in onsets.iter().zip(&gains) {
            for (start, amp) in [(*o, *g), (o + spec.echo_delay_s, g * spec.echo_amp)] {
                let dt = t - start;
                if (0.0..burst_len).contains(&dt) {
                    a += amp * math::exp(-dt / spec.decay_s) * math::sin(2.0 * core::f64::consts::PI * spec.burst_hz * dt);
                }
            }
        }
        let v = dir * a + nalgebra::Vector3::new(0.0, 0.0, 9.80665);
        let q = |x: f64| math::round(x / DEFAULT_SCALE).clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        samples.push([q(v.x + noise.sample(&mut r)), q(v.y + noise.sample(&mut r)), q(v.z + noise.sample(&mut r))]);
    }
    let stream = AccelStream { sensor_id: spec.sensor_id, sample_rate_hz: fs, scale: DEFAULT_SCALE, start_ts_us: 0, samples };
    (stream, onsets)
}
