use alloc::vec;
use alloc::vec::Vec;

use super::eq::{Biquad, Section};
use super::HapticsError;
use crate::math;
use crate::transport::HapticBlock;

/// m/s^2 per LSB of a +-16 g, 16-bit accelerometer.
pub const DEFAULT_SCALE: f64 = 9.80665 * 16.0 / 32768.0;
const ENVELOPE_CORNER_HZ: f64 = 20.0;
/// Rate the envelope is block-averaged to before autocorrelation.
const AUTOCORR_RATE_HZ: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AccelStream {
    pub sensor_id: u16,
    pub sample_rate_hz: f64,
    /// m/s^2 per LSB.
    pub scale: f64,
    pub start_ts_us: u64,
    pub samples: Vec<[i16; 3]>,
}

impl AccelStream {
    pub fn from_block(b: &HapticBlock, scale: f64) -> Self {
        AccelStream {
            sensor_id: b.sensor_id,
            sample_rate_hz: b.sample_rate_hz as f64,
            scale,
            start_ts_us: b.start_ts_us,
            samples: b.samples.clone(),
        }
    }

    /// Rounds the sample rate to whole hertz.
    pub fn to_block(&self) -> HapticBlock {
        HapticBlock {
            sensor_id: self.sensor_id,
            start_ts_us: self.start_ts_us,
            sample_rate_hz: math::round(self.sample_rate_hz) as u32,
            samples: self.samples.clone(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    fn validate(&self) -> Result<(), HapticsError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(HapticsError::Config("sample rate must be positive"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(HapticsError::Config("scale must be positive"));
        }
        if self.samples.is_empty() {
            return Err(HapticsError::Empty);
        }
        Ok(())
    }

    /// Per-axis samples in m/s^2 with each axis' mean removed.
    fn centered(&self) -> [Vec<f64>; 3] {
        let n = self.samples.len() as f64;
        core::array::from_fn(|axis| {
            let v: Vec<f64> = self.samples.iter().map(|s| s[axis] as f64 * self.scale).collect();
            let mean = v.iter().sum::<f64>() / n;
            v.into_iter().map(|x| x - mean).collect()
        })
    }
}

/// Burst onset detected by the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepEvent {
    /// Onset, seconds on the stream clock.
    pub t: f64,
    pub sensor_id: u16,
    /// Peak envelope value, m/s^2.
    pub intensity: f64,
    /// Stage position in meters, supplied per sensor.
    pub x: f64,
    pub y: f64,
}

/// Magnitude of the mean-removed acceleration, smoothed by a 2nd-order
/// Butterworth low-pass at 20 Hz run forward and backward (no delay), clamped
/// at zero.
pub fn envelope(x: &AccelStream) -> Result<Vec<f64>, HapticsError> {
    x.validate()?;
    let [ax, ay, az] = x.centered();
    let mut e: Vec<f64> = (0..ax.len()).map(|i| math::sqrt(ax[i] * ax[i] + ay[i] * ay[i] + az[i] * az[i])).collect();
    let corner = ENVELOPE_CORNER_HZ.min(0.45 * x.sample_rate_hz);
    let lp = Section::LowPass { freq_hz: corner, q: core::f64::consts::FRAC_1_SQRT_2 }.design(x.sample_rate_hz)?;
    Biquad::new(lp).run(&mut e);
    e.reverse();
    Biquad::new(lp).run(&mut e);
    e.reverse();
    for v in &mut e {
        *v = v.max(0.0);
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct GateConfig {
    /// Steps per second.
    pub min_cadence: f64,
    pub max_cadence: f64,
    pub attack_s: f64,
    pub release_s: f64,
    /// Absolute floor under the adaptive threshold, m/s^2.
    pub min_peak: f64,
    /// The onset is where the envelope, walking back from the peak, first
    /// drops below this fraction of the peak.
    pub onset_fraction: f64,
    pub position: [f64; 2],
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            min_cadence: 0.5,
            max_cadence: 4.0,
            attack_s: 0.020,
            release_s: 0.080,
            min_peak: 0.5,
            onset_fraction: 0.3,
            position: [0.0, 0.0],
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), HapticsError> {
        if !(self.min_cadence > 0.0 && self.min_cadence < self.max_cadence && self.max_cadence.is_finite()) {
            return Err(HapticsError::Config("need 0 < min_cadence < max_cadence"));
        }
        if !(self.attack_s >= 0.0 && self.release_s >= 0.0) {
            return Err(HapticsError::Config("attack and release must be >= 0"));
        }
        if !(self.min_peak >= 0.0) || !(self.onset_fraction > 0.0 && self.onset_fraction < 1.0) {
            return Err(HapticsError::Config("bad peak floor or onset fraction"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutput {
    pub events: Vec<StepEvent>,
    /// Gated drive signal, m/s^2, one sample per input sample.
    pub gated: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Autocorrelation period estimate; `None` when the envelope is flat.
    pub period_s: Option<f64>,
    pub threshold: f64,
    /// Sample ranges `[start, end)` where the gate is open.
    pub windows: Vec<(usize, usize)>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Step period by autocorrelation of the block-averaged envelope over lags
/// `[1/max_cadence, 1/min_cadence]`. The shortest lag whose correlation is a
/// local maximum within 80% of the best one wins, so multiples of the true
/// period are not picked.
fn estimate_period(env: &[f64], fs: f64, cfg: &GateConfig) -> Option<f64> {
    let m = math::round(fs / AUTOCORR_RATE_HZ).max(1.0) as usize;
    let fd = fs / m as f64;
    let d: Vec<f64> = env.chunks(m).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let d: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let lo = (math::ceil(fd / cfg.max_cadence) as usize).max(1);
    let hi = (math::floor(fd / cfg.min_cadence) as usize).min(d.len().saturating_sub(1));
    if lo + 2 > hi {
        return None;
    }
    let r: Vec<f64> = (lo - 1..=hi + 1)
        .map(|l| if l >= d.len() { 0.0 } else { d.iter().zip(&d[l..]).map(|(a, b)| a * b).sum::<f64>() / d.len() as f64 })
        .collect();
    let best = r[1..r.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return None;
    }
    let pick = (1..r.len() - 1).find(|&i| r[i] >= 0.8 * best && r[i] >= r[i - 1] && r[i] >= r[i + 1])?;
    // parabolic refinement around the chosen lag
    let (a, b, c) = (r[pick - 1], r[pick], r[pick + 1]);
    let den = a - 2.0 * b + c;
    let frac = if den < 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
    Some((pick + lo - 1) as f64 / fd + frac / fd)
}

fn raised_cosine(x: f64) -> f64 {
    0.5 * (1.0 - math::cos(core::f64::consts::PI * x.clamp(0.0, 1.0)))
}

/// Detects steps and gates the drive signal around them.
///
/// Peaks are local envelope maxima above `max(median + 3 MAD, min_peak)`,
/// accepted strongest first unless within half an estimated period of an
/// already accepted peak. Each accepted peak yields one event whose onset is
/// found by walking back to `onset_fraction` of the peak. The window rises
/// over `attack_s` before the onset, stays open until the peak and falls over
/// `release_s` after it. The drive signal is the mean-removed axis with the
/// most energy.
pub fn gait_gate(x: &AccelStream, cfg: &GateConfig) -> Result<GateOutput, HapticsError> {
    cfg.validate()?;
    x.validate()?;
    let need_s = 2.0 / cfg.min_cadence;
    if x.duration_s() < need_s {
        return Err(HapticsError::InsufficientData { have_s: x.duration_s(), need_s });
    }
    let fs = x.sample_rate_hz;
    let env = envelope(x)?;
    let n = env.len();

    let mut sorted = env.clone();
    let med = median(&mut sorted);
    let mut dev: Vec<f64> = env.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let threshold = (med + 3.0 * mad).max(cfg.min_peak);

    let period_s = estimate_period(&env, fs, cfg);
    let refractory = 0.5 * period_s.unwrap_or(1.0 / cfg.max_cadence);
    let refr = math::round(refractory * fs) as usize;

    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = env[i];
            v > threshold && (i == 0 || v > env[i - 1]) && (i + 1 == n || v >= env[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| env[b].total_cmp(&env[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for p in peaks {
        if accepted.iter().all(|&q| p.abs_diff(q) >= refr) {
            accepted.push(p);
        }
    }
    accepted.sort_unstable();

    let centered = x.centered();
    let drive = centered
        .iter()
        .max_by(|a, b| a.iter().map(|v| v * v).sum::<f64>().total_cmp(&b.iter().map(|v| v * v).sum::<f64>()))
        .expect("three axes");
    let attack = cfg.attack_s * fs;
    let release = cfg.release_s * fs;
    let mut window = vec![0.0f64; n];
    let mut windows = Vec::with_capacity(accepted.len());
    let mut events = Vec::with_capacity(accepted.len());
    let t0 = x.start_ts_us as f64 / 1e6;
    for &p in &accepted {
        let level = cfg.onset_fraction * env[p];
        let mut o = p;
        while o > 0 && env[o - 1] >= level {
            o -= 1;
        }
        let start = math::floor(o as f64 - attack).max(0.0) as usize;
        let end = ((math::ceil(p as f64 + release) as usize) + 1).min(n);
        for (i, w) in window.iter_mut().enumerate().take(end).skip(start) {
            let g = if i < o {
                raised_cosine((i as f64 - (o as f64 - attack)) / attack)
            } else if i <= p {
                1.0
            } else {
                raised_cosine(1.0 - (i - p) as f64 / release)
            };
            *w = w.max(g);
        }
        windows.push((start, end));
        events.push(StepEvent {
            t: t0 + o as f64 / fs,
            sensor_id: x.sensor_id,
            intensity: env[p],
            x: cfg.position[0],
            y: cfg.position[1],
        });
    }
    let gated = drive.iter().zip(&window).map(|(d, w)| if *w > 0.0 { d * w } else { 0.0 }).collect();
    Ok(GateOutput { events, gated, envelope: env, period_s, threshold, windows })
}

#[cfg(test)]
mod tests {
    use super::super::synth::{synth_gait, GaitSpec};
    use super::*;

    fn stream(samples: Vec<[i16; 3]>) -> AccelStream {
        AccelStream { sensor_id: 3, sample_rate_hz: 1000.0, scale: DEFAULT_SCALE, start_ts_us: 0, samples }
    }

    #[test]
    fn zero_input_zero_envelope() {
        let e = envelope(&stream(vec![[0; 3]; 500])).unwrap();
        assert!(e.iter().all(|v| *v == 0.0));
        assert_eq!(envelope(&stream(vec![])), Err(HapticsError::Empty));
    }

    #[test]
    fn gravity_offset_removed() {
        let g = math::round(9.80665 / DEFAULT_SCALE) as i16;
        let e = envelope(&stream(vec![[0, 0, g]; 2000])).unwrap();
        let offset = g as f64 * DEFAULT_SCALE;
        assert!(e.iter().all(|v| *v < 0.01 * offset));
    }

    #[test]
    fn single_burst_single_lobe() {
        // 50 ms of 80 Hz centered at 1.0 s
        let amp = 2000.0;
        let samples: Vec<[i16; 3]> = (0..2000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                let v = if (0.975..1.025).contains(&t) { amp * math::sin(2.0 * core::f64::consts::PI * 80.0 * t) } else { 0.0 };
                [0, 0, v as i16]
            })
            .collect();
        let e = envelope(&stream(samples)).unwrap();
        let peak = (0..e.len()).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
        assert!((peak as f64 - 1000.0).abs() <= 15.0, "peak at {peak} ms");
        let half = e[peak] * 0.5;
        let above: Vec<usize> = (0..e.len()).filter(|&i| e[i] > half).collect();
        assert_eq!(above.len(), above[above.len() - 1] - above[0] + 1, "more than one lobe");
    }

    #[test]
    fn hundred_steps_with_echo() {
        let spec = GaitSpec { cadence_hz: 2.0, n_steps: 100, echo_amp: 0.6, ..GaitSpec::default() };
        let (s, truth) = synth_gait(&spec);
        let out = gait_gate(&s, &GateConfig::default()).unwrap();
        assert_eq!(out.events.len(), 100);
        let worst = out.events.iter().zip(&truth).map(|(e, t)| (e.t - t).abs()).fold(0.0, f64::max);
        assert!(worst < 0.020, "worst onset error {worst}");
        let p = out.period_s.unwrap();
        assert!((p - 0.5).abs() <= 0.05, "period {p}");
    }

    #[test]
    fn cadences_and_echoes() {
        for cadence in [1.0, 2.0, 3.0] {
            for echo in [0.0, 0.4, 0.8] {
                let spec = GaitSpec { cadence_hz: cadence, n_steps: 30, echo_amp: echo, seed: 9, ..GaitSpec::default() };
                let (s, truth) = synth_gait(&spec);
                let out = gait_gate(&s, &GateConfig::default()).unwrap();
                assert_eq!(out.events.len(), truth.len(), "cadence {cadence} echo {echo}");
                assert!((out.period_s.unwrap() - 1.0 / cadence).abs() <= 0.1 / cadence);
                assert!(out.events.windows(2).all(|w| w[1].t > w[0].t));
            }
        }
    }

    #[test]
    fn silence_gives_no_events() {
        let s = stream(vec![[0, 0, 2048]; 8000]);
        let out = gait_gate(&s, &GateConfig::default()).unwrap();
        assert!(out.events.is_empty());
        assert!(out.gated.iter().all(|v| *v == 0.0));
        let spec = GaitSpec { n_steps: 0, ..GaitSpec::default() };
        let (s, _) = synth_gait(&spec);
        assert!(gait_gate(&s, &GateConfig::default()).unwrap().events.is_empty());
    }

    #[test]
    fn gated_is_zero_outside_windows() {
        let (s, _) = synth_gait(&GaitSpec { n_steps: 12, ..GaitSpec::default() });
        let out = gait_gate(&s, &GateConfig::default()).unwrap();
        let mut inside = vec![false; out.gated.len()];
        for &(a, b) in &out.windows {
            inside[a..b].iter_mut().for_each(|v| *v = true);
        }
        for (g, i) in out.gated.iter().zip(&inside) {
            if !i {
                assert_eq!(*g, 0.0);
            }
        }
        assert!(out.gated.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn short_stream_rejected() {
        let s = stream(vec![[0; 3]; 3999]);
        assert!(matches!(gait_gate(&s, &GateConfig::default()), Err(HapticsError::InsufficientData { .. })));
        let bad = GateConfig { min_cadence: 4.0, max_cadence: 2.0, ..GateConfig::default() };
        assert!(matches!(gait_gate(&s, &bad), Err(HapticsError::Config(_))));
    }

    #[test]
    fn block_roundtrip() {
        let (s, _) = synth_gait(&GaitSpec { n_steps: 2, ..GaitSpec::default() });
        let b = s.to_block();
        assert_eq!(AccelStream::from_block(&b, s.scale), s);
    }
}
