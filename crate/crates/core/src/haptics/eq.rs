//! Second-order filter sections and the equalizer cascade.

use alloc::vec::Vec;

use nalgebra::Complex;

use super::HapticsError;
use crate::math;

/// Normalized biquad `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Coeffs {
    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex<f64> {
        let w = 2.0 * core::f64::consts::PI * freq_hz / sample_rate_hz;
        let z1 = Complex::new(math::cos(w), -math::sin(w));
        let z2 = z1 * z1;
        let num = Complex::new(self.b[0], 0.0) + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }

    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Coeffs { b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]], a: [a[1] / a[0], a[2] / a[0]] }
    }
}

/// Direct form II transposed section with owned state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    c: Coeffs,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(c: Coeffs) -> Self {
        Biquad { c, s1: 0.0, s2: 0.0 }
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.c
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let Coeffs { b, a } = self.c;
        let y = b[0] * x + self.s1;
        self.s1 = b[1] * x - a[0] * y + self.s2;
        self.s2 = b[2] * x - a[1] * y;
        y
    }

    pub fn run(&mut self, x: &mut [f64]) {
        for v in x {
            *v = self.step(*v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(tag = "type", rename_all = "snake_case"))]
pub enum Section {
    HighPass { freq_hz: f64, q: f64 },
    LowPass { freq_hz: f64, q: f64 },
    Peaking { freq_hz: f64, q: f64, gain_db: f64 },
    /// Pre-normalized coefficients.
    Raw { b: [f64; 3], a: [f64; 2] },
}

impl Section {
    /// Audio-EQ-cookbook designs.
    pub fn design(&self, sample_rate_hz: f64) -> Result<Coeffs, HapticsError> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(HapticsError::Config("sample rate must be positive"));
        }
        let shape = |freq_hz: f64, q: f64| {
            if !(freq_hz > 0.0 && freq_hz < sample_rate_hz / 2.0) {
                return Err(HapticsError::Config("section frequency must lie in (0, nyquist)"));
            }
            if !(q > 0.0 && q.is_finite()) {
                return Err(HapticsError::Config("section Q must be positive"));
            }
            let w0 = 2.0 * core::f64::consts::PI * freq_hz / sample_rate_hz;
            Ok((math::cos(w0), math::sin(w0) / (2.0 * q)))
        };
        let c = match *self {
            Section::LowPass { freq_hz, q } => {
                let (cw, al) = shape(freq_hz, q)?;
                Coeffs::normalized([(1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0], [1.0 + al, -2.0 * cw, 1.0 - al])
            }
            Section::HighPass { freq_hz, q } => {
                let (cw, al) = shape(freq_hz, q)?;
                Coeffs::normalized([(1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0], [1.0 + al, -2.0 * cw, 1.0 - al])
            }
            Section::Peaking { freq_hz, q, gain_db } => {
                if !gain_db.is_finite() {
                    return Err(HapticsError::Config("peaking gain must be finite"));
                }
                let (cw, al) = shape(freq_hz, q)?;
                let a = math::powf(10.0, gain_db / 40.0);
                Coeffs::normalized([1.0 + al * a, -2.0 * cw, 1.0 - al * a], [1.0 + al / a, -2.0 * cw, 1.0 - al / a])
            }
            Section::Raw { b, a } => Coeffs { b, a },
        };
        if !c.is_stable() {
            return Err(HapticsError::Unstable);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EqConfig {
    pub sections: Vec<Section>,
}

impl Default for EqConfig {
    /// High-pass 20 Hz, +6 dB peak at 80 Hz, low-pass 300 Hz.
    fn default() -> Self {
        let q = core::f64::consts::FRAC_1_SQRT_2;
        EqConfig {
            sections: alloc::vec![
                Section::HighPass { freq_hz: 20.0, q },
                Section::Peaking { freq_hz: 80.0, q: 1.0, gain_db: 6.0 },
                Section::LowPass { freq_hz: 300.0, q },
            ],
        }
    }
}

impl EqConfig {
    pub fn empty() -> Self {
        EqConfig { sections: Vec::new() }
    }

    pub fn design(&self, sample_rate_hz: f64) -> Result<Equalizer, HapticsError> {
        let sections = self.sections.iter().map(|s| s.design(sample_rate_hz).map(Biquad::new)).collect::<Result<_, _>>()?;
        Ok(Equalizer { sections, sample_rate_hz })
    }
}

/// A designed cascade with its own filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

impl Equalizer {
    pub fn response(&self, freq_hz: f64) -> Complex<f64> {
        self.sections.iter().fold(Complex::new(1.0, 0.0), |h, s| h * s.coeffs().response(freq_hz, self.sample_rate_hz))
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain(&self, freq_hz: f64) -> f64 {
        let h = self.response(freq_hz);
        math::hypot(h.re, h.im)
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(Biquad::reset);
    }

    /// Filters a block in place, carrying state across calls.
    pub fn process(&mut self, x: &mut [f64]) {
        for s in &mut self.sections {
            s.run(x);
        }
    }
}

/// Applies the cascade from rest.
pub fn equalize(x: &[f64], eq: &EqConfig, sample_rate_hz: f64) -> Result<Vec<f64>, HapticsError> {
    let mut e = eq.design(sample_rate_hz)?;
    let mut y = x.to_vec();
    e.process(&mut y);
    Ok(y)
}
