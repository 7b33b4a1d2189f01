use alloc::vec::Vec;

use super::TransportError;

pub const HAPTIC_HEADER_LEN: usize = 18;
pub const CLOCK_PROBE_LEN: usize = 30;

/// A block of raw accelerometer samples (little-endian): sensor_id u16,
/// start_ts_us u64, sample_rate_hz u32, n u32, then n x (x, y, z) i16.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HapticBlock {
    pub sensor_id: u16,
    pub start_ts_us: u64,
    pub sample_rate_hz: u32,
    pub samples: Vec<[i16; 3]>,
}

impl HapticBlock {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HAPTIC_HEADER_LEN + 6 * self.samples.len());
        out.extend_from_slice(&self.sensor_id.to_le_bytes());
        out.extend_from_slice(&self.start_ts_us.to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for s in &self.samples {
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, TransportError> {
        if b.len() < HAPTIC_HEADER_LEN {
            return Err(TransportError::BadPayload("haptic"));
        }
        let n = u32::from_le_bytes(b[14..18].try_into().unwrap()) as u64;
        if b.len() as u64 != HAPTIC_HEADER_LEN as u64 + 6 * n {
            return Err(TransportError::BadPayload("haptic"));
        }
        let samples = b[HAPTIC_HEADER_LEN..]
            .chunks_exact(6)
            .map(|c| {
                [
                    i16::from_le_bytes([c[0], c[1]]),
                    i16::from_le_bytes([c[2], c[3]]),
                    i16::from_le_bytes([c[4], c[5]]),
                ]
            })
            .collect();
        Ok(HapticBlock {
            sensor_id: u16::from_le_bytes([b[0], b[1]]),
            start_ts_us: u64::from_le_bytes(b[2..10].try_into().unwrap()),
            sample_rate_hz: u32::from_le_bytes(b[10..14].try_into().unwrap()),
            samples,
        })
    }
}

/// Sender-side stamps for one frame, sent just ahead of the frame record
/// (little-endian): unit_id u16, seq u32, capture_ts u64, encode_done u64,
/// send_ts u64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockProbe {
    pub unit_id: u16,
    pub seq: u32,
    pub capture_ts_us: u64,
    pub encode_done_us: u64,
    pub send_ts_us: u64,
}

impl ClockProbe {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CLOCK_PROBE_LEN);
        out.extend_from_slice(&self.unit_id.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.capture_ts_us.to_le_bytes());
        out.extend_from_slice(&self.encode_done_us.to_le_bytes());
        out.extend_from_slice(&self.send_ts_us.to_le_bytes());
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, TransportError> {
        if b.len() != CLOCK_PROBE_LEN {
            return Err(TransportError::BadPayload("clock_probe"));
        }
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        Ok(ClockProbe {
            unit_id: u16::from_le_bytes([b[0], b[1]]),
            seq: u32::from_le_bytes(b[2..6].try_into().unwrap()),
            capture_ts_us: u64_at(6),
            encode_done_us: u64_at(14),
            send_ts_us: u64_at(22),
        })
    }
}
