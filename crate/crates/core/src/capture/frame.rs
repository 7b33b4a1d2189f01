use crate::raster::Raster;

/// Depth value meaning "no return".
pub const DEPTH_NONE: u16 = 0;
/// Reserved depth value meaning "invalid measurement".
pub const DEPTH_INVALID: u16 = u16::MAX;
/// Largest storable depth in millimeters.
pub const DEPTH_MAX_MM: u16 = u16::MAX - 1;

pub type Rgb = [u8; 3];

#[inline]
pub fn is_valid_depth(d: u16) -> bool {
    d != DEPTH_NONE && d != DEPTH_INVALID
}

/// One unit's synchronized color and depth capture.
///
/// Depth is camera-frame z in millimeters; see [`DEPTH_NONE`] and
/// [`DEPTH_INVALID`] for the sentinels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbdFrame {
    pub unit_id: u16,
    pub seq: u32,
    /// Microseconds on the shared monotonic clock.
    pub capture_ts_us: u64,
    pub rgb: Raster<Rgb>,
    pub depth: Raster<u16>,
}

impl RgbdFrame {
    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn valid_depth_count(&self) -> usize {
        self.depth.as_slice().iter().filter(|&&d| is_valid_depth(d)).count()
    }

    pub fn coverage(&self) -> f64 {
        self.valid_depth_count() as f64 / self.depth.len().max(1) as f64
    }
}
