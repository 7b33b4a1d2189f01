//! Lossless 16-bit depth coding and the per-frame transport container.

mod container;
mod qoi16;

use thiserror::Error;

pub use container::{EncodedFrame, FRAME_HEADER_LEN, FRAME_MAGIC, FRAME_VERSION};
pub use qoi16::{qoi16_decode, qoi16_encode, QOI16_END_MARKER, QOI16_HEADER_LEN, QOI16_MAGIC, QOI16_MAX_PIXELS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
    #[error("stream truncated")]
    Truncated,
    #[error("dimensions {0}x{1} overflow the pixel limit")]
    DimensionOverflow(u32, u32),
    #[error("zero-sized raster")]
    ZeroDimension,
    #[error("corrupt chunk at byte {0}")]
    Corrupt(usize),
    #[error("missing end marker")]
    MissingEndMarker,
    #[error("{0} trailing bytes after end of stream")]
    TrailingBytes(usize),
    #[error("payload length mismatch: header says {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("payload too large for a u32 length field")]
    PayloadTooLarge,
}
