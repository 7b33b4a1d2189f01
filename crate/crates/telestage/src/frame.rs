//! RGB-D frame coding: JPEG color plus QOI-16 depth in a DPCS container.

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use thiserror::Error;

use telestage_core::capture::RgbdFrame;
use telestage_core::codec::{qoi16_decode, qoi16_encode, CodecError, EncodedFrame};
use telestage_core::raster::Raster;

pub const DEFAULT_JPEG_QUALITY: u8 = 85;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("jpeg: {0}")]
    Jpeg(#[from] image::ImageError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("color is {rgb:?} but depth is {depth:?}")]
    SizeMismatch { rgb: (usize, usize), depth: (usize, usize) },
    #[error("jpeg quality must be 1..=100, got {0}")]
    Quality(u8),
}

pub fn encode_frame(f: &RgbdFrame, quality: u8) -> Result<EncodedFrame, FrameError> {
    if !(1..=100).contains(&quality) {
        return Err(FrameError::Quality(quality));
    }
    if !f.rgb.same_dims(&f.depth) {
        return Err(FrameError::SizeMismatch { rgb: f.rgb.dims(), depth: f.depth.dims() });
    }
    let depth_payload = qoi16_encode(&f.depth)?;
    let (w, h) = f.rgb.dims();
    let mut rgb_payload = Vec::with_capacity(w * h / 4);
    let raw: Vec<u8> = f.rgb.as_slice().iter().flatten().copied().collect();
    JpegEncoder::new_with_quality(&mut rgb_payload, quality).encode(&raw, w as u32, h as u32, ExtendedColorType::Rgb8)?;
    Ok(EncodedFrame { unit_id: f.unit_id, seq: f.seq, capture_ts_us: f.capture_ts_us, rgb_payload, depth_payload })
}

pub fn decode_frame(e: &EncodedFrame) -> Result<RgbdFrame, FrameError> {
    let depth = qoi16_decode(&e.depth_payload)?;
    let img = image::load_from_memory_with_format(&e.rgb_payload, ImageFormat::Jpeg)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if (w, h) != depth.dims() {
        return Err(FrameError::SizeMismatch { rgb: (w, h), depth: depth.dims() });
    }
    let px: Vec<[u8; 3]> = img.pixels().map(|p| p.0).collect();
    let rgb = Raster::from_vec(w, h, px).expect("pixel count matches");
    Ok(RgbdFrame { unit_id: e.unit_id, seq: e.seq, capture_ts_us: e.capture_ts_us, rgb, depth })
}

/// Peak signal-to-noise ratio in dB between two color rasters.
pub fn psnr(a: &Raster<[u8; 3]>, b: &Raster<[u8; 3]>) -> Option<f64> {
    if !a.same_dims(b) || a.is_empty() {
        return None;
    }
    let se: f64 = a.as_slice().iter().zip(b.as_slice()).flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2))).sum();
    let mse = se / (3 * a.len()) as f64;
    Some(if mse == 0.0 { f64::INFINITY } else { 10.0 * (255.0f64 * 255.0 / mse).log10() })
}
