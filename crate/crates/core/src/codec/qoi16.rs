//! QOI-style lossless coding of single-channel 16-bit rasters.
//!
//! Container (big-endian): magic `qo16`, width u32, height u32, reserved u16
//! (zero), chunk stream, then seven `0x00` bytes and one `0x01`.
//!
//! Chunks, by first byte:
//!
//! | bits         | chunk   | meaning                                           |
//! |--------------|---------|---------------------------------------------------|
//! | `00iiiiii`   | INDEX   | `index[i]`                                        |
//! | `01dddddd`   | DIFF6   | `prev + (d - 32)` mod 2^16                          |
//! | `10rrrrrr`   | RUN     | `prev` repeated `r + 1` times                     |
//! | `11dddddd b` | DIFF14  | `prev + (((d << 8) | b) - 8192)` mod 2^16           |
//! | `ff ff hi lo`| LITERAL | full value; takes the DIFF14 pattern `3f ff`      |
//!
//! `prev` starts at 0 and the 64-entry index starts zeroed. After every pixel,
//! `prev` is set to the value and `index[hash(value)]` is overwritten. The
//! encoder picks RUN, then INDEX, then DIFF6, then DIFF14, then LITERAL.

use alloc::vec::Vec;

use super::CodecError;
use crate::raster::Raster;

pub const QOI16_MAGIC: [u8; 4] = *b"qo16";
pub const QOI16_HEADER_LEN: usize = 14;
pub const QOI16_END_MARKER: [u8; 8] = [0, 0, 0, 0, 0, 0, 0, 1];
/// Largest raster the decoder will allocate.
pub const QOI16_MAX_PIXELS: u64 = 1 << 28;

const OP_INDEX: u8 = 0x00;
const OP_DIFF6: u8 = 0x40;
const OP_RUN: u8 = 0x80;
const OP_DIFF14: u8 = 0xc0;
const MASK_2: u8 = 0xc0;
const MAX_RUN: u32 = 64;
const DIFF14_BIAS: i32 = 8192;
// biased delta 0x3fff is the LITERAL escape
const DIFF14_MAX: i32 = 0x3ffe - DIFF14_BIAS;

#[inline]
fn hash(v: u16) -> usize {
    (((v as u32).wrapping_mul(2_654_435_761) & 0xffff) >> 10) as usize
}

pub fn qoi16_encode(depth: &Raster<u16>) -> Result<Vec<u8>, CodecError> {
    let (w, h) = depth.dims();
    if w == 0 || h == 0 {
        return Err(CodecError::ZeroDimension);
    }
    let (w32, h32) = (u32::try_from(w), u32::try_from(h));
    let (Ok(w32), Ok(h32)) = (w32, h32) else {
        return Err(CodecError::DimensionOverflow(u32::MAX, u32::MAX));
    };
    let mut out = Vec::with_capacity(QOI16_HEADER_LEN + depth.len() + 8);
    out.extend_from_slice(&QOI16_MAGIC);
    out.extend_from_slice(&w32.to_be_bytes());
    out.extend_from_slice(&h32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());

    let mut index = [0u16; 64];
    let mut prev = 0u16;
    let mut run = 0u32;
    let pixels = depth.as_slice();
    for (i, &px) in pixels.iter().enumerate() {
        if px == prev {
            run += 1;
            if run == MAX_RUN || i + 1 == pixels.len() {
                out.push(OP_RUN | (run - 1) as u8);
                run = 0;
            }
            continue;
        }
        if run > 0 {
            out.push(OP_RUN | (run - 1) as u8);
            run = 0;
        }
        let slot = hash(px);
        let delta = px.wrapping_sub(prev) as i16 as i32;
        if index[slot] == px {
            out.push(OP_INDEX | slot as u8);
        } else if (-32..=31).contains(&delta) {
            out.push(OP_DIFF6 | (delta + 32) as u8);
        } else if (-DIFF14_BIAS..=DIFF14_MAX).contains(&delta) {
            let biased = (delta + DIFF14_BIAS) as u16;
            out.push(OP_DIFF14 | (biased >> 8) as u8);
            out.push(biased as u8);
        } else {
            out.extend_from_slice(&[0xff, 0xff]);
            out.extend_from_slice(&px.to_be_bytes());
        }
        index[slot] = px;
        prev = px;
    }
    out.extend_from_slice(&QOI16_END_MARKER);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    #[inline]
    fn byte(&mut self) -> Result<u8, CodecError> {
        let b = *self.bytes.get(self.pos).ok_or(CodecError::Truncated)?;
        self.pos += 1;
        Ok(b)
    }
}

pub fn qoi16_decode(bytes: &[u8]) -> Result<Raster<u16>, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::Truncated);
    }
    if bytes[..4] != QOI16_MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes.len() < QOI16_HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let w = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[8..12].try_into().unwrap());
    if u16::from_be_bytes([bytes[12], bytes[13]]) != 0 {
        return Err(CodecError::BadHeader("reserved field must be zero"));
    }
    if w == 0 || h == 0 {
        return Err(CodecError::ZeroDimension);
    }
    let n = w as u64 * h as u64;
    if n > QOI16_MAX_PIXELS {
        return Err(CodecError::DimensionOverflow(w, h));
    }
    // one chunk byte yields at most MAX_RUN pixels
    let body = (bytes.len() - QOI16_HEADER_LEN) as u64;
    if n > body.saturating_mul(MAX_RUN as u64) {
        return Err(CodecError::Truncated);
    }
    let n = n as usize;
    let mut px = Vec::with_capacity(n);
    let mut r = Reader { bytes, pos: QOI16_HEADER_LEN };
    let mut index = [0u16; 64];
    let mut prev = 0u16;
    while px.len() < n {
        let start = r.pos;
        let b = r.byte()?;
        let value = match b & MASK_2 {
            OP_INDEX => index[(b & 0x3f) as usize],
            OP_DIFF6 => prev.wrapping_add(((b & 0x3f) as i32 - 32) as u16),
            OP_RUN => {
                let count = (b & 0x3f) as usize + 1;
                if px.len() + count > n {
                    return Err(CodecError::Corrupt(start));
                }
                px.extend(core::iter::repeat_n(prev, count));
                continue;
            }
            _ => {
                let lo = r.byte()?;
                if b == 0xff && lo == 0xff {
                    u16::from_be_bytes([r.byte()?, r.byte()?])
                } else {
                    let biased = (((b & 0x3f) as i32) << 8) | lo as i32;
                    prev.wrapping_add((biased - DIFF14_BIAS) as u16)
                }
            }
        };
        index[hash(value)] = value;
        prev = value;
        px.push(value);
    }
    let rest = &bytes[r.pos..];
    if rest.len() < QOI16_END_MARKER.len() {
        return Err(CodecError::Truncated);
    }
    if rest[..8] != QOI16_END_MARKER {
        return Err(CodecError::MissingEndMarker);
    }
    if rest.len() > 8 {
        return Err(CodecError::TrailingBytes(rest.len() - 8));
    }
    Ok(Raster::from_vec(w as usize, h as usize, px).expect("pixel count checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn header(w: u32, h: u32) -> Vec<u8> {
        let mut v = b"qo16".to_vec();
        v.extend_from_slice(&w.to_be_bytes());
        v.extend_from_slice(&h.to_be_bytes());
        v.extend_from_slice(&[0, 0]);
        v
    }

    #[test]
    fn all_zero_row_is_one_run() {
        let enc = qoi16_encode(&Raster::filled(4, 1, 0)).unwrap();
        let mut expect = header(4, 1);
        expect.push(0x83);
        expect.extend_from_slice(&QOI16_END_MARKER);
        assert_eq!(enc, expect);
        assert_eq!(qoi16_decode(&expect).unwrap().as_slice(), &[0, 0, 0, 0]);
    }

    #[test]
    fn diff14_then_diff6() {
        let enc = qoi16_encode(&Raster::from_vec(2, 1, vec![100, 101]).unwrap()).unwrap();
        assert_eq!(&enc[QOI16_HEADER_LEN..enc.len() - 8], &[0xe0, 0x64, 0x61]);
    }

    #[test]
    fn index_hit_after_excursion() {
        // 5000 (DIFF14), 30000 (LITERAL, delta 25000), 5000 (INDEX)
        let enc = qoi16_encode(&Raster::from_vec(3, 1, vec![5000, 30000, 5000]).unwrap()).unwrap();
        let body = &enc[QOI16_HEADER_LEN..enc.len() - 8];
        let d = 5000 + 8192;
        assert_eq!(body, &[0xc0 | (d >> 8) as u8, d as u8, 0xff, 0xff, 0x75, 0x30, hash(5000) as u8]);
    }

    #[test]
    fn reserved_diff14_pattern_becomes_literal() {
        // delta +8191 would encode as 0xff 0xff
        let enc = qoi16_encode(&Raster::from_vec(1, 1, vec![8191]).unwrap()).unwrap();
        assert_eq!(&enc[QOI16_HEADER_LEN..enc.len() - 8], &[0xff, 0xff, 0x1f, 0xff]);
        let enc = qoi16_encode(&Raster::from_vec(1, 1, vec![8190]).unwrap()).unwrap();
        assert_eq!(&enc[QOI16_HEADER_LEN..enc.len() - 8], &[0xff, 0xfe]);
        let enc = qoi16_encode(&Raster::from_vec(1, 1, vec![(-8192i16) as u16]).unwrap()).unwrap();
        assert_eq!(&enc[QOI16_HEADER_LEN..enc.len() - 8], &[0xc0, 0x00]);
    }

    #[test]
    fn long_runs_split_at_64() {
        let enc = qoi16_encode(&Raster::filled(130, 1, 0)).unwrap();
        assert_eq!(&enc[QOI16_HEADER_LEN..enc.len() - 8], &[0xbf, 0xbf, 0x81]);
    }

    #[test]
    fn wraparound_deltas() {
        let r = Raster::from_vec(4, 1, vec![65534, 1, 65535, 0]).unwrap();
        let enc = qoi16_encode(&r).unwrap();
        // 65534 = prev - 2 (DIFF6), 1 = +3 wrapping (DIFF6)
        assert_eq!(&enc[QOI16_HEADER_LEN..QOI16_HEADER_LEN + 2], &[0x40 | 30, 0x40 | 35]);
        assert_eq!(qoi16_decode(&enc).unwrap(), r);
    }

    #[test]
    fn decode_errors() {
        let good = qoi16_encode(&Raster::filled(4, 1, 0)).unwrap();
        assert_eq!(qoi16_decode(&good[..QOI16_HEADER_LEN]), Err(CodecError::Truncated));
        let mut bad = good.clone();
        bad[0] = b'x';
        assert_eq!(qoi16_decode(&bad), Err(CodecError::BadMagic));
        let mut no_end = good.clone();
        *no_end.last_mut().unwrap() = 0;
        assert_eq!(qoi16_decode(&no_end), Err(CodecError::MissingEndMarker));
        let mut huge = header(1 << 20, 1 << 20);
        huge.extend_from_slice(&QOI16_END_MARKER);
        assert_eq!(qoi16_decode(&huge), Err(CodecError::DimensionOverflow(1 << 20, 1 << 20)));
        let mut trailing = good.clone();
        trailing.push(9);
        assert_eq!(qoi16_decode(&trailing), Err(CodecError::TrailingBytes(1)));
        let mut overrun = header(2, 1);
        overrun.push(0x83);
        overrun.extend_from_slice(&QOI16_END_MARKER);
        assert_eq!(qoi16_decode(&overrun), Err(CodecError::Corrupt(QOI16_HEADER_LEN)));
        assert_eq!(qoi16_encode(&Raster::filled(0, 3, 0u16)), Err(CodecError::ZeroDimension));
    }

    #[test]
    fn constant_raster_is_runs() {
        let n: usize = 320 * 240;
        let enc = qoi16_encode(&Raster::filled(320, 240, 2750)).unwrap();
        // first pixel is one DIFF14 chunk, the rest are full runs
        assert_eq!(enc.len(), QOI16_HEADER_LEN + 2 + (n - 1).div_ceil(64) + 8);
    }

    fn arb_raster() -> impl Strategy<Value = Raster<u16>> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            let n = w * h;
            prop_oneof![
                proptest::collection::vec(any::<u16>(), n),
                proptest::collection::vec(prop_oneof![Just(0u16), 2000u16..2100], n),
                (any::<u16>(), -40i32..40).prop_map(move |(s, k)| (0..n).map(|i| (s as i32 + k * i as i32) as u16).collect()),
            ]
            .prop_map(move |v| Raster::from_vec(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn lossless(r in arb_raster()) {
            let enc = qoi16_encode(&r).unwrap();
            prop_assert!(enc.len() <= 4 * r.len() + QOI16_HEADER_LEN + 8);
            prop_assert_eq!(qoi16_decode(&enc).unwrap(), r);
        }

        #[test]
        fn decoder_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..64), magic in any::<bool>()) {
            let mut b = bytes;
            if magic && b.len() >= 4 {
                b[..4].copy_from_slice(b"qo16");
            }
            let _ = qoi16_decode(&b);
        }
    }
}
