use alloc::vec::Vec;

use super::CodecError;

pub const FRAME_MAGIC: [u8; 4] = *b"DPCS";
pub const FRAME_VERSION: u16 = 1;
pub const FRAME_HEADER_LEN: usize = 28;

/// One unit's frame as carried on the wire: a JPEG color payload and a
/// QOI-16 depth payload behind a little-endian header
/// (`DPCS`, version u16, unit_id u16, seq u32, capture_ts_us u64,
/// rgb_len u32, depth_len u32).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFrame {
    pub unit_id: u16,
    pub seq: u32,
    pub capture_ts_us: u64,
    pub rgb_payload: Vec<u8>,
    pub depth_payload: Vec<u8>,
}

impl EncodedFrame {
    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.rgb_payload.len() + self.depth_payload.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let rgb_len = u32::try_from(self.rgb_payload.len()).map_err(|_| CodecError::PayloadTooLarge)?;
        let depth_len = u32::try_from(self.depth_payload.len()).map_err(|_| CodecError::PayloadTooLarge)?;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
        out.extend_from_slice(&self.unit_id.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.capture_ts_us.to_le_bytes());
        out.extend_from_slice(&rgb_len.to_le_bytes());
        out.extend_from_slice(&depth_len.to_le_bytes());
        out.extend_from_slice(&self.rgb_payload);
        out.extend_from_slice(&self.depth_payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 {
            return Err(CodecError::Truncated);
        }
        if bytes[..4] != FRAME_MAGIC {
            return Err(CodecError::BadMagic);
        }
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(CodecError::Truncated);
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != FRAME_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let rgb_len = u32_at(20) as usize;
        let depth_len = u32_at(24) as usize;
        let expected = FRAME_HEADER_LEN as u64 + rgb_len as u64 + depth_len as u64;
        if expected != bytes.len() as u64 {
            return Err(CodecError::LengthMismatch { expected: expected as usize, actual: bytes.len() });
        }
        let rgb_end = FRAME_HEADER_LEN + rgb_len;
        Ok(EncodedFrame {
            unit_id: u16_at(6),
            seq: u32_at(8),
            capture_ts_us: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            rgb_payload: bytes[FRAME_HEADER_LEN..rgb_end].to_vec(),
            depth_payload: bytes[rgb_end..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample() -> EncodedFrame {
        EncodedFrame { unit_id: 3, seq: 77, capture_ts_us: 123_456_789, rgb_payload: vec![1, 2, 3], depth_payload: vec![9; 5] }
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes().unwrap();
        assert_eq!(b.len(), FRAME_HEADER_LEN + 8);
        assert_eq!(&b[..4], b"DPCS");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..8], &[3, 0]);
        assert_eq!(&b[8..12], &77u32.to_le_bytes());
        assert_eq!(&b[12..20], &123_456_789u64.to_le_bytes());
        assert_eq!(&b[20..24], &3u32.to_le_bytes());
        assert_eq!(&b[24..28], &5u32.to_le_bytes());
        assert_eq!(EncodedFrame::from_bytes(&b).unwrap(), sample());
    }

    #[test]
    fn rejects_malformed() {
        let b = sample().to_bytes().unwrap();
        assert_eq!(EncodedFrame::from_bytes(&b[..10]), Err(CodecError::Truncated));
        assert!(matches!(EncodedFrame::from_bytes(&b[..b.len() - 1]), Err(CodecError::LengthMismatch { .. })));
        let mut v = b.clone();
        v[4] = 2;
        assert_eq!(EncodedFrame::from_bytes(&v), Err(CodecError::BadVersion(2)));
        v = b.clone();
        v[1] = b'X';
        assert_eq!(EncodedFrame::from_bytes(&v), Err(CodecError::BadMagic));
    }
}
