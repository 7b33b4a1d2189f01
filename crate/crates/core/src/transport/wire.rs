use alloc::vec::Vec;

use super::TransportError;

/// `record_type u8` + `length u32` (little-endian).
pub const RECORD_HEADER_LEN: usize = 5;
pub const MAX_RECORD_LEN: u32 = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordType {
    Frame,
    Haptic,
    ClockProbe,
    /// Unrecognised non-zero type; skippable thanks to the length prefix.
    Other(u8),
}

impl RecordType {
    pub fn code(self) -> u8 {
        match self {
            RecordType::Frame => 1,
            RecordType::Haptic => 2,
            RecordType::ClockProbe => 3,
            RecordType::Other(c) => c,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, TransportError> {
        Ok(match code {
            0 => return Err(TransportError::ZeroType),
            1 => RecordType::Frame,
            2 => RecordType::Haptic,
            3 => RecordType::ClockProbe,
            c => RecordType::Other(c),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordType::Frame => "frame",
            RecordType::Haptic => "haptic",
            RecordType::ClockProbe => "clock_probe",
            RecordType::Other(_) => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireRecord {
    pub record_type: RecordType,
    pub payload: Vec<u8>,
}

impl WireRecord {
    pub fn new(record_type: RecordType, payload: Vec<u8>) -> Self {
        WireRecord { record_type, payload }
    }

    pub fn wire_len(&self) -> usize {
        RECORD_HEADER_LEN + self.payload.len()
    }
}

pub fn write_record(rec: &WireRecord) -> Result<Vec<u8>, TransportError> {
    let mut out = Vec::with_capacity(rec.wire_len());
    write_record_into(rec, &mut out)?;
    Ok(out)
}

pub fn write_record_into(rec: &WireRecord, out: &mut Vec<u8>) -> Result<(), TransportError> {
    if rec.record_type.code() == 0 {
        return Err(TransportError::ZeroType);
    }
    let len = rec.payload.len() as u64;
    if len >= MAX_RECORD_LEN as u64 {
        return Err(TransportError::Oversize(len));
    }
    out.push(rec.record_type.code());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    out.extend_from_slice(&rec.payload);
    Ok(())
}

/// Parses one record from the front of `bytes`. `Ok(None)` means more bytes
/// are needed; nothing is consumed in that case. Header errors are reported as
/// soon as the five header bytes are present.
pub fn read_record(bytes: &[u8]) -> Result<Option<(WireRecord, usize)>, TransportError> {
    if bytes.len() < RECORD_HEADER_LEN {
        return Ok(None);
    }
    let record_type = RecordType::from_code(bytes[0])?;
    let len = u32::from_le_bytes(bytes[1..5].try_into().unwrap());
    if len >= MAX_RECORD_LEN {
        return Err(TransportError::Oversize(len as u64));
    }
    let end = RECORD_HEADER_LEN + len as usize;
    if bytes.len() < end {
        return Ok(None);
    }
    Ok(Some((WireRecord { record_type, payload: bytes[RECORD_HEADER_LEN..end].to_vec() }, end)))
}

/// Incremental decoder for a byte stream of records. Any protocol error
/// poisons the decoder; later calls return [`TransportError::Poisoned`].
#[derive(Debug, Default)]
pub struct RecordDecoder {
    buf: Vec<u8>,
    start: usize,
    poisoned: bool,
    consumed: u64,
}

impl RecordDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    pub fn next_record(&mut self) -> Result<Option<WireRecord>, TransportError> {
        if self.poisoned {
            return Err(TransportError::Poisoned);
        }
        match read_record(&self.buf[self.start..]) {
            Ok(Some((rec, n))) => {
                self.start += n;
                self.consumed += n as u64;
                if self.start > 1 << 20 {
                    self.buf.drain(..self.start);
                    self.start = 0;
                }
                Ok(Some(rec))
            }
            Ok(None) => Ok(None),
            Err(e) => {
                self.poisoned = true;
                Err(e)
            }
        }
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Bytes buffered but not yet returned as records.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Total wire bytes of all records returned so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn empty_record_roundtrip() {
        let r = WireRecord::new(RecordType::Haptic, vec![]);
        let b = write_record(&r).unwrap();
        assert_eq!(b, vec![2, 0, 0, 0, 0]);
        assert_eq!(read_record(&b).unwrap(), Some((r, 5)));
    }

    #[test]
    fn concatenated_records_parse_in_order() {
        let a = WireRecord::new(RecordType::Frame, vec![1, 2, 3]);
        let b = WireRecord::new(RecordType::Other(77), vec![9; 10]);
        let c = WireRecord::new(RecordType::ClockProbe, vec![4]);
        let mut bytes = Vec::new();
        for r in [&a, &b, &c] {
            bytes.extend(write_record(r).unwrap());
        }
        let mut off = 0;
        let mut got = Vec::new();
        while let Some((r, n)) = read_record(&bytes[off..]).unwrap() {
            off += n;
            got.push(r);
        }
        assert_eq!(off, 8 + 15 + 6);
        assert_eq!(got, vec![a, b, c]);
    }

    #[test]
    fn oversize_length_poisons() {
        let mut d = RecordDecoder::new();
        d.feed(&[1, 0xff, 0xff, 0xff, 0xff]);
        assert_eq!(d.next_record(), Err(TransportError::Oversize(u32::MAX as u64)));
        assert!(d.is_poisoned());
        d.feed(&write_record(&WireRecord::new(RecordType::Frame, vec![])).unwrap());
        assert_eq!(d.next_record(), Err(TransportError::Poisoned));
    }

    #[test]
    fn zero_type_rejected() {
        assert_eq!(read_record(&[0, 0, 0, 0, 0]), Err(TransportError::ZeroType));
        assert_eq!(write_record(&WireRecord::new(RecordType::Other(0), vec![])), Err(TransportError::ZeroType));
    }

    #[test]
    fn partial_input_needs_more() {
        let b = write_record(&WireRecord::new(RecordType::Frame, vec![7; 20])).unwrap();
        for cut in 0..b.len() {
            assert_eq!(read_record(&b[..cut]).unwrap(), None);
        }
    }

    fn arb_record() -> impl Strategy<Value = WireRecord> {
        (1u8..=255, proptest::collection::vec(any::<u8>(), 0..40))
            .prop_map(|(t, p)| WireRecord::new(RecordType::from_code(t).unwrap(), p))
    }

    proptest! {
        #[test]
        fn roundtrip(r in arb_record()) {
            let b = write_record(&r).unwrap();
            prop_assert_eq!(read_record(&b).unwrap(), Some((r.clone(), b.len())));
        }

        #[test]
        fn any_prefix_is_whole_records_plus_tail(recs in proptest::collection::vec(arb_record(), 0..8), cut_frac in 0.0..=1.0f64) {
            let mut bytes = Vec::new();
            let mut ends = Vec::new();
            for r in &recs {
                bytes.extend(write_record(r).unwrap());
                ends.push(bytes.len());
            }
            let cut = (bytes.len() as f64 * cut_frac) as usize;
            let mut d = RecordDecoder::new();
            // feed in small chunks
            for chunk in bytes[..cut].chunks(3) {
                d.feed(chunk);
            }
            let mut got = Vec::new();
            while let Some(r) = d.next_record().unwrap() {
                got.push(r);
            }
            let whole = ends.iter().filter(|&&e| e <= cut).count();
            prop_assert_eq!(&got[..], &recs[..whole]);
            prop_assert_eq!(d.consumed() as usize + d.pending(), cut);
        }
    }
}
