//! Record framing over a reliable byte stream, stage timestamps and traffic
//! metering.

mod meter;
mod payload;
mod stamps;
mod wire;

use thiserror::Error;

pub use meter::{meter, percentile, LatencySummary, Meter, MeterSample, TrafficReport};
pub use payload::{ClockProbe, HapticBlock, CLOCK_PROBE_LEN, HAPTIC_HEADER_LEN};
pub use stamps::{StageStamps, STAGE_NAMES};
pub use wire::{read_record, write_record, write_record_into, RecordDecoder, RecordType, WireRecord, MAX_RECORD_LEN, RECORD_HEADER_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("record length {0} exceeds the 64 MiB cap")]
    Oversize(u64),
    #[error("record type 0 is invalid")]
    ZeroType,
    #[error("stream poisoned by an earlier protocol error")]
    Poisoned,
    #[error("malformed {0} payload")]
    BadPayload(&'static str),
    #[error("no records to meter")]
    EmptyStream,
    #[error("metering window is empty or inverted")]
    BadWindow,
}
