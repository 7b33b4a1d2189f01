//! Host-side half of the telestage pipeline: JPEG frame coding, file formats,
//! TCP transport, the threaded loopback pipeline and its latency report.
//!
//! All algorithms live in [`telestage_core`], re-exported here as `core`.

pub use telestage_core as core;

pub mod calib;
pub mod clock;
pub mod config;
pub mod formats;
pub mod frame;
pub mod net;
pub mod pipeline;
pub mod report;
pub mod rig;
