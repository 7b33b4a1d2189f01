//! Algorithms for real-time tele-immersive streaming: multi-unit RGB-D capture
//! simulation, depth densification, lossless 16-bit depth coding, record
//! framing and metering, view-dependent point-cloud fusion, footstep signal
//! conditioning and vibration floor planning.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, sockets, JPEG
//! and the command-line tools live in the `telestage` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod capture;
pub mod geometry;
pub mod math;
pub mod raster;
pub mod rng;
pub mod codec;
pub mod densify;
pub mod transport;
pub mod fusion;
pub mod haptics;
pub mod floor;
