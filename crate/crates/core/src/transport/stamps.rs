/// Pipeline stage timestamps for one frame, microseconds on one shared
/// monotonic clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageStamps {
    pub capture_ts: u64,
    pub encode_done: u64,
    pub send_ts: u64,
    pub recv_ts: u64,
    pub decode_done: u64,
    pub render_done: u64,
}

/// Names of the five consecutive stage intervals returned by
/// [`StageStamps::deltas`].
pub const STAGE_NAMES: [&str; 5] = ["capture_to_encode", "encode_to_send", "network", "decode", "render"];

impl StageStamps {
    pub fn as_array(&self) -> [u64; 6] {
        [self.capture_ts, self.encode_done, self.send_ts, self.recv_ts, self.decode_done, self.render_done]
    }

    pub fn is_monotone(&self) -> bool {
        self.as_array().windows(2).all(|w| w[0] <= w[1])
    }

    /// Per-stage durations; `None` if the stamps are not monotone.
    pub fn deltas(&self) -> Option<[u64; 5]> {
        if !self.is_monotone() {
            return None;
        }
        let a = self.as_array();
        Some(core::array::from_fn(|i| a[i + 1] - a[i]))
    }

    pub fn end_to_end(&self) -> Option<u64> {
        self.render_done.checked_sub(self.capture_ts)
    }
}
