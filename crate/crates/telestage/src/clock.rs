//! Process-wide microsecond clock shared by every pipeline stage.

use std::sync::OnceLock;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

struct Anchor {
    instant: Instant,
    unix_us: u64,
}

static ANCHOR: OnceLock<Anchor> = OnceLock::new();

fn anchor() -> &'static Anchor {
    ANCHOR.get_or_init(|| Anchor {
        instant: Instant::now(),
        unix_us: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0),
    })
}

/// Monotonic microseconds, anchored to Unix time at first use so stamps from
/// separate processes on one host stay comparable.
pub fn now_us() -> u64 {
    let a = anchor();
    a.unix_us + a.instant.elapsed().as_micros() as u64
}

/// Sleeps until `now_us() >= t_us`.
pub fn sleep_until_us(t_us: u64) {
    let now = now_us();
    if t_us > now {
        std::thread::sleep(Duration::from_micros(t_us - now));
    }
}
