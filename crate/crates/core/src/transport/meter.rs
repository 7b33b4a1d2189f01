use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::stamps::{StageStamps, STAGE_NAMES};
use super::wire::RecordType;
use super::TransportError;

/// Nearest-rank percentile of an ascending slice, `p` in (0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = crate::math::ceil(p / 100.0 * sorted.len() as f64).max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn from_us(values: &[u64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = values.iter().map(|v| *v as f64 / 1000.0).collect();
        ms.sort_by(f64::total_cmp);
        Some(LatencySummary {
            count: ms.len(),
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            p50_ms: percentile(&ms, 50.0)?,
            p95_ms: percentile(&ms, 95.0)?,
            p99_ms: percentile(&ms, 99.0)?,
            max_ms: ms[ms.len() - 1],
        })
    }
}

/// One observed record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterSample {
    pub record_type: RecordType,
    pub wire_bytes: u64,
    /// Arrival time, microseconds.
    pub ts_us: u64,
    /// Valid depth pixels in the decoded frame.
    pub points: Option<u64>,
    pub stamps: Option<StageStamps>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct KindTotals {
    records: u64,
    bytes: u64,
}

/// Accumulates traffic. Totals are plain sums, so merging two meters gives the
/// same totals as metering the concatenated streams.
#[derive(Debug, Clone, Default)]
pub struct Meter {
    kinds: BTreeMap<RecordType, KindTotals>,
    first_ts: Option<u64>,
    last_ts: Option<u64>,
    frames: u64,
    points_total: u64,
    points_frames: u64,
    end_to_end_us: Vec<u64>,
    stage_us: [Vec<u64>; 5],
    non_monotone: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficReport {
    pub records: u64,
    pub wire_bytes: u64,
    /// Per record type: (records, wire bytes, bits per second).
    pub by_type: Vec<(RecordType, u64, u64, Option<f64>)>,
    pub span_s: Option<f64>,
    pub bitrate_bps: Option<f64>,
    pub fps: Option<f64>,
    pub points_per_frame: Option<f64>,
    pub end_to_end: Option<LatencySummary>,
    pub stages: Vec<(&'static str, LatencySummary)>,
    /// Samples whose stamps were not monotone; excluded from latencies.
    pub non_monotone: u64,
}

impl Meter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, s: &MeterSample) {
        let k = self.kinds.entry(s.record_type).or_default();
        k.records += 1;
        k.bytes += s.wire_bytes;
        self.first_ts = Some(self.first_ts.map_or(s.ts_us, |f| f.min(s.ts_us)));
        self.last_ts = Some(self.last_ts.map_or(s.ts_us, |l| l.max(s.ts_us)));
        if s.record_type == RecordType::Frame {
            self.frames += 1;
        }
        if let Some(p) = s.points {
            self.points_total += p;
            self.points_frames += 1;
        }
        if let Some(st) = s.stamps {
            match st.deltas() {
                Some(d) => {
                    self.end_to_end_us.push(st.render_done - st.capture_ts);
                    for (acc, v) in self.stage_us.iter_mut().zip(d) {
                        acc.push(v);
                    }
                }
                None => self.non_monotone += 1,
            }
        }
    }

    pub fn merge(&mut self, other: &Meter) {
        for (t, k) in &other.kinds {
            let mine = self.kinds.entry(*t).or_default();
            mine.records += k.records;
            mine.bytes += k.bytes;
        }
        self.first_ts = match (self.first_ts, other.first_ts) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.last_ts = match (self.last_ts, other.last_ts) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.frames += other.frames;
        self.points_total += other.points_total;
        self.points_frames += other.points_frames;
        self.end_to_end_us.extend_from_slice(&other.end_to_end_us);
        for (a, b) in self.stage_us.iter_mut().zip(&other.stage_us) {
            a.extend_from_slice(b);
        }
        self.non_monotone += other.non_monotone;
    }

    pub fn records(&self) -> u64 {
        self.kinds.values().map(|k| k.records).sum()
    }

    pub fn wire_bytes(&self) -> u64 {
        self.kinds.values().map(|k| k.bytes).sum()
    }

    /// Builds the report. Rates use `window` (start, end in microseconds)
    /// when given; otherwise the arrival span extrapolated by one mean
    /// inter-arrival gap, `(last - first) * n / (n - 1)`, so `n` records
    /// evenly spread over one second span exactly one second. A single record
    /// without a window has no defined rate.
    pub fn report(&self, window: Option<(u64, u64)>) -> Result<TrafficReport, TransportError> {
        let n = self.records();
        if n == 0 {
            return Err(TransportError::EmptyStream);
        }
        let span_s = match window {
            Some((a, b)) if b > a => Some((b - a) as f64 / 1e6),
            Some(_) => return Err(TransportError::BadWindow),
            None => match (self.first_ts, self.last_ts) {
                (Some(f), Some(l)) if n >= 2 && l > f => Some((l - f) as f64 / 1e6 * n as f64 / (n - 1) as f64),
                _ => None,
            },
        };
        let rate = |bytes: u64| span_s.map(|s| bytes as f64 * 8.0 / s);
        let by_type = self.kinds.iter().map(|(t, k)| (*t, k.records, k.bytes, rate(k.bytes))).collect();
        let fps = match span_s {
            Some(s) if self.frames >= 2 => Some(self.frames as f64 / s),
            _ => None,
        };
        let stages = STAGE_NAMES
            .iter()
            .zip(&self.stage_us)
            .filter_map(|(name, v)| LatencySummary::from_us(v).map(|s| (*name, s)))
            .collect();
        Ok(TrafficReport {
            records: n,
            wire_bytes: self.wire_bytes(),
            by_type,
            span_s,
            bitrate_bps: rate(self.wire_bytes()),
            fps,
            points_per_frame: (self.points_frames > 0).then(|| self.points_total as f64 / self.points_frames as f64),
            end_to_end: LatencySummary::from_us(&self.end_to_end_us),
            stages,
            non_monotone: self.non_monotone,
        })
    }
}

/// Meters a finished stream of samples.
pub fn meter<'a>(samples: impl IntoIterator<Item = &'a MeterSample>, window: Option<(u64, u64)>) -> Result<TrafficReport, TransportError> {
    let mut m = Meter::new();
    for s in samples {
        m.record(s);
    }
    m.report(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: RecordType, bytes: u64, ts: u64) -> MeterSample {
        MeterSample { record_type: t, wire_bytes: bytes, ts_us: ts, points: None, stamps: None }
    }

    #[test]
    fn thirty_records_one_second() {
        let s: Vec<_> = (0..30).map(|i| sample(RecordType::Haptic, 100_000, i * 1_000_000 / 30)).collect();
        let r = meter(&s, Some((0, 1_000_000))).unwrap();
        assert_eq!(r.bitrate_bps, Some(24_000_000.0));
        // evenly spaced arrivals without a window extrapolate to ~1 s
        let r = meter(&s, None).unwrap();
        assert!((r.bitrate_bps.unwrap() - 24e6).abs() / 24e6 < 1e-4);
    }

    #[test]
    fn single_record_has_no_rates() {
        let r = meter(&[sample(RecordType::Frame, 10, 5)], None).unwrap();
        assert_eq!(r.fps, None);
        assert_eq!(r.bitrate_bps, None);
        assert_eq!(r.records, 1);
    }

    #[test]
    fn empty_stream_errors() {
        assert_eq!(meter(&[], None), Err(TransportError::EmptyStream));
        assert_eq!(meter(&[sample(RecordType::Frame, 1, 0)], Some((5, 5))), Err(TransportError::BadWindow));
    }

    #[test]
    fn end_to_end_from_stamps() {
        let st = StageStamps { capture_ts: 0, encode_done: 9_000, send_ts: 9_100, recv_ts: 40_000, decode_done: 52_000, render_done: 81_300 };
        let s = MeterSample { stamps: Some(st), points: Some(1000), ..sample(RecordType::Frame, 1, 0) };
        let r = meter(&[s], None).unwrap();
        let e = r.end_to_end.unwrap();
        assert!((e.mean_ms - 81.3).abs() < 1e-9);
        assert!(e.p95_ms < 100.0 && e.p95_ms < 150.0);
        assert_eq!(r.points_per_frame, Some(1000.0));
        assert_eq!(r.stages.len(), 5);
        let stage_sum: f64 = r.stages.iter().map(|(_, s)| s.mean_ms).sum();
        assert!((stage_sum - 81.3).abs() < 1e-9);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&v, 95.0), Some(95.0));
        assert_eq!(percentile(&v, 50.0), Some(50.0));
        assert_eq!(percentile(&[3.0], 99.0), Some(3.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    proptest! {
        #[test]
        fn totals_additive(a in proptest::collection::vec((1u8..4, 0u64..10_000, 0u64..1_000_000), 1..20),
                           b in proptest::collection::vec((1u8..4, 0u64..10_000, 0u64..1_000_000), 1..20)) {
            let to = |v: &[(u8, u64, u64)]| v.iter().map(|&(t, n, ts)| sample(RecordType::from_code(t).unwrap(), n, ts)).collect::<Vec<_>>();
            let (sa, sb) = (to(&a), to(&b));
            let mut ma = Meter::new();
            sa.iter().for_each(|s| ma.record(s));
            let mut mb = Meter::new();
            sb.iter().for_each(|s| mb.record(s));
            let mut all = Meter::new();
            sa.iter().chain(&sb).for_each(|s| all.record(s));
            ma.merge(&mb);
            let (r1, r2) = (ma.report(Some((0, 1_000_000))).unwrap(), all.report(Some((0, 1_000_000))).unwrap());
            prop_assert_eq!(r1.wire_bytes, r2.wire_bytes);
            prop_assert_eq!(r1.records, r2.records);
            prop_assert_eq!(r1.by_type, r2.by_type);
            prop_assert_eq!(r1.bitrate_bps, r2.bitrate_bps);
        }
    }
}
