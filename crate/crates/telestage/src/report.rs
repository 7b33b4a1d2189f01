//! Latency report and its text / key-value renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use telestage_core::transport::{LatencySummary, TrafficReport};

pub const BUDGET_MS: f64 = 100.0;
/// One-way mouth-to-ear limit of ITU-T G.114.
pub const ITU_MS: f64 = 150.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyReport {
    pub units: u16,
    pub frames_expected: u64,
    pub frames_rendered: u64,
    pub frames_dropped: u64,
    pub warmup_frames: u32,
    /// Per-stage latency, in pipeline order.
    pub stages: Vec<(String, LatencySummary)>,
    pub end_to_end: Option<LatencySummary>,
    pub non_monotone: u64,
    pub frame_bitrate_bps: Option<f64>,
    pub haptic_bitrate_bps: Option<f64>,
    pub total_bitrate_bps: Option<f64>,
    pub fps: Option<f64>,
    pub points_per_frame: Option<f64>,
    pub haptic_sensors: u16,
    pub haptic_events: Option<u64>,
    /// SHA-256 over every fused frame in sequence order.
    pub content_hash: Option<String>,
}

impl LatencyReport {
    /// Fills traffic fields from a meter report.
    pub fn with_traffic(mut self, t: &TrafficReport) -> Self {
        let rate = |name: &str| t.by_type.iter().find(|(k, ..)| k.name() == name).and_then(|(.., r)| *r);
        self.stages = t.stages.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        self.end_to_end = t.end_to_end;
        self.non_monotone = t.non_monotone;
        let frame = rate("frame").map(|f| f + rate("clock_probe").unwrap_or(0.0));
        self.frame_bitrate_bps = frame;
        self.haptic_bitrate_bps = rate("haptic");
        self.total_bitrate_bps = t.bitrate_bps;
        self.fps = t.fps.map(|f| f / self.units.max(1) as f64);
        self.points_per_frame = t.points_per_frame;
        self
    }

    pub fn samples(&self) -> usize {
        self.end_to_end.map_or(0, |e| e.count)
    }

    /// Mean end-to-end latency against the 100 ms system budget.
    pub fn budget_100ms(&self) -> Option<bool> {
        self.end_to_end.map(|e| e.mean_ms < BUDGET_MS)
    }

    /// Mean end-to-end latency against the 150 ms ITU-T G.114 threshold.
    pub fn itu_150ms(&self) -> Option<bool> {
        self.end_to_end.map(|e| e.mean_ms < ITU_MS)
    }

    /// True unless a budget flag evaluated and failed.
    pub fn passes(&self) -> bool {
        self.budget_100ms() != Some(false) && self.itu_150ms() != Some(false)
    }
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

fn mbps(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |b| format!("{:.3} Mbps", b / 1e6))
}

/// Human-readable text and a stable `key=value` file (sorted keys).
pub fn render_report(rep: &LatencyReport) -> (String, String) {
    let mut t = String::new();
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        kv.insert(k.to_string(), v);
    };

    let _ = writeln!(t, "telestage pipeline report");
    if let Some(e2e) = rep.end_to_end {
        let _ = writeln!(
            t,
            "units {}  frames {}/{} rendered  dropped {}  samples {} (first {} frames excluded)",
            rep.units,
            rep.frames_rendered,
            rep.frames_expected,
            rep.frames_dropped,
            e2e.count,
            rep.warmup_frames
        );
        let _ = writeln!(t, "\n{:<18} {:>8} {:>8} {:>8} {:>8} {:>8}  (ms)", "stage", "mean", "p50", "p95", "p99", "max");
        let row = |t: &mut String, name: &str, s: &LatencySummary| {
            let _ = writeln!(t, "{:<18} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}", name, s.mean_ms, s.p50_ms, s.p95_ms, s.p99_ms, s.max_ms);
        };
        for (name, s) in &rep.stages {
            row(&mut t, name, s);
            for (k, v) in [("mean", s.mean_ms), ("p50", s.p50_ms), ("p95", s.p95_ms), ("p99", s.p99_ms), ("max", s.max_ms)] {
                put(&format!("stage.{name}.{k}_ms"), format!("{v:.3}"));
            }
        }
        row(&mut t, "end_to_end", &e2e);
        for (k, v) in [("mean", e2e.mean_ms), ("p50", e2e.p50_ms), ("p95", e2e.p95_ms), ("p99", e2e.p99_ms), ("max", e2e.max_ms)] {
            put(&format!("end_to_end.{k}_ms"), format!("{v:.3}"));
        }
        let _ = writeln!(t);
        let _ = writeln!(t, "budget {BUDGET_MS:.0} ms (mean end-to-end {:.1} ms): {}", e2e.mean_ms, flag(rep.budget_100ms()));
        let _ = writeln!(t, "ITU-T G.114 {ITU_MS:.0} ms one-way (mean end-to-end {:.1} ms): {}", e2e.mean_ms, flag(rep.itu_150ms()));
        let _ = writeln!(t, "p95 end-to-end {:.1} ms vs {BUDGET_MS:.0} ms: {}", e2e.p95_ms, if e2e.p95_ms < BUDGET_MS { "below" } else { "above" });
        if rep.non_monotone > 0 {
            let _ = writeln!(t, "WARNING: {} samples with non-monotone stamps excluded", rep.non_monotone);
        }
        let _ = writeln!(
            t,
            "frame bitrate {}  fps {}  points/frame {}",
            mbps(rep.frame_bitrate_bps),
            rep.fps.map_or("n/a".into(), |f| format!("{f:.2}")),
            rep.points_per_frame.map_or("n/a".into(), |p| format!("{p:.0}"))
        );
        put("units", rep.units.to_string());
        put("frames.expected", rep.frames_expected.to_string());
        put("frames.rendered", rep.frames_rendered.to_string());
        put("frames.dropped", rep.frames_dropped.to_string());
        put("samples", e2e.count.to_string());
        put("warmup_frames", rep.warmup_frames.to_string());
        put("non_monotone", rep.non_monotone.to_string());
        put("flag.budget_100ms", flag(rep.budget_100ms()).into());
        put("flag.itu_150ms", flag(rep.itu_150ms()).into());
        if let Some(b) = rep.frame_bitrate_bps {
            put("bitrate.frame_bps", format!("{b:.0}"));
        }
        if let Some(f) = rep.fps {
            put("fps", format!("{f:.3}"));
        }
        if let Some(p) = rep.points_per_frame {
            put("points_per_frame", format!("{p:.1}"));
        }
    }
    if rep.haptic_sensors > 0 || rep.haptic_bitrate_bps.is_some() {
        let _ = writeln!(t, "haptic bitrate {}  sensors {}  steps {}", mbps(rep.haptic_bitrate_bps), rep.haptic_sensors, rep.haptic_events.map_or("n/a".into(), |n| n.to_string()));
        put("haptic.sensors", rep.haptic_sensors.to_string());
        if let Some(b) = rep.haptic_bitrate_bps {
            put("bitrate.haptic_bps", format!("{b:.0}"));
        }
        if let Some(n) = rep.haptic_events {
            put("haptic.events", n.to_string());
        }
    }
    if let Some(b) = rep.total_bitrate_bps {
        put("bitrate.total_bps", format!("{b:.0}"));
    }
    let _ = writeln!(t, "reference deployment, not reproduced at this scale: 7 units, full HD, 3.5 Gbps, mean 81.3 ms");
    if let Some(h) = &rep.content_hash {
        let _ = writeln!(t, "content sha256 {h}");
        put("content_sha256", h.clone());
    }
    let kv_text = kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    (t, kv_text)
}
