use std::net::TcpListener;
use std::thread;

use telestage::config::PipelineConfig;
use telestage::core::capture::{render_ground_truth, sample_unit, schedule_sweeps, SampleParams, SweepSchedule};
use telestage::core::transport::RecordType;
use telestage::frame::encode_frame;
use telestage::net::{self, SendOptions, ServeOptions};
use telestage::pipeline::{run_pipeline, PipelineError};
use telestage::{formats, rig};

fn small() -> PipelineConfig {
    PipelineConfig { units: 2, width: 64, height: 48, duration_s: 1.0, warmup_frames: 5, ..PipelineConfig::default() }
}

#[test]
fn same_seed_same_content() {
    let a = run_pipeline(&small()).unwrap();
    let b = run_pipeline(&small()).unwrap();
    assert_eq!(a.frames_rendered, 30);
    assert_eq!(a.frames_dropped, 0);
    assert!(a.content_hash.is_some());
    assert_eq!(a.content_hash, b.content_hash);
    let c = run_pipeline(&PipelineConfig { seed: 2, ..small() }).unwrap();
    assert_ne!(a.content_hash, c.content_hash);
}

#[test]
fn stamps_are_monotone_and_samples_exclude_warmup() {
    let r = run_pipeline(&small()).unwrap();
    assert_eq!(r.non_monotone, 0);
    assert_eq!(r.samples(), 2 * (30 - 5));
    let e = r.end_to_end.unwrap();
    assert!(e.p50_ms <= e.p95_ms && e.p95_ms <= e.p99_ms && e.p99_ms <= e.max_ms);
    // stage means add up to the end-to-end mean
    let sum: f64 = r.stages.iter().map(|(_, s)| s.mean_ms).sum();
    assert!((sum - e.mean_ms).abs() < 1e-6 * e.mean_ms.max(1.0), "{sum} vs {}", e.mean_ms);
    assert!(r.frame_bitrate_bps.unwrap() > 0.0);
}

#[test]
fn injected_delay_breaches_itu() {
    let r = run_pipeline(&PipelineConfig { units: 1, width: 32, height: 24, delay_ms: 200.0, ..small() }).unwrap();
    assert_eq!(r.itu_150ms(), Some(false));
    assert_eq!(r.budget_100ms(), Some(false));
    assert!(r.end_to_end.unwrap().mean_ms >= 200.0);
    let net = r.stages.iter().find(|(n, _)| n == "network").unwrap().1;
    assert!(net.mean_ms >= 200.0);
}

#[test]
fn zero_duration_is_an_error() {
    let e = run_pipeline(&PipelineConfig { duration_s: 0.0, ..small() }).unwrap_err();
    assert!(matches!(e, PipelineError::Config(_)), "{e}");
}

#[test]
fn bad_endpoint_is_reported() {
    let e = run_pipeline(&PipelineConfig { address: "203.0.113.1:9".into(), ..small() }).unwrap_err();
    assert!(matches!(e, PipelineError::Unreachable { .. }), "{e}");
}

#[test]
fn stall_names_the_stage() {
    let cfg = PipelineConfig { units: 1, width: 32, height: 24, delay_ms: 1500.0, stall_timeout_s: 0.5, ..small() };
    match run_pipeline(&cfg).unwrap_err() {
        PipelineError::Stalled { stage, unit, .. } => {
            assert_eq!(stage, "network");
            assert_eq!(unit, Some(0));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn haptics_only_run() {
    let r = run_pipeline(&PipelineConfig { units: 0, haptic_sensors: 2, duration_s: 5.0, ..small() }).unwrap();
    assert!(r.end_to_end.is_none());
    assert!(r.content_hash.is_none());
    let bps = r.haptic_bitrate_bps.unwrap();
    // two sensors, 6 bytes per sample at 1 kHz, plus headers
    assert!((96_000.0..110_000.0).contains(&bps), "{bps}");
    assert_eq!(r.haptic_events, Some(2 * 8));
    assert!(r.passes());
}

#[test]
fn send_and_serve_over_loopback() {
    let d = tempfile::tempdir().unwrap();
    let (src, dst) = (d.path().join("src"), d.path().join("dst"));
    std::fs::create_dir_all(&src).unwrap();
    let cals = rig::default_rig(2, 40, 30).unwrap();
    let scene = rig::demo_scene();
    let plan = schedule_sweeps(&SweepSchedule::staggered(3, 10.0), 30.0).unwrap();
    for seq in 0..4 {
        for cal in &cals {
            let mut gt = render_ground_truth(&scene, cal, seq as f64 / 30.0);
            gt.seq = seq;
            let f = sample_unit(&gt, &plan.phase(seq as u64), &SampleParams::default()).unwrap();
            formats::write_frame_file(&src, &encode_frame(&f, 90).unwrap()).unwrap();
        }
    }
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let out = dst.clone();
    let server = thread::spawn(move || net::serve(listener, &ServeOptions { connections: 1, out: Some(out) }).unwrap());
    let sent = net::send_dir(net::connect(addr).unwrap(), &src, &SendOptions { fps: 60.0, haptics: None, sensor_id: 0 }).unwrap();
    let report = server.join().unwrap();

    assert_eq!(report.wire_bytes, sent);
    let frames = report.by_type.iter().find(|(t, ..)| *t == RecordType::Frame).unwrap();
    assert_eq!(frames.1, 8);
    for ((seq, unit), p) in formats::list_frames(&src).unwrap() {
        let q = formats::frame_path(&dst, unit, seq);
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap(), "{}", q.display());
    }
    assert!(report.end_to_end.is_some());
}
