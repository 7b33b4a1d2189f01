//! Threaded loopback pipeline: per-unit capture, densify and encode threads
//! send over TCP to per-connection receive and decode threads, and the
//! calling thread fuses and renders each complete frame set.

use std::collections::BTreeMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use telestage_core::capture::{sample_unit, schedule_sweeps, GroundTruthRenderer, RgbdFrame, SampleParams, SceneConfig, SweepPlan, SweepSchedule};
use telestage_core::codec::EncodedFrame;
use telestage_core::densify::{DensifyConfig, Densifier};
use telestage_core::fusion::{fuse_render, BiasConfig, RenderOutput, UnitView, VirtualCamera};
use telestage_core::geometry::UnitCalibration;
use telestage_core::haptics::{gait_gate, synth_gait, AccelStream, GaitSpec, GateConfig, DEFAULT_SCALE};
use telestage_core::rng;
use telestage_core::transport::{ClockProbe, HapticBlock, Meter, MeterSample, RecordType, StageStamps, WireRecord};

use crate::clock::{now_us, sleep_until_us};
use crate::config::PipelineConfig;
use crate::formats;
use crate::frame::{decode_frame, encode_frame};
use crate::net::{RecordReader, RecordWriter};
use crate::report::LatencyReport;
use crate::rig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("endpoint {addr} unreachable: {source}")]
    Unreachable { addr: String, source: std::io::Error },
    #[error("stream stalled: no frame for {waited_s:.1} s; stuck in stage {stage}{}", unit.map(|u| format!(" on unit {u}")).unwrap_or_default())]
    Stalled { stage: &'static str, unit: Option<u16>, waited_s: f64 },
    #[error("{stage} failed on stream {stream}: {msg}")]
    Worker { stage: &'static str, stream: u16, msg: String },
    #[error("fusion failed: {0}")]
    Fusion(#[from] telestage_core::fusion::FusionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const STREAM_VIDEO: u8 = 0;
const STREAM_HAPTIC: u8 = 1;
const HAPTIC_BLOCK_S: f64 = 0.1;
/// Lead time between thread start-up and the first capture trigger.
const START_DELAY_US: u64 = 300_000;

/// Last sequence number each stage has finished, per unit (`u32::MAX` = none).
#[derive(Debug)]
struct Progress {
    captured: Vec<AtomicU32>,
    sent: Vec<AtomicU32>,
    received: Vec<AtomicU32>,
    decoded: Vec<AtomicU32>,
}

impl Progress {
    fn new(units: usize) -> Self {
        let v = || (0..units).map(|_| AtomicU32::new(u32::MAX)).collect();
        Progress { captured: v(), sent: v(), received: v(), decoded: v() }
    }

    fn mark(slot: &AtomicU32, seq: u32) {
        slot.store(seq, Ordering::Relaxed);
    }

    fn count(slot: &AtomicU32) -> i64 {
        match slot.load(Ordering::Relaxed) {
            u32::MAX => 0,
            s => s as i64 + 1,
        }
    }

    /// Where frames stopped moving: the first hand-off, in pipeline order,
    /// at which some unit has more frames upstream than downstream.
    fn stalled_stage(&self, fused: &BTreeMap<u16, i64>) -> (&'static str, Option<u16>) {
        for u in 0..self.captured.len() {
            let counts = [
                Self::count(&self.captured[u]),
                Self::count(&self.sent[u]),
                Self::count(&self.received[u]),
                Self::count(&self.decoded[u]),
                fused.get(&(u as u16)).copied().unwrap_or(0),
            ];
            if counts[0] == 0 {
                return ("capture", Some(u as u16));
            }
            let names = ["encode", "network", "decode", "render"];
            if let Some(i) = (0..4).find(|&i| counts[i] > counts[i + 1]) {
                return (names[i], Some(u as u16));
            }
        }
        ("capture", None)
    }
}

enum Msg {
    Frame { unit: u16, seq: u32, frame: RgbdFrame, stamps: StageStamps, wire_bytes: u64, probe_bytes: u64 },
    Haptic { block: HapticBlock, wire_bytes: u64, ts_us: u64 },
    Done,
    Failed(PipelineError),
}

fn worker_err(stage: &'static str, stream: u16) -> impl Fn(String) -> PipelineError {
    move |msg| PipelineError::Worker { stage, stream, msg }
}

struct Shared {
    cfg: PipelineConfig,
    scene: SceneConfig,
    rig: Vec<UnitCalibration>,
    t0_us: u64,
    stop: AtomicBool,
    progress: Progress,
}

fn connect(addr: SocketAddr, kind: u8, id: u16) -> Result<TcpStream, PipelineError> {
    let mut s = TcpStream::connect(addr).map_err(|source| PipelineError::Unreachable { addr: addr.to_string(), source })?;
    s.set_nodelay(true)?;
    // stream hello: kind u8, id u16
    use std::io::Write;
    let id = id.to_le_bytes();
    s.write_all(&[kind, id[0], id[1]])?;
    Ok(s)
}

/// Sparse sensor frames of one unit, rendered and sampled in order.
struct SensorSim<'a> {
    truth: GroundTruthRenderer<'a>,
    plan: SweepPlan,
    params: SampleParams,
    fps: f64,
}

impl<'a> SensorSim<'a> {
    fn new(sh: &'a Shared, unit: u16) -> Result<Self, PipelineError> {
        let cfg = &sh.cfg;
        let sweep = SweepSchedule::staggered(cfg.n_lidars, cfg.fps / cfg.n_lidars as f64);
        let plan = schedule_sweeps(&sweep, cfg.fps).map_err(|e| worker_err("capture", unit)(e.to_string()))?;
        Ok(SensorSim {
            truth: GroundTruthRenderer::new(&sh.scene, &sh.rig[unit as usize]),
            plan,
            params: SampleParams { noise_sigma_m: cfg.noise_sigma_m, dropout: cfg.dropout, seed: cfg.seed },
            fps: cfg.fps,
        })
    }

    fn frame(&self, seq: u32) -> Result<RgbdFrame, PipelineError> {
        let mut gt = self.truth.render(seq as f64 / self.fps);
        gt.seq = seq;
        sample_unit(&gt, &self.plan.phase(seq as u64), &self.params).map_err(|e| worker_err("capture", gt.unit_id)(e.to_string()))
    }
}

fn presimulate(sh: &Shared) -> Result<Vec<Vec<RgbdFrame>>, PipelineError> {
    (0..sh.cfg.units)
        .map(|u| {
            let sim = SensorSim::new(sh, u)?;
            (0..sh.cfg.frames()).map(|seq| sim.frame(seq)).collect()
        })
        .collect()
}

fn video_sender(sh: Arc<Shared>, unit: u16, addr: SocketAddr, pre: Option<Vec<RgbdFrame>>) -> Result<(), PipelineError> {
    let cfg = &sh.cfg;
    let stream = connect(addr, STREAM_VIDEO, unit)?;
    let mut w = RecordWriter::new(stream);
    let dcfg = DensifyConfig { tau: cfg.tau, radius: cfg.radius.unwrap_or_else(|| DensifyConfig::for_width(cfg.width as usize).radius) };
    let mut densifier = Densifier::new(dcfg);
    let period_us = 1e6 / cfg.fps;
    let sim = if pre.is_none() { Some(SensorSim::new(&sh, unit)?) } else { None };
    let mut pre = pre.map(Vec::into_iter);
    for seq in 0..cfg.frames() {
        if sh.stop.load(Ordering::Relaxed) {
            break;
        }
        let trigger = sh.t0_us + (seq as f64 * period_us) as u64;
        sleep_until_us(trigger);
        let mut sampled = match (&mut pre, &sim) {
            (Some(it), _) => it.next().ok_or_else(|| worker_err("capture", unit)(format!("no simulated frame {seq}")))?,
            (None, Some(sim)) => sim.frame(seq)?,
            (None, None) => unreachable!("either presimulated or live"),
        };
        sampled.capture_ts_us = trigger;
        let capture_ts = now_us();
        Progress::mark(&sh.progress.captured[unit as usize], seq);
        let (fused, _) = densifier.process(&sampled).map_err(|e| worker_err("densify", unit)(e.to_string()))?;
        let enc = encode_frame(&fused, cfg.jpeg_quality).map_err(|e| worker_err("encode", unit)(e.to_string()))?;
        let encode_done = now_us();
        let probe = ClockProbe { unit_id: unit, seq, capture_ts_us: capture_ts, encode_done_us: encode_done, send_ts_us: 0 };
        if let Err(e) = w.send_frame(probe, &enc) {
            if sh.stop.load(Ordering::Relaxed) {
                break;
            }
            return Err(worker_err("send", unit)(e.to_string()));
        }
        Progress::mark(&sh.progress.sent[unit as usize], seq);
    }
    Ok(())
}

fn haptic_sender(sh: Arc<Shared>, sensor: u16, addr: SocketAddr) -> Result<(), PipelineError> {
    let cfg = &sh.cfg;
    let stream = connect(addr, STREAM_HAPTIC, sensor)?;
    let mut w = RecordWriter::new(stream);
    let cadence = 2.0;
    let spec = GaitSpec {
        sensor_id: sensor,
        cadence_hz: cadence,
        n_steps: ((cfg.duration_s - 1.0) * cadence).max(0.0) as usize,
        lead_s: 0.5,
        tail_s: 0.5,
        sample_rate_hz: cfg.haptic_rate_hz as f64,
        seed: cfg.seed,
        ..GaitSpec::default()
    };
    let (s, _) = synth_gait(&spec);
    let total = ((cfg.duration_s * s.sample_rate_hz) as usize).min(s.samples.len());
    let per = ((s.sample_rate_hz * HAPTIC_BLOCK_S) as usize).max(1);
    for start in (0..total).step_by(per) {
        if sh.stop.load(Ordering::Relaxed) {
            break;
        }
        let end = (start + per).min(total);
        let offset_us = (start as f64 * 1e6 / s.sample_rate_hz) as u64;
        sleep_until_us(sh.t0_us + (end as f64 * 1e6 / s.sample_rate_hz) as u64);
        let b = HapticBlock { sensor_id: sensor, start_ts_us: sh.t0_us + offset_us, sample_rate_hz: cfg.haptic_rate_hz, samples: s.samples[start..end].to_vec() };
        if let Err(e) = w.send(&[&WireRecord::new(RecordType::Haptic, b.to_bytes())]) {
            if sh.stop.load(Ordering::Relaxed) {
                break;
            }
            return Err(worker_err("send", sensor)(e.to_string()));
        }
    }
    Ok(())
}

struct Arrival {
    rec: WireRecord,
    probe: Option<(ClockProbe, u64)>,
    at_us: u64,
}

/// Reads records and timestamps their arrival.
fn reader(sh: Arc<Shared>, stream: TcpStream, unit: u16, tx: Sender<Arrival>) -> Result<(), PipelineError> {
    let mut r = RecordReader::new(stream);
    let mut probe = None;
    loop {
        let rec = match r.next_record() {
            Ok(Some(rec)) => rec,
            Ok(None) => return Ok(()),
            Err(e) if sh.stop.load(Ordering::Relaxed) => {
                debug!("reader {unit} stopping: {e}");
                return Ok(());
            }
            Err(e) => return Err(worker_err("receive", unit)(e.to_string())),
        };
        let at_us = now_us();
        if rec.record_type == RecordType::ClockProbe {
            let p = ClockProbe::from_bytes(&rec.payload).map_err(|e| worker_err("receive", unit)(e.to_string()))?;
            probe = Some((p, rec.wire_len() as u64));
            continue;
        }
        if tx.send(Arrival { rec, probe: probe.take(), at_us }).is_err() {
            return Ok(());
        }
    }
}

/// Holds each record for the configured artificial delay, then decodes it.
fn delay_and_decode(sh: Arc<Shared>, kind: u8, id: u16, rx: Receiver<Arrival>, out: Sender<Msg>) -> Result<(), PipelineError> {
    let cfg = &sh.cfg;
    let mut jitter = rng::derive(cfg.seed, &[0x7e1a, kind as u64, id as u64]);
    let mut last_due = 0u64;
    for a in rx {
        let extra_ms = cfg.delay_ms + if cfg.jitter_ms > 0.0 { jitter.random_range(0.0..=cfg.jitter_ms) } else { 0.0 };
        let recv_ts = if extra_ms > 0.0 {
            let due = (a.at_us + (extra_ms * 1000.0) as u64).max(last_due);
            last_due = due;
            sleep_until_us(due);
            now_us().max(due)
        } else {
            a.at_us
        };
        let wire_bytes = a.rec.wire_len() as u64;
        let msg = match a.rec.record_type {
            RecordType::Frame => {
                if let Some((p, _)) = a.probe {
                    Progress::mark(&sh.progress.received[id as usize], p.seq);
                }
                let err = worker_err("decode", id);
                let e = EncodedFrame::from_bytes(&a.rec.payload).map_err(|e| err(e.to_string()))?;
                let frame = decode_frame(&e).map_err(|e| err(e.to_string()))?;
                let decode_done = now_us();
                let Some((p, probe_bytes)) = a.probe.filter(|(p, _)| p.seq == e.seq && p.unit_id == e.unit_id) else {
                    return Err(err(format!("frame {} arrived without its clock probe", e.seq)));
                };
                Progress::mark(&sh.progress.decoded[id as usize], e.seq);
                let stamps = StageStamps { capture_ts: p.capture_ts_us, encode_done: p.encode_done_us, send_ts: p.send_ts_us, recv_ts, decode_done, render_done: 0 };
                Msg::Frame { unit: e.unit_id, seq: e.seq, frame, stamps, wire_bytes, probe_bytes }
            }
            RecordType::Haptic => {
                let block = HapticBlock::from_bytes(&a.rec.payload).map_err(|e| worker_err("decode", id)(e.to_string()))?;
                Msg::Haptic { block, wire_bytes, ts_us: recv_ts }
            }
            t => {
                debug!("stream {id}: skipping record type {}", t.code());
                continue;
            }
        };
        if out.send(msg).is_err() {
            return Ok(());
        }
    }
    let _ = out.send(Msg::Done);
    Ok(())
}

fn spawn<F>(name: String, tx: Sender<Msg>, f: F) -> JoinHandle<()>
where
    F: FnOnce() -> Result<(), PipelineError> + Send + 'static,
{
    thread::Builder::new()
        .name(name)
        .spawn(move || {
            if let Err(e) = f() {
                let _ = tx.send(Msg::Failed(e));
            }
        })
        .expect("spawn thread")
}

fn hash_render(h: &mut Sha256, seq: u32, out: &RenderOutput) {
    let n = out.rgb.as_slice().len();
    let mut buf = Vec::with_capacity(4 + n * 13);
    buf.extend_from_slice(&seq.to_le_bytes());
    buf.extend(out.rgb.as_slice().iter().flatten());
    buf.extend(out.depth.as_slice().iter().flat_map(|d| d.to_le_bytes()));
    buf.extend(out.source.as_slice().iter().flat_map(|s| s.map_or(u16::MAX, |v| v).to_le_bytes()));
    h.update(&buf);
}

struct Renderer {
    cam: VirtualCamera,
    bias: BiasConfig,
    dir: Option<PathBuf>,
}

impl Renderer {
    fn render(&self, seq: u32, frames: &[RgbdFrame], rig: &[UnitCalibration]) -> Result<RenderOutput, PipelineError> {
        let views: Vec<UnitView> = frames.iter().zip(rig).map(|(frame, cal)| UnitView { frame, cal }).collect();
        let out = fuse_render(&views, &self.cam, &self.bias)?;
        if let Some(dir) = &self.dir {
            formats::write_png(&dir.join(format!("render_{seq:06}.png")), &out.rgb).map_err(|e| worker_err("render", 0)(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Runs the full pipeline for `cfg.duration_s` seconds and reports latency
/// and traffic. The first `warmup_frames` sequence numbers are left out of
/// latency statistics but count toward traffic.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<LatencyReport, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let scene = match &cfg.scene {
        Some(p) => crate::config::load_scene(p).map_err(|e| PipelineError::Config(format!("{e:#}")))?,
        None => rig::demo_scene(),
    };
    let units = cfg.units as usize;
    let rig = rig::default_rig(cfg.units, cfg.width, cfg.height).map_err(|e| PipelineError::Config(e.to_string()))?;
    let cam = rig::default_virtual_camera(cfg.width, cfg.height).map_err(|e| PipelineError::Config(e.to_string()))?;
    if let Some(d) = &cfg.render_dir {
        std::fs::create_dir_all(d)?;
    }
    let listener = TcpListener::bind(&cfg.address).map_err(|source| PipelineError::Unreachable { addr: cfg.address.clone(), source })?;
    let addr = listener.local_addr()?;
    info!("receiver listening on {addr}");

    let period_us = 1e6 / cfg.fps;
    let mut sh = Shared {
        cfg: cfg.clone(),
        scene,
        rig: rig.clone(),
        t0_us: 0,
        stop: AtomicBool::new(false),
        progress: Progress::new(units),
    };
    let mut pre: Vec<Option<Vec<RgbdFrame>>> = match cfg.presimulate {
        true => {
            info!("simulating {} frames per unit", cfg.frames());
            presimulate(&sh)?.into_iter().map(Some).collect()
        }
        false => vec![None; units],
    };
    sh.t0_us = now_us() + START_DELAY_US;
    let sh = Arc::new(sh);
    let (tx, rx) = mpsc::channel::<Msg>();
    let mut handles = Vec::new();
    for u in 0..cfg.units {
        let (s, frames) = (sh.clone(), pre[u as usize].take());
        handles.push(spawn(format!("capture-{u}"), tx.clone(), move || video_sender(s, u, addr, frames)));
    }
    for k in 0..cfg.haptic_sensors {
        let s = sh.clone();
        handles.push(spawn(format!("shoe-{k}"), tx.clone(), move || haptic_sender(s, k, addr)));
    }

    let streams = units + cfg.haptic_sensors as usize;
    for _ in 0..streams {
        listener.set_nonblocking(false)?;
        let (mut stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        let mut hello = [0u8; 3];
        use std::io::Read;
        stream.read_exact(&mut hello)?;
        let (kind, id) = (hello[0], u16::from_le_bytes([hello[1], hello[2]]));
        let (atx, arx) = mpsc::channel();
        let s = sh.clone();
        handles.push(spawn(format!("recv-{kind}-{id}"), tx.clone(), move || reader(s, stream, id, atx)));
        let (s, t) = (sh.clone(), tx.clone());
        handles.push(spawn(format!("decode-{kind}-{id}"), tx.clone(), move || delay_and_decode(s, kind, id, arx, t)));
    }
    drop(tx);

    let renderer = Renderer { cam, bias: BiasConfig { s: cfg.s, max_skew_us: (period_us / 2.0) as u64 }, dir: cfg.render_dir.clone() };
    let result = collect(&sh, &rx, &renderer, streams);
    sh.stop.store(true, Ordering::Relaxed);
    drop(rx);
    if result.is_ok() {
        for h in handles {
            let _ = h.join();
        }
    }
    result
}

struct Pending {
    frames: Vec<Option<(RgbdFrame, StageStamps, u64, u64)>>,
    have: usize,
}

fn collect(sh: &Shared, rx: &Receiver<Msg>, renderer: &Renderer, streams: usize) -> Result<LatencyReport, PipelineError> {
    let cfg = &sh.cfg;
    let units = cfg.units as usize;
    let timeout = Duration::from_secs_f64(cfg.stall_timeout_s);
    let mut pending: BTreeMap<u32, Pending> = BTreeMap::new();
    let mut meter = Meter::new();
    let mut haptic_meter = Meter::new();
    let mut hasher = Sha256::new();
    let mut next_seq = 0u32;
    let mut rendered = 0u64;
    let mut fused_count: BTreeMap<u16, i64> = BTreeMap::new();
    let mut haptic: BTreeMap<u16, Vec<HapticBlock>> = BTreeMap::new();
    let mut done = 0usize;
    while done < streams {
        let msg = match rx.recv_timeout(timeout) {
            Ok(m) => m,
            Err(RecvTimeoutError::Timeout) => {
                let (stage, unit) = sh.progress.stalled_stage(&fused_count);
                return Err(PipelineError::Stalled { stage, unit, waited_s: cfg.stall_timeout_s });
            }
            Err(RecvTimeoutError::Disconnected) => break,
        };
        match msg {
            Msg::Failed(e) => return Err(e),
            Msg::Done => done += 1,
            Msg::Haptic { block, wire_bytes, ts_us } => {
                haptic_meter.record(&MeterSample { record_type: RecordType::Haptic, wire_bytes, ts_us, points: None, stamps: None });
                haptic.entry(block.sensor_id).or_default().push(block);
            }
            Msg::Frame { unit, seq, frame, stamps, wire_bytes, probe_bytes } => {
                if seq < next_seq {
                    warn!("late frame {seq} of unit {unit} discarded");
                    continue;
                }
                let p = pending.entry(seq).or_insert_with(|| Pending { frames: vec![None; units], have: 0 });
                if p.frames[unit as usize].replace((frame, stamps, wire_bytes, probe_bytes)).is_none() {
                    p.have += 1;
                }
                // fuse complete sets in order; older incomplete sets are dropped
                while let Some(seq) = pending.iter().find(|(_, p)| p.have == units).map(|(s, _)| *s) {
                    pending.retain(|s, _| {
                        if *s < seq {
                            warn!("dropping incomplete frame set {s}");
                        }
                        *s >= seq
                    });
                    let set = pending.remove(&seq).expect("present");
                    let (frames, meta): (Vec<RgbdFrame>, Vec<(StageStamps, u64, u64)>) =
                        set.frames.into_iter().map(|f| f.expect("complete")).map(|(f, s, w, pb)| (f, (s, w, pb))).unzip();
                    let out = renderer.render(seq, &frames, &sh.rig)?;
                    let render_done = now_us();
                    hash_render(&mut hasher, seq, &out);
                    rendered += 1;
                    next_seq = seq + 1;
                    for (u, (f, (mut st, w, pb))) in frames.iter().zip(meta).enumerate() {
                        st.render_done = render_done.max(st.decode_done);
                        let stamps = (seq >= cfg.warmup_frames).then_some(st);
                        meter.record(&MeterSample { record_type: RecordType::ClockProbe, wire_bytes: pb, ts_us: st.recv_ts, points: None, stamps: None });
                        meter.record(&MeterSample { record_type: RecordType::Frame, wire_bytes: w, ts_us: st.recv_ts, points: Some(f.valid_depth_count() as u64), stamps });
                        fused_count.insert(u as u16, seq as i64 + 1);
                    }
                }
            }
        }
    }
    let expected = if units > 0 { cfg.frames() as u64 } else { 0 };
    let mut rep = LatencyReport {
        units: cfg.units,
        frames_expected: expected,
        frames_rendered: rendered,
        frames_dropped: expected - rendered,
        warmup_frames: cfg.warmup_frames,
        haptic_sensors: cfg.haptic_sensors,
        content_hash: (rendered > 0).then(|| hex(&hasher.finalize())),
        ..Default::default()
    };
    // video and haptics span different intervals, so rates are taken per stream kind
    let traffic = |m: &Meter| m.report(None).map_err(|e| PipelineError::Config(e.to_string()));
    if meter.records() > 0 {
        rep = rep.with_traffic(&traffic(&meter)?);
    }
    if haptic_meter.records() > 0 {
        let h = traffic(&haptic_meter)?;
        rep.haptic_bitrate_bps = h.bitrate_bps;
        rep.total_bitrate_bps = match (rep.frame_bitrate_bps, h.bitrate_bps) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
    }
    if cfg.haptic_sensors > 0 {
        let gate = GateConfig::default();
        let mut steps = 0u64;
        for (sensor, blocks) in &haptic {
            let samples: Vec<[i16; 3]> = blocks.iter().flat_map(|b| b.samples.iter().copied()).collect();
            let s = AccelStream { sensor_id: *sensor, sample_rate_hz: cfg.haptic_rate_hz as f64, scale: DEFAULT_SCALE, start_ts_us: 0, samples };
            match gait_gate(&s, &gate) {
                Ok(g) => steps += g.events.len() as u64,
                Err(e) => warn!("sensor {sensor}: {e}"),
            }
        }
        rep.haptic_events = Some(steps);
    }
    Ok(rep)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
