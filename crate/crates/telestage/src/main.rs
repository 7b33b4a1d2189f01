use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use telestage::core::capture::{sample_unit, GroundTruthRenderer, schedule_sweeps, SampleParams, SweepSchedule};
use telestage::core::densify::{DensifyConfig, Densifier};
use telestage::core::floor::{map_step, plan_actuators, Connectivity, Pattern, PlanRequest, DEFAULT_LOCALIZED_RADIUS_M};
use telestage::core::fusion::{fuse_render, fused_points, BiasConfig, UnitView, VirtualCamera};
use telestage::core::haptics::{equalize, gait_gate, EqConfig, GateConfig, DEFAULT_SCALE};
use telestage::core::raster::Raster;
use telestage::frame::{decode_frame, encode_frame, DEFAULT_JPEG_QUALITY};
use telestage::net::{self, SendOptions, ServeOptions};
use telestage::pipeline::run_pipeline;
use telestage::report::{render_report, LatencyReport};
use telestage::{calib, config, formats, rig};

#[derive(Parser)]
#[command(name = "telestage", version, about = "Volumetric capture, streaming and haptic floor tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a default capture rig, virtual camera and demo scene.
    Rig(RigArgs),
    /// Simulate sparse RGB-D capture and write per-unit frame files.
    Simulate(SimulateArgs),
    /// Temporally densify frame files.
    Densify(DensifyArgs),
    /// Fuse frame files into a virtual view.
    Render(RenderArgs),
    /// Receive record streams and print a traffic report.
    Serve(ServeArgs),
    /// Stream frame files (and optionally accelerometer data) to a receiver.
    Send(SendArgs),
    /// Detect footsteps in a 3-axis accelerometer WAV.
    Haptics(HapticsArgs),
    /// Plan actuator placement or map footstep events onto a floor.
    Floor {
        #[command(subcommand)]
        cmd: FloorCmd,
    },
    /// Run the end-to-end loopback pipeline.
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
}

#[derive(Args)]
struct RigArgs {
    #[arg(long, default_value_t = 2)]
    units: u16,
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 240)]
    height: u32,
    /// Directory receiving rig.calib, cam.calib and scene.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene file (TOML); the built-in demo scene when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Calibration file, one block per unit.
    #[arg(long)]
    units: PathBuf,
    #[arg(long)]
    frames: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 3)]
    lidars: u32,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Range noise standard deviation in meters.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_JPEG_QUALITY)]
    quality: u8,
}

#[derive(Args)]
struct DensifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25)]
    tau: u8,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Also write each closed motion mask as a PGM.
    #[arg(long)]
    masks: bool,
    #[arg(long, default_value_t = DEFAULT_JPEG_QUALITY)]
    quality: u8,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Virtual camera as a single calibration block (its id is ignored).
    #[arg(long)]
    cam: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    s: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also export the fused point cloud of every frame set as PLY.
    #[arg(long)]
    ply: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    listen: String,
    #[arg(long, default_value_t = 1)]
    connections: usize,
    /// Store received frames here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SendArgs {
    #[arg(long)]
    connect: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// 3-channel accelerometer WAV to stream alongside the frames.
    #[arg(long)]
    haptics: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    sensor_id: u16,
}

#[derive(Args)]
struct HapticsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Expected sample rate; the WAV header must agree.
    #[arg(long, default_value_t = 1000)]
    rate: u32,
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value_t = 0)]
    sensor_id: u16,
    /// Sensor position on the floor, meters.
    #[arg(long, default_value_t = 0.0)]
    x: f64,
    #[arg(long, default_value_t = 0.0)]
    y: f64,
    /// Acceleration per LSB in m/s^2.
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: f64,
    /// Write the gated drive signal as mono WAV.
    #[arg(long)]
    gated: Option<PathBuf>,
    /// Write the gated and equalized drive signal as mono WAV.
    #[arg(long)]
    equalized: Option<PathBuf>,
    /// Equalizer sections (TOML); the default transducer curve when omitted.
    #[arg(long)]
    eq: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FloorCmd {
    Plan(PlanArgs),
    Map(MapArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    rows: u32,
    #[arg(long)]
    cols: u32,
    #[arg(long)]
    budget: u32,
    /// Attenuation per hop, dB.
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    max_db: f64,
    #[arg(long, default_value_t = 0.6)]
    pitch: f64,
    #[arg(long, default_value_t = 8)]
    connectivity: u32,
    /// Plan file to write; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Localized,
    FloorWide,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long, value_enum, default_value_t = PatternArg::Localized)]
    pattern: PatternArg,
    #[arg(long, default_value_t = DEFAULT_LOCALIZED_RADIUS_M)]
    radius: f64,
    /// Command CSV to write; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Where to write report.kv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exit nonzero if any latency budget fails.
    #[arg(long)]
    enforce: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Rig(a) => rig_cmd(&a)?,
        Cmd::Simulate(a) => simulate(&a)?,
        Cmd::Densify(a) => densify(&a)?,
        Cmd::Render(a) => render(&a)?,
        Cmd::Serve(a) => {
            let listener = TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
            info!("listening on {}", listener.local_addr()?);
            let t = net::serve(listener, &ServeOptions { connections: a.connections, out: a.out })?;
            print!("{}", render_report(&LatencyReport::default().with_traffic(&t)).0);
        }
        Cmd::Send(a) => {
            ensure!(a.fps > 0.0, "fps must be positive");
            let stream = net::connect(&a.connect)?;
            let n = net::send_dir(stream, &a.input, &SendOptions { fps: a.fps, haptics: a.haptics, sensor_id: a.sensor_id })?;
            println!("sent {n} bytes");
        }
        Cmd::Haptics(a) => haptics(&a)?,
        Cmd::Floor { cmd: FloorCmd::Plan(a) } => floor_plan(&a)?,
        Cmd::Floor { cmd: FloorCmd::Map(a) } => floor_map(&a)?,
        Cmd::Pipeline { cmd: PipelineCmd::Run(a) } => return pipeline_run(&a),
    }
    Ok(ExitCode::SUCCESS)
}

fn rig_cmd(a: &RigArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    let cals = rig::default_rig(a.units, a.width, a.height)?;
    calib::write_calibration(&a.out.join("rig.calib"), &cals)?;
    let cam = rig::default_virtual_camera(a.width, a.height)?;
    let cam = telestage::core::geometry::UnitCalibration::new(0, cam.intrinsics, cam.pose)?;
    calib::write_calibration(&a.out.join("cam.calib"), &[cam])?;
    std::fs::write(a.out.join("scene.toml"), config::scene_to_toml(&rig::demo_scene())?)?;
    println!("wrote rig.calib, cam.calib and scene.toml to {}", a.out.display());
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    ensure!(a.fps > 0.0, "fps must be positive");
    ensure!(a.frames > 0, "frame count must be positive");
    let scene = match &a.scene {
        Some(p) => config::load_scene(p)?,
        None => rig::demo_scene(),
    };
    let cals = calib::read_calibration(&a.units)?;
    let plan = schedule_sweeps(&SweepSchedule::staggered(a.lidars, a.fps / a.lidars as f64), a.fps)?;
    let params = SampleParams { noise_sigma_m: a.noise, dropout: a.dropout, seed: a.seed };
    std::fs::create_dir_all(&a.out)?;
    let truth: Vec<GroundTruthRenderer> = cals.iter().map(|c| GroundTruthRenderer::new(&scene, c)).collect();
    for seq in 0..a.frames {
        let t = seq as f64 / a.fps;
        for r in &truth {
            let mut gt = r.render(t);
            gt.seq = seq;
            gt.capture_ts_us = (t * 1e6) as u64;
            let f = sample_unit(&gt, &plan.phase(seq as u64), &params)?;
            formats::write_frame_file(&a.out, &encode_frame(&f, a.quality)?)?;
        }
    }
    println!("wrote {} frames for {} units to {}", a.frames, cals.len(), a.out.display());
    Ok(())
}

fn densify(a: &DensifyArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    let cfg = DensifyConfig { tau: a.tau, radius: a.radius };
    let mut per_unit: BTreeMap<u16, Densifier> = BTreeMap::new();
    let frames = formats::list_frames(&a.input)?;
    ensure!(!frames.is_empty(), "no frame files in {}", a.input.display());
    for ((seq, unit), p) in &frames {
        let f = decode_frame(&formats::read_frame_file(p)?)?;
        let d = per_unit.entry(*unit).or_insert_with(|| Densifier::new(cfg));
        let (fused, mask) = d.process(&f)?;
        formats::write_frame_file(&a.out, &encode_frame(&fused, a.quality)?)?;
        if a.masks {
            formats::write_mask_pgm(&a.out.join(format!("u{unit:03}_f{seq:06}_mask.pgm")), &mask)?;
        }
    }
    println!("densified {} frames to {}", frames.len(), a.out.display());
    Ok(())
}

fn render(a: &RenderArgs) -> Result<()> {
    let cals = calib::read_calibration(&a.calib)?;
    let cam = match calib::read_calibration(&a.cam)?.as_slice() {
        [c] => VirtualCamera::new(c.intrinsics, c.pose.clone())?,
        _ => bail!("{} must hold exactly one camera block", a.cam.display()),
    };
    let cfg = BiasConfig::with_scale(a.s);
    cfg.validate()?;
    std::fs::create_dir_all(&a.out)?;
    let mut sets: BTreeMap<u32, Vec<PathBuf>> = BTreeMap::new();
    for ((seq, _), p) in formats::list_frames(&a.input)? {
        sets.entry(seq).or_default().push(p);
    }
    ensure!(!sets.is_empty(), "no frame files in {}", a.input.display());
    for (seq, paths) in &sets {
        let frames = paths.iter().map(|p| Ok(decode_frame(&formats::read_frame_file(p)?)?)).collect::<Result<Vec<_>>>()?;
        let views = frames
            .iter()
            .map(|f| {
                let cal = cals.iter().find(|c| c.unit_id == f.unit_id).with_context(|| format!("no calibration for unit {}", f.unit_id))?;
                Ok(UnitView { frame: f, cal })
            })
            .collect::<Result<Vec<_>>>()?;
        let out = fuse_render(&views, &cam, &cfg)?;
        formats::write_png(&a.out.join(format!("rgb_{seq:06}.png")), &out.rgb)?;
        let depth_mm = out.depth.map(|z| (z * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16);
        formats::write_pgm16(&a.out.join(format!("depth_{seq:06}.pgm")), &depth_mm)?;
        let source: Raster<u8> = out.source.map(|s| s.map_or(255, |u| u.min(254) as u8));
        formats::write_pgm8(&a.out.join(format!("source_{seq:06}.pgm")), &source)?;
        if a.ply {
            formats::write_ply(&a.out.join(format!("points_{seq:06}.ply")), &fused_points(&views))?;
        }
    }
    println!("rendered {} frame sets to {}", sets.len(), a.out.display());
    Ok(())
}

fn haptics(a: &HapticsArgs) -> Result<()> {
    let s = formats::read_accel_wav(&a.input, a.sensor_id, a.scale)?;
    ensure!(s.sample_rate_hz == a.rate as f64, "{} is sampled at {} Hz, expected {}", a.input.display(), s.sample_rate_hz, a.rate);
    let gate = GateConfig { position: [a.x, a.y], ..GateConfig::default() };
    let g = gait_gate(&s, &gate)?;
    formats::write_events_csv(&a.events, &g.events)?;
    if let Some(p) = &a.gated {
        formats::write_mono_wav(p, &g.gated, s.sample_rate_hz, a.scale)?;
    }
    if let Some(p) = &a.equalized {
        let eq: EqConfig = match &a.eq {
            Some(f) => toml::from_str(&std::fs::read_to_string(f)?).with_context(|| format!("parsing {}", f.display()))?,
            None => EqConfig::default(),
        };
        let y = equalize(&g.gated, &eq, s.sample_rate_hz)?;
        formats::write_mono_wav(p, &y, s.sample_rate_hz, a.scale)?;
    }
    match g.period_s {
        Some(p) => println!("{} steps, cadence {:.2} Hz", g.events.len(), 1.0 / p),
        None => println!("{} steps", g.events.len()),
    }
    Ok(())
}

fn floor_plan(a: &PlanArgs) -> Result<()> {
    let connectivity = Connectivity::from_count(a.connectivity).context("connectivity must be 4 or 8")?;
    let req = PlanRequest { pitch_m: a.pitch, connectivity, ..PlanRequest::new(a.rows, a.cols, a.budget, a.alpha, a.max_db) };
    let o = plan_actuators(&req)?;
    let text = formats::format_plan(&o.plan);
    match &a.out {
        Some(p) => std::fs::write(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} actuators, worst-case attenuation {:.1} dB ({} target {:.1} dB)",
        o.plan.actuators().len(),
        o.max_db,
        if o.meets_target { "meets" } else { "misses" },
        a.max_db
    );
    Ok(())
}

fn floor_map(a: &MapArgs) -> Result<()> {
    let plan = formats::parse_plan(&std::fs::read_to_string(&a.plan).with_context(|| format!("reading {}", a.plan.display()))?)?;
    let pattern = match a.pattern {
        PatternArg::FloorWide => Pattern::FloorWide,
        PatternArg::Localized => Pattern::Localized { radius_m: a.radius },
    };
    let mut cmds = Vec::new();
    for ev in formats::read_events_csv(&a.events)? {
        cmds.extend(map_step(&ev, &plan, pattern)?);
    }
    match &a.out {
        Some(p) => formats::write_commands_csv(p, &cmds)?,
        None => formats::write_commands(std::io::stdout().lock(), &cmds)?,
    }
    Ok(())
}

fn pipeline_run(a: &RunArgs) -> Result<ExitCode> {
    let cfg = config::PipelineConfig::load(&a.config)?;
    let rep = run_pipeline(&cfg)?;
    let (text, kv) = render_report(&rep);
    print!("{text}");
    write_kv(&a.out, &kv)?;
    if a.enforce && !rep.passes() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_kv(dir: &Path, kv: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join("report.kv");
    std::fs::write(&p, kv).with_context(|| format!("writing {}", p.display()))
}
