//! On-disk formats: frame containers, images, point clouds, WAV, CSV and
//! floor-plan files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use telestage_core::capture::Rgb;
use telestage_core::codec::EncodedFrame;
use telestage_core::floor::{ActuatorCommand, Connectivity, FloorPlan};
use telestage_core::geometry::Vec3;
use telestage_core::haptics::{AccelStream, StepEvent};
use telestage_core::raster::Raster;

pub const FRAME_EXT: &str = "dpcs";

pub fn frame_path(dir: &Path, unit_id: u16, seq: u32) -> PathBuf {
    dir.join(format!("u{unit_id:03}_f{seq:06}.{FRAME_EXT}"))
}

fn parse_frame_name(name: &str) -> Option<(u16, u32)> {
    let stem = name.strip_suffix(&format!(".{FRAME_EXT}"))?;
    let (u, f) = stem.strip_prefix('u')?.split_once("_f")?;
    Some((u.parse().ok()?, f.parse().ok()?))
}

pub fn write_frame_file(dir: &Path, f: &EncodedFrame) -> Result<PathBuf> {
    let p = frame_path(dir, f.unit_id, f.seq);
    std::fs::write(&p, f.to_bytes()?).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

pub fn read_frame_file(p: &Path) -> Result<EncodedFrame> {
    let b = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    EncodedFrame::from_bytes(&b).with_context(|| format!("decoding {}", p.display()))
}

/// Frame files in `dir` keyed by `(seq, unit_id)`.
pub fn list_frames(dir: &Path) -> Result<BTreeMap<(u32, u16), PathBuf>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let e = e?;
        if let Some((u, s)) = e.file_name().to_str().and_then(parse_frame_name) {
            out.insert((s, u), e.path());
        }
    }
    Ok(out)
}

pub fn write_png(p: &Path, img: &Raster<Rgb>) -> Result<()> {
    let raw: Vec<u8> = img.as_slice().iter().flatten().copied().collect();
    image::save_buffer(p, &raw, img.width() as u32, img.height() as u32, ExtendedColorType::Rgb8).with_context(|| format!("writing {}", p.display()))
}

fn write_pgm(p: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    let out = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
    PnmEncoder::new(out).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary)).write_image(bytes, w as u32, h as u32, color)?;
    Ok(())
}

/// Binary 16-bit PGM (maxval 65535).
/// Binary PGM with maxval 65535 (big-endian samples). The `image` PNM
/// encoder only writes 8-bit graymaps.
pub fn write_pgm16(p: &Path, img: &Raster<u16>) -> Result<()> {
    let mut out = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
    write!(out, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    for v in img.as_slice() {
        out.write_all(&v.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pgm8(p: &Path, img: &Raster<u8>) -> Result<()> {
    write_pgm(p, img.as_slice(), img.width(), img.height(), ExtendedColorType::L8)
}

pub fn write_mask_pgm(p: &Path, mask: &Raster<bool>) -> Result<()> {
    write_pgm8(p, &mask.map(|m| if *m { 255 } else { 0 }))
}

/// 16-bit PGM reader for files written by [`write_pgm16`].
pub fn read_pgm16(p: &Path) -> Result<Raster<u16>> {
    let img = image::ImageReader::open(p)?.with_guessed_format()?.decode().with_context(|| format!("decoding {}", p.display()))?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Raster::from_vec(w, h, img.into_raw()).expect("pixel count matches"))
}

pub fn write_ply(p: &Path, points: &[(Vec3, Rgb)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", points.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header")?;
    for (v, c) in points {
        writeln!(w, "{:.4} {:.4} {:.4} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2])?;
    }
    Ok(w.flush()?)
}

/// Reads 16-bit PCM with three channels (x, y, z) as raw accelerometer LSBs.
pub fn read_accel_wav(p: &Path, sensor_id: u16, scale: f64) -> Result<AccelStream> {
    let mut r = hound::WavReader::open(p).with_context(|| format!("opening {}", p.display()))?;
    let spec = r.spec();
    if spec.channels != 3 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        bail!("{}: expected 16-bit PCM with 3 channels, got {} ch / {} bit", p.display(), spec.channels, spec.bits_per_sample);
    }
    let flat: Vec<i16> = r.samples::<i16>().collect::<Result<_, _>>()?;
    let samples = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(AccelStream { sensor_id, sample_rate_hz: spec.sample_rate as f64, scale, start_ts_us: 0, samples })
}

pub fn write_accel_wav(p: &Path, s: &AccelStream) -> Result<()> {
    let spec = hound::WavSpec { channels: 3, sample_rate: s.sample_rate_hz.round() as u32, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(p, spec)?;
    for smp in &s.samples {
        for v in smp {
            w.write_sample(*v)?;
        }
    }
    Ok(w.finalize()?)
}

/// Mono 16-bit PCM; values are divided by `scale` (units per LSB) and
/// saturated.
pub fn write_mono_wav(p: &Path, x: &[f64], sample_rate_hz: f64, scale: f64) -> Result<()> {
    let spec = hound::WavSpec { channels: 1, sample_rate: sample_rate_hz.round() as u32, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(p, spec)?;
    for v in x {
        w.write_sample((v / scale).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)?;
    }
    Ok(w.finalize()?)
}

pub fn write_events_csv(p: &Path, events: &[StepEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(p)?;
    for e in events {
        w.serialize(e)?;
    }
    Ok(w.flush()?)
}

pub fn read_events_csv(p: &Path) -> Result<Vec<StepEvent>> {
    let mut r = csv::Reader::from_path(p).with_context(|| format!("opening {}", p.display()))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CommandRow {
    t: f64,
    channel: u32,
    gain: f64,
    waveform_id: u32,
}

pub fn write_commands_csv(p: &Path, cmds: &[ActuatorCommand]) -> Result<()> {
    write_commands(File::create(p).with_context(|| format!("creating {}", p.display()))?, cmds)
}

pub fn write_commands<W: Write>(out: W, cmds: &[ActuatorCommand]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cmds {
        w.serialize(CommandRow { t: c.onset_t, channel: c.channel, gain: c.gain, waveform_id: c.waveform_id })?;
    }
    Ok(w.flush()?)
}

pub fn read_commands_csv(p: &Path) -> Result<Vec<ActuatorCommand>> {
    let mut r = csv::Reader::from_path(p)?;
    r.deserialize()
        .map(|row| {
            let c: CommandRow = row?;
            Ok(ActuatorCommand { channel: c.channel, gain: c.gain, waveform_id: c.waveform_id, onset_t: c.t })
        })
        .collect()
}

/// Header lines `pitch <m>`, `alpha <dB>`, `connectivity <4|8>`, then one
/// grid line per row with `.` for a plain panel and `A` for an actuator.
pub fn format_plan(plan: &FloorPlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pitch {}\nalpha {}\nconnectivity {}", plan.pitch_m(), plan.alpha_db(), plan.connectivity().count());
    for r in 0..plan.rows() {
        let row: String = (0..plan.cols()).map(|c| if plan.is_actuator(r, c) { 'A' } else { '.' }).collect();
        let _ = writeln!(s, "{row}");
    }
    s
}

pub fn parse_plan(text: &str) -> Result<FloorPlan> {
    let (mut pitch, mut alpha, mut conn) = (None, None, Connectivity::Eight);
    let mut grid: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.chars().all(|c| c == '.' || c == 'A') {
            grid.push(line);
            continue;
        }
        if !grid.is_empty() {
            bail!("line {}: header after grid", i + 1);
        }
        let (k, v) = line.split_once(char::is_whitespace).ok_or_else(|| anyhow!("line {}: expected `key value`", i + 1))?;
        let v = v.trim();
        match k {
            "pitch" => pitch = Some(v.parse::<f64>().with_context(|| format!("line {}: pitch", i + 1))?),
            "alpha" => alpha = Some(v.parse::<f64>().with_context(|| format!("line {}: alpha", i + 1))?),
            "connectivity" => {
                conn = v.parse().ok().and_then(Connectivity::from_count).ok_or_else(|| anyhow!("line {}: connectivity must be 4 or 8", i + 1))?
            }
            _ => bail!("line {}: unknown key {k:?}", i + 1),
        }
    }
    let cols = grid.first().map(|r| r.len()).ok_or_else(|| anyhow!("plan has no grid"))?;
    if grid.iter().any(|r| r.len() != cols) {
        bail!("grid rows differ in length");
    }
    let actuators = grid.iter().enumerate().flat_map(|(r, row)| row.char_indices().filter(|(_, ch)| *ch == 'A').map(move |(c, _)| (r as u32, c as u32))).collect();
    Ok(FloorPlan::new(grid.len() as u32, cols as u32, pitch.unwrap_or(0.6), actuators, alpha.unwrap_or(6.0), conn)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use telestage_core::floor::{plan_actuators, PlanRequest};
    use telestage_core::haptics::{synth_gait, GaitSpec};

    #[test]
    fn frame_names() {
        let p = frame_path(Path::new("/x"), 3, 42);
        assert_eq!(p, Path::new("/x/u003_f000042.dpcs"));
        assert_eq!(parse_frame_name("u003_f000042.dpcs"), Some((3, 42)));
        assert_eq!(parse_frame_name("u003_f000042.png"), None);
    }

    #[test]
    fn pgm16_roundtrip() {
        let d = tempfile::tempdir().unwrap();
        let img = Raster::from_fn(7, 5, |x, y| (x * 9000 + y * 3) as u16);
        let p = d.path().join("d.pgm");
        write_pgm16(&p, &img).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(read_pgm16(&p).unwrap(), img);
    }

    #[test]
    fn plan_roundtrip() {
        let out = plan_actuators(&PlanRequest::new(5, 7, 6, 6.0, 6.0)).unwrap();
        let text = format_plan(&out.plan);
        assert_eq!(parse_plan(&text).unwrap(), out.plan);
        assert!(parse_plan("pitch 0.6\n..\n...\n").is_err());
        assert!(parse_plan("connectivity 6\nA.\n").is_err());
        assert!(parse_plan("pitch 0.6\n..\n").is_err());
    }

    #[test]
    fn csv_and_wav_roundtrip() {
        let d = tempfile::tempdir().unwrap();
        let ev = vec![StepEvent { t: 0.5, sensor_id: 2, intensity: 3.25, x: 1.0, y: 2.0 }];
        let p = d.path().join("e.csv");
        write_events_csv(&p, &ev).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("t,sensor_id,intensity,x,y"));
        assert_eq!(read_events_csv(&p).unwrap(), ev);

        let cmds = vec![ActuatorCommand { channel: 4, gain: 0.6, waveform_id: 2, onset_t: 0.5 }];
        let p = d.path().join("c.csv");
        write_commands_csv(&p, &cmds).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("t,channel,gain,waveform_id"));
        assert_eq!(read_commands_csv(&p).unwrap(), cmds);

        let (s, _) = synth_gait(&GaitSpec { n_steps: 3, ..GaitSpec::default() });
        let p = d.path().join("s.wav");
        write_accel_wav(&p, &s).unwrap();
        assert_eq!(read_accel_wav(&p, s.sensor_id, s.scale).unwrap(), s);
        let p = d.path().join("m.wav");
        write_mono_wav(&p, &[0.0, 1.0, -1e9], 1000.0, 0.5).unwrap();
        let back: Vec<i16> = hound::WavReader::open(&p).unwrap().samples::<i16>().map(|v| v.unwrap()).collect();
        assert_eq!(back, vec![0, 2, i16::MIN]);
    }
}
