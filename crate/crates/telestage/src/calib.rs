//! Calibration files.
//!
//! Plain text, one unit per block, blocks separated by blank lines. A block is
//! 19 whitespace-separated numbers: `unit_id`, the camera-to-world rotation
//! (9 entries, row-major), the camera center in world meters (3 entries), then
//! `fx fy cx cy width height`. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use telestage_core::geometry::{GeometryError, Intrinsics, Mat3, Pose, UnitCalibration, Vec3};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("block at line {line}: {source}")]
    Geometry { line: usize, source: GeometryError },
    #[error("no calibration blocks")]
    Empty,
    #[error("duplicate unit id {0}")]
    Duplicate(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const FIELDS: usize = 19;

fn block(line: usize, t: &[f64]) -> Result<UnitCalibration, CalibError> {
    let int = |v: f64, what: &str, max: f64| {
        if v.fract() != 0.0 || v < 0.0 || v > max {
            Err(CalibError::Parse { line, msg: format!("{what} must be an integer in 0..={max}, got {v}") })
        } else {
            Ok(v)
        }
    };
    let unit_id = int(t[0], "unit_id", u16::MAX as f64)? as u16;
    let rotation = Mat3::from_row_slice(&t[1..10]);
    let translation = Vec3::new(t[10], t[11], t[12]);
    let width = int(t[17], "width", u32::MAX as f64)? as u32;
    let height = int(t[18], "height", u32::MAX as f64)? as u32;
    let geo = |source| CalibError::Geometry { line, source };
    let k = Intrinsics::new(t[13], t[14], t[15], t[16], width, height).map_err(geo)?;
    let pose = Pose::new(rotation, translation).map_err(geo)?;
    UnitCalibration::new(unit_id, k, pose).map_err(geo)
}

pub fn parse_calibration(text: &str) -> Result<Vec<UnitCalibration>, CalibError> {
    let mut out = Vec::new();
    let mut nums: Vec<f64> = Vec::new();
    let mut start = 0;
    let flush = |nums: &mut Vec<f64>, start: usize, out: &mut Vec<UnitCalibration>| -> Result<(), CalibError> {
        if nums.is_empty() {
            return Ok(());
        }
        if nums.len() != FIELDS {
            return Err(CalibError::Parse { line: start, msg: format!("expected {FIELDS} numbers in block, found {}", nums.len()) });
        }
        let cal = block(start, nums)?;
        if out.iter().any(|c: &UnitCalibration| c.unit_id == cal.unit_id) {
            return Err(CalibError::Duplicate(cal.unit_id));
        }
        out.push(cal);
        nums.clear();
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.trim().is_empty() {
                flush(&mut nums, start, &mut out)?;
            }
            continue;
        }
        if nums.is_empty() {
            start = i + 1;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| CalibError::Parse { line: i + 1, msg: format!("not a number: {tok:?}") })?;
            nums.push(v);
        }
    }
    flush(&mut nums, start, &mut out)?;
    if out.is_empty() {
        return Err(CalibError::Empty);
    }
    Ok(out)
}

pub fn format_calibration(cals: &[UnitCalibration]) -> String {
    let mut s = String::from("# unit_id / rotation (camera to world, row-major) / center / fx fy cx cy width height\n");
    for c in cals {
        let r = c.pose.rotation();
        let t = c.pose.translation();
        let k = &c.intrinsics;
        let _ = writeln!(s, "\n{}", c.unit_id);
        for row in 0..3 {
            let _ = writeln!(s, "{:?} {:?} {:?}", r[(row, 0)], r[(row, 1)], r[(row, 2)]);
        }
        let _ = writeln!(s, "{:?} {:?} {:?}", t.x, t.y, t.z);
        let _ = writeln!(s, "{:?} {:?} {:?} {:?} {} {}", k.fx, k.fy, k.cx, k.cy, k.width, k.height);
    }
    s
}

pub fn read_calibration(path: &Path) -> Result<Vec<UnitCalibration>, CalibError> {
    parse_calibration(&std::fs::read_to_string(path)?)
}

pub fn write_calibration(path: &Path, cals: &[UnitCalibration]) -> Result<(), CalibError> {
    Ok(std::fs::write(path, format_calibration(cals))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let cals = crate::rig::default_rig(3, 320, 240).unwrap();
        let back = parse_calibration(&format_calibration(&cals)).unwrap();
        assert_eq!(back, cals);
    }

    #[test]
    fn identity_block() {
        let text = "# one unit\n7\n1 0 0\n0 1 0\n0 0 1\n0 0 0\n100 100 31.5 23.5 64 48\n";
        let c = &parse_calibration(text).unwrap()[0];
        assert_eq!(c.unit_id, 7);
        assert_eq!(c.intrinsics.width, 64);
        assert_eq!(c.optical_axis(), Vec3::z());
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse_calibration("1 2 3\n").unwrap_err();
        assert!(matches!(e, CalibError::Parse { line: 1, .. }), "{e}");
        let bad_rot = "0\n2 0 0\n0 1 0\n0 0 1\n0 0 0\n100 100 31.5 23.5 64 48\n";
        assert!(matches!(parse_calibration(bad_rot), Err(CalibError::Geometry { .. })));
        assert!(matches!(parse_calibration("\n# nothing\n"), Err(CalibError::Empty)));
        let one = "0\n1 0 0\n0 1 0\n0 0 1\n0 0 0\n100 100 31.5 23.5 64 48\n";
        assert!(matches!(parse_calibration(&format!("{one}\n{one}")), Err(CalibError::Duplicate(0))));
        assert!(parse_calibration(&one.replace("64 48", "64.5 48")).is_err());
    }
}
