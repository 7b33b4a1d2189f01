//! Multi-unit point-cloud fusion with a view-dependent depth bias.
//!
//! Every valid depth pixel of every unit is back-projected to the stage and
//! splatted (one pixel) into a virtual camera. Per output pixel, the candidate
//! minimizing `z - s * (v . i)` wins, where `z` is its virtual-camera depth,
//! `v` the virtual ray through that pixel and `i` the source unit's optical
//! axis. Units looking the same way as the viewer therefore win near-ties,
//! which hides seams caused by small calibration errors between units.

use alloc::rc::Rc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::capture::{is_valid_depth, Rgb, RgbdFrame};
use crate::geometry::{back_project, project_camera, GeometryError, Intrinsics, Pose, UnitCalibration, Vec3};
use crate::math;
use crate::raster::Raster;

pub const DEFAULT_BIAS_SCALE_M: f64 = 0.05;
const UNIT_TOL: f64 = 1e-6;
/// Candidate sets are tracked as a 64-bit mask.
pub const MAX_UNITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("bias scale must be finite and >= 0, got {0}")]
    BadScale(f64),
    #[error("at least one unit is required")]
    NoUnits,
    #[error("at most {MAX_UNITS} units are supported")]
    TooManyUnits,
    #[error("frame of unit {unit_id} does not match its calibration raster")]
    RasterMismatch { unit_id: u16 },
    #[error("frame of unit {frame_unit} paired with calibration of unit {cal_unit}")]
    UnitMismatch { frame_unit: u16, cal_unit: u16 },
    #[error("capture timestamps span {0} us, beyond the allowed window")]
    Skew(u64),
    #[error("render has no valid pixels")]
    NoValidPixels,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualCamera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl VirtualCamera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Result<Self, FusionError> {
        intrinsics.validate()?;
        Ok(VirtualCamera { intrinsics, pose })
    }

    /// Unit world-frame ray through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        (self.pose.rotation() * self.intrinsics.ray(u, v)).normalize()
    }

    /// Rays for every pixel center, row-major.
    pub fn rays(&self) -> Raster<Vec3> {
        let k = &self.intrinsics;
        Raster::from_fn(k.width as usize, k.height as usize, |x, y| self.ray(x as f64, y as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct BiasConfig {
    /// Bias scale in meters.
    pub s: f64,
    /// Largest allowed spread of capture timestamps across fused frames.
    pub max_skew_us: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig { s: DEFAULT_BIAS_SCALE_M, max_skew_us: 33_334 }
    }
}

impl BiasConfig {
    pub fn with_scale(s: f64) -> Self {
        BiasConfig { s, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(FusionError::BadScale(self.s));
        }
        Ok(())
    }
}

/// `D = s * (v . i)` for unit vectors `v` (viewing ray) and `i` (optical axis).
pub fn depth_bias(v: &Vec3, i: &Vec3, s: f64) -> Result<f64, FusionError> {
    for n in [v.norm(), i.norm()] {
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(FusionError::NotUnit(n));
        }
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FusionError::BadScale(s));
    }
    Ok(s * v.dot(i).clamp(-1.0, 1.0))
}

/// One unit's decoded frame and calibration.
#[derive(Debug, Clone, Copy)]
pub struct UnitView<'a> {
    pub frame: &'a RgbdFrame,
    pub cal: &'a UnitCalibration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: Raster<Rgb>,
    /// Unbiased virtual-camera depth in meters; 0 where nothing landed.
    pub depth: Raster<f64>,
    /// Winning unit id; set exactly where depth is valid.
    pub source: Raster<Option<u16>>,
    /// Bit `k` set when input view `k` splatted a candidate into the pixel.
    pub candidates: Raster<u64>,
}

impl RenderOutput {
    pub fn valid_count(&self) -> usize {
        self.source.as_slice().iter().filter(|s| s.is_some()).count()
    }
}

/// Back-projects every valid depth pixel of a view to world coordinates.
pub fn unit_points<'a>(view: UnitView<'a>) -> impl Iterator<Item = (Vec3, Rgb)> + 'a {
    let f = view.frame;
    let (w, h) = f.depth.dims();
    (0..h).flat_map(move |y| (0..w).map(move |x| (x, y))).filter_map(move |(x, y)| {
        let d = *f.depth.get(x, y);
        if !is_valid_depth(d) {
            return None;
        }
        let p = back_project(x as f64, y as f64, d as f64 / 1000.0, view.cal).ok()?;
        Some((p, *f.rgb.get(x, y)))
    })
}

fn check_views(views: &[UnitView<'_>], cfg: &BiasConfig) -> Result<(), FusionError> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(FusionError::NoUnits);
    }
    if views.len() > MAX_UNITS {
        return Err(FusionError::TooManyUnits);
    }
    for v in views {
        let k = &v.cal.intrinsics;
        if v.frame.depth.dims() != (k.width as usize, k.height as usize) || !v.frame.rgb.same_dims(&v.frame.depth) {
            return Err(FusionError::RasterMismatch { unit_id: v.frame.unit_id });
        }
        if v.frame.unit_id != v.cal.unit_id {
            return Err(FusionError::UnitMismatch { frame_unit: v.frame.unit_id, cal_unit: v.cal.unit_id });
        }
    }
    let lo = views.iter().map(|v| v.frame.capture_ts_us).min().unwrap();
    let hi = views.iter().map(|v| v.frame.capture_ts_us).max().unwrap();
    if hi - lo > cfg.max_skew_us {
        return Err(FusionError::Skew(hi - lo));
    }
    Ok(())
}

/// One back-projected pixel landing in the virtual camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    /// Row-major output pixel index.
    pub index: usize,
    /// Virtual-camera depth in meters.
    pub z: f64,
    pub color: Rgb,
}

/// Every valid pixel of `view` carried into `cam` with a one-pixel footprint.
/// Points behind the camera or outside its raster are skipped.
pub fn splats<'a>(view: UnitView<'a>, cam: &'a VirtualCamera) -> impl Iterator<Item = Splat> + 'a {
    let f = view.frame;
    let ku = &view.cal.intrinsics;
    let k = &cam.intrinsics;
    let rel = cam.pose.inverse().compose(&view.cal.pose);
    let r = *rel.rotation();
    let t = *rel.translation();
    let (w, h) = f.depth.dims();
    let xs: Rc<[Vec3]> = (0..w).map(|x| r.column(0) * ((x as f64 - ku.cx) / ku.fx)).collect();
    let out_w = k.width as usize;
    (0..h).flat_map(move |y| {
        let row = r.column(1) * ((y as f64 - ku.cy) / ku.fy) + r.column(2);
        let depth = &f.depth.as_slice()[y * w..(y + 1) * w];
        let rgb = &f.rgb.as_slice()[y * w..(y + 1) * w];
        let xs = xs.clone();
        (0..w).filter_map(move |x| {
            let d = depth[x];
            if !is_valid_depth(d) {
                return None;
            }
            let c = (xs[x] + row) * (d as f64 / 1000.0) + t;
            let ip = project_camera(&c, k)?;
            let (px, py) = (math::round(ip.u) as usize, math::round(ip.v) as usize);
            Some(Splat { index: py * out_w + px, z: ip.z, color: rgb[x] })
        })
    })
}

/// Fuses all views into the virtual camera with the biased z-test. Exact
/// biased-depth ties go to the lower unit id.
pub fn fuse_render(views: &[UnitView<'_>], cam: &VirtualCamera, cfg: &BiasConfig) -> Result<RenderOutput, FusionError> {
    check_views(views, cfg)?;
    let k = &cam.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    // v . i is evaluated in the virtual camera frame: unit rays there
    // against the rotated optical axes
    let unit_rays: Vec<Vec3> = if cfg.s != 0.0 {
        let xs: Vec<f64> = (0..w).map(|x| (x as f64 - k.cx) / k.fx).collect();
        (0..h)
            .flat_map(|y| {
                let yn = (y as f64 - k.cy) / k.fy;
                xs.iter().map(move |&xn| Vec3::new(xn, yn, 1.0) / math::sqrt(xn * xn + yn * yn + 1.0))
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut best_key = Raster::filled(w, h, f64::INFINITY);
    let mut out = RenderOutput {
        rgb: Raster::filled(w, h, [0; 3]),
        depth: Raster::filled(w, h, 0.0),
        source: Raster::filled(w, h, None),
        candidates: Raster::filled(w, h, 0),
    };
    for (bit, view) in views.iter().enumerate() {
        let a = cam.pose.rotation().transpose() * view.cal.optical_axis();
        let uid = view.cal.unit_id;
        for sp in splats(*view, cam) {
            let i = sp.index;
            let key = if cfg.s != 0.0 { sp.z - cfg.s * unit_rays[i].dot(&a) } else { sp.z };
            out.candidates.as_mut_slice()[i] |= 1 << bit;
            let cur = best_key.as_slice()[i];
            let wins = key < cur || (key == cur && out.source.as_slice()[i].is_some_and(|s| uid < s));
            if wins {
                best_key.as_mut_slice()[i] = key;
                out.depth.as_mut_slice()[i] = sp.z;
                out.rgb.as_mut_slice()[i] = sp.color;
                out.source.as_mut_slice()[i] = Some(uid);
            }
        }
    }
    Ok(out)
}

/// Index of the candidate whose optical axis best matches ray `v`; ties to
/// the lower unit id.
fn best_aligned(mask: u64, v: &Vec3, cals: &[UnitCalibration]) -> Option<usize> {
    (0..cals.len())
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| (b, v.dot(&cals[b].optical_axis())))
        .reduce(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && cals[b.0].unit_id < cals[a.0].unit_id) {
                b
            } else {
                a
            }
        })
        .map(|(b, _)| b)
}

fn disagreement(out: &RenderOutput, cals: &[UnitCalibration], cam: &VirtualCamera, min_candidates: u32) -> Option<(usize, usize)> {
    let w = out.source.width();
    let (mut n, mut bad) = (0usize, 0usize);
    for (i, src) in out.source.as_slice().iter().enumerate() {
        let Some(src) = src else { continue };
        let mask = out.candidates.as_slice()[i];
        if mask.count_ones() < min_candidates {
            continue;
        }
        let v = cam.ray((i % w) as f64, (i / w) as f64);
        let best = best_aligned(mask, &v, cals)?;
        n += 1;
        if cals[best].unit_id != *src {
            bad += 1;
        }
    }
    Some((n, bad))
}

/// Fraction of valid pixels whose winner is not the candidate unit with the
/// largest `v . i`. `cals` must be in the order the views were fused.
pub fn seam_metric(out: &RenderOutput, cals: &[UnitCalibration], cam: &VirtualCamera) -> Result<f64, FusionError> {
    match disagreement(out, cals, cam, 1) {
        Some((n, bad)) if n > 0 => Ok(bad as f64 / n as f64),
        _ => Err(FusionError::NoValidPixels),
    }
}

/// Over pixels with two or more candidates, the fraction whose winner is the
/// best-aligned unit. `None` when there is no overlap.
pub fn overlap_agreement(out: &RenderOutput, cals: &[UnitCalibration], cam: &VirtualCamera) -> Option<f64> {
    let (n, bad) = disagreement(out, cals, cam, 2)?;
    (n > 0).then(|| 1.0 - bad as f64 / n as f64)
}

/// All back-projected points of all views, for point-cloud export.
pub fn fused_points(views: &[UnitView<'_>]) -> Vec<(Vec3, Rgb)> {
    views.iter().flat_map(|v| unit_points(*v)).collect()
}
