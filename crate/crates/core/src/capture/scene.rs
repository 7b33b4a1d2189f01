//! Analytic stage scenes and ray-cast ground-truth RGB-D rendering.

use alloc::vec::Vec;

use super::frame::{Rgb, RgbdFrame, DEPTH_MAX_MM, DEPTH_NONE};
use super::CaptureError;
use crate::geometry::{UnitCalibration, Vec3};
use crate::math;
use crate::raster::Raster;

const HIT_EPS: f64 = 1e-9;

/// Procedural surface texture: each cubic cell of side `cell_m` in the
/// object's local frame gets a pseudo-random brightness offset in
/// `[-amplitude, amplitude]`. Zero amplitude means flat shading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct Texture {
    pub amplitude: u8,
    pub cell_m: f64,
}

impl Texture {
    fn offset(&self, local: &Vec3) -> i32 {
        if self.amplitude == 0 || !(self.cell_m > 0.0) {
            return 0;
        }
        let ix = math::floor(local.x / self.cell_m) as i64;
        let iy = math::floor(local.y / self.cell_m) as i64;
        let iz = math::floor(local.z / self.cell_m) as i64;
        let h = crate::rng::mix64((ix as u64) ^ (iy as u64).rotate_left(21) ^ (iz as u64).rotate_left(42));
        let span = 2 * self.amplitude as i64 + 1;
        ((h % span as u64) as i64 - self.amplitude as i64) as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxObject {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub color: Rgb,
    #[cfg_attr(feature = "serde", serde(default))]
    pub texture: Texture,
}

/// Infinite plane through `point` with normal `normal`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlaneObject {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub color: Rgb,
    #[cfg_attr(feature = "serde", serde(default))]
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum Path {
    Fixed { center: [f64; 3] },
    Linear { start: [f64; 3], velocity: [f64; 3] },
    /// `center + amplitude * sin(2 pi freq t + phase)` per axis.
    Oscillate { center: [f64; 3], amplitude: [f64; 3], freq_hz: f64, phase_rad: f64 },
}

impl Path {
    pub fn position(&self, t: f64) -> Vec3 {
        match *self {
            Path::Fixed { center } => Vec3::from(center),
            Path::Linear { start, velocity } => Vec3::from(start) + Vec3::from(velocity) * t,
            Path::Oscillate { center, amplitude, freq_hz, phase_rad } => {
                let s = math::sin(2.0 * core::f64::consts::PI * freq_hz * t + phase_rad);
                Vec3::from(center) + Vec3::from(amplitude) * s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MovingSphere {
    pub path: Path,
    pub radius: f64,
    pub color: Rgb,
    #[cfg_attr(feature = "serde", serde(default))]
    pub texture: Texture,
}

/// Global lighting drift: `offset(t) = ramp_per_s * t` brightness levels added
/// to every channel, plus an optional periodic flash of `flash_amplitude`
/// levels at `flash_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct Lighting {
    pub ramp_per_s: f64,
    pub flash_amplitude: f64,
    pub flash_hz: f64,
}

impl Lighting {
    pub fn offset(&self, t: f64) -> f64 {
        let flash = if self.flash_hz > 0.0 {
            self.flash_amplitude * math::sin(2.0 * core::f64::consts::PI * self.flash_hz * t)
        } else {
            0.0
        };
        self.ramp_per_s * t + flash
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneConfig {
    /// Room size in meters along x, y, z. The room spans
    /// `[-x/2, x/2] x [-y/2, y/2] x [0, z]`.
    pub extents: [f64; 3],
    /// When set, the room's floor, walls and ceiling are rendered in this color.
    #[cfg_attr(feature = "serde", serde(default))]
    pub room_color: Option<Rgb>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub boxes: Vec<BoxObject>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub planes: Vec<PlaneObject>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub spheres: Vec<MovingSphere>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub lighting: Lighting,
    #[cfg_attr(feature = "serde", serde(default = "default_duration"))]
    pub duration_s: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_duration() -> f64 {
    60.0
}

impl SceneConfig {
    pub fn empty(extents: [f64; 3]) -> Self {
        SceneConfig {
            extents,
            room_color: None,
            boxes: Vec::new(),
            planes: Vec::new(),
            spheres: Vec::new(),
            lighting: Lighting::default(),
            duration_s: 60.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        if !self.extents.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(CaptureError::Config("room extents must be positive"));
        }
        if !(self.duration_s > 0.0) {
            return Err(CaptureError::Config("duration must be positive"));
        }
        if self.boxes.iter().any(|b| (0..3).any(|i| !(b.max[i] > b.min[i]))) {
            return Err(CaptureError::Config("box max must exceed min on every axis"));
        }
        if self.planes.iter().any(|p| !(Vec3::from(p.normal).norm() > 0.0)) {
            return Err(CaptureError::Config("plane normal must be non-zero"));
        }
        if self.spheres.iter().any(|s| !(s.radius > 0.0)) {
            return Err(CaptureError::Config("sphere radius must be positive"));
        }
        Ok(())
    }

    fn room_box(&self) -> (Vec3, Vec3) {
        let [x, y, z] = self.extents;
        (Vec3::new(-x / 2.0, -y / 2.0, 0.0), Vec3::new(x / 2.0, y / 2.0, z))
    }

    /// Nearest surface along a world ray `origin + lambda * dir`.
    fn trace(&self, origin: &Vec3, dir: &Vec3, t: f64) -> Option<Hit> {
        nearer(self.trace_spheres(origin, dir, t), self.trace_static(origin, dir))
    }

    fn trace_spheres(&self, origin: &Vec3, dir: &Vec3, t: f64) -> Option<Hit> {
        let mut best = None;
        for s in &self.spheres {
            let c = s.path.position(t);
            if let Some(l) = ray_sphere(origin, dir, &c, s.radius) {
                consider(&mut best, l, s.color, s.texture.offset(&(origin + dir * l - c)));
            }
        }
        best
    }

    /// Everything that does not move: boxes, planes and the room.
    fn trace_static(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let mut best = None;
        for b in &self.boxes {
            let (lo, hi) = (Vec3::from(b.min), Vec3::from(b.max));
            if let Some((enter, _)) = ray_box(origin, dir, &lo, &hi) {
                if enter > HIT_EPS {
                    consider(&mut best, enter, b.color, b.texture.offset(&(origin + dir * enter - lo)));
                }
            }
        }
        for p in &self.planes {
            let n = Vec3::from(p.normal);
            let denom = dir.dot(&n);
            if denom.abs() > 1e-12 {
                let l = (Vec3::from(p.point) - origin).dot(&n) / denom;
                let hit = origin + dir * l;
                consider(&mut best, l, p.color, p.texture.offset(&hit));
            }
        }
        if let Some(color) = self.room_color {
            let (lo, hi) = self.room_box();
            if let Some((_, exit)) = ray_box(origin, dir, &lo, &hi) {
                consider(&mut best, exit, color, 0);
            }
        }
        best
    }
}

/// (ray parameter, flat color, texture offset)
type Hit = (f64, Rgb, i32);

fn consider(best: &mut Option<Hit>, lambda: f64, color: Rgb, tex: i32) {
    if lambda > HIT_EPS && best.is_none_or(|(b, _, _)| lambda < b) {
        *best = Some((lambda, color, tex));
    }
}

/// Earlier candidates win exact ties.
fn nearer(a: Option<Hit>, b: Option<Hit>) -> Option<Hit> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.0 < x.0 { y } else { x }),
        (x, y) => x.or(y),
    }
}

fn ray_sphere(o: &Vec3, d: &Vec3, c: &Vec3, r: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.dot(d);
    let b = oc.dot(d);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = math::sqrt(disc);
    let near = (-b - sq) / a;
    if near > HIT_EPS {
        return Some(near);
    }
    let far = (-b + sq) / a;
    (far > HIT_EPS).then_some(far)
}

/// Slab test. Returns (enter, exit) parameters when the ray line meets the box
/// with `exit > 0`.
fn ray_box(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, f64)> {
    let mut enter = f64::NEG_INFINITY;
    let mut exit = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i] < lo[i] || o[i] > hi[i] {
                return None;
            }
            continue;
        }
        let mut a = (lo[i] - o[i]) / d[i];
        let mut b = (hi[i] - o[i]) / d[i];
        if a > b {
            core::mem::swap(&mut a, &mut b);
        }
        enter = enter.max(a);
        exit = exit.min(b);
    }
    (enter <= exit && exit > HIT_EPS).then_some((enter, exit))
}

fn shade(color: Rgb, offset: f64) -> Rgb {
    color.map(|c| (c as f64 + offset).clamp(0.0, 255.0) as u8)
}

/// Ray-casts the scene from a unit's camera at scene time `t` seconds.
///
/// Depth is the exact camera-frame z of the nearest hit, rounded to
/// millimeters; hits beyond the storable range report no return. Color is the
/// flat object color plus texture and the global lighting offset.
pub fn render_ground_truth(scene: &SceneConfig, cal: &UnitCalibration, t: f64) -> RgbdFrame {
    GroundTruthRenderer::new(scene, cal).render(t)
}

/// Repeated ground-truth renders from one fixed unit. The static part of the
/// scene is traced once; each [`render`](Self::render) only traces spheres.
/// Output is identical to [`render_ground_truth`].
#[derive(Debug, Clone)]
pub struct GroundTruthRenderer<'a> {
    scene: &'a SceneConfig,
    cal: UnitCalibration,
    dirs: Vec<Vec3>,
    fixed: Vec<Option<Hit>>,
}

impl<'a> GroundTruthRenderer<'a> {
    pub fn new(scene: &'a SceneConfig, cal: &UnitCalibration) -> Self {
        let k = &cal.intrinsics;
        let (w, h) = (k.width as usize, k.height as usize);
        let rot = cal.pose.rotation();
        let origin = *cal.pose.translation();
        // camera ray has unit z, so the hit parameter equals camera depth
        let dirs: Vec<Vec3> = (0..w * h).map(|i| rot * k.ray((i % w) as f64, (i / w) as f64)).collect();
        let fixed = dirs.iter().map(|d| scene.trace_static(&origin, d)).collect();
        GroundTruthRenderer { scene, cal: *cal, dirs, fixed }
    }

    pub fn render(&self, t: f64) -> RgbdFrame {
        let k = &self.cal.intrinsics;
        let (w, h) = (k.width as usize, k.height as usize);
        let origin = *self.cal.pose.translation();
        let light = self.scene.lighting.offset(t);
        let mut rgb = Raster::filled(w, h, [0u8; 3]);
        let mut depth = Raster::filled(w, h, DEPTH_NONE);
        let (rgb_px, depth_px) = (rgb.as_mut_slice(), depth.as_mut_slice());
        for (i, (dir, fixed)) in self.dirs.iter().zip(&self.fixed).enumerate() {
            if let Some((z, color, tex)) = nearer(self.scene.trace_spheres(&origin, dir, t), *fixed) {
                let mm = math::round(z * 1000.0);
                if mm >= 1.0 && mm <= DEPTH_MAX_MM as f64 {
                    depth_px[i] = mm as u16;
                }
                rgb_px[i] = shade(color, tex as f64 + light);
            }
        }
        RgbdFrame { unit_id: self.cal.unit_id, seq: 0, capture_ts_us: (t * 1e6) as u64, rgb, depth }
    }
}

/// Ground-truth silhouette of sphere `index` in a unit's raster at time `t`:
/// pixels whose nearest hit is that sphere.
pub fn sphere_silhouette(scene: &SceneConfig, index: usize, cal: &UnitCalibration, t: f64) -> Raster<bool> {
    let k = &cal.intrinsics;
    let rot = cal.pose.rotation();
    let origin = *cal.pose.translation();
    let s = &scene.spheres[index];
    let c = s.path.position(t);
    Raster::from_fn(k.width as usize, k.height as usize, |x, y| {
        let dir = rot * k.ray(x as f64, y as f64);
        match (ray_sphere(&origin, &dir, &c, s.radius), scene.trace(&origin, &dir, t)) {
            (Some(l), Some((best, _, _))) => (l - best).abs() < 1e-12,
            _ => false,
        }
    })
}

#[cfg(test)]
fn centroid(mask: &Raster<bool>) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if *mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::frame::is_valid_depth;
    use crate::geometry::{Intrinsics, Pose};
    use alloc::vec;

    fn cam(eye: Vec3, target: Vec3) -> UnitCalibration {
        let k = Intrinsics::new(200.0, 200.0, 80.0, 60.0, 160, 120).unwrap();
        UnitCalibration::new(0, k, Pose::look_at(eye, target, Vec3::z()).unwrap()).unwrap()
    }

    #[test]
    fn empty_scene_has_no_returns() {
        let f = render_ground_truth(&SceneConfig::empty([10.0, 10.0, 4.0]), &cam(Vec3::zeros(), Vec3::y()), 0.0);
        assert!(f.depth.as_slice().iter().all(|&d| d == DEPTH_NONE));
    }

    #[test]
    fn wall_three_meters_ahead() {
        let mut scene = SceneConfig::empty([10.0, 10.0, 4.0]);
        scene.planes.push(PlaneObject { point: [0.0, 3.0, 0.0], normal: [0.0, -1.0, 0.0], color: [200, 10, 10], texture: Texture::default() });
        let c = cam(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 1.0, 1.5));
        let f = render_ground_truth(&scene, &c, 0.0);
        assert_eq!(*f.depth.get(80, 60), 3000);
        // camera-frame z is constant over a fronto-parallel wall
        assert!(f.depth.as_slice().iter().all(|&d| d == 3000));
        assert_eq!(*f.rgb.get(0, 0), [200, 10, 10]);
    }

    #[test]
    fn room_shell_gives_full_coverage() {
        let mut scene = SceneConfig::empty([6.0, 6.0, 3.0]);
        scene.room_color = Some([90, 90, 90]);
        let f = render_ground_truth(&scene, &cam(Vec3::new(0.0, -2.0, 1.5), Vec3::new(0.0, 0.0, 1.0)), 0.0);
        assert!(f.depth.as_slice().iter().all(|&d| is_valid_depth(d)));
    }

    #[test]
    fn box_occludes_plane() {
        let mut scene = SceneConfig::empty([10.0, 10.0, 4.0]);
        scene.planes.push(PlaneObject { point: [0.0, 5.0, 0.0], normal: [0.0, 1.0, 0.0], color: [1, 1, 1], texture: Texture::default() });
        scene.boxes.push(BoxObject { min: [-0.5, 1.5, 1.0], max: [0.5, 2.5, 2.0], color: [9, 9, 9], texture: Texture::default() });
        let f = render_ground_truth(&scene, &cam(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 1.0, 1.5)), 0.0);
        assert_eq!(*f.depth.get(80, 60), 1500);
        assert_eq!(*f.depth.get(0, 0), 5000);
    }

    #[test]
    fn moving_sphere_displacement_matches_projection() {
        // 1 m/s lateral motion at 3 m: shift per 1/30 s frame = fx * dt / z px
        let mut scene = SceneConfig::empty([10.0, 10.0, 4.0]);
        scene.spheres.push(MovingSphere {
            path: Path::Linear { start: [-0.3, 3.0, 1.5], velocity: [1.0, 0.0, 0.0] },
            radius: 0.2,
            color: [250, 250, 0],
            texture: Texture::default(),
        });
        let c = cam(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 1.0, 1.5));
        let dt = 1.0 / 30.0;
        let a = centroid(&sphere_silhouette(&scene, 0, &c, 0.0)).unwrap();
        let b = centroid(&sphere_silhouette(&scene, 0, &c, dt)).unwrap();
        let expected = 200.0 * dt * 1.0 / 3.0;
        assert!((b.0 - a.0 - expected).abs() < 0.25, "shift {} vs {expected}", b.0 - a.0);
        assert!((b.1 - a.1).abs() < 0.1);
    }

    #[test]
    fn cached_renderer_matches_full_trace() {
        let mut scene = SceneConfig::empty([8.0, 8.0, 3.0]);
        scene.room_color = Some([90, 90, 90]);
        scene.boxes.push(BoxObject { min: [-0.5, 1.5, 0.0], max: [0.5, 2.0, 1.0], color: [10, 200, 10], texture: Texture { amplitude: 30, cell_m: 0.1 } });
        scene.spheres.push(MovingSphere {
            path: Path::Linear { start: [-1.0, 2.5, 1.2], velocity: [1.0, 0.0, 0.0] },
            radius: 0.4,
            color: [250, 250, 0],
            texture: Texture::default(),
        });
        let c = cam(Vec3::new(0.0, -2.0, 1.5), Vec3::new(0.0, 1.0, 1.0));
        let r = GroundTruthRenderer::new(&scene, &c);
        for t in [0.0, 0.7, 1.9] {
            let f = r.render(t);
            let k = &c.intrinsics;
            for y in 0..k.height as usize {
                for x in 0..k.width as usize {
                    let dir = c.pose.rotation() * k.ray(x as f64, y as f64);
                    let hit = scene.trace(c.pose.translation(), &dir, t);
                    let d = hit.map_or(DEPTH_NONE, |h| math::round(h.0 * 1000.0) as u16);
                    assert_eq!(*f.depth.get(x, y), d);
                    if let Some((_, color, tex)) = hit {
                        assert_eq!(*f.rgb.get(x, y), shade(color, tex as f64 + scene.lighting.offset(t)));
                    }
                }
            }
        }
    }

    #[test]
    fn lighting_ramp_shifts_color() {
        let mut scene = SceneConfig::empty([10.0, 10.0, 4.0]);
        scene.planes.push(PlaneObject { point: [0.0, 3.0, 0.0], normal: [0.0, -1.0, 0.0], color: [100, 100, 100], texture: Texture::default() });
        scene.lighting.ramp_per_s = 300.0;
        let c = cam(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 1.0, 1.5));
        let f = render_ground_truth(&scene, &c, 0.1);
        assert_eq!(*f.rgb.get(5, 5), [130, 130, 130]);
    }

    #[test]
    fn validation() {
        assert!(SceneConfig::empty([0.0, 1.0, 1.0]).validate().is_err());
        let mut s = SceneConfig::empty([1.0, 1.0, 1.0]);
        s.spheres = vec![MovingSphere { path: Path::Fixed { center: [0.0; 3] }, radius: 0.0, color: [0; 3], texture: Texture::default() }];
        assert!(s.validate().is_err());
    }
}
