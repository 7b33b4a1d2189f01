//! Per-frame densification and flicker suppression.
//!
//! Each frame goes through four steps: LiDAR returns already live on the
//! camera raster, motion is detected by color differencing against the
//! previous frame, the motion mask is closed once, and static pixels with no
//! current return are filled from the two most recent fused frames.

use alloc::collections::VecDeque;
use alloc::vec;

use thiserror::Error;

use crate::capture::{is_valid_depth, Rgb, RgbdFrame};
use crate::raster::Raster;

pub const HISTORY_LEN: usize = 2;

/// `true` marks a moving pixel.
pub type MotionMask = Raster<bool>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DensifyError {
    #[error("raster dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("frame seq {got} is not newer than history seq {newest}")]
    OutOfOrder { newest: u32, got: u32 },
}

fn check_dims<A, B>(a: &Raster<A>, b: &Raster<B>) -> Result<(), DensifyError> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(DensifyError::DimensionMismatch(a.dims(), b.dims()))
    }
}

/// A pixel moves iff the largest per-channel absolute difference exceeds `tau`.
pub fn motion_mask(prev: &Raster<Rgb>, cur: &Raster<Rgb>, tau: u8) -> Result<MotionMask, DensifyError> {
    check_dims(prev, cur)?;
    let data = prev
        .as_slice()
        .iter()
        .zip(cur.as_slice())
        .map(|(a, b)| (0..3).map(|c| a[c].abs_diff(b[c])).max().unwrap_or(0) > tau)
        .collect();
    Ok(Raster::from_vec(cur.width(), cur.height(), data).expect("dims checked"))
}

/// Sliding-window "any true" along one axis. `outside` is the value assumed
/// beyond the raster edge.
fn window_any(mask: &MotionMask, radius: usize, horizontal: bool, want: bool, outside: bool) -> MotionMask {
    let (w, h) = mask.dims();
    let (len, lines) = if horizontal { (w, h) } else { (h, w) };
    let at = |line: usize, i: usize| if horizontal { *mask.get(i, line) == want } else { *mask.get(line, i) == want };
    let mut out = Raster::filled(w, h, false);
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + at(line, i) as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(len);
            let clipped = i < radius || i + radius >= len;
            let hit = prefix[hi] - prefix[lo] > 0 || (clipped && outside == want);
            let (x, y) = if horizontal { (i, line) } else { (line, i) };
            out.set(x, y, hit);
        }
    }
    out
}

/// Dilation by a `(2r+1)`-square; pixels beyond the edge count as unset.
pub fn dilate(mask: &MotionMask, radius: usize) -> MotionMask {
    let h = window_any(mask, radius, true, true, false);
    window_any(&h, radius, false, true, false)
}

/// Erosion by a `(2r+1)`-square; pixels beyond the edge count as set, so the
/// border is not eaten away.
pub fn erode(mask: &MotionMask, radius: usize) -> MotionMask {
    let h = window_any(mask, radius, true, false, true).map(|any_unset| !any_unset);
    window_any(&h, radius, false, false, true).map(|any_unset| !any_unset)
}

/// Morphological closing (dilation, then erosion) with a square structuring
/// element of side `2 * radius + 1`. Fills gaps up to `2 * radius` wide.
pub fn close_mask(mask: &MotionMask, radius: usize) -> MotionMask {
    erode(&dilate(mask, radius), radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensifyConfig {
    pub tau: u8,
    pub radius: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        DensifyConfig { tau: 25, radius: 2 }
    }
}

impl DensifyConfig {
    /// Defaults tuned at 320 px width, closing radius scaled with raster width.
    pub fn for_width(width: usize) -> Self {
        let radius = ((2 * width + 160) / 320).max(1);
        DensifyConfig { tau: 25, radius }
    }
}

#[derive(Debug, Clone)]
struct HistoryEntry {
    seq: u32,
    depth: Raster<u16>,
    mask: MotionMask,
}

/// The last two fused depth rasters of one unit and their motion masks,
/// newest first.
#[derive(Debug, Clone, Default)]
pub struct DensifyState {
    history: VecDeque<HistoryEntry>,
}

impl DensifyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Pushes a frame as the newest history entry, evicting the oldest.
    pub fn push(&mut self, seq: u32, depth: Raster<u16>, mask: MotionMask) -> Result<(), DensifyError> {
        check_dims(&depth, &mask)?;
        if let Some(newest) = self.history.front() {
            check_dims(&newest.depth, &depth)?;
            if seq <= newest.seq {
                return Err(DensifyError::OutOfOrder { newest: newest.seq, got: seq });
            }
        }
        self.history.push_front(HistoryEntry { seq, depth, mask });
        self.history.truncate(HISTORY_LEN);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }
}

/// Fills missing static depth from history.
///
/// A pixel without a current return is filled only when it is static in
/// `cur_mask`; history is then walked newest first, stopping at the first
/// entry that marks the pixel as moving, and the first valid value found is
/// used. Valid current returns and moving pixels are never touched. The fused
/// frame and `cur_mask` are pushed into `state`.
pub fn fuse_static(cur: &RgbdFrame, state: &mut DensifyState, cur_mask: &MotionMask) -> Result<RgbdFrame, DensifyError> {
    check_dims(&cur.depth, cur_mask)?;
    check_dims(&cur.depth, &cur.rgb)?;
    if let Some(h) = state.history.front() {
        check_dims(&cur.depth, &h.depth)?;
        if cur.seq <= h.seq {
            return Err(DensifyError::OutOfOrder { newest: h.seq, got: cur.seq });
        }
    }
    let mut out = cur.clone();
    let moving = cur_mask.as_slice();
    for (i, d) in out.depth.as_mut_slice().iter_mut().enumerate() {
        if is_valid_depth(*d) || moving[i] {
            continue;
        }
        for h in &state.history {
            if h.mask.as_slice()[i] {
                break;
            }
            let past = h.depth.as_slice()[i];
            if is_valid_depth(past) {
                *d = past;
                break;
            }
        }
    }
    state.push(cur.seq, out.depth.clone(), cur_mask.clone())?;
    Ok(out)
}

/// Stateful per-unit densifier running the full per-frame procedure.
#[derive(Debug, Clone)]
pub struct Densifier {
    config: DensifyConfig,
    state: DensifyState,
    prev_rgb: Option<Raster<Rgb>>,
}

impl Densifier {
    pub fn new(config: DensifyConfig) -> Self {
        Densifier { config, state: DensifyState::new(), prev_rgb: None }
    }

    pub fn config(&self) -> &DensifyConfig {
        &self.config
    }

    /// Returns the fused frame and its closed motion mask. The first frame of
    /// a stream has no color reference and is treated as fully static.
    pub fn process(&mut self, frame: &RgbdFrame) -> Result<(RgbdFrame, MotionMask), DensifyError> {
        let mask = match &self.prev_rgb {
            Some(prev) => close_mask(&motion_mask(prev, &frame.rgb, self.config.tau)?, self.config.radius),
            None => Raster::filled(frame.width(), frame.height(), false),
        };
        let fused = fuse_static(frame, &mut self.state, &mask)?;
        self.prev_rgb = Some(frame.rgb.clone());
        Ok((fused, mask))
    }

    pub fn reset(&mut self) {
        self.state.clear();
        self.prev_rgb = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::DEPTH_NONE;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    // Reference morphology straight from the definition.
    fn brute_dilate(m: &MotionMask, r: isize) -> MotionMask {
        let (w, h) = (m.width() as isize, m.height() as isize);
        Raster::from_fn(m.width(), m.height(), |x, y| {
            let (x, y) = (x as isize, y as isize);
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (a, b) = (x + dx, y + dy);
                    a >= 0 && b >= 0 && a < w && b < h && *m.get(a as usize, b as usize)
                })
            })
        })
    }

    fn brute_erode(m: &MotionMask, r: isize) -> MotionMask {
        let (w, h) = (m.width() as isize, m.height() as isize);
        Raster::from_fn(m.width(), m.height(), |x, y| {
            let (x, y) = (x as isize, y as isize);
            (-r..=r).all(|dy| {
                (-r..=r).all(|dx| {
                    let (a, b) = (x + dx, y + dy);
                    !(a >= 0 && b >= 0 && a < w && b < h) || *m.get(a as usize, b as usize)
                })
            })
        })
    }

    fn frame(seq: u32, depth: Raster<u16>) -> RgbdFrame {
        let (w, h) = depth.dims();
        RgbdFrame { unit_id: 0, seq, capture_ts_us: seq as u64, rgb: Raster::filled(w, h, [0; 3]), depth }
    }

    #[test]
    fn identical_frames_are_static() {
        let a = Raster::from_fn(8, 6, |x, y| [x as u8, y as u8, 7]);
        assert!(motion_mask(&a, &a, 25).unwrap().as_slice().iter().all(|m| !m));
    }

    #[test]
    fn single_changed_pixel() {
        let a = Raster::filled(5, 5, [0u8; 3]);
        let mut b = a.clone();
        b.set(2, 3, [100, 0, 0]);
        let m = motion_mask(&a, &b, 25).unwrap();
        assert_eq!(m.as_slice().iter().filter(|v| **v).count(), 1);
        assert!(*m.get(2, 3));
    }

    #[test]
    fn lighting_drift_below_threshold() {
        let a = Raster::from_fn(16, 16, |x, y| [(x * 9) as u8, (y * 9) as u8, 50]);
        let b = a.map(|p| p.map(|c| c.saturating_add(10)));
        assert!(motion_mask(&a, &b, 25).unwrap().as_slice().iter().all(|m| !m));
    }

    #[test]
    fn mask_dimension_mismatch() {
        let a = Raster::filled(4, 4, [0u8; 3]);
        let b = Raster::filled(4, 5, [0u8; 3]);
        assert!(matches!(motion_mask(&a, &b, 25), Err(DensifyError::DimensionMismatch(..))));
    }

    #[test]
    fn closing_solid_square_unchanged() {
        let m = Raster::from_fn(20, 20, |x, y| (5..12).contains(&x) && (6..14).contains(&y));
        assert_eq!(close_mask(&m, 2), m);
    }

    #[test]
    fn closing_fills_ring_hole() {
        let m = Raster::from_fn(20, 20, |x, y| (5..12).contains(&x) && (5..12).contains(&y) && !(x == 8 && y == 8));
        let closed = close_mask(&m, 2);
        assert!(*closed.get(8, 8));
        assert_eq!(closed, brute_erode(&brute_dilate(&m, 2), 2));
    }

    #[test]
    fn closing_empty_is_empty() {
        let m = Raster::filled(9, 7, false);
        assert_eq!(close_mask(&m, 2), m);
    }

    proptest! {
        #[test]
        fn morphology_matches_reference(bits in proptest::collection::vec(any::<bool>(), 13 * 9), r in 1usize..4) {
            let m = Raster::from_vec(13, 9, bits).unwrap();
            prop_assert_eq!(dilate(&m, r), brute_dilate(&m, r as isize));
            prop_assert_eq!(erode(&m, r), brute_erode(&m, r as isize));
            let c = close_mask(&m, r);
            // closing is extensive and idempotent
            prop_assert!(m.as_slice().iter().zip(c.as_slice()).all(|(a, b)| !a || *b));
            prop_assert_eq!(close_mask(&c, r), c);
        }

        #[test]
        fn fusion_never_overwrites_valid(
            cur in proptest::collection::vec(0u16..4, 36),
            h1 in proptest::collection::vec(0u16..4, 36),
            h2 in proptest::collection::vec(0u16..4, 36),
            moving in proptest::collection::vec(any::<bool>(), 36),
        ) {
            let mut st = DensifyState::new();
            let still = Raster::filled(6, 6, false);
            st.push(1, Raster::from_vec(6, 6, h2).unwrap(), still.clone()).unwrap();
            st.push(2, Raster::from_vec(6, 6, h1).unwrap(), still).unwrap();
            let f = frame(3, Raster::from_vec(6, 6, cur.clone()).unwrap());
            let mask = Raster::from_vec(6, 6, moving.clone()).unwrap();
            let out = fuse_static(&f, &mut st, &mask).unwrap();
            for i in 0..36 {
                if is_valid_depth(cur[i]) || moving[i] {
                    prop_assert_eq!(out.depth.as_slice()[i], cur[i]);
                }
            }
        }
    }

    #[test]
    fn empty_history_is_passthrough() {
        let f = frame(0, Raster::from_fn(4, 4, |x, _| if x % 2 == 0 { 1000 } else { DEPTH_NONE }));
        let mut st = DensifyState::new();
        let out = fuse_static(&f, &mut st, &Raster::filled(4, 4, false)).unwrap();
        assert_eq!(out, f);
        assert_eq!(st.len(), 1);
    }

    #[test]
    fn coverage_from_two_independent_histories() {
        // 1 - 0.5^3 = 0.875 expected coverage on a static wall
        use rand::Rng;
        let mut rng = crate::rng::derive(11, &[]);
        let (w, h) = (200, 100);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            Raster::from_fn(w, h, |_, _| if rng.random::<bool>() { 3000 } else { DEPTH_NONE })
        };
        let h2 = draw(&mut rng);
        let h1 = draw(&mut rng);
        let cur = draw(&mut rng);
        let mut st = DensifyState::new();
        st.push(0, h2, Raster::filled(w, h, false)).unwrap();
        st.push(1, h1, Raster::filled(w, h, false)).unwrap();
        let out = fuse_static(&frame(2, cur), &mut st, &Raster::filled(w, h, false)).unwrap();
        // sigma of the coverage fraction is sqrt(.875 * .125 / 20000) ~ 0.0023
        assert!((out.coverage() - 0.875).abs() < 3.0 * 0.0024, "{}", out.coverage());
    }

    #[test]
    fn moving_region_keeps_current_values() {
        let mut st = DensifyState::new();
        st.push(0, Raster::filled(6, 6, 2000), Raster::filled(6, 6, false)).unwrap();
        st.push(1, Raster::filled(6, 6, 2000), Raster::filled(6, 6, false)).unwrap();
        let cur = frame(2, Raster::filled(6, 6, DEPTH_NONE));
        let mask = Raster::from_fn(6, 6, |x, y| x < 3 && y < 3);
        let out = fuse_static(&cur, &mut st, &mask).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let expect = if x < 3 && y < 3 { DEPTH_NONE } else { 2000 };
                assert_eq!(*out.depth.get(x, y), expect);
            }
        }
    }

    #[test]
    fn history_moving_blocks_older_fill() {
        let mut st = DensifyState::new();
        st.push(0, Raster::filled(2, 1, 1500), Raster::filled(2, 1, false)).unwrap();
        // newest entry: no return anywhere; pixel 0 was moving then
        st.push(1, Raster::filled(2, 1, DEPTH_NONE), Raster::from_vec(2, 1, vec![true, false]).unwrap()).unwrap();
        let out = fuse_static(&frame(2, Raster::filled(2, 1, DEPTH_NONE)), &mut st, &Raster::filled(2, 1, false)).unwrap();
        assert_eq!(out.depth.as_slice(), &[DEPTH_NONE, 1500]);
    }

    #[test]
    fn newest_history_preferred() {
        let mut st = DensifyState::new();
        st.push(0, Raster::filled(1, 1, 1000), Raster::filled(1, 1, false)).unwrap();
        st.push(1, Raster::filled(1, 1, 1100), Raster::filled(1, 1, false)).unwrap();
        let out = fuse_static(&frame(2, Raster::filled(1, 1, DEPTH_NONE)), &mut st, &Raster::filled(1, 1, false)).unwrap();
        assert_eq!(out.depth.as_slice(), &[1100]);
    }

    #[test]
    fn state_keeps_two_entries_in_order() {
        let mut st = DensifyState::new();
        for s in 0..5 {
            st.push(s, Raster::filled(1, 1, 1), Raster::filled(1, 1, false)).unwrap();
        }
        assert_eq!(st.len(), 2);
        let seqs: Vec<u32> = st.history.iter().map(|h| h.seq).collect();
        assert_eq!(seqs, vec![4, 3]);
        assert!(matches!(st.push(2, Raster::filled(1, 1, 1), Raster::filled(1, 1, false)), Err(DensifyError::OutOfOrder { .. })));
        assert!(matches!(
            fuse_static(&frame(9, Raster::filled(2, 1, 1)), &mut st, &Raster::filled(2, 1, false)),
            Err(DensifyError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn radius_scales_with_width() {
        assert_eq!(DensifyConfig::for_width(320).radius, 2);
        assert_eq!(DensifyConfig::for_width(1920).radius, 12);
        assert_eq!(DensifyConfig::for_width(64).radius, 1);
    }
}
