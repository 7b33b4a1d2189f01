//! Vibration floor: panel grid, per-hop attenuation, actuator placement and
//! step-to-actuator mapping.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::haptics::StepEvent;
use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloorError {
    #[error("invalid floor plan: {0}")]
    Invalid(&'static str),
    #[error("panel ({0}, {1}) is outside the grid")]
    OutOfGrid(u32, u32),
    #[error("position ({0:.3}, {1:.3}) m is outside the floor")]
    OutsideFloor(f64, f64),
    #[error("budget cannot reach the target; best achievable with this budget is {achieved_db} dB")]
    Infeasible { achieved_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Connectivity {
    /// Edge neighbors only; hop distance is Manhattan.
    Four,
    /// Edge and diagonal neighbors; hop distance is Chebyshev.
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    pub fn hops(self, a: (u32, u32), b: (u32, u32)) -> u32 {
        let (dr, dc) = (a.0.abs_diff(b.0), a.1.abs_diff(b.1));
        match self {
            Connectivity::Four => dr + dc,
            Connectivity::Eight => dr.max(dc),
        }
    }

    /// Panels within `h` hops of a panel on an unbounded grid.
    fn ball(self, h: u64) -> u64 {
        match self {
            Connectivity::Four => 2 * h * h + 2 * h + 1,
            Connectivity::Eight => (2 * h + 1) * (2 * h + 1),
        }
    }
}

/// Panel grid with actuators at `(row, col)` panels.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    rows: u32,
    cols: u32,
    pitch_m: f64,
    actuators: Vec<(u32, u32)>,
    alpha_db: f64,
    connectivity: Connectivity,
}

impl FloorPlan {
    /// Actuators are stored in row-major order; duplicates are rejected.
    pub fn new(rows: u32, cols: u32, pitch_m: f64, mut actuators: Vec<(u32, u32)>, alpha_db: f64, connectivity: Connectivity) -> Result<Self, FloorError> {
        if rows == 0 || cols == 0 {
            return Err(FloorError::Invalid("grid must have at least one panel"));
        }
        if !(pitch_m > 0.0 && pitch_m.is_finite()) {
            return Err(FloorError::Invalid("pitch must be positive"));
        }
        if !(alpha_db > 0.0 && alpha_db.is_finite()) {
            return Err(FloorError::Invalid("alpha must be positive"));
        }
        if actuators.is_empty() {
            return Err(FloorError::Invalid("at least one actuator is required"));
        }
        if let Some(&(r, c)) = actuators.iter().find(|(r, c)| *r >= rows || *c >= cols) {
            return Err(FloorError::OutOfGrid(r, c));
        }
        actuators.sort_unstable();
        if actuators.windows(2).any(|w| w[0] == w[1]) {
            return Err(FloorError::Invalid("duplicate actuator"));
        }
        Ok(FloorPlan { rows, cols, pitch_m, actuators, alpha_db, connectivity })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn panels(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn alpha_db(&self) -> f64 {
        self.alpha_db
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn actuators(&self) -> &[(u32, u32)] {
        &self.actuators
    }

    pub fn is_actuator(&self, row: u32, col: u32) -> bool {
        self.actuators.binary_search(&(row, col)).is_ok()
    }

    pub fn hop_distance(&self, row: u32, col: u32) -> Result<u32, FloorError> {
        if row >= self.rows || col >= self.cols {
            return Err(FloorError::OutOfGrid(row, col));
        }
        Ok(self.actuators.iter().map(|a| self.connectivity.hops(*a, (row, col))).min().expect("non-empty"))
    }

    /// `alpha * hops` to the nearest actuator.
    pub fn attenuation(&self, row: u32, col: u32) -> Result<f64, FloorError> {
        Ok(self.alpha_db * self.hop_distance(row, col)? as f64)
    }

    pub fn max_hops(&self) -> u32 {
        panels(self.rows, self.cols).map(|(r, c)| self.hop_distance(r, c).expect("in grid")).max().unwrap_or(0)
    }

    pub fn max_attenuation(&self) -> f64 {
        self.alpha_db * self.max_hops() as f64
    }

    /// Center of a panel in floor meters: x along columns, y along rows,
    /// origin at the outer corner of panel (0, 0).
    pub fn panel_center(&self, row: u32, col: u32) -> (f64, f64) {
        ((col as f64 + 0.5) * self.pitch_m, (row as f64 + 0.5) * self.pitch_m)
    }

    pub fn extents_m(&self) -> (f64, f64) {
        (self.cols as f64 * self.pitch_m, self.rows as f64 * self.pitch_m)
    }
}

/// Linear amplitude gain for an attenuation in dB.
pub fn db_to_gain(db: f64) -> f64 {
    math::db_to_gain(-db)
}

fn panels(rows: u32, cols: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..rows).flat_map(move |r| (0..cols).map(move |c| (r, c)))
}

/// Fewest actuators that can keep every panel within `h` hops: each actuator
/// reaches at most a `(2h+1)`-square (8-connectivity) or a diamond of
/// `2h^2+2h+1` panels (4-connectivity).
pub fn covering_lower_bound(rows: u32, cols: u32, h: u32, connectivity: Connectivity) -> u64 {
    let (r, c, h) = (rows as u64, cols as u64, h as u64);
    match connectivity {
        Connectivity::Eight => r.div_ceil(2 * h + 1) * c.div_ceil(2 * h + 1),
        Connectivity::Four => {
            let reach = connectivity.ball(h).min(r * c);
            (r * c).div_ceil(reach)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanRequest {
    pub rows: u32,
    pub cols: u32,
    pub budget: u32,
    pub alpha_db: f64,
    pub max_db: f64,
    pub pitch_m: f64,
    pub connectivity: Connectivity,
}

impl PlanRequest {
    pub fn new(rows: u32, cols: u32, budget: u32, alpha_db: f64, max_db: f64) -> Self {
        PlanRequest { rows, cols, budget, alpha_db, max_db, pitch_m: 0.6, connectivity: Connectivity::Eight }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: FloorPlan,
    /// Achieved max attenuation over all panels, dB.
    pub max_db: f64,
    /// Whether `max_db` is within the requested target.
    pub meets_target: bool,
}

/// Greedy set cover of the grid by `h`-hop balls: repeatedly the panel whose
/// ball covers the most still-uncovered panels, ties row-major.
fn greedy_cover(rows: u32, cols: u32, h: u32, conn: Connectivity, limit: usize) -> Option<Vec<(u32, u32)>> {
    let all: Vec<(u32, u32)> = panels(rows, cols).collect();
    let mut covered = vec![false; all.len()];
    let mut left = all.len();
    let mut chosen = Vec::new();
    while left > 0 {
        if chosen.len() == limit {
            return None;
        }
        let mut best = (0usize, 0usize);
        for (i, p) in all.iter().enumerate() {
            let gain = all.iter().zip(&covered).filter(|(q, c)| !**c && conn.hops(*p, **q) <= h).count();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        let p = all[best.0];
        for (q, c) in all.iter().zip(covered.iter_mut()) {
            if !*c && conn.hops(p, *q) <= h {
                *c = true;
                left -= 1;
            }
        }
        chosen.push(p);
    }
    Some(chosen)
}

/// Spends the remaining budget one actuator at a time on the panel that most
/// reduces the summed hop distance (ties row-major). Returns the placement and
/// per-panel hop distances.
fn extend(all: &[(u32, u32)], mut placed: Vec<(u32, u32)>, budget: usize, conn: Connectivity) -> (Vec<(u32, u32)>, Vec<u32>) {
    let mut dist: Vec<u32> = all.iter().map(|q| placed.iter().map(|p| conn.hops(*p, *q)).min().unwrap()).collect();
    while placed.len() < budget {
        let mut best: Option<(usize, u64)> = None;
        for (i, p) in all.iter().enumerate() {
            if dist[i] == 0 {
                continue;
            }
            let gain: u64 = all.iter().zip(&dist).map(|(q, d)| d.saturating_sub(conn.hops(*p, *q)) as u64).sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        let p = all[i];
        for (q, d) in all.iter().zip(dist.iter_mut()) {
            *d = (*d).min(conn.hops(p, *q));
        }
        placed.push(p);
    }
    (placed, dist)
}

/// Places up to `budget` actuators.
///
/// For every hop radius whose greedy cover fits the budget, the cover is
/// extended to the full budget greedily; the candidate with the lowest
/// max hop distance, then lowest summed distance, wins. Since every radius
/// feasible for a budget stays feasible for a larger one, more budget never
/// raises the achieved maximum. Fails only when the analytic covering
/// bound shows the target cannot be met by any placement of `budget`
/// actuators; otherwise the outcome reports whether the greedy plan met it.
pub fn plan_actuators(req: &PlanRequest) -> Result<PlanOutcome, FloorError> {
    let PlanRequest { rows, cols, budget, alpha_db, max_db, pitch_m, connectivity } = *req;
    if budget == 0 {
        return Err(FloorError::Invalid("budget must be >= 1"));
    }
    if !(max_db > 0.0) {
        return Err(FloorError::Invalid("max_db must be positive"));
    }
    if !(alpha_db > 0.0 && alpha_db.is_finite()) {
        return Err(FloorError::Invalid("alpha must be positive"));
    }
    if rows == 0 || cols == 0 {
        return Err(FloorError::Invalid("grid must have at least one panel"));
    }
    let n = rows as usize * cols as usize;
    let budget = (budget as usize).min(n);
    let diameter = match connectivity {
        Connectivity::Four => rows + cols - 2,
        Connectivity::Eight => rows.max(cols) - 1,
    };
    let all: Vec<(u32, u32)> = panels(rows, cols).collect();
    let mut best: Option<(u32, u64, Vec<(u32, u32)>)> = None;
    for h in 0..=diameter {
        let Some(cover) = greedy_cover(rows, cols, h, connectivity, budget) else { continue };
        let (placed, dist) = extend(&all, cover, budget, connectivity);
        let key = (dist.iter().copied().max().unwrap_or(0), dist.iter().map(|d| *d as u64).sum::<u64>());
        if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, placed));
        }
    }
    let placed = best.expect("one actuator covers at the diameter").2;

    let plan = FloorPlan::new(rows, cols, pitch_m, placed, alpha_db, connectivity)?;
    let achieved = plan.max_attenuation();
    let target_hops = math::floor(max_db / alpha_db + 1e-9) as u32;
    let meets_target = plan.max_hops() <= target_hops;
    if !meets_target && (budget as u64) < covering_lower_bound(rows, cols, target_hops, connectivity) {
        return Err(FloorError::Infeasible { achieved_db: achieved });
    }
    Ok(PlanOutcome { plan, max_db: achieved, meets_target })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum Pattern {
    FloorWide,
    Localized { radius_m: f64 },
}

pub const DEFAULT_LOCALIZED_RADIUS_M: f64 = 1.5;

impl Pattern {
    pub fn localized() -> Self {
        Pattern::Localized { radius_m: DEFAULT_LOCALIZED_RADIUS_M }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActuatorCommand {
    /// Index into the plan's actuator list.
    pub channel: u32,
    pub gain: f64,
    /// Gated and equalized signal of this sensor.
    pub waveform_id: u32,
    pub onset_t: f64,
}

/// Maps one step to actuator commands. Stage coordinates are floor meters.
pub fn map_step(ev: &StepEvent, plan: &FloorPlan, pattern: Pattern) -> Result<Vec<ActuatorCommand>, FloorError> {
    let cmd = |channel: usize, gain: f64| ActuatorCommand { channel: channel as u32, gain: gain.clamp(0.0, 1.0), waveform_id: ev.sensor_id as u32, onset_t: ev.t };
    match pattern {
        Pattern::FloorWide => Ok((0..plan.actuators.len()).map(|i| cmd(i, 1.0)).collect()),
        Pattern::Localized { radius_m } => {
            if !(radius_m > 0.0) {
                return Err(FloorError::Invalid("radius must be positive"));
            }
            let (w, h) = plan.extents_m();
            if !(ev.x >= 0.0 && ev.x <= w && ev.y >= 0.0 && ev.y <= h) {
                return Err(FloorError::OutsideFloor(ev.x, ev.y));
            }
            Ok(plan
                .actuators
                .iter()
                .enumerate()
                .filter_map(|(i, &(r, c))| {
                    let (ax, ay) = plan.panel_center(r, c);
                    let d = math::hypot(ax - ev.x, ay - ev.y);
                    (d <= radius_m).then(|| cmd(i, (1.0 - d / radius_m).max(0.0)))
                })
                .collect())
        }
    }
}
