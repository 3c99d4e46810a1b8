//! Deterministic kinematic blocks-and-zones environment.
//!
//! The table is the unit square with two colored drop zones. A gripper moves
//! in bounded increments, grabs a block when it closes near one, and drops a
//! held block when it opens; the dropped block lands on the tallest support
//! under it or directly on the table. There is no velocity state: `step` is
//! a pure function of (state, action).

pub mod programs;

use rand::Rng;
use std::fmt;

/// Axis-aligned zone rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    InvalidConfig(String),
    SamplingFault { tries: usize },
    ContractViolation(String),
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::InvalidConfig(m) => write!(f, "invalid environment config: {m}"),
            EnvError::SamplingFault { tries } => {
                write!(f, "placement sampling failed after {tries} tries (degenerate config)")
            }
            EnvError::ContractViolation(m) => write!(f, "contract violation: {m}"),
            EnvError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for EnvError {}

/// Environment geometry, tolerances and initial-state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Number of blocks B. Blocks 0..B/2 are orange, the rest blue.
    pub n_blocks: usize,
    /// Block radius d; resting height on the table is z = d.
    pub block_radius: f64,
    /// Gripper translation per unit action component.
    pub max_step_delta: f64,
    /// A closing gripper grabs the nearest block within this distance.
    pub grasp_radius: f64,
    /// Per-block sphere radius for goal satisfaction.
    pub goal_tolerance: f64,
    /// Steps per atomic skill execution.
    pub atomic_horizon: usize,
    /// Gripper z range is [0, table_z_max]; x and y live in [0, 1].
    pub table_z_max: f64,
    pub zone_orange: Rect,
    pub zone_blue: Rect,
    /// Initial-state distribution: block 0 starts in the gripper / under it /
    /// elsewhere; later blocks stack on a placed block with p_stacked.
    pub p_in_gripper: f64,
    pub p_under_gripper: f64,
    pub p_stacked: f64,
    /// 0 = full initial distribution, 1 = everything uniform on the table.
    pub anneal: f64,
    pub reset_max_tries: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_blocks: 4,
            block_radius: 0.025,
            max_step_delta: 0.05,
            grasp_radius: 0.03,
            goal_tolerance: 0.05,
            atomic_horizon: 50,
            table_z_max: 0.5,
            zone_orange: Rect { x0: 0.05, y0: 0.05, x1: 0.35, y1: 0.35 },
            zone_blue: Rect { x0: 0.65, y0: 0.65, x1: 0.95, y1: 0.95 },
            p_in_gripper: 0.2,
            p_under_gripper: 0.4,
            p_stacked: 0.4,
            anneal: 0.0,
            reset_max_tries: 1000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let err = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if self.n_blocks < 2 {
            return err("n_blocks must be at least 2");
        }
        let zones_ok = |z: &Rect| {
            z.x0 >= 0.0 && z.y0 >= 0.0 && z.x1 <= 1.0 && z.y1 <= 1.0 && z.width() > 0.0 && z.height() > 0.0
        };
        if !zones_ok(&self.zone_orange) || !zones_ok(&self.zone_blue) {
            return err("zones must be non-empty and inside table bounds");
        }
        if self.zone_orange.overlaps(&self.zone_blue) {
            return err("zones must be disjoint");
        }
        let min_zone_dim = self
            .zone_orange
            .width()
            .min(self.zone_orange.height())
            .min(self.zone_blue.width())
            .min(self.zone_blue.height());
        for (name, v) in [
            ("grasp_radius", self.grasp_radius),
            ("goal_tolerance", self.goal_tolerance),
            ("block_radius", self.block_radius),
        ] {
            if v <= 0.0 || v >= min_zone_dim {
                return Err(EnvError::InvalidConfig(format!(
                    "{name} must lie in (0, min zone dimension = {min_zone_dim})"
                )));
            }
        }
        if self.p_in_gripper < 0.0
            || self.p_under_gripper < 0.0
            || self.p_in_gripper + self.p_under_gripper > 1.0
        {
            return err("block-0 placement probabilities must be non-negative and sum to at most 1");
        }
        if !(0.0..=1.0).contains(&self.p_stacked) {
            return err("p_stacked must be a probability");
        }
        if !(0.0..=1.0).contains(&self.anneal) {
            return err("anneal must lie in [0, 1]");
        }
        if self.max_step_delta <= 0.0 || self.atomic_horizon == 0 {
            return err("max_step_delta and atomic_horizon must be positive");
        }
        Ok(())
    }

    /// Observation layout: [X^0 .. X^{B-1}, gripper xyz, grip flag].
    pub fn obs_dim(&self) -> usize {
        3 * self.n_blocks + 4
    }

    pub fn goal_dim(&self) -> usize {
        3 * self.n_blocks
    }

    pub fn color_of(&self, block: usize) -> programs::ZoneColor {
        if block < self.n_blocks / 2 {
            programs::ZoneColor::Orange
        } else {
            programs::ZoneColor::Blue
        }
    }

    pub fn zone(&self, color: programs::ZoneColor) -> &Rect {
        match color {
            programs::ZoneColor::Orange => &self.zone_orange,
            programs::ZoneColor::Blue => &self.zone_blue,
        }
    }
}

/// Continuous command: gripper translation plus grip open/close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub grip: f64,
}

impl Action {
    pub fn clamped(self) -> Action {
        let c = |v: f64| v.clamp(-1.0, 1.0);
        Action { dx: c(self.dx), dy: c(self.dy), dz: c(self.dz), grip: c(self.grip) }
    }

    pub fn from_slice(a: &[f32]) -> Action {
        Action { dx: a[0] as f64, dy: a[1] as f64, dz: a[2] as f64, grip: a[3] as f64 }
    }
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub blocks: Vec<[f64; 3]>,
    pub gripper: [f64; 3],
    pub grip_closed: bool,
    pub held: Option<usize>,
}

impl EnvState {
    /// Flat observation vector [X^0..X^{B-1}, Y].
    pub fn observation(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(3 * self.blocks.len() + 4);
        for b in &self.blocks {
            v.extend_from_slice(&[b[0] as f32, b[1] as f32, b[2] as f32]);
        }
        v.extend_from_slice(&[
            self.gripper[0] as f32,
            self.gripper[1] as f32,
            self.gripper[2] as f32,
            if self.grip_closed { 1.0 } else { 0.0 },
        ]);
        v
    }

    /// Rebuild a state from a flat observation. The held flag is not part of
    /// the observation; a closed gripper with a block essentially at its
    /// position is treated as holding it (predicted states are only ever fed
    /// to the pre/post-condition predicates, which read positions).
    pub fn from_observation(cfg: &EnvConfig, obs: &[f32]) -> Result<EnvState, EnvError> {
        if obs.len() != cfg.obs_dim() {
            return Err(EnvError::DimensionMismatch { expected: cfg.obs_dim(), got: obs.len() });
        }
        let b = cfg.n_blocks;
        let blocks: Vec<[f64; 3]> = (0..b)
            .map(|i| [obs[3 * i] as f64, obs[3 * i + 1] as f64, obs[3 * i + 2] as f64])
            .collect();
        let gripper = [obs[3 * b] as f64, obs[3 * b + 1] as f64, obs[3 * b + 2] as f64];
        let grip_closed = obs[3 * b + 3] > 0.5;
        let held = if grip_closed {
            let mut best: Option<(usize, f64)> = None;
            for (i, blk) in blocks.iter().enumerate() {
                let d2 = dist2_3d(blk, &gripper);
                if d2 <= cfg.block_radius * cfg.block_radius
                    && best.map_or(true, |(_, bd)| d2 < bd)
                {
                    best = Some((i, d2));
                }
            }
            best.map(|(i, _)| i)
        } else {
            None
        };
        Ok(EnvState { blocks, gripper, grip_closed, held })
    }
}

pub(crate) fn dist2_3d(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

pub(crate) fn dist2_xy(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Landing height for a block dropped at (x, y): two radii above the tallest
/// support (any non-held block within one radius horizontally), else on the
/// table.
pub fn landing_height(cfg: &EnvConfig, blocks: &[[f64; 3]], held: Option<usize>, x: f64, y: f64, falling: usize) -> f64 {
    let d = cfg.block_radius;
    let probe = [x, y, 0.0];
    let mut support: Option<f64> = None;
    for (j, b) in blocks.iter().enumerate() {
        if j == falling || held == Some(j) {
            continue;
        }
        if dist2_xy(b, &probe) <= d * d {
            support = Some(support.map_or(b[2], |s: f64| s.max(b[2])));
        }
    }
    match support {
        Some(z) => z + 2.0 * d,
        None => d,
    }
}

/// Kinematic transition. Pure: identical inputs give byte-identical outputs.
pub fn step(cfg: &EnvConfig, state: &EnvState, action: Action) -> EnvState {
    let a = action.clamped();
    let mut next = state.clone();
    let delta = cfg.max_step_delta;
    next.gripper[0] = (state.gripper[0] + delta * a.dx).clamp(0.0, 1.0);
    next.gripper[1] = (state.gripper[1] + delta * a.dy).clamp(0.0, 1.0);
    next.gripper[2] = (state.gripper[2] + delta * a.dz).clamp(0.0, cfg.table_z_max);
    let closing = a.grip >= 0.0;

    if let Some(i) = state.held {
        // held block tracks the gripper
        next.blocks[i] = next.gripper;
        if state.grip_closed && !closing {
            // release: drop straight down from the release point
            let (x, y) = (next.blocks[i][0], next.blocks[i][1]);
            next.blocks[i][2] = landing_height(cfg, &next.blocks, Some(i), x, y, i);
            next.held = None;
        }
    } else if !state.grip_closed && closing {
        // grasp: nearest block within reach, ties to the lowest index
        let r2 = cfg.grasp_radius * cfg.grasp_radius;
        let mut best: Option<(usize, f64)> = None;
        for (j, b) in next.blocks.iter().enumerate() {
            let d2 = dist2_3d(b, &next.gripper);
            if d2 <= r2 && best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some((j, d2));
            }
        }
        if let Some((j, _)) = best {
            next.held = Some(j);
            next.blocks[j] = next.gripper;
        }
    }
    next.grip_closed = closing;
    next
}

/// Sample an initial state, or pass `continue_from` through unchanged.
pub fn reset<R: Rng>(
    cfg: &EnvConfig,
    rng: &mut R,
    continue_from: Option<&EnvState>,
) -> Result<EnvState, EnvError> {
    if let Some(s) = continue_from {
        return Ok(s.clone());
    }
    let d = cfg.block_radius;
    let keep = 1.0 - cfg.anneal;
    let p_grip = cfg.p_in_gripper * keep;
    let p_under = cfg.p_under_gripper * keep;
    let p_stack = cfg.p_stacked * keep;

    let gripper = [
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..cfg.table_z_max),
    ];
    let mut blocks = vec![[0.0f64; 3]; cfg.n_blocks];
    let mut placed: Vec<usize> = Vec::with_capacity(cfg.n_blocks);
    let mut held = None;
    let mut grip_closed = false;

    // block 0 first
    let u: f64 = rng.random_range(0.0..1.0);
    if u < p_grip {
        blocks[0] = gripper;
        held = Some(0);
        grip_closed = true;
    } else if u < p_grip + p_under {
        blocks[0] = [gripper[0], gripper[1], d];
    } else {
        blocks[0] = [rng.random_range(d..1.0 - d), rng.random_range(d..1.0 - d), d];
    }
    placed.push(0);

    // remaining blocks in a random order
    let mut order: Vec<usize> = (1..cfg.n_blocks).collect();
    for k in (1..order.len()).rev() {
        let j = rng.random_range(0..=k);
        order.swap(k, j);
    }
    for &i in &order {
        let stack_roll: f64 = rng.random_range(0.0..1.0);
        // stackable supports: placed, not held, nothing already on top
        let tops: Vec<usize> = placed
            .iter()
            .copied()
            .filter(|&j| {
                held != Some(j)
                    && !placed.iter().any(|&m| {
                        m != j && held != Some(m) && dist2_xy(&blocks[m], &blocks[j]) <= d * d && blocks[m][2] > blocks[j][2]
                    })
            })
            .collect();
        if stack_roll < p_stack && !tops.is_empty() {
            let j = tops[rng.random_range(0..tops.len())];
            blocks[i] = [blocks[j][0], blocks[j][1], blocks[j][2] + 2.0 * d];
        } else {
            let mut ok = false;
            for _ in 0..cfg.reset_max_tries {
                let x = rng.random_range(d..1.0 - d);
                let y = rng.random_range(d..1.0 - d);
                let candidate = [x, y, d];
                if placed.iter().all(|&j| dist2_xy(&blocks[j], &candidate) >= 4.0 * d * d) {
                    blocks[i] = candidate;
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(EnvError::SamplingFault { tries: cfg.reset_max_tries });
            }
        }
        placed.push(i);
    }
    Ok(EnvState { blocks, gripper, grip_closed, held })
}

/// Goal extraction h(s): the concatenated block positions.
pub fn extract_goal(state: &EnvState) -> Vec<f32> {
    let mut g = Vec::with_capacity(3 * state.blocks.len());
    for b in &state.blocks {
        g.extend_from_slice(&[b[0] as f32, b[1] as f32, b[2] as f32]);
    }
    g
}

/// Per-block sphere test on an f64 state: every block within the tolerance
/// of its goal component. Squared comparison keeps the boundary inclusive.
pub fn reward_fuvfa(cfg: &EnvConfig, state: &EnvState, goal: &[f32]) -> Result<bool, EnvError> {
    if goal.len() != cfg.goal_dim() {
        return Err(EnvError::DimensionMismatch { expected: cfg.goal_dim(), got: goal.len() });
    }
    let e2 = cfg.goal_tolerance * cfg.goal_tolerance;
    for (i, b) in state.blocks.iter().enumerate() {
        let gx = goal[3 * i] as f64;
        let gy = goal[3 * i + 1] as f64;
        let gz = goal[3 * i + 2] as f64;
        let dx = b[0] - gx;
        let dy = b[1] - gy;
        let dz = b[2] - gz;
        if dx * dx + dy * dy + dz * dz > e2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Same test on flat vectors (first 3B entries of an observation vs a goal).
pub fn reward_fuvfa_flat(cfg: &EnvConfig, obs: &[f32], goal: &[f32]) -> Result<bool, EnvError> {
    if goal.len() != cfg.goal_dim() {
        return Err(EnvError::DimensionMismatch { expected: cfg.goal_dim(), got: goal.len() });
    }
    if obs.len() < cfg.goal_dim() {
        return Err(EnvError::DimensionMismatch { expected: cfg.goal_dim(), got: obs.len() });
    }
    let e2 = cfg.goal_tolerance * cfg.goal_tolerance;
    for i in 0..cfg.n_blocks {
        let dx = obs[3 * i] as f64 - goal[3 * i] as f64;
        let dy = obs[3 * i + 1] as f64 - goal[3 * i + 1] as f64;
        let dz = obs[3 * i + 2] as f64 - goal[3 * i + 2] as f64;
        if dx * dx + dy * dy + dz * dz > e2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Circular block rotation bringing block `j` to slot 0. Works on any flat
/// vector whose first 3B entries are block sub-vectors; a trailing Y part is
/// copied through untouched.
pub fn permute_blocks(v: &[f32], n_blocks: usize, j: usize) -> Result<Vec<f32>, EnvError> {
    if j >= n_blocks {
        return Err(EnvError::ContractViolation(format!(
            "block index {j} out of range for {n_blocks} blocks"
        )));
    }
    if v.len() < 3 * n_blocks {
        return Err(EnvError::DimensionMismatch { expected: 3 * n_blocks, got: v.len() });
    }
    let mut out = Vec::with_capacity(v.len());
    for m in 0..n_blocks {
        let src = (j + m) % n_blocks;
        out.extend_from_slice(&v[3 * src..3 * src + 3]);
    }
    out.extend_from_slice(&v[3 * n_blocks..]);
    Ok(out)
}

/// Inverse of `permute_blocks` with the same `j`.
pub fn unpermute_blocks(v: &[f32], n_blocks: usize, j: usize) -> Result<Vec<f32>, EnvError> {
    permute_blocks(v, n_blocks, (n_blocks - j % n_blocks) % n_blocks)
}

#[cfg(test)]
mod tests;
