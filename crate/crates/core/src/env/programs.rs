//! Parametric program library over B blocks and two colored zones.
//!
//! Atomic (level-0) programs move one block: `Stack_a_b` puts block a on
//! block b, `Move_To_Zone_i_COLOR` carries block i to a zone center.
//! Non-atomic programs are predicates over whole arrangements; they are
//! realized by the program-composing controller, never executed directly.

use super::{EnvConfig, EnvError, EnvState};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZoneColor {
    Orange,
    Blue,
}

impl ZoneColor {
    pub fn name(self) -> &'static str {
        match self {
            ZoneColor::Orange => "ORANGE",
            ZoneColor::Blue => "BLUE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    /// Put block `top` on block `base`.
    Stack { top: usize, base: usize },
    /// Carry `block` to the center of the `color` zone.
    MoveToZone { block: usize, color: ZoneColor },
    StackAllToZone { color: ZoneColor },
    MoveAllToZone { color: ZoneColor },
    StackAllBlocks,
    CleanTable,
    CleanAndStack,
}

#[derive(Debug, Clone)]
pub struct ProgramSpec {
    pub index: usize,
    pub name: String,
    pub kind: ProgramKind,
    pub level: u8,
    pub atomic: bool,
}

/// The generated library: atomic programs first (indices 0..n_atomic), then
/// non-atomic ones by increasing level.
#[derive(Debug, Clone)]
pub struct ProgramLibrary {
    pub programs: Vec<ProgramSpec>,
    pub n_atomic: usize,
}

impl ProgramLibrary {
    pub fn generate(cfg: &EnvConfig) -> ProgramLibrary {
        let b = cfg.n_blocks;
        let mut programs = Vec::new();
        let push = |kind: ProgramKind, name: String, level: u8, atomic: bool, programs: &mut Vec<ProgramSpec>| {
            programs.push(ProgramSpec { index: programs.len(), name, kind, level, atomic });
        };
        for top in 0..b {
            for base in 0..b {
                if top != base {
                    push(
                        ProgramKind::Stack { top, base },
                        format!("Stack_{top}_{base}"),
                        0,
                        true,
                        &mut programs,
                    );
                }
            }
        }
        for color in [ZoneColor::Orange, ZoneColor::Blue] {
            for block in 0..b {
                push(
                    ProgramKind::MoveToZone { block, color },
                    format!("Move_To_Zone_{block}_{}", color.name()),
                    0,
                    true,
                    &mut programs,
                );
            }
        }
        let n_atomic = programs.len();
        let color_count = |c: ZoneColor| (0..b).filter(|&i| cfg.color_of(i) == c).count();
        // degenerate single-block variants collapse into their move/clean
        // counterparts and are dropped
        for color in [ZoneColor::Orange, ZoneColor::Blue] {
            if color_count(color) >= 2 {
                push(
                    ProgramKind::StackAllToZone { color },
                    format!("Stack_All_To_Zone_{}", color.name()),
                    1,
                    false,
                    &mut programs,
                );
            }
        }
        for color in [ZoneColor::Orange, ZoneColor::Blue] {
            push(
                ProgramKind::MoveAllToZone { color },
                format!("Move_All_To_Zone_{}", color.name()),
                1,
                false,
                &mut programs,
            );
        }
        push(ProgramKind::StackAllBlocks, "Stack_All_Blocks".into(), 1, false, &mut programs);
        push(ProgramKind::CleanTable, "Clean_Table".into(), 2, false, &mut programs);
        if [ZoneColor::Orange, ZoneColor::Blue].iter().all(|&c| color_count(c) >= 2) {
            push(ProgramKind::CleanAndStack, "Clean_And_Stack".into(), 2, false, &mut programs);
        }
        ProgramLibrary { programs, n_atomic }
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn get(&self, index: usize) -> &ProgramSpec {
        &self.programs[index]
    }

    pub fn max_level(&self) -> u8 {
        self.programs.iter().map(|p| p.level).max().unwrap_or(0)
    }

    pub fn atomic_indices(&self) -> impl Iterator<Item = usize> + '_ {
        0..self.n_atomic
    }

    pub fn non_atomic_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.n_atomic..self.programs.len()
    }

    pub fn by_name(&self, name: &str) -> Option<&ProgramSpec> {
        self.programs.iter().find(|p| p.name == name)
    }

    /// Which block an atomic program manipulates (slot 0 after permutation).
    pub fn target_block(&self, index: usize) -> Result<usize, EnvError> {
        match self.programs[index].kind {
            ProgramKind::Stack { top, .. } => Ok(top),
            ProgramKind::MoveToZone { block, .. } => Ok(block),
            _ => Err(EnvError::ContractViolation(format!(
                "program {} is not atomic",
                self.programs[index].name
            ))),
        }
    }

    /// Text table (index, name, level, atomic) for docs and fixtures.
    pub fn table(&self) -> String {
        let mut out = String::from("index\tname\tlevel\tatomic\n");
        for p in &self.programs {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", p.index, p.name, p.level, p.atomic as u8);
        }
        out
    }
}

/// True when some other resting block sits on top of `block` (within one
/// radius horizontally and above it by more than a radius).
fn is_under_another(cfg: &EnvConfig, state: &EnvState, block: usize) -> bool {
    let d = cfg.block_radius;
    state.blocks.iter().enumerate().any(|(j, b)| {
        j != block
            && state.held != Some(j)
            && super::dist2_xy(b, &state.blocks[block]) <= d * d
            && b[2] > state.blocks[block][2] + d
    })
}

fn within_tol(cfg: &EnvConfig, a: &[f64; 3], b: &[f64; 3]) -> bool {
    super::dist2_3d(a, b) <= cfg.goal_tolerance * cfg.goal_tolerance
}

/// ε-tower test: sorted by height, each block sits two radii above the one
/// below it (within the goal tolerance), in any order.
fn forms_tower(cfg: &EnvConfig, state: &EnvState, members: &[usize]) -> bool {
    if members.len() <= 1 {
        return true;
    }
    let mut sorted: Vec<usize> = members.to_vec();
    sorted.sort_by(|&a, &b| state.blocks[a][2].partial_cmp(&state.blocks[b][2]).unwrap());
    for w in sorted.windows(2) {
        let lower = &state.blocks[w[0]];
        let upper = &state.blocks[w[1]];
        let ideal = [lower[0], lower[1], lower[2] + 2.0 * cfg.block_radius];
        if !within_tol(cfg, upper, &ideal) {
            return false;
        }
    }
    true
}

fn blocks_of_color(cfg: &EnvConfig, color: ZoneColor) -> Vec<usize> {
    (0..cfg.n_blocks).filter(|&i| cfg.color_of(i) == color).collect()
}

fn lowest_of(state: &EnvState, members: &[usize]) -> usize {
    *members
        .iter()
        .min_by(|&&a, &&b| state.blocks[a][2].partial_cmp(&state.blocks[b][2]).unwrap())
        .expect("non-empty member set")
}

/// Pre-condition: can the program start in this state?
pub fn check_precondition(cfg: &EnvConfig, lib: &ProgramLibrary, index: usize, state: &EnvState) -> bool {
    match lib.programs[index].kind {
        ProgramKind::Stack { top, base } => {
            !is_under_another(cfg, state, base) && !is_under_another(cfg, state, top)
        }
        ProgramKind::MoveToZone { block, .. } => !is_under_another(cfg, state, block),
        // non-atomic programs can start anywhere
        _ => true,
    }
}

/// Post-condition: does the state satisfy the program's outcome?
pub fn check_postcondition(cfg: &EnvConfig, lib: &ProgramLibrary, index: usize, state: &EnvState) -> bool {
    let d = cfg.block_radius;
    match lib.programs[index].kind {
        ProgramKind::Stack { top, base } => {
            let b = &state.blocks[base];
            let ideal = [b[0], b[1], b[2] + 2.0 * d];
            within_tol(cfg, &state.blocks[top], &ideal)
        }
        ProgramKind::MoveToZone { block, color } => {
            let (cx, cy) = cfg.zone(color).center();
            within_tol(cfg, &state.blocks[block], &[cx, cy, d])
        }
        ProgramKind::StackAllToZone { color } => {
            let members = blocks_of_color(cfg, color);
            if !forms_tower(cfg, state, &members) {
                return false;
            }
            let base = lowest_of(state, &members);
            cfg.zone(color).contains(state.blocks[base][0], state.blocks[base][1])
        }
        ProgramKind::MoveAllToZone { color } => blocks_of_color(cfg, color)
            .iter()
            .all(|&i| cfg.zone(color).contains(state.blocks[i][0], state.blocks[i][1])),
        ProgramKind::StackAllBlocks => {
            let members: Vec<usize> = (0..cfg.n_blocks).collect();
            forms_tower(cfg, state, &members)
        }
        ProgramKind::CleanTable => (0..cfg.n_blocks).all(|i| {
            cfg.zone(cfg.color_of(i)).contains(state.blocks[i][0], state.blocks[i][1])
        }),
        ProgramKind::CleanAndStack => [ZoneColor::Orange, ZoneColor::Blue].iter().all(|&color| {
            let members = blocks_of_color(cfg, color);
            if members.is_empty() {
                return true;
            }
            if !forms_tower(cfg, state, &members) {
                return false;
            }
            let base = lowest_of(state, &members);
            cfg.zone(color).contains(state.blocks[base][0], state.blocks[base][1])
        }),
    }
}

/// Goal setter for atomic programs: desired block positions such that the
/// sphere reward against the returned goal equals the post-condition.
pub fn goal_setter(
    cfg: &EnvConfig,
    lib: &ProgramLibrary,
    index: usize,
    state: &EnvState,
) -> Result<Vec<f32>, EnvError> {
    let mut goal = super::extract_goal(state);
    match lib.programs[index].kind {
        ProgramKind::Stack { top, base } => {
            let b = &state.blocks[base];
            goal[3 * top] = b[0] as f32;
            goal[3 * top + 1] = b[1] as f32;
            goal[3 * top + 2] = (b[2] + 2.0 * cfg.block_radius) as f32;
            Ok(goal)
        }
        ProgramKind::MoveToZone { block, color } => {
            let (cx, cy) = cfg.zone(color).center();
            goal[3 * block] = cx as f32;
            goal[3 * block + 1] = cy as f32;
            goal[3 * block + 2] = cfg.block_radius as f32;
            Ok(goal)
        }
        _ => Err(EnvError::ContractViolation(format!(
            "goal setter only covers atomic programs, got {}",
            lib.programs[index].name
        ))),
    }
}

/// Ideal final block positions for a non-atomic program (used only by the
/// goal-conditioned multitask baseline, which receives extra supervision).
pub fn non_atomic_ideal_goal(
    cfg: &EnvConfig,
    lib: &ProgramLibrary,
    index: usize,
    state: &EnvState,
) -> Result<Vec<f32>, EnvError> {
    let d = cfg.block_radius;
    let mut goal = super::extract_goal(state);
    let set = |goal: &mut Vec<f32>, i: usize, p: [f64; 3]| {
        goal[3 * i] = p[0] as f32;
        goal[3 * i + 1] = p[1] as f32;
        goal[3 * i + 2] = p[2] as f32;
    };
    let tower_at = |goal: &mut Vec<f32>, members: &[usize], x: f64, y: f64| {
        let mut z = d;
        for &i in members {
            set(goal, i, [x, y, z]);
            z += 2.0 * d;
        }
    };
    match lib.programs[index].kind {
        ProgramKind::StackAllToZone { color } => {
            let (cx, cy) = cfg.zone(color).center();
            tower_at(&mut goal, &blocks_of_color(cfg, color), cx, cy);
        }
        ProgramKind::MoveAllToZone { color } => {
            let (cx, cy) = cfg.zone(color).center();
            for i in blocks_of_color(cfg, color) {
                set(&mut goal, i, [cx, cy, d]);
            }
        }
        ProgramKind::StackAllBlocks => {
            let base = &state.blocks[0];
            let members: Vec<usize> = (0..cfg.n_blocks).collect();
            tower_at(&mut goal, &members, base[0], base[1]);
        }
        ProgramKind::CleanTable => {
            for i in 0..cfg.n_blocks {
                let (cx, cy) = cfg.zone(cfg.color_of(i)).center();
                set(&mut goal, i, [cx, cy, d]);
            }
        }
        ProgramKind::CleanAndStack => {
            for color in [ZoneColor::Orange, ZoneColor::Blue] {
                let (cx, cy) = cfg.zone(color).center();
                tower_at(&mut goal, &blocks_of_color(cfg, color), cx, cy);
            }
        }
        _ => {
            return Err(EnvError::ContractViolation(format!(
                "{} is atomic; use the atomic goal setter",
                lib.programs[index].name
            )))
        }
    }
    Ok(goal)
}
