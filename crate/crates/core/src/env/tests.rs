use super::programs::*;
use super::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Brute-force transition oracle. Re-derives every rule from its definition:
// explicit candidate lists, sorting instead of running maxima. Kept fully
// independent of `step`.
// ---------------------------------------------------------------------------

pub(crate) fn oracle_step(cfg: &EnvConfig, s: &EnvState, action: Action) -> EnvState {
    let clamp1 = |v: f64| if v < -1.0 { -1.0 } else if v > 1.0 { 1.0 } else { v };
    let (adx, ady, adz, agrip) =
        (clamp1(action.dx), clamp1(action.dy), clamp1(action.dz), clamp1(action.grip));

    let gx = (s.gripper[0] + cfg.max_step_delta * adx).clamp(0.0, 1.0);
    let gy = (s.gripper[1] + cfg.max_step_delta * ady).clamp(0.0, 1.0);
    let gz = (s.gripper[2] + cfg.max_step_delta * adz).clamp(0.0, cfg.table_z_max);
    let new_grip = agrip >= 0.0;

    let mut blocks = s.blocks.clone();
    let mut held = s.held;

    if let Some(i) = s.held {
        blocks[i] = [gx, gy, gz];
        let releasing = s.grip_closed && !new_grip;
        if releasing {
            // collect every support candidate, sort by height, take the top
            let mut supports: Vec<f64> = Vec::new();
            for (j, b) in blocks.iter().enumerate() {
                if j == i || held == Some(j) {
                    continue;
                }
                let hx = b[0] - gx;
                let hy = b[1] - gy;
                if (hx * hx + hy * hy).sqrt() <= cfg.block_radius {
                    supports.push(b[2]);
                }
            }
            supports.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let land = match supports.last() {
                Some(&top) => top + 2.0 * cfg.block_radius,
                None => cfg.block_radius,
            };
            blocks[i][2] = land;
            held = None;
        }
    } else if !s.grip_closed && new_grip {
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for (j, b) in blocks.iter().enumerate() {
            let dx = b[0] - gx;
            let dy = b[1] - gy;
            let dz = b[2] - gz;
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 <= cfg.grasp_radius * cfg.grasp_radius {
                candidates.push((d2, j));
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if let Some(&(_, j)) = candidates.first() {
            held = Some(j);
            blocks[j] = [gx, gy, gz];
        }
    }

    EnvState { blocks, gripper: [gx, gy, gz], grip_closed: new_grip, held }
}

fn assert_states_byte_equal(a: &EnvState, b: &EnvState, ctx: &str) {
    assert_eq!(a.blocks.len(), b.blocks.len(), "{ctx}");
    for (i, (x, y)) in a.blocks.iter().zip(&b.blocks).enumerate() {
        for k in 0..3 {
            assert_eq!(x[k].to_bits(), y[k].to_bits(), "{ctx}: block {i} axis {k}: {} vs {}", x[k], y[k]);
        }
    }
    for k in 0..3 {
        assert_eq!(a.gripper[k].to_bits(), b.gripper[k].to_bits(), "{ctx}: gripper axis {k}");
    }
    assert_eq!(a.grip_closed, b.grip_closed, "{ctx}: grip flag");
    assert_eq!(a.held, b.held, "{ctx}: held");
}

pub(crate) fn random_action<R: Rng>(rng: &mut R) -> Action {
    // slightly out of range to exercise clamping
    Action {
        dx: rng.random_range(-1.2..1.2),
        dy: rng.random_range(-1.2..1.2),
        dz: rng.random_range(-1.2..1.2),
        grip: rng.random_range(-1.2..1.2),
    }
}

// ---------------------------------------------------------------------------
// step
// ---------------------------------------------------------------------------

#[test]
fn gripper_translates_by_delta_and_opens() {
    let cfg = EnvConfig::default();
    let mut s = reset(&cfg, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
    s.gripper = [0.5, 0.5, 0.2];
    s.grip_closed = true;
    s.held = None;
    let next = step(&cfg, &s, Action { dx: 1.0, dy: 0.0, dz: 0.0, grip: -1.0 });
    assert_eq!(next.gripper, [0.55, 0.5, 0.2]);
    assert!(!next.grip_closed);
}

#[test]
fn held_block_tracks_gripper() {
    let cfg = EnvConfig::default();
    let mut s = reset(&cfg, &mut ChaCha8Rng::seed_from_u64(1), None).unwrap();
    s.gripper = [0.4, 0.4, 0.2];
    s.grip_closed = true;
    s.held = Some(2);
    s.blocks[2] = s.gripper;
    let next = step(&cfg, &s, Action { dx: 0.0, dy: 0.0, dz: 1.0, grip: 1.0 });
    assert_eq!(next.blocks[2], next.gripper);
    assert_eq!(next.held, Some(2));
}

#[test]
fn release_lands_on_support_at_three_radii() {
    let cfg = EnvConfig::default();
    let d = cfg.block_radius;
    let mut s = reset(&cfg, &mut ChaCha8Rng::seed_from_u64(2), None).unwrap();
    // resting block at (0.3, 0.3, d); held block released right above it
    s.blocks[0] = [0.3, 0.3, d];
    s.blocks[1] = [0.3, 0.3, 0.4];
    s.blocks[2] = [0.7, 0.7, d];
    s.blocks[3] = [0.8, 0.2, d];
    s.gripper = [0.3, 0.3, 0.4];
    s.grip_closed = true;
    s.held = Some(1);
    let next = step(&cfg, &s, Action { dx: 0.0, dy: 0.0, dz: 0.0, grip: -1.0 });
    assert_eq!(next.blocks[1][2].to_bits(), (d + 2.0 * d).to_bits());
    assert_eq!(next.held, None);
    // cross-check with the brute-force drop oracle
    let oracle = oracle_step(&cfg, &s, Action { dx: 0.0, dy: 0.0, dz: 0.0, grip: -1.0 });
    assert_states_byte_equal(&next, &oracle, "release example");
}

#[test]
fn grasp_picks_nearest_block_within_reach() {
    let cfg = EnvConfig::default();
    let d = cfg.block_radius;
    let mut s = reset(&cfg, &mut ChaCha8Rng::seed_from_u64(3), None).unwrap();
    s.blocks[0] = [0.5, 0.5, d];
    s.blocks[1] = [0.52, 0.5, d];
    s.blocks[2] = [0.9, 0.9, d];
    s.blocks[3] = [0.1, 0.9, d];
    s.gripper = [0.515, 0.5, d];
    s.grip_closed = false;
    s.held = None;
    let next = step(&cfg, &s, Action { dx: 0.0, dy: 0.0, dz: 0.0, grip: 1.0 });
    assert_eq!(next.held, Some(1));
    assert_eq!(next.blocks[1], next.gripper);
}

#[test]
fn step_is_pure() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let a = random_action(&mut rng);
    assert_states_byte_equal(&step(&cfg, &s, a), &step(&cfg, &s, a), "purity");
}

#[test]
fn stepper_matches_brute_force_oracle_on_random_play() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let mut s = reset(&cfg, &mut rng, None).unwrap();
        for t in 0..25 {
            let a = random_action(&mut rng);
            let fast = step(&cfg, &s, a);
            let slow = oracle_step(&cfg, &s, a);
            assert_states_byte_equal(&fast, &slow, &format!("trial {trial} step {t}"));
            s = fast;
        }
    }
}

#[test]
fn resting_heights_stay_on_the_lattice() {
    let cfg = EnvConfig::default();
    let d = cfg.block_radius;
    // the lattice is built by the same additive chain the stepper uses
    let mut lattice = vec![d];
    for _ in 0..cfg.n_blocks {
        lattice.push(lattice.last().unwrap() + 2.0 * d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let mut s = reset(&cfg, &mut rng, None).unwrap();
        for _ in 0..60 {
            s = step(&cfg, &s, random_action(&mut rng));
            for (i, b) in s.blocks.iter().enumerate() {
                if s.held == Some(i) {
                    continue;
                }
                assert!(
                    lattice.iter().any(|&h| h.to_bits() == b[2].to_bits()),
                    "block {i} rests at z={} off the lattice",
                    b[2]
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// reset
// ---------------------------------------------------------------------------

#[test]
fn reset_continue_from_is_identity() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let s2 = reset(&cfg, &mut rng, Some(&s)).unwrap();
    assert_states_byte_equal(&s, &s2, "continue_from");
}

#[test]
fn reset_fully_annealed_puts_all_blocks_on_table() {
    let cfg = EnvConfig { anneal: 1.0, ..EnvConfig::default() };
    let d = cfg.block_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let s = reset(&cfg, &mut rng, None).unwrap();
        assert_eq!(s.held, None);
        for b in &s.blocks {
            assert_eq!(b[2].to_bits(), d.to_bits());
        }
        for i in 0..cfg.n_blocks {
            for j in 0..i {
                let dist = dist2_xy(&s.blocks[i], &s.blocks[j]).sqrt();
                assert!(dist >= 2.0 * d, "blocks {i},{j} too close: {dist}");
            }
        }
    }
}

#[test]
fn reset_initial_schedule_has_one_fifth_in_gripper() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let mut held = 0usize;
    for _ in 0..n {
        let s = reset(&cfg, &mut rng, None).unwrap();
        if s.held == Some(0) {
            held += 1;
        }
    }
    let frac = held as f64 / n as f64;
    assert!((frac - 0.2).abs() <= 0.02, "held fraction {frac}");
}

// ---------------------------------------------------------------------------
// goals and rewards
// ---------------------------------------------------------------------------

#[test]
fn extract_goal_reads_block_positions() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let g = extract_goal(&s);
    assert_eq!(g.len(), 3 * cfg.n_blocks);
    assert_eq!(g[0], s.blocks[0][0] as f32);
    assert_eq!(g[1], s.blocks[0][1] as f32);
    assert_eq!(g[2], s.blocks[0][2] as f32);
    // a null action leaves blocks (and the goal) unchanged
    let s2 = step(&cfg, &s, Action { dx: 0.0, dy: 0.0, dz: 0.0, grip: if s.grip_closed { 1.0 } else { -1.0 } });
    assert_eq!(extract_goal(&s2), g);
}

#[test]
fn reward_accepts_exact_goal_and_boundary() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let g = extract_goal(&s);
    assert!(reward_fuvfa(&cfg, &s, &g).unwrap());

    // displace one block by exactly the tolerance along x: inclusive
    let mut on_edge = s.clone();
    on_edge.blocks[1][0] += cfg.goal_tolerance;
    assert!(reward_fuvfa(&cfg, &on_edge, &g).unwrap());

    // twice the tolerance: outside the sphere
    let mut out = s.clone();
    out.blocks[1][0] += 2.0 * cfg.goal_tolerance;
    assert!(!reward_fuvfa(&cfg, &out, &g).unwrap());
}

#[test]
fn reward_rejects_dimension_mismatch() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = reset(&cfg, &mut rng, None).unwrap();
    assert!(matches!(
        reward_fuvfa(&cfg, &s, &[0.0; 3]),
        Err(EnvError::DimensionMismatch { .. })
    ));
}

#[test]
fn goal_setter_stack_places_top_two_radii_above_base() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let p = lib.by_name("Stack_0_1").unwrap().index;
    let g = goal_setter(&cfg, &lib, p, &s).unwrap();
    assert_eq!(g[0], s.blocks[1][0] as f32);
    assert_eq!(g[1], s.blocks[1][1] as f32);
    assert_eq!(g[2], (s.blocks[1][2] + 2.0 * cfg.block_radius) as f32);
    // every other block keeps its current position
    for i in 1..cfg.n_blocks {
        assert_eq!(&g[3 * i..3 * i + 3], &extract_goal(&s)[3 * i..3 * i + 3]);
    }
}

#[test]
fn goal_setter_move_to_zone_leaves_others_in_place() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let p = lib.by_name("Move_To_Zone_0_ORANGE").unwrap().index;
    let g = goal_setter(&cfg, &lib, p, &s).unwrap();
    let (cx, cy) = cfg.zone_orange.center();
    assert_eq!(g[0], cx as f32);
    assert_eq!(g[1], cy as f32);
    assert_eq!(g[2], cfg.block_radius as f32);
    let h = extract_goal(&s);
    for i in 1..cfg.n_blocks {
        assert_eq!(&g[3 * i..3 * i + 3], &h[3 * i..3 * i + 3]);
    }
}

#[test]
fn goal_setter_rejects_non_atomic_indices() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let p = lib.by_name("Clean_Table").unwrap().index;
    assert!(matches!(goal_setter(&cfg, &lib, p, &s), Err(EnvError::ContractViolation(_))));
}

#[test]
fn teleporting_to_the_goal_satisfies_reward_and_postcondition() {
    // goal setter / reward consistency on every atomic program
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..100 {
        let s = reset(&cfg, &mut rng, None).unwrap();
        for p in lib.atomic_indices() {
            if !check_precondition(&cfg, &lib, p, &s) {
                continue;
            }
            let g = goal_setter(&cfg, &lib, p, &s).unwrap();
            let mut teleported = s.clone();
            for i in 0..cfg.n_blocks {
                teleported.blocks[i] =
                    [g[3 * i] as f64, g[3 * i + 1] as f64, g[3 * i + 2] as f64];
            }
            assert!(reward_fuvfa(&cfg, &teleported, &g).unwrap(), "program {p}");
            assert!(check_postcondition(&cfg, &lib, p, &teleported), "program {p}");
        }
    }
}

#[test]
fn state_already_satisfying_postcondition_gets_reward_one() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let d = cfg.block_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut s = reset(&cfg, &mut rng, None).unwrap();
    s.blocks[0] = [s.blocks[1][0], s.blocks[1][1], s.blocks[1][2] + 2.0 * d];
    let p = lib.by_name("Stack_0_1").unwrap().index;
    assert!(check_postcondition(&cfg, &lib, p, &s));
    let g = goal_setter(&cfg, &lib, p, &s).unwrap();
    assert!(reward_fuvfa(&cfg, &s, &g).unwrap());
}

// ---------------------------------------------------------------------------
// preconditions / postconditions
// ---------------------------------------------------------------------------

fn all_on_table(cfg: &EnvConfig) -> EnvState {
    let d = cfg.block_radius;
    let spots = [[0.2, 0.2], [0.8, 0.2], [0.2, 0.8], [0.8, 0.8], [0.5, 0.5], [0.5, 0.1]];
    EnvState {
        blocks: (0..cfg.n_blocks).map(|i| [spots[i][0], spots[i][1], d]).collect(),
        gripper: [0.5, 0.9, 0.3],
        grip_closed: false,
        held: None,
    }
}

#[test]
fn stack_precondition_fails_when_base_is_occupied() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let d = cfg.block_radius;
    let s = all_on_table(&cfg);
    let stack_01 = lib.by_name("Stack_0_1").unwrap().index;
    assert!(check_precondition(&cfg, &lib, stack_01, &s));

    // block 2 on block 1 blocks Stack_0_1
    let mut occupied = s.clone();
    occupied.blocks[2] = [s.blocks[1][0], s.blocks[1][1], s.blocks[1][2] + 2.0 * d];
    assert!(!check_precondition(&cfg, &lib, stack_01, &occupied));

    // burying the moved block also blocks it
    let mut buried = s.clone();
    buried.blocks[3] = [s.blocks[0][0], s.blocks[0][1], s.blocks[0][2] + 2.0 * d];
    assert!(!check_precondition(&cfg, &lib, stack_01, &buried));
}

#[test]
fn non_atomic_preconditions_always_hold() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..20 {
        let s = reset(&cfg, &mut rng, None).unwrap();
        for p in lib.non_atomic_indices() {
            assert!(check_precondition(&cfg, &lib, p, &s));
        }
    }
}

#[test]
fn clean_table_postcondition_on_two_block_config() {
    let cfg = EnvConfig { n_blocks: 2, ..EnvConfig::default() };
    let lib = ProgramLibrary::generate(&cfg);
    let d = cfg.block_radius;
    let (ox, oy) = cfg.zone_orange.center();
    let (bx, by) = cfg.zone_blue.center();
    let s = EnvState {
        blocks: vec![[ox, oy, d], [bx, by, d]],
        gripper: [0.5, 0.5, 0.3],
        grip_closed: false,
        held: None,
    };
    let p = lib.by_name("Clean_Table").unwrap().index;
    assert!(check_postcondition(&cfg, &lib, p, &s));
    // swap colors into the wrong zones
    let swapped = EnvState { blocks: vec![[bx, by, d], [ox, oy, d]], ..s.clone() };
    assert!(!check_postcondition(&cfg, &lib, p, &swapped));
}

#[test]
fn stack_all_blocks_accepts_any_tower_order() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let d = cfg.block_radius;
    let p = lib.by_name("Stack_All_Blocks").unwrap().index;
    // tower ordered 3-1-2-0 bottom to top at (0.4, 0.6)
    let order = [3usize, 1, 2, 0];
    let mut blocks = vec![[0.0; 3]; 4];
    let mut z = d;
    for &i in &order {
        blocks[i] = [0.4, 0.6, z];
        z += 2.0 * d;
    }
    let s = EnvState { blocks, gripper: [0.1, 0.1, 0.4], grip_closed: false, held: None };
    assert!(check_postcondition(&cfg, &lib, p, &s));
    // knock the top off
    let mut scattered = s.clone();
    scattered.blocks[0] = [0.9, 0.1, d];
    assert!(!check_postcondition(&cfg, &lib, p, &scattered));
}

#[test]
fn library_shape_matches_block_count() {
    let cfg4 = EnvConfig::default();
    let lib4 = ProgramLibrary::generate(&cfg4);
    assert_eq!(lib4.n_atomic, 20); // 12 stack pairs + 8 zone moves
    assert_eq!(lib4.len() - lib4.n_atomic, 7);
    assert_eq!(lib4.max_level(), 2);

    let cfg2 = EnvConfig { n_blocks: 2, ..EnvConfig::default() };
    let lib2 = ProgramLibrary::generate(&cfg2);
    assert_eq!(lib2.n_atomic, 6); // 2 stack pairs + 4 zone moves
    // single-block colors drop the degenerate stack-in-zone variants
    let non_atomic: Vec<&str> = lib2.non_atomic_indices().map(|i| lib2.get(i).name.as_str()).collect();
    assert_eq!(
        non_atomic,
        vec!["Move_All_To_Zone_ORANGE", "Move_All_To_Zone_BLUE", "Stack_All_Blocks", "Clean_Table"]
    );
    assert_eq!(lib2.max_level(), 2);

    // callees available to the controller always sit strictly below the caller
    for lib in [&lib4, &lib2] {
        for p in lib.non_atomic_indices() {
            assert!(lib.get(p).level > 0);
        }
        for p in lib.atomic_indices() {
            assert!(lib.get(p).atomic && lib.get(p).level == 0);
        }
    }
}

#[test]
fn library_table_lists_every_program() {
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let table = lib.table();
    assert_eq!(table.lines().count(), lib.len() + 1);
    assert!(table.contains("Clean_And_Stack\t2\t0"));
    assert!(table.contains("Stack_0_1\t0\t1"));
}

// ---------------------------------------------------------------------------
// observation permutation
// ---------------------------------------------------------------------------

#[test]
fn permutation_examples() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let s = reset(&cfg, &mut rng, None).unwrap();
    let obs = s.observation();

    // j = 0 is the identity
    assert_eq!(permute_blocks(&obs, 4, 0).unwrap(), obs);

    // j = 2 reorders blocks to (2, 3, 0, 1), Y untouched
    let p = permute_blocks(&obs, 4, 2).unwrap();
    for (slot, src) in [(0usize, 2usize), (1, 3), (2, 0), (3, 1)] {
        assert_eq!(&p[3 * slot..3 * slot + 3], &obs[3 * src..3 * src + 3]);
    }
    assert_eq!(&p[12..], &obs[12..]);

    // out-of-range index is a contract violation
    assert!(matches!(permute_blocks(&obs, 4, 4), Err(EnvError::ContractViolation(_))));
}

proptest! {
    #[test]
    fn permute_then_unpermute_is_identity(seed in 0u64..5000, j in 0usize..4) {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = reset(&cfg, &mut rng, None).unwrap();
        let obs = s.observation();
        let p = permute_blocks(&obs, 4, j).unwrap();
        let back = unpermute_blocks(&p, 4, j).unwrap();
        prop_assert_eq!(back, obs);
    }

    #[test]
    fn permutations_form_a_cyclic_group(seed in 0u64..5000, j in 0usize..4, k in 0usize..4) {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = reset(&cfg, &mut rng, None).unwrap();
        let obs = s.observation();
        let two = permute_blocks(&permute_blocks(&obs, 4, j).unwrap(), 4, k).unwrap();
        let composed = permute_blocks(&obs, 4, (j + k) % 4).unwrap();
        prop_assert_eq!(two, composed);
    }
}

#[test]
fn observation_roundtrip_recovers_state() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let mut s = reset(&cfg, &mut rng, None).unwrap();
        for _ in 0..10 {
            s = step(&cfg, &s, random_action(&mut rng));
        }
        let back = EnvState::from_observation(&cfg, &s.observation()).unwrap();
        assert_eq!(back.grip_closed, s.grip_closed);
        assert_eq!(back.held, s.held);
        for (a, b) in back.blocks.iter().zip(&s.blocks) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn stack_precondition_survives_unrelated_moves() {
    // monotonicity: actions away from the base column keep the precondition
    let cfg = EnvConfig::default();
    let lib = ProgramLibrary::generate(&cfg);
    let s = all_on_table(&cfg);
    let p = lib.by_name("Stack_0_1").unwrap().index;
    assert!(check_precondition(&cfg, &lib, p, &s));
    let mut cur = s;
    for _ in 0..30 {
        // wiggle the gripper far from block 1's column, never grabbing
        cur = step(&cfg, &cur, Action { dx: 0.3, dy: -0.2, dz: 0.1, grip: -1.0 });
        assert!(check_precondition(&cfg, &lib, p, &cur));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = EnvConfig { n_blocks: 1, ..EnvConfig::default() };
    assert!(cfg.validate().is_err());
    cfg.n_blocks = 4;
    cfg.zone_blue = cfg.zone_orange;
    assert!(cfg.validate().is_err());
    cfg = EnvConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.goal_tolerance = 0.5;
    assert!(cfg.validate().is_err());
}
