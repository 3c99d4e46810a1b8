//! Two-phase training loop for the goal-conditioned policy, plus evaluation
//! suites.
//!
//! Phase 1 draws fresh initial states every episode (with the start
//! distribution annealing toward all-blocks-on-table). Phase 2 keeps
//! training but starts episodes from a pool of previously observed final
//! states with probability `p_no_reset`, approximating the distribution the
//! policy faces when skills are chained.

use super::{
    her_relabel, run_atomic_episode, sample_startable_program, DdpgAgent, Episode, PolicyError,
    ReplayStore,
};
use crate::config::Params;
use crate::env::programs::{check_postcondition, goal_setter, ProgramLibrary, ZoneColor};
use crate::env::{reset, step, Action, EnvState};
use crate::metrics::{fmt_f, Csv};
use crate::rng::{stream_rng, Stream};
use crate::workers::run_slots;
use rand::Rng;

/// Ring buffer of episode end states used as phase-2 continuation starts.
#[derive(Debug, Clone, Default)]
pub struct FinalStatePool {
    states: Vec<EnvState>,
    capacity: usize,
    write: usize,
}

impl FinalStatePool {
    pub fn new(capacity: usize) -> FinalStatePool {
        FinalStatePool { states: Vec::new(), capacity, write: 0 }
    }

    pub fn push(&mut self, s: EnvState) {
        if self.states.len() < self.capacity {
            self.states.push(s);
        } else {
            self.states[self.write] = s;
            self.write = (self.write + 1) % self.capacity;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> EnvState {
        self.states[rng.random_range(0..self.states.len())].clone()
    }
}

#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub program: String,
    pub success_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseMetrics {
    pub rows: Vec<EpochRow>,
    /// Fraction of episodes started from the continuation pool.
    pub continuation_fraction: f64,
    /// Mean atomic success per epoch (over the per-program evaluations).
    pub epoch_mean_success: Vec<f64>,
}

impl PhaseMetrics {
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["epoch", "program", "success_rate", "critic_loss", "actor_loss"]);
        for r in &self.rows {
            csv.row(&[
                r.epoch.to_string(),
                r.program.clone(),
                fmt_f(r.success_rate),
                fmt_f(r.critic_loss),
                fmt_f(r.actor_loss),
            ]);
        }
        csv
    }
}

/// One training episode: roll a fresh or continued start state, pick a
/// startable atomic program, run the policy with exploration noise. With
/// `p_continue = 0` (or an empty pool) this is exactly the phase-1 sampler.
pub fn collect_training_episode<R: Rng>(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &crate::nn::DenseNet<f32>,
    pool: &FinalStatePool,
    p_continue: f64,
    rng: &mut R,
) -> Result<(Episode, EnvState), PolicyError> {
    let continue_roll: f64 = rng.random_range(0.0..1.0);
    let continued = continue_roll < p_continue && !pool.is_empty();
    let mut start =
        if continued { pool.sample(rng) } else { reset(&params.env, rng, None)? };
    let program = sample_startable_program(params, lib, &mut start, rng)?;
    run_atomic_episode(params, lib, actor, start, program, true, continued, rng)
}

/// Run one training phase. The agent is mutated in place; phase 2 expects
/// the phase-1 weights already loaded.
pub fn run_phase(
    params: &Params,
    lib: &ProgramLibrary,
    agent: &mut DdpgAgent,
    phase: u8,
    seed: u64,
    workers: usize,
) -> Result<PhaseMetrics, PolicyError> {
    assert!(phase == 1 || phase == 2, "phase is 1 or 2");
    let epochs = if phase == 1 { params.epochs_phase1 } else { params.epochs_phase2 };
    let mut replay = ReplayStore::new(params.buffer_capacity);
    let mut pool = FinalStatePool::new(params.final_pool_capacity);
    let mut rows = Vec::new();
    let mut epoch_mean_success = Vec::new();
    let mut continued_episodes = 0usize;
    let mut total_episodes = 0usize;
    let phase_tag = phase as u64;

    for epoch in 0..epochs {
        let mut cfg_epoch = params.env.clone();
        cfg_epoch.anneal = if phase == 1 {
            (epoch as f64 / (params.epochs_phase1.max(2) - 1) as f64).min(1.0)
        } else {
            1.0
        };
        let mut params_epoch = params.clone();
        params_epoch.env = cfg_epoch;

        let mut critic_loss_acc = 0.0;
        let mut actor_loss_acc = 0.0;
        let mut n_updates = 0usize;
        // phase 1 is the p = 0 degenerate case of the same sampler
        let p_continue = if phase == 1 { 0.0 } else { params.p_no_reset };
        for cycle in 0..params.n_cycles {
            // parallel episode collection against a frozen actor
            let actor = &agent.actor;
            let pool_ref = &pool;
            let pe = &params_epoch;
            let episodes: Vec<Result<(Episode, EnvState), PolicyError>> =
                run_slots(params.episodes_per_cycle, workers, |slot| {
                    let mut rng = stream_rng(
                        seed,
                        Stream::Episode,
                        &[epoch as u64, cycle as u64, slot as u64],
                    );
                    collect_training_episode(pe, lib, actor, pool_ref, p_continue, &mut rng)
                });
            for result in episodes {
                let (episode, final_state) = result?;
                total_episodes += 1;
                if episode.continued {
                    continued_episodes += 1;
                }
                if phase == 2 {
                    pool.push(final_state);
                }
                replay.push_many(her_relabel(params, &episode, params.replay_k));
            }
            // learner updates
            let mut rng_u =
                stream_rng(seed, Stream::Update, &[epoch as u64, cycle as u64]);
            if replay.len() >= params.batch_size {
                for _ in 0..params.n_updates_per_cycle {
                    let batch = replay.sample(params.batch_size, &mut rng_u);
                    let (cl, al) = agent.update(&batch)?;
                    critic_loss_acc += cl;
                    actor_loss_acc += al;
                    n_updates += 1;
                }
            }
        }
        let (mean_cl, mean_al) = if n_updates > 0 {
            (critic_loss_acc / n_updates as f64, actor_loss_acc / n_updates as f64)
        } else {
            (0.0, 0.0)
        };

        // per-epoch deterministic evaluation on the end-of-anneal start
        // distribution
        let mut mean = 0.0;
        for p in lib.atomic_indices() {
            let rate = eval_atomic_program(
                params,
                lib,
                &agent.actor,
                p,
                params.eval_episodes_per_program,
                seed,
                (phase_tag, epoch as u64),
                workers,
            )?;
            mean += rate;
            rows.push(EpochRow {
                epoch,
                program: lib.get(p).name.clone(),
                success_rate: rate,
                critic_loss: mean_cl,
                actor_loss: mean_al,
            });
        }
        epoch_mean_success.push(mean / lib.n_atomic as f64);
    }
    Ok(PhaseMetrics {
        rows,
        continuation_fraction: if total_episodes > 0 {
            continued_episodes as f64 / total_episodes as f64
        } else {
            0.0
        },
        epoch_mean_success,
    })
}

fn eval_atomic_program(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &crate::nn::DenseNet<f32>,
    program: usize,
    n_episodes: usize,
    seed: u64,
    tag: (u64, u64),
    workers: usize,
) -> Result<f64, PolicyError> {
    let mut eval_params = params.clone();
    eval_params.env.anneal = 1.0;
    let pe = &eval_params;
    let results: Vec<Result<bool, PolicyError>> = run_slots(n_episodes, workers, |slot| {
        let mut rng = stream_rng(
            seed,
            Stream::Eval,
            &[tag.0, tag.1, program as u64, slot as u64],
        );
        let start = reset(&pe.env, &mut rng, None)?;
        let (episode, _) =
            run_atomic_episode(pe, lib, actor, start, program, false, false, &mut rng)?;
        Ok(episode.transitions.last().expect("non-empty episode").r > 0.5)
    });
    let mut hits = 0usize;
    for r in results {
        if r? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_episodes as f64)
}

/// A chained evaluation task: atomic programs executed back to back without
/// resets; success requires every post-condition to hold right after its
/// segment.
#[derive(Debug, Clone)]
pub struct ChainSuite {
    pub name: String,
    pub programs: Vec<usize>,
}

/// The two multi-step suites at a given block count: moving every block to
/// its color zone, and building a stack chain (at B=2 the stack chain is a
/// move followed by one stack so it still spans two skills).
pub fn multi_step_suites(cfg: &crate::env::EnvConfig, lib: &ProgramLibrary) -> Vec<ChainSuite> {
    let b = cfg.n_blocks;
    let moving: Vec<usize> = (0..b)
        .map(|i| {
            let color = cfg.color_of(i);
            lib.by_name(&format!("Move_To_Zone_{i}_{}", color.name())).expect("library move").index
        })
        .collect();
    let stacking: Vec<usize> = if b == 2 {
        vec![
            lib.by_name(&format!("Move_To_Zone_0_{}", ZoneColor::Orange.name())).unwrap().index,
            lib.by_name("Stack_1_0").unwrap().index,
        ]
    } else {
        (1..b).map(|i| lib.by_name(&format!("Stack_{i}_{}", i - 1)).unwrap().index).collect()
    };
    vec![
        ChainSuite { name: "MultiStep-Moving".into(), programs: moving },
        ChainSuite { name: "MultiStep-Stacking".into(), programs: stacking },
    ]
}

/// Success table over single atomic programs and the chained suites.
#[derive(Debug, Clone)]
pub struct EvalTable {
    pub rows: Vec<(String, f64)>,
}

impl EvalTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["program", "success_rate"]);
        for (name, rate) in &self.rows {
            csv.row(&[name.clone(), fmt_f(*rate)]);
        }
        csv
    }
}

/// Evaluate the trained policy: per-program success plus the multi-step
/// chains, deterministic under the seed.
pub fn evaluate_goal_policy(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &crate::nn::DenseNet<f32>,
    n_episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<EvalTable, PolicyError> {
    let mut rows = Vec::new();
    for p in lib.atomic_indices() {
        let rate =
            eval_atomic_program(params, lib, actor, p, n_episodes, seed, (90, p as u64), workers)?;
        rows.push((lib.get(p).name.clone(), rate));
    }
    for (suite_idx, suite) in multi_step_suites(&params.env, lib).iter().enumerate() {
        let rate = eval_chain(params, lib, actor, suite, n_episodes, seed, suite_idx, workers)?;
        rows.push((suite.name.clone(), rate));
    }
    Ok(EvalTable { rows })
}

pub fn eval_chain(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &crate::nn::DenseNet<f32>,
    suite: &ChainSuite,
    n_episodes: usize,
    seed: u64,
    suite_tag: usize,
    workers: usize,
) -> Result<f64, PolicyError> {
    let mut eval_params = params.clone();
    eval_params.env.anneal = 1.0;
    let pe = &eval_params;
    let results: Vec<Result<bool, PolicyError>> = run_slots(n_episodes, workers, |slot| {
        let mut rng = stream_rng(seed, Stream::Eval, &[91, suite_tag as u64, slot as u64]);
        let mut state = reset(&pe.env, &mut rng, None)?;
        for &program in &suite.programs {
            let (_, next) =
                run_atomic_episode(pe, lib, actor, state.clone(), program, false, true, &mut rng)?;
            if !check_postcondition(&pe.env, lib, program, &next) {
                return Ok(false);
            }
            state = next;
        }
        Ok(true)
    });
    let mut hits = 0usize;
    for r in results {
        if r? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_episodes as f64)
}

/// Scripted oracle that teleports straight to the goal: an upper-bound
/// policy double used to sanity-check evaluation plumbing.
pub fn oracle_chain_success(
    params: &Params,
    lib: &ProgramLibrary,
    suite: &ChainSuite,
    n_episodes: usize,
    seed: u64,
) -> Result<f64, PolicyError> {
    let mut eval_params = params.clone();
    eval_params.env.anneal = 1.0;
    let mut hits = 0;
    for e in 0..n_episodes {
        let mut rng = stream_rng(seed, Stream::Eval, &[92, e as u64]);
        let mut state = reset(&eval_params.env, &mut rng, None)?;
        let mut ok = true;
        for &program in &suite.programs {
            let goal = goal_setter(&eval_params.env, lib, program, &state)?;
            for i in 0..eval_params.env.n_blocks {
                state.blocks[i] =
                    [goal[3 * i] as f64, goal[3 * i + 1] as f64, goal[3 * i + 2] as f64];
            }
            // one noop step keeps the state flowing through the simulator
            state = step(&eval_params.env, &state, Action { dx: 0.0, dy: 0.0, dz: 0.0, grip: -1.0 });
            if !check_postcondition(&eval_params.env, lib, program, &state) {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_episodes as f64)
}
