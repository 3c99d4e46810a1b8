//! Multitask actor-critic baselines trained directly on non-atomic tasks.
//!
//! `Plain` conditions the shared actor-critic on a one-hot program index and
//! receives the program's sparse post-condition reward. `HerGoal` instead
//! receives an ideal final-arrangement goal vector (extra supervision the
//! main pipeline never gets) plus hindsight relabeling. Episodes span four
//! atomic horizons.

use super::phases::EpochRow;
use super::{her_relabel, select_action, DdpgAgent, Episode, PolicyError, ReplayStore, Transition};
use crate::config::Params;
use crate::env::programs::{check_postcondition, non_atomic_ideal_goal, ProgramLibrary};
use crate::env::{extract_goal, reset, reward_fuvfa_flat, step, Action, EnvState};
use crate::rng::{stream_rng, Stream};
use crate::workers::run_slots;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineVariant {
    Plain,
    HerGoal,
}

impl BaselineVariant {
    pub fn name(self) -> &'static str {
        match self {
            BaselineVariant::Plain => "plain",
            BaselineVariant::HerGoal => "her-goal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineMetrics {
    pub rows: Vec<EpochRow>,
    pub final_success: Vec<(String, f64)>,
    pub env_steps_used: usize,
}

fn onehot(n: usize, k: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; n];
    v[k] = 1.0;
    v
}

fn baseline_cond(
    params: &Params,
    lib: &ProgramLibrary,
    variant: BaselineVariant,
    program: usize,
    start: &EnvState,
) -> Result<Vec<f32>, PolicyError> {
    match variant {
        BaselineVariant::Plain => {
            Ok(onehot(lib.len() - lib.n_atomic, program - lib.n_atomic))
        }
        BaselineVariant::HerGoal => {
            Ok(non_atomic_ideal_goal(&params.env, lib, program, start)?)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_baseline_episode<R: Rng>(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &crate::nn::DenseNet<f32>,
    variant: BaselineVariant,
    start: EnvState,
    program: usize,
    explore: bool,
    rng: &mut R,
) -> Result<(Episode, EnvState), PolicyError> {
    let cfg = &params.env;
    let horizon = cfg.atomic_horizon * params.baseline_horizon_mult;
    let cond = baseline_cond(params, lib, variant, program, &start)?;
    let random_episode = explore && rng.random_range(0.0..1.0) < params.eps_random_episode;

    let mut state = start;
    let mut obs = state.observation();
    let mut transitions = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let a: [f32; 4] = if random_episode {
            [
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
            ]
        } else {
            select_action(actor, &obs, &cond, explore, params.sigma_noise, rng)?
        };
        let next = step(cfg, &state, Action::from_slice(&a));
        let obs2 = next.observation();
        let r = match variant {
            BaselineVariant::Plain => check_postcondition(cfg, lib, program, &next) as u8 as f32,
            BaselineVariant::HerGoal => reward_fuvfa_flat(cfg, &obs2, &cond)? as u8 as f32,
        };
        transitions.push(Transition {
            s: obs,
            a,
            r,
            s2: obs2.clone(),
            g: cond.clone(),
            done: t + 1 == horizon,
        });
        obs = obs2;
        state = next;
    }
    let achieved = extract_goal(&state);
    Ok((Episode { transitions, goal: cond, achieved, program, continued: false }, state))
}

/// Train one baseline under a fixed environment-interaction budget.
pub fn train_mddpg_baseline(
    params: &Params,
    lib: &ProgramLibrary,
    variant: BaselineVariant,
    budget_env_steps: usize,
    seed: u64,
    workers: usize,
) -> Result<(DdpgAgent, BaselineMetrics), PolicyError> {
    let cfg = &params.env;
    let horizon = cfg.atomic_horizon * params.baseline_horizon_mult;
    let cond_dim = match variant {
        BaselineVariant::Plain => lib.len() - lib.n_atomic,
        BaselineVariant::HerGoal => cfg.goal_dim(),
    };
    let mut rng_init = stream_rng(seed, Stream::Init, &[200, variant as u64]);
    let mut agent = DdpgAgent::new(params, cfg.obs_dim(), cond_dim, &mut rng_init);
    let mut replay = ReplayStore::new(params.buffer_capacity);

    let steps_per_cycle = params.episodes_per_cycle * horizon;
    let total_cycles = (budget_env_steps / steps_per_cycle).max(1);
    let epochs = (total_cycles / params.n_cycles).max(1);
    let mut rows = Vec::new();
    let mut env_steps_used = 0usize;

    let non_atomic: Vec<usize> = lib.non_atomic_indices().collect();
    let mut cycles_done = 0usize;
    for epoch in 0..epochs {
        let mut cfg_epoch = params.env.clone();
        cfg_epoch.anneal = (epoch as f64 / (epochs.max(2) - 1) as f64).min(1.0);
        let mut params_epoch = params.clone();
        params_epoch.env = cfg_epoch;
        let pe = &params_epoch;

        let mut critic_loss_acc = 0.0;
        let mut actor_loss_acc = 0.0;
        let mut n_updates = 0usize;
        while cycles_done < total_cycles * (epoch + 1) / epochs {
            let cycle = cycles_done;
            cycles_done += 1;
            let actor = &agent.actor;
            let non_atomic_ref = &non_atomic;
            let episodes: Vec<Result<(Episode, EnvState), PolicyError>> =
                run_slots(params.episodes_per_cycle, workers, |slot| {
                    let mut rng = stream_rng(
                        seed,
                        Stream::Episode,
                        &[300 + variant as u64, cycle as u64, slot as u64],
                    );
                    let start = reset(&pe.env, &mut rng, None)?;
                    let program = non_atomic_ref[rng.random_range(0..non_atomic_ref.len())];
                    run_baseline_episode(pe, lib, actor, variant, start, program, true, &mut rng)
                });
            for result in episodes {
                let (episode, _) = result?;
                env_steps_used += episode.transitions.len();
                match variant {
                    BaselineVariant::Plain => replay.push_many(episode.transitions.clone()),
                    BaselineVariant::HerGoal => {
                        replay.push_many(her_relabel(params, &episode, params.replay_k))
                    }
                }
            }
            let mut rng_u =
                stream_rng(seed, Stream::Update, &[300 + variant as u64, cycle as u64]);
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
        for &p in &non_atomic {
            let rate = eval_baseline(
                params,
                lib,
                &agent,
                variant,
                p,
                params.eval_episodes_per_program,
                seed,
                epoch as u64,
                workers,
            )?;
            rows.push(EpochRow {
                epoch,
                program: lib.get(p).name.clone(),
                success_rate: rate,
                critic_loss: mean_cl,
                actor_loss: mean_al,
            });
        }
    }

    let mut final_success = Vec::new();
    for &p in &non_atomic {
        let rate = eval_baseline(
            params,
            lib,
            &agent,
            variant,
            p,
            params.eval_episodes,
            seed,
            u64::MAX,
            workers,
        )?;
        final_success.push((lib.get(p).name.clone(), rate));
    }
    Ok((agent, BaselineMetrics { rows, final_success, env_steps_used }))
}

/// Deterministic evaluation: success is the task post-condition at the end
/// of the episode.
#[allow(clippy::too_many_arguments)]
pub fn eval_baseline(
    params: &Params,
    lib: &ProgramLibrary,
    agent: &DdpgAgent,
    variant: BaselineVariant,
    program: usize,
    n_episodes: usize,
    seed: u64,
    tag: u64,
    workers: usize,
) -> Result<f64, PolicyError> {
    let mut eval_params = params.clone();
    eval_params.env.anneal = 1.0;
    let pe = &eval_params;
    let results: Vec<Result<bool, PolicyError>> = run_slots(n_episodes, workers, |slot| {
        let mut rng =
            stream_rng(seed, Stream::Eval, &[400 + variant as u64, tag, program as u64, slot as u64]);
        let start = reset(&pe.env, &mut rng, None)?;
        let (_, final_state) =
            run_baseline_episode(pe, lib, &agent.actor, variant, start, program, false, &mut rng)?;
        Ok(check_postcondition(&pe.env, lib, program, &final_state))
    });
    let mut hits = 0usize;
    for r in results {
        if r? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_episodes as f64)
}
