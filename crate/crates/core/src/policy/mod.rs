//! Stage 1: the shared goal-conditioned policy over atomic skills.
//!
//! A single actor-critic pair serves every atomic program. Observations are
//! rotated so the manipulated block sits in slot 0, goals come from the goal
//! setter, and episodes are relabeled hindsight-style with the goal actually
//! achieved at the end.

pub mod baseline;
pub mod phases;

use crate::config::Params;
use crate::env::programs::{check_precondition, goal_setter, ProgramLibrary};
use crate::env::{
    permute_blocks, reward_fuvfa_flat, step, Action, EnvError, EnvState,
};
use crate::nn::{Activation, Adam, DenseGrads, DenseNet, NnError};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt;

#[derive(Debug)]
pub enum PolicyError {
    Env(EnvError),
    Nn(NnError),
    Numerical(String),
    Degenerate(String),
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::Env(e) => write!(f, "{e}"),
            PolicyError::Nn(e) => write!(f, "{e}"),
            PolicyError::Numerical(m) => write!(f, "numerical fault: {m}"),
            PolicyError::Degenerate(m) => write!(f, "degenerate setup: {m}"),
        }
    }
}

impl std::error::Error for PolicyError {}

impl From<EnvError> for PolicyError {
    fn from(e: EnvError) -> Self {
        PolicyError::Env(e)
    }
}

impl From<NnError> for PolicyError {
    fn from(e: NnError) -> Self {
        PolicyError::Nn(e)
    }
}

/// One environment step under a pursued goal. `r` is the sphere reward of
/// the next observation against `g`; both live in the episode's block frame.
#[derive(Debug, Clone)]
pub struct Transition {
    pub s: Vec<f32>,
    pub a: [f32; 4],
    pub r: f32,
    pub s2: Vec<f32>,
    pub g: Vec<f32>,
    pub done: bool,
}

/// A complete fixed-horizon rollout for one atomic program.
#[derive(Debug, Clone)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub goal: Vec<f32>,
    /// h(s_T): block positions actually reached, in the episode frame.
    pub achieved: Vec<f32>,
    pub program: usize,
    pub continued: bool,
}

/// Ring buffer of transitions with uniform sampling.
#[derive(Debug)]
pub struct ReplayStore {
    buf: Vec<Transition>,
    capacity: usize,
    write: usize,
}

impl ReplayStore {
    pub fn new(capacity: usize) -> ReplayStore {
        ReplayStore { buf: Vec::new(), capacity, write: 0 }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.write] = t;
            self.write = (self.write + 1) % self.capacity;
        }
    }

    pub fn push_many(&mut self, ts: Vec<Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn sample<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition> {
        (0..n).map(|_| &self.buf[rng.random_range(0..self.buf.len())]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }
}

/// Deterministic actor output with optional exploration noise, clamped to
/// the action box.
pub fn select_action<R: Rng>(
    actor: &DenseNet<f32>,
    s: &[f32],
    g: &[f32],
    explore: bool,
    sigma: f64,
    rng: &mut R,
) -> Result<[f32; 4], NnError> {
    let mut input = Vec::with_capacity(s.len() + g.len());
    input.extend_from_slice(s);
    input.extend_from_slice(g);
    let y = actor.infer(&input)?;
    let mut a = [0.0f32; 4];
    for k in 0..4 {
        let mut v = y[k] as f64;
        if explore {
            let n: f64 = StandardNormal.sample(rng);
            v += sigma * n;
        }
        a[k] = v.clamp(-1.0, 1.0) as f32;
    }
    Ok(a)
}

/// Hindsight relabeling, "final" strategy: the original transitions plus
/// `k` copies each re-targeted at the goal the episode actually achieved,
/// rewards recomputed. Uniform sampling over the result then sees relabeled
/// transitions a k/(k+1) fraction of the time.
pub fn her_relabel(params: &Params, ep: &Episode, k: usize) -> Vec<Transition> {
    let mut out = Vec::with_capacity(ep.transitions.len() * (k + 1));
    out.extend(ep.transitions.iter().cloned());
    for t in &ep.transitions {
        if k == 0 {
            break;
        }
        let r = reward_fuvfa_flat(&params.env, &t.s2, &ep.achieved)
            .expect("achieved goal has the right dimension") as u8 as f32;
        for _ in 0..k {
            out.push(Transition {
                s: t.s.clone(),
                a: t.a,
                r,
                s2: t.s2.clone(),
                g: ep.achieved.clone(),
                done: t.done,
            });
        }
    }
    out
}

/// Roll one atomic program for exactly T steps from `start`, recording
/// transitions in the program's block frame.
pub fn run_atomic_episode<R: Rng>(
    params: &Params,
    lib: &ProgramLibrary,
    actor: &DenseNet<f32>,
    start: EnvState,
    program: usize,
    explore: bool,
    continued: bool,
    rng: &mut R,
) -> Result<(Episode, EnvState), PolicyError> {
    let cfg = &params.env;
    let b = cfg.n_blocks;
    let target = lib.target_block(program)?;
    let goal_raw = goal_setter(cfg, lib, program, &start)?;
    let goal = permute_blocks(&goal_raw, b, target)?;
    let random_episode = explore && rng.random_range(0.0..1.0) < params.eps_random_episode;

    let mut state = start;
    let mut obs = permute_blocks(&state.observation(), b, target)?;
    let mut transitions = Vec::with_capacity(cfg.atomic_horizon);
    for t in 0..cfg.atomic_horizon {
        let a: [f32; 4] = if random_episode {
            [
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
            ]
        } else {
            select_action(actor, &obs, &goal, explore, params.sigma_noise, rng)?
        };
        let next = step(cfg, &state, Action::from_slice(&a));
        let obs2 = permute_blocks(&next.observation(), b, target)?;
        let r = reward_fuvfa_flat(cfg, &obs2, &goal)? as u8 as f32;
        transitions.push(Transition {
            s: obs,
            a,
            r,
            s2: obs2.clone(),
            g: goal.clone(),
            done: t + 1 == cfg.atomic_horizon,
        });
        obs = obs2;
        state = next;
    }
    let achieved = obs[..3 * b].to_vec();
    Ok((Episode { transitions, goal, achieved, program, continued }, state))
}

/// Pick an atomic program whose pre-condition holds, resampling the start
/// state if none qualifies.
pub fn sample_startable_program<R: Rng>(
    params: &Params,
    lib: &ProgramLibrary,
    state: &mut EnvState,
    rng: &mut R,
) -> Result<usize, PolicyError> {
    for _ in 0..32 {
        let ok: Vec<usize> = lib
            .atomic_indices()
            .filter(|&p| check_precondition(&params.env, lib, p, state))
            .collect();
        if !ok.is_empty() {
            return Ok(ok[rng.random_range(0..ok.len())]);
        }
        *state = crate::env::reset(&params.env, rng, None)?;
    }
    Err(PolicyError::Degenerate("no atomic program is startable".into()))
}

/// Actor-critic pair with slow-moving target copies.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: DenseNet<f32>,
    pub critic: DenseNet<f32>,
    pub target_actor: DenseNet<f32>,
    pub target_critic: DenseNet<f32>,
    pub opt_actor: Adam,
    pub opt_critic: Adam,
    pub gamma: f64,
    pub target_rate: f64,
    pub obs_dim: usize,
    pub cond_dim: usize,
}

impl DdpgAgent {
    /// `cond_dim` is the conditioning vector length (a goal, or a program
    /// one-hot for the multitask baseline).
    pub fn new<R: Rng>(params: &Params, obs_dim: usize, cond_dim: usize, rng: &mut R) -> DdpgAgent {
        let mut actor_dims = vec![obs_dim + cond_dim];
        actor_dims.extend_from_slice(&params.actor_hidden);
        actor_dims.push(4);
        let mut critic_dims = vec![obs_dim + cond_dim + 4];
        critic_dims.extend_from_slice(&params.critic_hidden);
        critic_dims.push(1);
        let actor = DenseNet::new(&actor_dims, Activation::Tanh, rng);
        let critic = DenseNet::new(&critic_dims, Activation::Identity, rng);
        DdpgAgent {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            opt_actor: Adam::new(params.lr_actor),
            opt_critic: Adam::new(params.lr_critic),
            gamma: params.gamma,
            target_rate: params.target_update_rate,
            obs_dim,
            cond_dim,
        }
    }

    fn cat(&self, s: &[f32], g: &[f32], a: Option<&[f32]>) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.obs_dim + self.cond_dim + 4);
        v.extend_from_slice(s);
        v.extend_from_slice(g);
        if let Some(a) = a {
            v.extend_from_slice(a);
        }
        v
    }

    /// Bootstrapped critic target: reward shifted to {-1, 0}, clipped to the
    /// feasible return range [-1/(1-gamma), 0].
    pub fn critic_target(&self, t: &Transition) -> Result<f64, PolicyError> {
        let q_min = -1.0 / (1.0 - self.gamma);
        let a2 = self.target_actor.infer(&self.cat(&t.s2, &t.g, None))?;
        let q2 = self.target_critic.infer(&self.cat(&t.s2, &t.g, Some(&a2)))?[0] as f64;
        let r = t.r as f64 - 1.0;
        let not_done = if t.done { 0.0 } else { 1.0 };
        Ok((r + self.gamma * not_done * q2).clamp(q_min, 0.0))
    }

    /// Gradients of the actor objective -mean Q(s, pi(s,g), g), flowing
    /// through the critic's input. Returns (grads, actor loss).
    pub fn actor_gradients(&self, batch: &[&Transition]) -> Result<(DenseGrads<f32>, f64), PolicyError> {
        let n = batch.len();
        let mut actor_grads = DenseGrads::zeros_like(&self.actor);
        let mut actor_loss = 0.0f64;
        let act_offset = self.obs_dim + self.cond_dim;
        for t in batch {
            let (a, actor_cache) = self.actor.forward(&self.cat(&t.s, &t.g, None))?;
            let (q, critic_cache) = self.critic.forward(&self.cat(&t.s, &t.g, Some(&a)))?;
            actor_loss -= q[0] as f64;
            let (_, dinput) = self.critic.backward(&critic_cache, &[1.0])?;
            let da: Vec<f32> = dinput[act_offset..act_offset + 4]
                .iter()
                .map(|&v| -v / n as f32)
                .collect();
            let (grads, _) = self.actor.backward(&actor_cache, &da)?;
            actor_grads.add(&grads);
        }
        Ok((actor_grads, actor_loss / n as f64))
    }

    /// One update on a sampled batch: critic regression to clipped targets,
    /// an actor ascent step, then slow target tracking.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<(f64, f64), PolicyError> {
        let n = batch.len();
        assert!(n > 0, "empty batch");

        let mut critic_grads = DenseGrads::zeros_like(&self.critic);
        let mut critic_loss = 0.0f64;
        for t in batch {
            let y = self.critic_target(t)?;
            let (q, cache) = self.critic.forward(&self.cat(&t.s, &t.g, Some(&t.a)))?;
            let resid = q[0] as f64 - y;
            critic_loss += resid * resid;
            let (grads, _) = self.critic.backward(&cache, &[(2.0 * resid / n as f64) as f32])?;
            critic_grads.add(&grads);
        }
        critic_loss /= n as f64;
        if !critic_loss.is_finite() {
            return Err(PolicyError::Numerical(format!("critic loss {critic_loss}")));
        }
        self.opt_critic
            .step(
                self.critic.param_slices_mut(),
                &critic_grads.slices(),
                &self.critic.param_names("critic"),
            )
            .map_err(PolicyError::Nn)?;

        let (actor_grads, actor_loss) = self.actor_gradients(batch)?;
        if !actor_loss.is_finite() {
            return Err(PolicyError::Numerical(format!("actor loss {actor_loss}")));
        }
        self.opt_actor
            .step(
                self.actor.param_slices_mut(),
                &actor_grads.slices(),
                &self.actor.param_names("actor"),
            )
            .map_err(PolicyError::Nn)?;

        // slow target tracking
        self.target_actor.soft_update_from(&self.actor, self.target_rate);
        self.target_critic.soft_update_from(&self.critic, self.target_rate);
        Ok((critic_loss, actor_loss))
    }
}

#[cfg(test)]
mod tests;
