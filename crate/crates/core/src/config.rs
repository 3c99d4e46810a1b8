//! Run parameters and the line-oriented key=value config format.
//!
//! Every key has a default; an empty file parses to the defaults. Unknown
//! keys are rejected by name. A `profile=` line (applied before everything
//! else regardless of position) swaps in a named base profile.

use crate::env::{EnvConfig, Rect};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub env: EnvConfig,

    // stage 1: goal-conditioned policy
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub replay_k: usize,
    pub n_workers: usize,
    pub n_cycles: usize,
    pub n_updates_per_cycle: usize,
    /// Total episodes collected per cycle (spread over workers by slot).
    pub episodes_per_cycle: usize,
    pub buffer_capacity: usize,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub p_no_reset: f64,
    pub sigma_noise: f64,
    pub eps_random_episode: f64,
    pub target_update_rate: f64,
    pub final_pool_capacity: usize,
    pub eval_episodes_per_program: usize,

    // stage 2: self-behavioural model
    pub model_hidden: Vec<usize>,
    pub model_epochs: usize,
    pub dataset_episodes: usize,
    pub model_batch: usize,
    pub model_lr: f64,
    pub holdout_fraction: f64,

    // stage 3: meta-controller
    pub enc_hidden: usize,
    pub enc_dim: usize,
    pub prog_dim: usize,
    pub core_hidden: usize,
    pub gamma_meta: f64,
    pub n_simu: usize,
    pub n_simu_exploit: usize,
    pub n_updates_per_episode: usize,
    pub n_ep: usize,
    pub n_val: usize,
    pub n_iterations: usize,
    pub c_level: f64,
    pub c_puct: f64,
    pub meta_batch: usize,
    pub meta_buffer: usize,
    pub p_buf: f64,
    pub meta_lr: f64,
    pub tree_temperature: f64,
    pub eps_dirichlet: f64,
    pub alpha_dirichlet: f64,
    pub eps_curriculum: f64,
    pub max_actions_per_program: usize,
    pub grad_clip: f64,
    pub meta_workers: usize,

    // baselines and evaluation
    pub baseline_horizon_mult: usize,
    pub eval_episodes: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            env: EnvConfig::default(),
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            gamma: 0.99,
            batch_size: 256,
            lr_actor: 0.001,
            lr_critic: 0.001,
            replay_k: 4,
            n_workers: 28,
            n_cycles: 40,
            n_updates_per_cycle: 40,
            episodes_per_cycle: 56,
            buffer_capacity: 1_000_000,
            epochs_phase1: 100,
            epochs_phase2: 150,
            p_no_reset: 0.5,
            sigma_noise: 0.2,
            eps_random_episode: 0.2,
            target_update_rate: 0.05,
            final_pool_capacity: 10_000,
            eval_episodes_per_program: 10,
            model_hidden: vec![512, 512],
            model_epochs: 500,
            dataset_episodes: 50_000,
            model_batch: 256,
            model_lr: 0.001,
            holdout_fraction: 0.1,
            enc_hidden: 128,
            enc_dim: 128,
            prog_dim: 256,
            core_hidden: 128,
            gamma_meta: 0.97,
            n_simu: 100,
            n_simu_exploit: 5,
            n_updates_per_episode: 2,
            n_ep: 20,
            n_val: 10,
            n_iterations: 700,
            c_level: 3.0,
            c_puct: 0.5,
            meta_batch: 16,
            meta_buffer: 100,
            p_buf: 0.5,
            meta_lr: 0.0001,
            tree_temperature: 1.3,
            eps_dirichlet: 0.25,
            alpha_dirichlet: 0.03,
            eps_curriculum: 0.2,
            max_actions_per_program: 12,
            grad_clip: 5.0,
            meta_workers: 10,
            baseline_horizon_mult: 4,
            eval_episodes: 100,
        }
    }
}

impl Params {
    /// Two-block desk-scale profile: the full pipeline runs on a laptop CPU
    /// in well under an hour while keeping every mechanism intact.
    pub fn desk_b2() -> Params {
        let mut p = Params::default();
        p.env.n_blocks = 2;
        p.actor_hidden = vec![64, 64];
        p.critic_hidden = vec![64, 64];
        p.batch_size = 128;
        p.n_workers = 2;
        p.n_cycles = 20;
        p.n_updates_per_cycle = 25;
        p.episodes_per_cycle = 4;
        p.buffer_capacity = 200_000;
        p.epochs_phase1 = 40;
        p.epochs_phase2 = 30;
        p.model_hidden = vec![128, 128];
        p.model_epochs = 200;
        p.dataset_episodes = 10_000;
        p.model_batch = 128;
        p.enc_hidden = 64;
        p.enc_dim = 64;
        p.prog_dim = 64;
        p.core_hidden = 64;
        p.n_simu = 40;
        p.n_ep = 10;
        p.n_val = 8;
        p.n_iterations = 150;
        p.meta_workers = 2;
        p
    }

    pub fn profile(name: &str) -> Option<Params> {
        match name {
            "paper" => Some(Params::default()),
            "desk_b2" => Some(Params::desk_b2()),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    UnknownKey { key: String, line: usize },
    BadValue { key: String, value: String, line: usize },
    BadLine { line: usize, content: String },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::UnknownKey { key, line } => {
                write!(f, "unknown config key `{key}` on line {line}")
            }
            ConfigError::BadValue { key, value, line } => {
                write!(f, "bad value `{value}` for key `{key}` on line {line}")
            }
            ConfigError::BadLine { line, content } => {
                write!(f, "line {line} is not key=value: `{content}`")
            }
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_rect(v: &str) -> Option<Rect> {
    let parts: Vec<f64> = v.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    if parts.len() != 4 {
        return None;
    }
    Some(Rect { x0: parts[0], y0: parts[1], x1: parts[2], y1: parts[3] })
}

fn parse_usize_list(v: &str) -> Option<Vec<usize>> {
    v.split(',').map(|p| p.trim().parse().ok()).collect()
}

impl Params {
    fn set(&mut self, key: &str, value: &str) -> Result<(), ()> {
        macro_rules! num {
            ($field:expr) => {{
                $field = value.trim().parse().map_err(|_| ())?;
                Ok(())
            }};
        }
        match key {
            "n_blocks" => num!(self.env.n_blocks),
            "block_radius" => num!(self.env.block_radius),
            "max_step_delta" => num!(self.env.max_step_delta),
            "grasp_radius" => num!(self.env.grasp_radius),
            "goal_tolerance" => num!(self.env.goal_tolerance),
            "atomic_horizon" => num!(self.env.atomic_horizon),
            "table_z_max" => num!(self.env.table_z_max),
            "zone_orange" => {
                self.env.zone_orange = parse_rect(value).ok_or(())?;
                Ok(())
            }
            "zone_blue" => {
                self.env.zone_blue = parse_rect(value).ok_or(())?;
                Ok(())
            }
            "p_in_gripper" => num!(self.env.p_in_gripper),
            "p_under_gripper" => num!(self.env.p_under_gripper),
            "p_stacked" => num!(self.env.p_stacked),
            "reset_max_tries" => num!(self.env.reset_max_tries),
            "actor_hidden" => {
                self.actor_hidden = parse_usize_list(value).ok_or(())?;
                Ok(())
            }
            "critic_hidden" => {
                self.critic_hidden = parse_usize_list(value).ok_or(())?;
                Ok(())
            }
            "gamma" => num!(self.gamma),
            "batch_size" => num!(self.batch_size),
            "lr_actor" => num!(self.lr_actor),
            "lr_critic" => num!(self.lr_critic),
            "replay_k" => num!(self.replay_k),
            "n_workers" => num!(self.n_workers),
            "n_cycles" => num!(self.n_cycles),
            "n_updates_per_cycle" => num!(self.n_updates_per_cycle),
            "episodes_per_cycle" => num!(self.episodes_per_cycle),
            "buffer_capacity" => num!(self.buffer_capacity),
            "epochs_phase1" => num!(self.epochs_phase1),
            "epochs_phase2" => num!(self.epochs_phase2),
            "p_no_reset" => num!(self.p_no_reset),
            "sigma_noise" => num!(self.sigma_noise),
            "eps_random_episode" => num!(self.eps_random_episode),
            "target_update_rate" => num!(self.target_update_rate),
            "final_pool_capacity" => num!(self.final_pool_capacity),
            "eval_episodes_per_program" => num!(self.eval_episodes_per_program),
            "model_hidden" => {
                self.model_hidden = parse_usize_list(value).ok_or(())?;
                Ok(())
            }
            "model_epochs" => num!(self.model_epochs),
            "dataset_episodes" => num!(self.dataset_episodes),
            "model_batch" => num!(self.model_batch),
            "model_lr" => num!(self.model_lr),
            "holdout_fraction" => num!(self.holdout_fraction),
            "enc_hidden" => num!(self.enc_hidden),
            "enc_dim" => num!(self.enc_dim),
            "prog_dim" => num!(self.prog_dim),
            "core_hidden" => num!(self.core_hidden),
            "gamma_meta" => num!(self.gamma_meta),
            "n_simu" => num!(self.n_simu),
            "n_simu_exploit" => num!(self.n_simu_exploit),
            "n_updates_per_episode" => num!(self.n_updates_per_episode),
            "n_ep" => num!(self.n_ep),
            "n_val" => num!(self.n_val),
            "n_iterations" => num!(self.n_iterations),
            "c_level" => num!(self.c_level),
            "c_puct" => num!(self.c_puct),
            "meta_batch" => num!(self.meta_batch),
            "meta_buffer" => num!(self.meta_buffer),
            "p_buf" => num!(self.p_buf),
            "meta_lr" => num!(self.meta_lr),
            "tree_temperature" => num!(self.tree_temperature),
            "eps_dirichlet" => num!(self.eps_dirichlet),
            "alpha_dirichlet" => num!(self.alpha_dirichlet),
            "eps_curriculum" => num!(self.eps_curriculum),
            "max_actions_per_program" => num!(self.max_actions_per_program),
            "grad_clip" => num!(self.grad_clip),
            "meta_workers" => num!(self.meta_workers),
            "baseline_horizon_mult" => num!(self.baseline_horizon_mult),
            "eval_episodes" => num!(self.eval_episodes),
            _ => Err(()),
        }
    }

    /// Snapshot of every key, in declaration order, as written to manifests.
    pub fn dump(&self) -> String {
        let rect = |r: &Rect| format!("{},{},{},{}", r.x0, r.y0, r.x1, r.y1);
        let list = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        let pairs: Vec<(&str, String)> = vec![
            ("n_blocks", self.env.n_blocks.to_string()),
            ("block_radius", self.env.block_radius.to_string()),
            ("max_step_delta", self.env.max_step_delta.to_string()),
            ("grasp_radius", self.env.grasp_radius.to_string()),
            ("goal_tolerance", self.env.goal_tolerance.to_string()),
            ("atomic_horizon", self.env.atomic_horizon.to_string()),
            ("table_z_max", self.env.table_z_max.to_string()),
            ("zone_orange", rect(&self.env.zone_orange)),
            ("zone_blue", rect(&self.env.zone_blue)),
            ("p_in_gripper", self.env.p_in_gripper.to_string()),
            ("p_under_gripper", self.env.p_under_gripper.to_string()),
            ("p_stacked", self.env.p_stacked.to_string()),
            ("reset_max_tries", self.env.reset_max_tries.to_string()),
            ("actor_hidden", list(&self.actor_hidden)),
            ("critic_hidden", list(&self.critic_hidden)),
            ("gamma", self.gamma.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr_actor", self.lr_actor.to_string()),
            ("lr_critic", self.lr_critic.to_string()),
            ("replay_k", self.replay_k.to_string()),
            ("n_workers", self.n_workers.to_string()),
            ("n_cycles", self.n_cycles.to_string()),
            ("n_updates_per_cycle", self.n_updates_per_cycle.to_string()),
            ("episodes_per_cycle", self.episodes_per_cycle.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("epochs_phase1", self.epochs_phase1.to_string()),
            ("epochs_phase2", self.epochs_phase2.to_string()),
            ("p_no_reset", self.p_no_reset.to_string()),
            ("sigma_noise", self.sigma_noise.to_string()),
            ("eps_random_episode", self.eps_random_episode.to_string()),
            ("target_update_rate", self.target_update_rate.to_string()),
            ("final_pool_capacity", self.final_pool_capacity.to_string()),
            ("eval_episodes_per_program", self.eval_episodes_per_program.to_string()),
            ("model_hidden", list(&self.model_hidden)),
            ("model_epochs", self.model_epochs.to_string()),
            ("dataset_episodes", self.dataset_episodes.to_string()),
            ("model_batch", self.model_batch.to_string()),
            ("model_lr", self.model_lr.to_string()),
            ("holdout_fraction", self.holdout_fraction.to_string()),
            ("enc_hidden", self.enc_hidden.to_string()),
            ("enc_dim", self.enc_dim.to_string()),
            ("prog_dim", self.prog_dim.to_string()),
            ("core_hidden", self.core_hidden.to_string()),
            ("gamma_meta", self.gamma_meta.to_string()),
            ("n_simu", self.n_simu.to_string()),
            ("n_simu_exploit", self.n_simu_exploit.to_string()),
            ("n_updates_per_episode", self.n_updates_per_episode.to_string()),
            ("n_ep", self.n_ep.to_string()),
            ("n_val", self.n_val.to_string()),
            ("n_iterations", self.n_iterations.to_string()),
            ("c_level", self.c_level.to_string()),
            ("c_puct", self.c_puct.to_string()),
            ("meta_batch", self.meta_batch.to_string()),
            ("meta_buffer", self.meta_buffer.to_string()),
            ("p_buf", self.p_buf.to_string()),
            ("meta_lr", self.meta_lr.to_string()),
            ("tree_temperature", self.tree_temperature.to_string()),
            ("eps_dirichlet", self.eps_dirichlet.to_string()),
            ("alpha_dirichlet", self.alpha_dirichlet.to_string()),
            ("eps_curriculum", self.eps_curriculum.to_string()),
            ("max_actions_per_program", self.max_actions_per_program.to_string()),
            ("grad_clip", self.grad_clip.to_string()),
            ("meta_workers", self.meta_workers.to_string()),
            ("baseline_horizon_mult", self.baseline_horizon_mult.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Parse a key=value config text. `#` starts a comment; blank lines ignored.
pub fn parse_config_str(text: &str) -> Result<Params, ConfigError> {
    // a profile line selects the base parameters before overrides apply
    let mut params = Params::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "profile" {
                params = Params::profile(v.trim()).ok_or_else(|| ConfigError::BadValue {
                    key: "profile".into(),
                    value: v.trim().into(),
                    line: idx + 1,
                })?;
            }
        }
    }
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::BadLine { line: idx + 1, content: line.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if k == "profile" {
            continue;
        }
        match params.set(k, v) {
            Ok(()) => {}
            Err(()) if !KNOWN_KEYS.contains(&k) => {
                return Err(ConfigError::UnknownKey { key: k.to_string(), line: idx + 1 })
            }
            Err(()) => {
                return Err(ConfigError::BadValue {
                    key: k.to_string(),
                    value: v.to_string(),
                    line: idx + 1,
                })
            }
        }
    }
    params.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(params)
}

pub fn parse_config(path: &Path) -> Result<Params, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
    parse_config_str(&text)
}

const KNOWN_KEYS: [&str; 66] = [
    "n_blocks", "block_radius", "max_step_delta", "grasp_radius", "goal_tolerance",
    "atomic_horizon", "table_z_max", "zone_orange", "zone_blue", "p_in_gripper",
    "p_under_gripper", "p_stacked", "reset_max_tries", "actor_hidden", "critic_hidden",
    "gamma", "batch_size", "lr_actor", "lr_critic", "replay_k", "n_workers", "n_cycles",
    "n_updates_per_cycle", "episodes_per_cycle", "buffer_capacity", "epochs_phase1",
    "epochs_phase2", "p_no_reset", "sigma_noise", "eps_random_episode", "target_update_rate",
    "final_pool_capacity", "eval_episodes_per_program", "model_hidden", "model_epochs",
    "dataset_episodes", "model_batch", "model_lr", "holdout_fraction", "enc_hidden",
    "enc_dim", "prog_dim", "core_hidden", "gamma_meta", "n_simu", "n_simu_exploit",
    "n_updates_per_episode", "n_ep", "n_val", "n_iterations", "c_level", "c_puct",
    "meta_batch", "meta_buffer", "p_buf", "meta_lr", "tree_temperature", "eps_dirichlet",
    "alpha_dirichlet", "eps_curriculum", "max_actions_per_program", "grad_clip",
    "meta_workers", "baseline_horizon_mult", "eval_episodes", "profile",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_all_defaults() {
        let p = parse_config_str("").unwrap();
        assert_eq!(p, Params::default());
        assert_eq!(p.c_puct, 0.5);
        assert_eq!(p.gamma, 0.99);
        assert_eq!(p.replay_k, 4);
        assert_eq!(p.n_simu, 100);
        assert_eq!(p.tree_temperature, 1.3);
    }

    #[test]
    fn overrides_parse_with_types() {
        let p = parse_config_str("n_simu = 100\nactor_hidden=32,16\n# comment\nbatch_size=64\n").unwrap();
        assert_eq!(p.n_simu, 100);
        assert_eq!(p.actor_hidden, vec![32, 16]);
        assert_eq!(p.batch_size, 64);
    }

    #[test]
    fn misspelled_keys_are_rejected_by_name() {
        let err = parse_config_str("n_simul=7\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "n_simul");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn bad_values_name_key_and_line() {
        let err = parse_config_str("\nbatch_size=many\n").unwrap_err();
        match err {
            ConfigError::BadValue { key, line, .. } => {
                assert_eq!(key, "batch_size");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn profile_applies_before_overrides() {
        let p = parse_config_str("n_simu=64\nprofile=desk_b2\n").unwrap();
        assert_eq!(p.env.n_blocks, 2);
        assert_eq!(p.n_simu, 64); // override wins even when written first
        let base = Params::desk_b2();
        assert_eq!(p.actor_hidden, base.actor_hidden);
    }

    #[test]
    fn dump_roundtrips() {
        let p = Params::desk_b2();
        let back = parse_config_str(&p.dump()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        assert!(matches!(
            parse_config_str("goal_tolerance=0.9\n"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
