//! Hierarchical skill learning on a blocks table.
//!
//! The pipeline has three learning stages plus inference:
//! 1. a shared goal-conditioned policy for atomic block skills, trained with
//!    hindsight relabeling ([`policy`]);
//! 2. a jumpy effect model predicting the state after a full atomic skill
//!    execution ([`model`]);
//! 3. a program-composing controller trained by tree search entirely against
//!    the effect model ([`meta`]);
//! and three ways to execute learned programs in the environment ([`infer`]).
//!
//! [`env`] is the deterministic kinematic blocks world; [`nn`] is the dense
//! network engine everything trains on.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod metrics;
pub mod workers;
pub mod nn;
pub mod rng;
