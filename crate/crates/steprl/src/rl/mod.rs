//! Credit assignment and optimization: masked GAE, the clipped surrogate
//! loss, a small autoregressive policy/value pair, the rollout loop, and
//! the trainer.

pub mod gae;
pub mod loss;
pub mod nn;
pub mod rollout;
pub mod train;

pub use gae::{compute_gae, kl_shaped_rewards};
pub use loss::{steppo_loss, value_loss, LossError, TrainItem};
pub use nn::{Adam, Context, Net, NetConfig};
pub use rollout::{
    rollout, scripted_episode, ActionSpace, Episode, RolloutLimits, SampleOptions, SearchEnv,
    SlotState, Step, Vocab,
};
pub use train::{evaluate, train, Checkpoint, EvalReport, TrainError, TrainSettings, UpdateRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid ppo config: {0}")]
    Invalid(String),
}

/// Optimization hyperparameters. Learning-rate defaults are sized for the
/// toy models; the clipping ratio, KL coefficient, sampling temperature,
/// top-p, and k defaults follow the full-scale setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub kl_beta: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub total_batch: usize,
    pub mini_batch: usize,
    pub micro_batch: usize,
    /// Episodes sampled per drawn question within a batch; repeated
    /// rollouts of the same question sharpen the value baseline.
    pub rollouts_per_question: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_updates: usize,
    pub seed: u64,
    pub whiten_advantages: bool,
    /// Reserved: entropy bonus coefficient, 0 by default.
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            discount: 1.0,
            gae_lambda: 1.0,
            kl_beta: 1e-3,
            policy_lr: 1e-2,
            value_lr: 1e-2,
            total_batch: 64,
            mini_batch: 16,
            micro_batch: 16,
            rollouts_per_question: 8,
            temperature: 1.0,
            top_p: 1.0,
            max_updates: 300,
            seed: 7,
            whiten_advantages: false,
            entropy_coef: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return fail(format!(
                "clip_epsilon must be in (0,1), got {}",
                self.clip_epsilon
            ));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return fail(format!("discount must be in [0,1], got {}", self.discount));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!(
                "gae_lambda must be in [0,1], got {}",
                self.gae_lambda
            ));
        }
        if self.kl_beta < 0.0 {
            return fail(format!("kl_beta must be >= 0, got {}", self.kl_beta));
        }
        if self.total_batch == 0 || self.mini_batch == 0 || self.micro_batch == 0 {
            return fail("batch sizes must be positive".to_string());
        }
        if self.rollouts_per_question == 0 {
            return fail("rollouts_per_question must be positive".to_string());
        }
        if self.temperature < 0.0 {
            return fail(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return fail(format!("top_p must be in (0,1], got {}", self.top_p));
        }
        Ok(())
    }
}
