//! Flat run configuration: one TOML file covers the world, the index,
//! the reward weights, the optimizer, and the rollout budgets, so a run
//! manifest fully reproduces a run. Unknown keys are rejected.

use crate::microworld::WorldConfig;
use crate::rewards::{KeyGate, RewardConfig, RewardMode};
use crate::rl::rollout::RolloutLimits;
use crate::rl::train::TrainSettings;
use crate::rl::PpoConfig;
use crate::tfidf::TfIdfConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // World generation.
    pub seed: u64,
    pub num_entities: usize,
    pub num_relations: usize,
    pub hops: usize,
    pub num_questions: usize,
    pub num_distractors: usize,
    pub vocab_bound: usize,
    /// Questions reserved from the tail of the dataset for held-out probes.
    pub holdout: usize,

    // Index / analyzer.
    pub drop_zero_scores: bool,

    // Rewards.
    pub gamma_key: f64,
    pub gamma_sub: f64,
    pub reward_mode: RewardMode,
    pub key_gate: KeyGate,
    pub retrieve_k: usize,
    pub include_key: bool,
    pub include_gain: bool,
    pub include_penalty: bool,
    pub zero_steps_when_invalid: bool,

    // Optimization.
    pub clip_epsilon: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub kl_beta: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub total_batch: usize,
    pub mini_batch: usize,
    pub micro_batch: usize,
    pub rollouts_per_question: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_updates: usize,
    pub whiten_advantages: bool,
    pub entropy_coef: f64,

    // Policy / value architecture.
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub question_window: usize,
    pub recent_window: usize,
    pub info_window: usize,
    pub pointer_heads: usize,
    pub value_embed_dim: usize,
    pub value_hidden_dim: usize,

    // Rollout budgets.
    pub grammar: bool,
    pub max_rounds: usize,
    pub max_think_tokens: usize,
    pub min_search_tokens: usize,
    pub max_search_tokens: usize,
    pub min_answer_tokens: usize,
    pub max_answer_tokens: usize,
    pub max_total_tokens: usize,

    // Probing.
    pub probe_every: usize,
    pub probe_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let ppo = PpoConfig::default();
        let reward = RewardConfig::default();
        let limits = RolloutLimits::default();
        let train = TrainSettings::default();
        RunConfig {
            seed: world.seed,
            num_entities: world.num_entities,
            num_relations: world.num_relations,
            hops: world.hops,
            num_questions: world.num_questions,
            num_distractors: world.num_distractors,
            vocab_bound: world.vocab_bound,
            holdout: 50,
            drop_zero_scores: false,
            gamma_key: reward.gamma_key,
            gamma_sub: reward.gamma_sub,
            reward_mode: reward.mode,
            key_gate: reward.key_gate,
            retrieve_k: reward.retrieve_k,
            include_key: reward.include_key,
            include_gain: reward.include_gain,
            include_penalty: reward.include_penalty,
            zero_steps_when_invalid: reward.zero_steps_when_invalid,
            clip_epsilon: ppo.clip_epsilon,
            discount: ppo.discount,
            gae_lambda: ppo.gae_lambda,
            kl_beta: ppo.kl_beta,
            policy_lr: ppo.policy_lr,
            value_lr: ppo.value_lr,
            total_batch: ppo.total_batch,
            mini_batch: ppo.mini_batch,
            micro_batch: ppo.micro_batch,
            rollouts_per_question: ppo.rollouts_per_question,
            temperature: ppo.temperature,
            top_p: ppo.top_p,
            max_updates: ppo.max_updates,
            whiten_advantages: ppo.whiten_advantages,
            entropy_coef: ppo.entropy_coef,
            embed_dim: train.embed_dim,
            hidden_dim: train.hidden_dim,
            question_window: train.question_window,
            recent_window: train.recent_window,
            info_window: train.info_window,
            pointer_heads: train.pointer_heads,
            value_embed_dim: train.value_embed_dim,
            value_hidden_dim: train.value_hidden_dim,
            grammar: true,
            max_rounds: limits.max_rounds,
            max_think_tokens: limits.max_think_tokens,
            min_search_tokens: limits.min_search_tokens,
            max_search_tokens: limits.max_search_tokens,
            min_answer_tokens: limits.min_answer_tokens,
            max_answer_tokens: limits.max_answer_tokens,
            max_total_tokens: limits.max_total_tokens,
            probe_every: train.probe_every,
            probe_size: train.probe_size,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, RunConfigError> {
        toml::from_str(text).map_err(|e| RunConfigError::Parse(e.to_string()))
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<RunConfig, RunConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            seed: self.seed,
            num_entities: self.num_entities,
            num_relations: self.num_relations,
            hops: self.hops,
            num_questions: self.num_questions,
            num_distractors: self.num_distractors,
            vocab_bound: self.vocab_bound,
        }
    }

    pub fn tfidf_config(&self) -> TfIdfConfig {
        TfIdfConfig {
            drop_zero_scores: self.drop_zero_scores,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            gamma_key: self.gamma_key,
            gamma_sub: self.gamma_sub,
            mode: self.reward_mode,
            key_gate: self.key_gate,
            retrieve_k: self.retrieve_k,
            include_key: self.include_key,
            include_gain: self.include_gain,
            include_penalty: self.include_penalty,
            zero_steps_when_invalid: self.zero_steps_when_invalid,
        }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            clip_epsilon: self.clip_epsilon,
            discount: self.discount,
            gae_lambda: self.gae_lambda,
            kl_beta: self.kl_beta,
            policy_lr: self.policy_lr,
            value_lr: self.value_lr,
            total_batch: self.total_batch,
            mini_batch: self.mini_batch,
            micro_batch: self.micro_batch,
            rollouts_per_question: self.rollouts_per_question,
            temperature: self.temperature,
            top_p: self.top_p,
            max_updates: self.max_updates,
            seed: self.seed,
            whiten_advantages: self.whiten_advantages,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn rollout_limits(&self) -> RolloutLimits {
        RolloutLimits {
            max_rounds: self.max_rounds,
            max_think_tokens: self.max_think_tokens,
            min_search_tokens: self.min_search_tokens,
            max_search_tokens: self.max_search_tokens,
            min_answer_tokens: self.min_answer_tokens,
            max_answer_tokens: self.max_answer_tokens,
            max_total_tokens: self.max_total_tokens,
        }
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            ppo: self.ppo_config(),
            reward: self.reward_config(),
            limits: self.rollout_limits(),
            grammar: self.grammar,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            question_window: self.question_window,
            recent_window: self.recent_window,
            info_window: self.info_window,
            pointer_heads: self.pointer_heads,
            value_embed_dim: self.value_embed_dim,
            value_hidden_dim: self.value_hidden_dim,
            probe_every: self.probe_every,
            probe_size: self.probe_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = RunConfig::from_toml("definitely_not_a_key = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("definitely_not_a_key"), "message: {msg}");
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_toml("seed = 99\nhops = 3\n").unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.hops, 3);
        assert_eq!(cfg.clip_epsilon, 0.2);
        assert_eq!(cfg.retrieve_k, 3);
    }
}
