//! Step-wise reinforcement learning for search-augmented question answering.
//!
//! The crate bundles everything needed to train and probe a tiny search
//! agent end to end on one core, deterministically:
//!
//! - [`corpus`] / [`tfidf`] — document storage plus a TF-IDF retrieval
//!   backend that doubles as the similarity model for information-gain
//!   rewards.
//! - [`trajectory`] — the tagged think/search/information/answer rollout
//!   grammar: parser, format validator, renderer, and the retrieval-masked
//!   tokenizer.
//! - [`metrics`] — word-level F1 and exact-match scoring over normalized
//!   answer text.
//! - [`rewards`] — global answer/search-key rewards and per-round
//!   information-gain/redundancy step rewards, placed onto tokens.
//! - [`rl`] — GAE, the clipped masked surrogate loss, a small
//!   autoregressive policy/value pair with hand-derived gradients, and the
//!   training loop.
//! - [`microworld`] — a seeded entity-relation chain world that generates
//!   multi-hop questions, golden documents, and golden search keys.
//! - [`config`] — the flat run configuration shared by the CLI commands.

pub mod config;
pub mod corpus;
pub mod metrics;
pub mod microworld;
pub mod rewards;
pub mod rl;
pub mod rng;
pub mod tfidf;
pub mod trajectory;

pub use corpus::{Corpus, CorpusError, Document};
pub use metrics::{best_over_golds, exact_match, normalize, word_f1};
pub use rewards::{score_trajectory, GoldSpec, RewardBreakdown, RewardConfig};
pub use tfidf::{cosine_sim, RetrievalResult, SparseVector, TfIdfConfig, TfIdfModel};
pub use trajectory::{parse, render, validate_format, FormatVerdict, Trajectory};
