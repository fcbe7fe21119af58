//! The dual reward system.
//!
//! Type 1 (global, format-gated): word-level answer F1 plus the search-key
//! reward, combined as `r_overall = r_answer + gamma_key * r_key` and
//! placed on the final token. Type 2 (per search round): information gain
//! against golden documents minus a redundancy penalty,
//! `r_step = G - P`, placed on each round's closing search tag. Round
//! similarities are cosine over TF-IDF vectors of full document texts;
//! gains are improvements over the running best-match memory, so total
//! gain per episode telescopes to the mean terminal memory.

use crate::corpus::{Corpus, Document};
use crate::metrics::{best_over_golds, word_f1};
use crate::tfidf::{cosine_sim, SparseVector, TfIdfError, TfIdfModel};
use crate::trajectory::{extract_queries, tokenize_with_mask, validate_format, Trajectory};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("golden document id `{0}` not found in the corpus")]
    MissingGoldenDoc(String),
    #[error("gold spec `{0}` is invalid: {1}")]
    InvalidGoldSpec(String, String),
    #[error("similarity vector length {c} does not match memory length {m}")]
    LengthMismatch { c: usize, m: usize },
    #[error("sub-answer reward mode enabled but gold spec `{0}` has no sub-answers")]
    MissingSubAnswers(String),
    #[error(transparent)]
    Retrieval(#[from] TfIdfError),
}

/// Per-subquestion supervision: golden search keys, optional sub-answer,
/// and the golden documents resolving this hop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubQuestionSpec {
    pub question: String,
    pub search_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_answer: Option<String>,
    #[serde(default)]
    pub golden_doc_ids: Vec<String>,
}

/// Supervision bundle for one question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldSpec {
    pub question_id: String,
    pub answers: Vec<String>,
    pub subquestions: Vec<SubQuestionSpec>,
}

impl GoldSpec {
    /// Golden document ids across subquestions, in order (D^g).
    pub fn golden_doc_ids(&self) -> Vec<&str> {
        self.subquestions
            .iter()
            .flat_map(|sq| sq.golden_doc_ids.iter().map(String::as_str))
            .collect()
    }

    pub fn num_subquestions(&self) -> usize {
        self.subquestions.len()
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let fail = |msg: &str| {
            Err(RewardError::InvalidGoldSpec(
                self.question_id.clone(),
                msg.to_string(),
            ))
        };
        if self.answers.is_empty() {
            return fail("answers must be non-empty");
        }
        if self.subquestions.is_empty() {
            return fail("at least one subquestion is required");
        }
        for sq in &self.subquestions {
            if sq.search_keys.is_empty() {
                return fail("every subquestion needs at least one search key");
            }
        }
        Ok(())
    }
}

/// Running best cosine match per golden document (m_i), component-wise
/// non-decreasing over rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainMemory {
    pub m: Vec<f64>,
}

impl GainMemory {
    pub fn new(n: usize) -> Self {
        GainMemory { m: vec![0.0; n] }
    }
}

/// Document ids seen in any prior round's retrieval.
#[derive(Clone, Debug, Default)]
pub struct RetrievalHistory {
    seen: HashSet<String>,
}

impl RetrievalHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seen.contains(id)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Which global supervision signal scales into r_overall alongside the
/// answer reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// r_overall = r_answer + gamma_key * r_key
    #[default]
    SearchKeys,
    /// r_overall = r_answer + gamma_sub * r_subans
    SubAnswers,
}

/// What the search-key reward's format gate looks at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyGate {
    /// Granted only when the whole trajectory passes R1-R3.
    #[default]
    FullTrajectory,
    /// Granted per emission: any properly closed search counts.
    PerEmission,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub gamma_key: f64,
    pub gamma_sub: f64,
    pub mode: RewardMode,
    pub key_gate: KeyGate,
    /// Documents retrieved per scored round (k).
    pub retrieve_k: usize,
    /// Ablation switches over the reward components.
    pub include_key: bool,
    pub include_gain: bool,
    pub include_penalty: bool,
    /// When true, format invalidity also zeroes the step rewards; by
    /// default the format gates only the global components.
    pub zero_steps_when_invalid: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            gamma_key: 1.0,
            gamma_sub: 1.0,
            mode: RewardMode::SearchKeys,
            key_gate: KeyGate::FullTrajectory,
            retrieve_k: 3,
            include_key: true,
            include_gain: true,
            include_penalty: true,
            zero_steps_when_invalid: false,
        }
    }
}

/// Per-round trace of the step reward computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRoundTrace {
    pub round: usize,
    pub query: String,
    pub retrieved_ids: Vec<String>,
    /// c^t: best cosine match per golden document this round.
    pub similarity: Vec<f64>,
    /// delta^t: positive improvement over the pre-round memory.
    pub delta: Vec<f64>,
    pub gain: f64,
    pub penalty: f64,
    pub r_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub question_id: String,
    pub format_valid: bool,
    pub violations: Vec<String>,
    pub r_answer: f64,
    pub r_key: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_subans: Option<f64>,
    pub r_overall: f64,
    pub steps: Vec<StepRoundTrace>,
    /// Terminal memory vector m^T (per golden document).
    pub final_memory: Vec<f64>,
    /// Dense per-token reward vector aligned to the tokenized trajectory;
    /// derivable, so not serialized into score reports.
    #[serde(skip)]
    pub token_rewards: Vec<f64>,
}

impl RewardBreakdown {
    pub fn total_gain(&self) -> f64 {
        self.steps.iter().map(|s| s.gain).sum()
    }

    pub fn mean_penalty(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.steps.iter().map(|s| s.penalty).sum::<f64>() / self.steps.len() as f64
        }
    }
}

/// Answer reward: best word-F1 over the gold answers when the trajectory
/// is format-valid and an answer is present, else 0.
pub fn answer_reward(traj: &Trajectory, gold: &GoldSpec) -> f64 {
    if !validate_format(traj).valid {
        return 0.0;
    }
    match &traj.answer {
        Some(seg) => best_over_golds(seg.body.trim(), &gold.answers, word_f1).unwrap_or(0.0),
        None => 0.0,
    }
}

/// Search-key reward: mean over subquestions of the best word-F1 between
/// any emitted query and any golden key. The format gate is applied by
/// the caller.
pub fn search_key_reward(queries: &[String], gold: &GoldSpec) -> f64 {
    if gold.subquestions.is_empty() || queries.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for sq in &gold.subquestions {
        let mut best = 0.0f64;
        for key in &sq.search_keys {
            for q in queries {
                best = best.max(word_f1(q, key));
            }
        }
        total += best;
    }
    total / gold.subquestions.len() as f64
}

/// Sub-answer reward: mean over subquestions of the best word-F1 between
/// any emitted sub-answer segment and the golden sub-answer.
pub fn sub_answer_reward(traj: &Trajectory, gold: &GoldSpec) -> Result<f64, RewardError> {
    let golds: Vec<&str> = gold
        .subquestions
        .iter()
        .filter_map(|sq| sq.sub_answer.as_deref())
        .collect();
    if golds.len() != gold.subquestions.len() || golds.is_empty() {
        return Err(RewardError::MissingSubAnswers(gold.question_id.clone()));
    }
    let emitted: Vec<&str> = traj
        .sub_qas
        .iter()
        .filter(|seg| seg.kind == crate::trajectory::SegmentKind::SubAnswer)
        .map(|seg| seg.body.trim())
        .collect();
    let mut total = 0.0;
    for g in &golds {
        let best = emitted
            .iter()
            .map(|e| word_f1(e, g))
            .fold(0.0f64, f64::max);
        total += best;
    }
    Ok(total / golds.len() as f64)
}

/// c^t: for each golden document, the highest cosine similarity to any
/// document retrieved this round.
pub fn round_similarity(
    model: &TfIdfModel,
    retrieved: &[&Document],
    gold_docs: &[&Document],
) -> Vec<f64> {
    let retrieved_vecs: Vec<SparseVector> =
        retrieved.iter().map(|d| model.vectorize(&d.text)).collect();
    gold_docs
        .iter()
        .map(|g| {
            let gv = model.vectorize(&g.text);
            retrieved_vecs
                .iter()
                .map(|rv| cosine_sim(&gv, rv))
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// delta^t_i = max(c_i - m_i, 0) against the pre-round memory;
/// G = mean(delta); memory updates to max(m_i, c_i).
pub fn information_gain(
    c: &[f64],
    mem: &GainMemory,
) -> Result<(Vec<f64>, f64, GainMemory), RewardError> {
    if c.len() != mem.m.len() {
        return Err(RewardError::LengthMismatch {
            c: c.len(),
            m: mem.m.len(),
        });
    }
    let delta: Vec<f64> = c
        .iter()
        .zip(&mem.m)
        .map(|(&ci, &mi)| (ci - mi).max(0.0))
        .collect();
    let gain = if delta.is_empty() {
        0.0
    } else {
        delta.iter().sum::<f64>() / delta.len() as f64
    };
    let next = GainMemory {
        m: mem
            .m
            .iter()
            .zip(c)
            .map(|(&mi, &ci)| mi.max(ci))
            .collect(),
    };
    Ok((delta, gain, next))
}

/// P^t: fraction of this round's retrieved documents already present in
/// the pre-round history; history then absorbs this round's ids.
pub fn redundancy_penalty(
    retrieved_ids: &[String],
    hist: &RetrievalHistory,
) -> (f64, RetrievalHistory) {
    let mut next = hist.clone();
    if retrieved_ids.is_empty() {
        return (0.0, next);
    }
    let repeats = retrieved_ids.iter().filter(|id| hist.contains(id)).count();
    for id in retrieved_ids {
        next.seen.insert(id.clone());
    }
    (repeats as f64 / retrieved_ids.len() as f64, next)
}

/// Score a parsed trajectory against its gold spec: global rewards, the
/// per-round step trace (threading gain memory and retrieval history in
/// round order over deterministic re-retrieval), and the token-level
/// reward placement.
///
/// Format invalidity zeroes the Type 1 components but leaves step rewards
/// in place unless `zero_steps_when_invalid` is set. Retrieval for each
/// round re-runs the round's query against (model, corpus); a query that
/// normalizes to empty contributes an empty retrieval set (no gain, no
/// penalty, history unchanged).
pub fn score_trajectory(
    traj: &Trajectory,
    gold: &GoldSpec,
    model: &TfIdfModel,
    corpus: &Corpus,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    let gold_docs: Vec<&Document> = gold
        .golden_doc_ids()
        .iter()
        .map(|id| {
            corpus
                .get(id)
                .ok_or_else(|| RewardError::MissingGoldenDoc(id.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let n = gold_docs.len();

    let verdict = validate_format(traj);
    let queries = extract_queries(traj);

    // Type 2: per-round similarity, gain, and redundancy.
    let mut memory = GainMemory::new(n);
    let mut history = RetrievalHistory::new();
    let mut steps = Vec::with_capacity(queries.len());
    for (t, query) in queries.iter().enumerate() {
        let retrieved_ids: Vec<String> = match model.retrieve(corpus, query, cfg.retrieve_k) {
            Ok(result) => result.ids(),
            Err(TfIdfError::EmptyQuery) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let retrieved: Vec<&Document> = retrieved_ids
            .iter()
            .map(|id| corpus.get(id).expect("retrieved id resolves"))
            .collect();
        let c = round_similarity(model, &retrieved, &gold_docs);
        let (delta, gain, next_memory) = information_gain(&c, &memory)?;
        let (penalty, next_history) = redundancy_penalty(&retrieved_ids, &history);
        memory = next_memory;
        history = next_history;
        let gain_term = if cfg.include_gain { gain } else { 0.0 };
        let penalty_term = if cfg.include_penalty { penalty } else { 0.0 };
        steps.push(StepRoundTrace {
            round: t,
            query: query.clone(),
            retrieved_ids,
            similarity: c,
            delta,
            gain,
            penalty,
            r_step: gain_term - penalty_term,
        });
    }
    if cfg.zero_steps_when_invalid && !verdict.valid {
        for step in &mut steps {
            step.r_step = 0.0;
        }
    }

    // Type 1: format-gated global components.
    let r_answer = answer_reward(traj, gold);
    let key_granted = match cfg.key_gate {
        KeyGate::FullTrajectory => verdict.valid,
        KeyGate::PerEmission => !queries.is_empty(),
    };
    let r_key_raw = search_key_reward(&queries, gold);
    let r_key = if key_granted { r_key_raw } else { 0.0 };
    let r_subans = match cfg.mode {
        RewardMode::SubAnswers => {
            let raw = sub_answer_reward(traj, gold)?;
            Some(if verdict.valid { raw } else { 0.0 })
        }
        RewardMode::SearchKeys => None,
    };
    let r_overall = if verdict.valid {
        match cfg.mode {
            RewardMode::SearchKeys => {
                let key_term = if cfg.include_key {
                    cfg.gamma_key * r_key
                } else {
                    0.0
                };
                r_answer + key_term
            }
            RewardMode::SubAnswers => r_answer + cfg.gamma_sub * r_subans.unwrap_or(0.0),
        }
    } else {
        0.0
    };

    // Token placement: r_step^t on each round's closing search tag,
    // r_overall on the final token.
    let tokenized = tokenize_with_mask(traj);
    let mut token_rewards = vec![0.0; tokenized.tokens.len()];
    for (step, &idx) in steps.iter().zip(&tokenized.round_end_index) {
        token_rewards[idx] += step.r_step;
    }
    if let Some(end) = tokenized.answer_end_index {
        token_rewards[end] += r_overall;
    }

    Ok(RewardBreakdown {
        question_id: gold.question_id.clone(),
        format_valid: verdict.valid,
        violations: verdict.violations.iter().map(|v| v.detail.clone()).collect(),
        r_answer,
        r_key,
        r_subans,
        r_overall,
        steps,
        final_memory: memory.m,
        token_rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::tfidf::TfIdfConfig;
    use crate::trajectory::{parse, TrajectoryBuilder};

    fn doc(id: &str, text: &str) -> Document {
        Document {
            id: id.to_string(),
            title: id.to_string(),
            text: text.to_string(),
        }
    }

    fn toy_world() -> (Corpus, TfIdfModel, GoldSpec) {
        let corpus = Corpus::from_documents(vec![
            doc("g1", "the mentor of balto is dorin"),
            doc("g2", "the patron of dorin is kelpa"),
            doc("x1", "the rival of melfi is tasco"),
            doc("x2", "the mentor of tasco is melfi"),
            doc("x3", "the patron of balto is melfi"),
        ])
        .unwrap();
        let model = TfIdfModel::build(&corpus, TfIdfConfig::default()).unwrap();
        let gold = GoldSpec {
            question_id: "q1".into(),
            answers: vec!["kelpa".into()],
            subquestions: vec![
                SubQuestionSpec {
                    question: "what is the mentor of balto".into(),
                    search_keys: vec!["balto mentor".into(), "mentor of balto".into()],
                    sub_answer: Some("dorin".into()),
                    golden_doc_ids: vec!["g1".into()],
                },
                SubQuestionSpec {
                    question: "what is the patron of dorin".into(),
                    search_keys: vec!["dorin patron".into(), "patron of dorin".into()],
                    sub_answer: Some("kelpa".into()),
                    golden_doc_ids: vec!["g2".into()],
                },
            ],
        };
        (corpus, model, gold)
    }

    fn valid_two_round() -> Trajectory {
        TrajectoryBuilder::new()
            .think(" find the mentor ")
            .search(" balto mentor ")
            .information(" Doc 1<## Title: g1 ##> the mentor of balto is dorin ")
            .think(" now the patron ")
            .search(" dorin patron ")
            .information(" Doc 1<## Title: g2 ##> the patron of dorin is kelpa ")
            .answer(" kelpa ")
            .build()
    }

    #[test]
    fn answer_reward_identity_under_valid_format() {
        let (_, _, gold) = toy_world();
        assert_eq!(answer_reward(&valid_two_round(), &gold), 1.0);
    }

    #[test]
    fn answer_reward_zero_when_format_invalid() {
        let (_, _, gold) = toy_world();
        // Correct answer text but no search round: R2 violation.
        let traj = parse("<think>t</think><answer> kelpa </answer>").unwrap();
        assert_eq!(answer_reward(&traj, &gold), 0.0);
    }

    #[test]
    fn key_reward_mean_of_maxima() {
        let (_, _, gold) = toy_world();
        let exact = vec!["balto mentor".to_string(), "dorin patron".to_string()];
        assert_eq!(search_key_reward(&exact, &gold), 1.0);
        assert_eq!(search_key_reward(&[], &gold), 0.0);

        // One perfect hop, one miss -> 0.5.
        let half = vec!["balto mentor".to_string(), "zzz yyy".to_string()];
        assert_eq!(search_key_reward(&half, &gold), 0.5);
    }

    #[test]
    fn sub_answer_reward_mean_over_hops() {
        let (_, _, gold) = toy_world();
        let both = TrajectoryBuilder::new()
            .sub_answer(1, " dorin ")
            .sub_answer(2, " kelpa ")
            .build();
        assert_eq!(sub_answer_reward(&both, &gold).unwrap(), 1.0);

        let one = TrajectoryBuilder::new().sub_answer(1, " dorin ").build();
        assert_eq!(sub_answer_reward(&one, &gold).unwrap(), 0.5);

        let none = TrajectoryBuilder::new().think("t").build();
        assert_eq!(sub_answer_reward(&none, &gold).unwrap(), 0.0);
    }

    #[test]
    fn sub_answer_reward_requires_gold_sub_answers() {
        let (_, _, mut gold) = toy_world();
        gold.subquestions[0].sub_answer = None;
        let traj = TrajectoryBuilder::new().sub_answer(1, "x").build();
        assert!(matches!(
            sub_answer_reward(&traj, &gold),
            Err(RewardError::MissingSubAnswers(_))
        ));
    }

    #[test]
    fn round_similarity_self_is_one_disjoint_is_zero() {
        let (corpus, model, _) = toy_world();
        let g1 = corpus.get("g1").unwrap();
        let c = round_similarity(&model, &[g1], &[g1]);
        assert!((c[0] - 1.0).abs() < 1e-12);

        let far = doc("z", "qqq www eee");
        let c = round_similarity(&model, &[&far], &[g1]);
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn information_gain_forced_arithmetic() {
        let mem = GainMemory::new(2);
        let (delta, g, mem1) = information_gain(&[0.8, 0.0], &mem).unwrap();
        assert_eq!(delta, vec![0.8, 0.0]);
        assert_eq!(g, 0.4);
        assert_eq!(mem1.m, vec![0.8, 0.0]);

        let (delta, g, mem2) = information_gain(&[0.5, 0.6], &mem1).unwrap();
        assert_eq!(delta, vec![0.0, 0.6]);
        assert_eq!(g, 0.3);
        assert_eq!(mem2.m, vec![0.8, 0.6]);

        // No-gain round: c component-wise <= m.
        let (delta, g, mem3) = information_gain(&[0.1, 0.2], &mem2).unwrap();
        assert_eq!(delta, vec![0.0, 0.0]);
        assert_eq!(g, 0.0);
        assert_eq!(mem3.m, mem2.m);
    }

    #[test]
    fn information_gain_rejects_length_mismatch() {
        let mem = GainMemory::new(2);
        assert!(information_gain(&[0.1], &mem).is_err());
    }

    #[test]
    fn redundancy_penalty_counts_repeats() {
        let hist = RetrievalHistory::new();
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();

        let (p1, h1) = redundancy_penalty(&ids(&["a", "b", "c"]), &hist);
        assert_eq!(p1, 0.0);

        let (p2, h2) = redundancy_penalty(&ids(&["a", "b", "d"]), &h1);
        assert!((p2 - 2.0 / 3.0).abs() < 1e-15);

        let (p3, _) = redundancy_penalty(&ids(&["a", "b", "d"]), &h2);
        assert_eq!(p3, 1.0);
    }

    #[test]
    fn score_places_step_and_terminal_rewards() {
        let (corpus, model, gold) = toy_world();
        let traj = valid_two_round();
        let cfg = RewardConfig::default();
        let breakdown = score_trajectory(&traj, &gold, &model, &corpus, &cfg).unwrap();

        assert!(breakdown.format_valid);
        assert_eq!(breakdown.r_answer, 1.0);
        assert_eq!(breakdown.r_key, 1.0);
        assert_eq!(breakdown.r_overall, 2.0);
        assert_eq!(breakdown.steps.len(), 2);
        assert_eq!(breakdown.steps[0].penalty, 0.0);

        let tok = tokenize_with_mask(&traj);
        let nonzero: Vec<usize> = breakdown
            .token_rewards
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != 0.0)
            .map(|(i, _)| i)
            .collect();
        for idx in &nonzero {
            assert!(tok.mask[*idx], "reward on masked token {idx}");
        }
        assert!(nonzero.contains(&tok.round_end_index[0]));
        assert!(nonzero.contains(&tok.round_end_index[1]));
        assert_eq!(*nonzero.last().unwrap(), tok.answer_end_index.unwrap());
        assert_eq!(
            breakdown.token_rewards[tok.answer_end_index.unwrap()],
            2.0
        );
    }

    #[test]
    fn score_empty_trajectory_is_all_zero() {
        let (corpus, model, gold) = toy_world();
        let traj = parse("").unwrap();
        let breakdown =
            score_trajectory(&traj, &gold, &model, &corpus, &RewardConfig::default()).unwrap();
        assert!(!breakdown.format_valid);
        assert_eq!(breakdown.r_overall, 0.0);
        assert!(breakdown.steps.is_empty());
        assert!(breakdown.token_rewards.is_empty());
    }

    #[test]
    fn score_invalid_format_keeps_step_rewards() {
        let (corpus, model, gold) = toy_world();
        // Two proper searches but no think at all: R2-invalid.
        let traj = TrajectoryBuilder::new()
            .search(" balto mentor ")
            .information(" docs ")
            .search(" dorin patron ")
            .information(" docs ")
            .answer(" kelpa ")
            .build();
        let breakdown =
            score_trajectory(&traj, &gold, &model, &corpus, &RewardConfig::default()).unwrap();
        assert!(!breakdown.format_valid);
        assert_eq!(breakdown.r_overall, 0.0);
        assert_eq!(breakdown.r_answer, 0.0);
        assert_eq!(breakdown.r_key, 0.0);
        assert!(breakdown.steps[0].gain > 0.0);
        assert!(breakdown.steps[0].r_step != 0.0);

        let strict = RewardConfig {
            zero_steps_when_invalid: true,
            ..RewardConfig::default()
        };
        let gated = score_trajectory(&traj, &gold, &model, &corpus, &strict).unwrap();
        assert!(gated.steps.iter().all(|s| s.r_step == 0.0));
    }

    #[test]
    fn score_missing_golden_doc_names_id() {
        let (corpus, model, mut gold) = toy_world();
        gold.subquestions[0].golden_doc_ids = vec!["ghost".into()];
        let err =
            score_trajectory(&valid_two_round(), &gold, &model, &corpus, &RewardConfig::default())
                .unwrap_err();
        assert!(matches!(err, RewardError::MissingGoldenDoc(id) if id == "ghost"));
    }

    #[test]
    fn score_is_deterministic() {
        let (corpus, model, gold) = toy_world();
        let traj = valid_two_round();
        let cfg = RewardConfig::default();
        let a = score_trajectory(&traj, &gold, &model, &corpus, &cfg).unwrap();
        let b = score_trajectory(&traj, &gold, &model, &corpus, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_conservation_telescopes() {
        let mut rng = crate::rng::Rng::new(17);
        for _ in 0..100 {
            let n = 1 + rng.below(5);
            let rounds = 1 + rng.below(8);
            let mut mem = GainMemory::new(n);
            let mut total_gain = 0.0;
            for _ in 0..rounds {
                let c: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
                let (_, g, next) = information_gain(&c, &mem).unwrap();
                for (a, b) in next.m.iter().zip(&mem.m) {
                    assert!(a >= b, "memory must be monotone");
                }
                mem = next;
                total_gain += g;
            }
            let mean_final = mem.m.iter().sum::<f64>() / n as f64;
            assert!(
                (total_gain - mean_final).abs() <= 1e-12,
                "sum of gains {total_gain} != mean terminal memory {mean_final}"
            );
        }
    }

    #[test]
    fn permuting_gold_docs_leaves_scalars_unchanged() {
        let (corpus, model, gold) = toy_world();
        let mut permuted = gold.clone();
        permuted.subquestions.reverse();
        let traj = valid_two_round();
        let cfg = RewardConfig::default();
        let a = score_trajectory(&traj, &gold, &model, &corpus, &cfg).unwrap();
        let b = score_trajectory(&traj, &permuted, &model, &corpus, &cfg).unwrap();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.gain, sb.gain);
            assert_eq!(sa.penalty, sb.penalty);
        }
        assert_eq!(a.r_answer, b.r_answer);
        assert_eq!(a.r_key, b.r_key);
        assert_eq!(a.r_overall, b.r_overall);
    }
}
