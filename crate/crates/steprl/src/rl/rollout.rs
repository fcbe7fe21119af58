//! RAG-style rollout: autoregressive sampling that pauses on every
//! closing search tag, runs retrieval, splices the rendered documents in
//! as masked environment tokens, and terminates on a closing answer tag
//! or the action/token budget.
//!
//! Generation is grammar-constrained by default: the action space walks
//! the think -> search -> information loop and only offers legal tokens at
//! each slot. This stands in for the pretrained LLM plus prompt template
//! of the full-scale setting, where syntax is already known and the thing
//! being learned is where to search, what to ask, and what to answer.
//! `grammar: false` gives the unconstrained token space instead.

use crate::corpus::Corpus;
use crate::rewards::{score_trajectory, GoldSpec, RewardBreakdown, RewardConfig, RewardError};
use crate::rl::nn::{masked_log_softmax, Context, Net, UNK};
use crate::rng::Rng;
use crate::tfidf::{RetrievalResult, TfIdfError, TfIdfModel};
use crate::trajectory::{parse, Trajectory};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Retrieval(#[from] TfIdfError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Tag token ids within a vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagIds {
    pub think_open: u32,
    pub think_close: u32,
    pub search_open: u32,
    pub search_close: u32,
    pub info_open: u32,
    pub info_close: u32,
    pub answer_open: u32,
    pub answer_close: u32,
}

/// Closed token vocabulary: pad, unk, the eight tags, emittable content
/// words, then render-only extras (document formatting tokens). The
/// policy's action space is words plus tags; anything else maps to UNK
/// when featurized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    map: HashMap<String, u32>,
    pub tags: TagIds,
    pub word_lo: u32,
    pub word_hi: u32,
}

impl Vocab {
    pub fn new(words: &[String], render_extras: &[String]) -> Vocab {
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        let tag_strs = [
            "<think>",
            "</think>",
            "<search>",
            "</search>",
            "<information>",
            "</information>",
            "<answer>",
            "</answer>",
        ];
        let tag_base = tokens.len() as u32;
        tokens.extend(tag_strs.iter().map(|s| s.to_string()));
        let tags = TagIds {
            think_open: tag_base,
            think_close: tag_base + 1,
            search_open: tag_base + 2,
            search_close: tag_base + 3,
            info_open: tag_base + 4,
            info_close: tag_base + 5,
            answer_open: tag_base + 6,
            answer_close: tag_base + 7,
        };
        let word_lo = tokens.len() as u32;
        for w in words {
            if !tokens.contains(w) {
                tokens.push(w.clone());
            }
        }
        let word_hi = tokens.len() as u32;
        for w in render_extras {
            if !tokens.contains(w) {
                tokens.push(w.clone());
            }
        }
        let map = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens,
            map,
            tags,
            word_lo,
            word_hi,
        }
    }

    /// Rebuild the lookup map after deserialization.
    pub fn rebuild_map(&mut self) {
        self.map = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.map.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn word_ids(&self) -> impl Iterator<Item = u32> {
        self.word_lo..self.word_hi
    }
}

/// Per-segment body budgets and the episode budgets. A segment's closer
/// becomes legal at `min` body tokens and is forced at `max`; a max of 0
/// makes the segment purely structural (empty body).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutLimits {
    /// Action budget: maximum number of search rounds.
    pub max_rounds: usize,
    pub max_think_tokens: usize,
    pub min_search_tokens: usize,
    pub max_search_tokens: usize,
    pub min_answer_tokens: usize,
    pub max_answer_tokens: usize,
    /// Hard cap on generated plus injected tokens per episode.
    pub max_total_tokens: usize,
}

impl Default for RolloutLimits {
    fn default() -> Self {
        RolloutLimits {
            max_rounds: 3,
            max_think_tokens: 0,
            min_search_tokens: 1,
            max_search_tokens: 2,
            min_answer_tokens: 1,
            max_answer_tokens: 2,
            max_total_tokens: 160,
        }
    }
}

/// Where the generator sits in the think/search/answer loop. Stored per
/// position so the legal token set can be reconstructed at training time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotState {
    ExpectThink { rounds_done: u8 },
    InThink { len: u8, rounds_done: u8 },
    ExpectAction { rounds_done: u8 },
    InSearch { len: u8, rounds_done: u8 },
    InAnswer { len: u8 },
    /// Unconstrained mode: every word and tag is legal.
    Free,
}

/// The grammar: legal token sets and state transitions.
#[derive(Clone, Debug)]
pub struct ActionSpace {
    pub vocab: Vocab,
    pub limits: RolloutLimits,
    pub grammar: bool,
}

impl ActionSpace {
    pub fn new(vocab: Vocab, limits: RolloutLimits, grammar: bool) -> ActionSpace {
        ActionSpace {
            vocab,
            limits,
            grammar,
        }
    }

    pub fn initial(&self) -> SlotState {
        if self.grammar {
            SlotState::ExpectThink { rounds_done: 0 }
        } else {
            SlotState::Free
        }
    }

    fn body_legal(&self, len: usize, min: usize, max: usize, closer: u32) -> Vec<u32> {
        let mut legal: Vec<u32> = Vec::new();
        if len < max {
            legal.extend(self.vocab.word_ids());
        }
        if len >= min {
            legal.push(closer);
        }
        legal
    }

    pub fn legal(&self, state: SlotState) -> Vec<u32> {
        let t = self.vocab.tags;
        let lim = &self.limits;
        match state {
            SlotState::ExpectThink { .. } => vec![t.think_open],
            SlotState::InThink { len, .. } => {
                self.body_legal(len as usize, 0, lim.max_think_tokens, t.think_close)
            }
            SlotState::ExpectAction { rounds_done } => {
                if (rounds_done as usize) < lim.max_rounds {
                    vec![t.search_open, t.answer_open]
                } else {
                    vec![t.answer_open]
                }
            }
            SlotState::InSearch { len, .. } => self.body_legal(
                len as usize,
                lim.min_search_tokens,
                lim.max_search_tokens,
                t.search_close,
            ),
            SlotState::InAnswer { len } => self.body_legal(
                len as usize,
                lim.min_answer_tokens,
                lim.max_answer_tokens,
                t.answer_close,
            ),
            SlotState::Free => {
                let mut legal: Vec<u32> = vec![
                    t.think_open,
                    t.think_close,
                    t.search_open,
                    t.search_close,
                    t.info_open,
                    t.info_close,
                    t.answer_open,
                    t.answer_close,
                ];
                legal.extend(self.vocab.word_ids());
                legal
            }
        }
    }

    pub fn transition(&self, state: SlotState, tok: u32) -> SlotState {
        let t = self.vocab.tags;
        match state {
            SlotState::Free => SlotState::Free,
            SlotState::ExpectThink { rounds_done } if tok == t.think_open => SlotState::InThink {
                len: 0,
                rounds_done,
            },
            SlotState::InThink { len, rounds_done } => {
                if tok == t.think_close {
                    SlotState::ExpectAction { rounds_done }
                } else {
                    SlotState::InThink {
                        len: len.saturating_add(1),
                        rounds_done,
                    }
                }
            }
            SlotState::ExpectAction { rounds_done } => {
                if tok == t.search_open {
                    SlotState::InSearch {
                        len: 0,
                        rounds_done,
                    }
                } else {
                    SlotState::InAnswer { len: 0 }
                }
            }
            SlotState::InSearch { len, rounds_done } => {
                if tok == t.search_close {
                    SlotState::ExpectThink {
                        rounds_done: rounds_done.saturating_add(1),
                    }
                } else {
                    SlotState::InSearch {
                        len: len.saturating_add(1),
                        rounds_done,
                    }
                }
            }
            SlotState::InAnswer { len } => SlotState::InAnswer {
                len: len.saturating_add(1),
            },
            other => other,
        }
    }
}

/// The simulated search engine bound to a corpus and index.
pub struct SearchEnv<'a> {
    pub model: &'a TfIdfModel,
    pub corpus: &'a Corpus,
    pub k: usize,
}

pub struct SearchResponse {
    pub ids: Vec<String>,
    pub body: String,
}

impl<'a> SearchEnv<'a> {
    pub fn new(model: &'a TfIdfModel, corpus: &'a Corpus, k: usize) -> SearchEnv<'a> {
        SearchEnv { model, corpus, k }
    }

    /// Retrieve and render k documents for a query.
    pub fn search(&self, query: &str) -> Result<SearchResponse, TfIdfError> {
        let result = self.model.retrieve(self.corpus, query, self.k)?;
        let body = self.render_information(&result);
        Ok(SearchResponse {
            ids: result.ids(),
            body,
        })
    }

    /// One "Doc j<## Title: ... ##> ..." line per retrieved document.
    pub fn render_information(&self, result: &RetrievalResult) -> String {
        result
            .ranked
            .iter()
            .enumerate()
            .map(|(i, (id, _))| {
                let doc = self.corpus.get(id).expect("retrieved id resolves");
                format!("Doc {}<## Title: {} ##> {}", i + 1, doc.title, doc.text)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One emitted or injected token with everything training needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step {
    pub token: u32,
    /// Environment-injected (information span): loss mask 0.
    pub injected: bool,
    /// Behavior log-probability under the sampling policy; 0 for injected.
    pub logp_old: f64,
    /// Value estimate of the state before this token.
    pub value: f64,
    /// Grammar slot the token was chosen in; None for injected tokens.
    pub state: Option<SlotState>,
    /// Stream index of the latest `<information>` opener at or before
    /// this position.
    pub info_start: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub question_id: String,
    pub prompt: Vec<u32>,
    pub steps: Vec<Step>,
    pub raw: String,
    pub trajectory: Trajectory,
    pub breakdown: RewardBreakdown,
    pub retrieval_calls: usize,
    pub truncated: bool,
}

impl Episode {
    /// Loss mask I(o_t): 1 on policy-generated tokens.
    pub fn mask(&self) -> Vec<bool> {
        self.steps.iter().map(|s| !s.injected).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn logps_old(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.logp_old).collect()
    }

    /// Full id stream: prompt followed by output tokens.
    pub fn stream(&self) -> Vec<u32> {
        let mut s = self.prompt.clone();
        s.extend(self.steps.iter().map(|st| st.token));
        s
    }

    /// Featurizer context for output position `pos` (before its token).
    pub fn context(&self, pos: usize, cfg: &crate::rl::nn::NetConfig) -> Context {
        let stream = self.stream();
        let info_start = self.steps[pos].info_start.map(|i| i as usize);
        Context::at(&stream, self.prompt.len() + pos, info_start, cfg)
    }

    pub fn response_len(&self) -> usize {
        self.steps.len()
    }

    pub fn answer_text(&self) -> Option<String> {
        self.trajectory
            .answer
            .as_ref()
            .map(|seg| seg.body.trim().to_string())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleOptions {
    /// 0 means greedy decoding.
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

/// Choose a token from the masked policy distribution. The recorded
/// log-probability is always under the untempered policy, which is what
/// the surrogate ratio needs; temperature and top-p only shape sampling.
pub fn sample_token(
    logits: &[f64],
    legal: &[u32],
    opts: &SampleOptions,
    rng: &mut Rng,
) -> (u32, f64) {
    let logp = masked_log_softmax(logits, legal);
    if opts.temperature == 0.0 {
        let mut best = legal[0];
        for &id in legal {
            if logits[id as usize] > logits[best as usize] {
                best = id;
            }
        }
        return (best, logp[best as usize]);
    }

    let scaled: Vec<f64> = logits.iter().map(|&l| l / opts.temperature).collect();
    let slp = masked_log_softmax(&scaled, legal);
    let mut ranked: Vec<(u32, f64)> = legal.iter().map(|&id| (id, slp[id as usize].exp())).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut kept = Vec::with_capacity(ranked.len());
    let mut cum = 0.0;
    for (id, p) in ranked {
        kept.push((id, p));
        cum += p;
        if cum >= opts.top_p {
            break;
        }
    }
    let total: f64 = kept.iter().map(|&(_, p)| p).sum();
    let mut u = rng.next_f64() * total;
    let mut chosen = kept[kept.len() - 1].0;
    for &(id, p) in &kept {
        if u < p {
            chosen = id;
            break;
        }
        u -= p;
    }
    (chosen, logp[chosen as usize])
}

/// Sample one episode: autoregressive generation with retrieval splicing,
/// then score the parsed trajectory.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    policy: &Net,
    value: &Net,
    env: &SearchEnv,
    space: &ActionSpace,
    question: &str,
    gold: &GoldSpec,
    reward_cfg: &RewardConfig,
    opts: &SampleOptions,
    rng: &mut Rng,
) -> Result<Episode, RolloutError> {
    let prompt = space.vocab.encode(question);
    let mut steps: Vec<Step> = Vec::new();
    let mut stream = prompt.clone();
    let mut retrieval_calls = 0usize;
    let mut truncated = false;
    let mut finished = false;

    if space.limits.max_rounds > 0 || !space.grammar {
        let mut state = space.initial();
        let mut search_body: Vec<String> = Vec::new();
        let mut free_search_open: Option<usize> = None;
        let mut info_start: Option<u32> = None;
        let tags = space.vocab.tags;

        loop {
            if steps.len() >= space.limits.max_total_tokens {
                truncated = true;
                break;
            }
            let istart = info_start.map(|i| i as usize);
            let ctx = Context::at(&stream, stream.len(), istart, &policy.cfg);
            let value_est =
                value.predict_scalar(&Context::at(&stream, stream.len(), istart, &value.cfg));
            let legal = space.legal(state);
            let logits = policy.forward(&ctx).out;
            let (tok, logp) = sample_token(&logits, &legal, opts, rng);
            steps.push(Step {
                token: tok,
                injected: false,
                logp_old: logp,
                value: value_est,
                state: Some(state),
                info_start,
            });
            stream.push(tok);

            // Track the current search body for query extraction.
            if space.grammar {
                match state {
                    SlotState::ExpectAction { .. } if tok == tags.search_open => {
                        search_body.clear()
                    }
                    SlotState::InSearch { .. } if tok != tags.search_close => {
                        search_body.push(space.vocab.token(tok).to_string())
                    }
                    _ => {}
                }
            } else if tok == tags.search_open {
                free_search_open = Some(steps.len());
            }

            let fired_search = tok == tags.search_close;
            let finished_answer = tok == tags.answer_close;
            state = space.transition(state, tok);

            if fired_search {
                let query = if space.grammar {
                    search_body.join(" ")
                } else {
                    match free_search_open.take() {
                        Some(open_idx) if open_idx <= steps.len() - 1 => steps
                            [open_idx..steps.len() - 1]
                            .iter()
                            .map(|s| space.vocab.token(s.token).to_string())
                            .collect::<Vec<_>>()
                            .join(" "),
                        _ => String::new(),
                    }
                };
                match env.search(&query) {
                    Ok(resp) => {
                        retrieval_calls += 1;
                        let mut inject = vec![space.vocab.tags.info_open];
                        inject.extend(space.vocab.encode(&resp.body));
                        inject.push(space.vocab.tags.info_close);
                        for tok_id in inject {
                            if steps.len() >= space.limits.max_total_tokens {
                                truncated = true;
                                break;
                            }
                            if tok_id == space.vocab.tags.info_open {
                                info_start = Some(stream.len() as u32);
                            }
                            let istart = info_start.map(|i| i as usize);
                            let v = value.predict_scalar(&Context::at(
                                &stream,
                                stream.len(),
                                istart,
                                &value.cfg,
                            ));
                            steps.push(Step {
                                token: tok_id,
                                injected: true,
                                logp_old: 0.0,
                                value: v,
                                state: None,
                                info_start,
                            });
                            stream.push(tok_id);
                        }
                        if truncated {
                            break;
                        }
                    }
                    Err(TfIdfError::EmptyQuery) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            if finished_answer {
                finished = true;
                break;
            }
        }
        if !finished && !truncated {
            truncated = true;
        }
    } else {
        truncated = true;
    }

    // Raw text: token strings joined with single spaces. Injected tokens
    // render via the vocabulary, which is lossless for world-generated
    // corpora (every render token is in the vocab).
    let raw = steps
        .iter()
        .map(|s| space.vocab.token(s.token))
        .collect::<Vec<_>>()
        .join(" ");

    let (trajectory, breakdown) = match parse(&raw) {
        Ok(traj) => {
            let breakdown = score_trajectory(&traj, gold, env.model, env.corpus, reward_cfg)?;
            (traj, breakdown)
        }
        Err(_) => {
            // Unconstrained sampling can emit structurally broken tag
            // streams; score them as zero everywhere.
            let traj = parse("").expect("empty parses");
            let breakdown = RewardBreakdown {
                question_id: gold.question_id.clone(),
                format_valid: false,
                violations: vec!["structural parse error".into()],
                r_answer: 0.0,
                r_key: 0.0,
                r_subans: None,
                r_overall: 0.0,
                steps: Vec::new(),
                final_memory: Vec::new(),
                token_rewards: vec![0.0; steps.len()],
            };
            (traj, breakdown)
        }
    };
    debug_assert_eq!(breakdown.token_rewards.len(), steps.len());

    Ok(Episode {
        question_id: gold.question_id.clone(),
        prompt,
        steps,
        raw,
        trajectory,
        breakdown,
        retrieval_calls,
        truncated,
    })
}

/// Build an episode text by replaying scripted (think, query) rounds
/// against the live environment and closing with a scripted answer.
/// Returns the raw trajectory text and the number of retrieval calls.
pub fn scripted_episode(
    env: &SearchEnv,
    rounds: &[(String, String)],
    answer: &str,
) -> Result<(String, usize), TfIdfError> {
    let mut raw = String::new();
    let mut calls = 0;
    for (think, query) in rounds {
        raw.push_str(&format!("<think> {think} </think>\n<search> {query} </search>\n"));
        match env.search(query) {
            Ok(resp) => {
                calls += 1;
                raw.push_str(&format!("<information> {} </information>\n", resp.body));
            }
            Err(TfIdfError::EmptyQuery) => {}
            Err(e) => return Err(e),
        }
    }
    raw.push_str(&format!("<answer> {answer} </answer>"));
    Ok((raw, calls))
}
