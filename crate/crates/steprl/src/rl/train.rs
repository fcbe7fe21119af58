//! The training loop: batched rollouts under a frozen policy snapshot,
//! scoring, KL shaping against the initial reference policy, GAE, and
//! per-mini-batch gradient steps on policy and value.
//!
//! Everything is single-threaded and seeded, so a run is a pure function
//! of its settings: same seed, byte-identical log.

use crate::corpus::Corpus;
use crate::metrics::{best_over_golds, exact_match};
use crate::microworld::QuestionItem;
use crate::rewards::RewardConfig;
use crate::rl::gae::{compute_gae, kl_shaped_rewards};
use crate::rl::loss::{steppo_loss, value_loss, LossError, TrainItem};
use crate::rl::nn::{masked_log_softmax, Adam, Net, NetConfig};
use crate::rl::rollout::{
    rollout, ActionSpace, Episode, RolloutError, RolloutLimits, SampleOptions, SearchEnv, Vocab,
};
use crate::rl::PpoConfig;
use crate::rng::Rng;
use crate::tfidf::TfIdfModel;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("checkpoint file version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything the trainer needs beyond the world itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSettings {
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    pub limits: RolloutLimits,
    pub grammar: bool,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub question_window: usize,
    pub recent_window: usize,
    pub info_window: usize,
    pub pointer_heads: usize,
    pub value_embed_dim: usize,
    pub value_hidden_dim: usize,
    /// Probe the held-out set every this many updates (1 = every update).
    pub probe_every: usize,
    pub probe_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            ppo: PpoConfig::default(),
            reward: RewardConfig::default(),
            limits: RolloutLimits::default(),
            grammar: true,
            embed_dim: 16,
            hidden_dim: 64,
            question_window: 12,
            recent_window: 30,
            info_window: 0,
            pointer_heads: 1,
            value_embed_dim: 16,
            value_hidden_dim: 64,
            probe_every: 1,
            probe_size: 20,
        }
    }
}

impl TrainSettings {
    pub fn policy_net_config(&self, vocab_size: usize) -> NetConfig {
        NetConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            question_window: self.question_window,
            recent_window: self.recent_window,
            info_window: self.info_window,
            hidden_dim: self.hidden_dim,
            out_dim: vocab_size,
            tied_output: true,
            pointer: true,
            pointer_heads: self.pointer_heads,
            output_bias: true,
        }
    }

    pub fn value_net_config(&self, vocab_size: usize) -> NetConfig {
        NetConfig {
            vocab_size,
            embed_dim: self.value_embed_dim,
            question_window: self.question_window,
            recent_window: self.recent_window,
            info_window: self.info_window,
            hidden_dim: self.value_hidden_dim,
            out_dim: 1,
            tied_output: false,
            pointer: false,
            pointer_heads: 0,
            output_bias: true,
        }
    }
}

/// One structured log record per update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_r_answer: f64,
    pub mean_r_key: f64,
    pub mean_r_overall: f64,
    pub mean_gain: f64,
    pub mean_penalty: f64,
    pub mean_step_reward: f64,
    pub mean_response_len: f64,
    pub mean_search_count: f64,
    pub format_valid_rate: f64,
    pub probe_em: f64,
    pub probe_f1: f64,
}

impl UpdateRecord {
    /// Fixed column order of the curves CSV.
    pub const CSV_HEADER: &'static str = "update,mean_r_answer,mean_r_key,mean_gain,mean_penalty,mean_response_len,mean_search_count,probe_em,probe_f1";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.update,
            self.mean_r_answer,
            self.mean_r_key,
            self.mean_gain,
            self.mean_penalty,
            self.mean_response_len,
            self.mean_search_count,
            self.probe_em,
            self.probe_f1
        )
    }
}

/// Versioned parameter dump; round-trips exactly through JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub updates_done: usize,
    pub limits: RolloutLimits,
    pub grammar: bool,
    pub vocab: Vocab,
    pub policy: Net,
    pub value: Net,
    pub reference: Net,
    pub adam_policy: Adam,
    pub adam_value: Adam,
    pub rng_state: u64,
}

impl Checkpoint {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), TrainError> {
        std::fs::write(path, serde_json::to_string(self).expect("checkpoint serializes"))?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Checkpoint, TrainError> {
        let data = std::fs::read_to_string(path)?;
        let mut ckpt: Checkpoint = serde_json::from_str(&data)
            .map_err(|e| TrainError::MalformedCheckpoint(e.to_string()))?;
        if ckpt.version != CHECKPOINT_FORMAT_VERSION {
            return Err(TrainError::CheckpointVersion {
                found: ckpt.version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        ckpt.vocab.rebuild_map();
        Ok(ckpt)
    }
}

pub struct TrainOutcome {
    pub records: Vec<UpdateRecord>,
    pub checkpoint: Checkpoint,
}

/// Exact-match score of an episode against its gold answers, gated the
/// same way as the answer reward.
pub fn episode_em(episode: &Episode, item: &QuestionItem) -> f64 {
    if !episode.breakdown.format_valid {
        return 0.0;
    }
    match episode.answer_text() {
        Some(answer) => best_over_golds(&answer, &item.answers, exact_match).unwrap_or(0.0),
        None => 0.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub em: f64,
    pub f1: f64,
    pub mean_response_len: f64,
    pub mean_search_count: f64,
    pub mean_total_gain: f64,
}

/// Greedy (or sampled) rollouts over a question set, aggregated.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    policy: &Net,
    value: &Net,
    env: &SearchEnv,
    space: &ActionSpace,
    items: &[QuestionItem],
    reward_cfg: &RewardConfig,
    opts: &SampleOptions,
    rng: &mut Rng,
) -> Result<EvalReport, TrainError> {
    let mut em = 0.0;
    let mut f1 = 0.0;
    let mut len = 0.0;
    let mut searches = 0.0;
    let mut gain = 0.0;
    for item in items {
        let ep = rollout(
            policy,
            value,
            env,
            space,
            &item.question,
            &item.gold(),
            reward_cfg,
            opts,
            rng,
        )?;
        em += episode_em(&ep, item);
        f1 += ep.breakdown.r_answer;
        len += ep.response_len() as f64;
        searches += ep.retrieval_calls as f64;
        gain += ep.breakdown.total_gain();
    }
    let n = items.len().max(1) as f64;
    Ok(EvalReport {
        episodes: items.len(),
        em: em / n,
        f1: f1 / n,
        mean_response_len: len / n,
        mean_search_count: searches / n,
        mean_total_gain: gain / n,
    })
}

/// Reference-policy log-probabilities for every unmasked position.
fn reference_logps(episode: &Episode, reference: &Net, space: &ActionSpace) -> Vec<f64> {
    episode
        .steps
        .iter()
        .enumerate()
        .map(|(pos, step)| {
            if step.injected {
                return 0.0;
            }
            let ctx = episode.context(pos, &reference.cfg);
            let legal = match step.state {
                Some(state) => space.legal(state),
                None => space.legal(crate::rl::rollout::SlotState::Free),
            };
            let logits = reference.forward(&ctx).out;
            masked_log_softmax(&logits, &legal)[step.token as usize]
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Run (or resume) training. `on_update` sees each record as it is
/// produced; the returned checkpoint reflects the final state.
#[allow(clippy::too_many_arguments)]
pub fn train(
    model: &TfIdfModel,
    corpus: &Corpus,
    train_items: &[QuestionItem],
    probe_items: &[QuestionItem],
    vocab: Vocab,
    settings: &TrainSettings,
    resume: Option<Checkpoint>,
    on_update: &mut dyn FnMut(&UpdateRecord),
) -> Result<TrainOutcome, TrainError> {
    if train_items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let ppo = settings.ppo;
    let env = SearchEnv::new(model, corpus, settings.reward.retrieve_k);
    let space = ActionSpace::new(vocab.clone(), settings.limits, settings.grammar);
    let sample_opts = SampleOptions {
        temperature: ppo.temperature,
        top_p: ppo.top_p,
    };
    let greedy = SampleOptions {
        temperature: 0.0,
        top_p: 1.0,
    };

    let (mut rng, mut policy, mut value, reference, mut adam_p, mut adam_v, start_update) =
        match resume {
            Some(ckpt) => (
                Rng::restore(ckpt.rng_state),
                ckpt.policy,
                ckpt.value,
                ckpt.reference,
                ckpt.adam_policy,
                ckpt.adam_value,
                ckpt.updates_done,
            ),
            None => {
                let mut rng = Rng::new(ppo.seed);
                let policy = Net::init(settings.policy_net_config(vocab.len()), &mut rng);
                let value = Net::init(settings.value_net_config(vocab.len()), &mut rng);
                let reference = policy.clone();
                let np = policy.params.len();
                let nv = value.params.len();
                (
                    rng,
                    policy,
                    value,
                    reference,
                    Adam::new(ppo.policy_lr, np),
                    Adam::new(ppo.value_lr, nv),
                    0,
                )
            }
        };

    let mut records: Vec<UpdateRecord> = Vec::new();
    let mut last_probe = (0.0, 0.0);
    let probe_slice = &probe_items[..probe_items.len().min(settings.probe_size)];

    for update in start_update..ppo.max_updates {
        // Rollout phase under the frozen snapshot (policy as of now).
        // Questions are drawn with replacement and rolled out several
        // times each; the repeats give the value baseline a sharp
        // per-question estimate.
        let mut items: Vec<TrainItem> = Vec::with_capacity(ppo.total_batch);
        let repeats = ppo.rollouts_per_question.max(1);
        let mut question_draws: Vec<usize> = Vec::new();
        for slot in 0..ppo.total_batch {
            if slot % repeats == 0 {
                question_draws.push(rng.below(train_items.len()));
            }
        }
        for slot in 0..ppo.total_batch {
            let qi = &train_items[question_draws[slot / repeats]];
            let episode = rollout(
                &policy,
                &value,
                &env,
                &space,
                &qi.question,
                &qi.gold(),
                &settings.reward,
                &sample_opts,
                &mut rng,
            )?;
            let mask = episode.mask();
            let logp_ref = reference_logps(&episode, &reference, &space);
            let shaped = kl_shaped_rewards(
                &episode.breakdown.token_rewards,
                &episode.logps_old(),
                &logp_ref,
                ppo.kl_beta,
                &mask,
            );
            let (advantages, returns) =
                compute_gae(&shaped, &episode.values(), ppo.discount, ppo.gae_lambda, &mask);
            items.push(TrainItem {
                episode,
                advantages,
                returns,
            });
        }

        if ppo.whiten_advantages {
            whiten(&mut items);
        }

        // Gradient phase: one step per mini-batch, micro-batch accumulation.
        let mut policy_losses = Vec::new();
        let mut value_losses = Vec::new();
        for mini in items.chunks(ppo.mini_batch) {
            let (pl, pg) = accumulate(mini, ppo.micro_batch, |chunk| {
                steppo_loss(chunk, &policy, &space, ppo.clip_epsilon, ppo.entropy_coef)
            })?;
            adam_p.step(&mut policy.params, &pg);
            policy_losses.push(pl);

            let (vl, vg) = accumulate(mini, ppo.micro_batch, |chunk| value_loss(chunk, &value))?;
            adam_v.step(&mut value.params, &vg);
            value_losses.push(vl);
        }

        // Probe on held-out questions with greedy decoding.
        let update_num = update + 1;
        if !probe_slice.is_empty()
            && (update_num % settings.probe_every.max(1) == 0 || update == start_update)
        {
            let report = evaluate(
                &policy,
                &value,
                &env,
                &space,
                probe_slice,
                &settings.reward,
                &greedy,
                &mut rng,
            )?;
            last_probe = (report.em, report.f1);
        }

        let n = items.len();
        let episodes = items.iter().map(|it| &it.episode);
        let rounds: usize = episodes.clone().map(|e| e.breakdown.steps.len()).sum();
        let record = UpdateRecord {
            update: update_num,
            policy_loss: mean(policy_losses.iter().copied(), policy_losses.len()),
            value_loss: mean(value_losses.iter().copied(), value_losses.len()),
            mean_r_answer: mean(episodes.clone().map(|e| e.breakdown.r_answer), n),
            mean_r_key: mean(episodes.clone().map(|e| e.breakdown.r_key), n),
            mean_r_overall: mean(episodes.clone().map(|e| e.breakdown.r_overall), n),
            mean_gain: mean(
                episodes
                    .clone()
                    .flat_map(|e| e.breakdown.steps.iter().map(|s| s.gain)),
                rounds,
            ),
            mean_penalty: mean(
                episodes
                    .clone()
                    .flat_map(|e| e.breakdown.steps.iter().map(|s| s.penalty)),
                rounds,
            ),
            mean_step_reward: mean(
                episodes
                    .clone()
                    .flat_map(|e| e.breakdown.steps.iter().map(|s| s.r_step)),
                rounds,
            ),
            mean_response_len: mean(episodes.clone().map(|e| e.response_len() as f64), n),
            mean_search_count: mean(episodes.clone().map(|e| e.retrieval_calls as f64), n),
            format_valid_rate: mean(
                episodes
                    .clone()
                    .map(|e| if e.breakdown.format_valid { 1.0 } else { 0.0 }),
                n,
            ),
            probe_em: last_probe.0,
            probe_f1: last_probe.1,
        };
        on_update(&record);
        records.push(record);
    }

    let checkpoint = Checkpoint {
        version: CHECKPOINT_FORMAT_VERSION,
        updates_done: ppo.max_updates.max(start_update),
        limits: settings.limits,
        grammar: settings.grammar,
        vocab,
        policy,
        value,
        reference,
        adam_policy: adam_p,
        adam_value: adam_v,
        rng_state: rng.state(),
    };
    Ok(TrainOutcome {
        records,
        checkpoint,
    })
}

fn whiten(items: &mut [TrainItem]) {
    let mut vals: Vec<f64> = Vec::new();
    for it in items.iter() {
        for (pos, step) in it.episode.steps.iter().enumerate() {
            if !step.injected {
                vals.push(it.advantages[pos]);
            }
        }
    }
    if vals.len() < 2 {
        return;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for it in items.iter_mut() {
        let injected: Vec<bool> = it.episode.steps.iter().map(|s| s.injected).collect();
        for (pos, adv) in it.advantages.iter_mut().enumerate() {
            if !injected[pos] {
                *adv = (*adv - mean) / std;
            }
        }
    }
}

/// Micro-batch gradient accumulation: combine per-chunk token-mean losses
/// and gradients into the mini-batch token mean.
fn accumulate<F>(
    mini: &[TrainItem],
    micro_batch: usize,
    mut f: F,
) -> Result<(f64, Vec<f64>), TrainError>
where
    F: FnMut(&[TrainItem]) -> Result<(f64, Vec<f64>), LossError>,
{
    let counts: Vec<usize> = mini
        .chunks(micro_batch)
        .map(|chunk| {
            chunk
                .iter()
                .map(|it| it.episode.steps.iter().filter(|s| !s.injected).count())
                .sum()
        })
        .collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(TrainError::Loss(LossError::EmptyMask));
    }
    let mut loss = 0.0;
    let mut grads: Option<Vec<f64>> = None;
    for (chunk, &count) in mini.chunks(micro_batch).zip(&counts) {
        if count == 0 {
            continue;
        }
        let w = count as f64 / total as f64;
        let (l, g) = f(chunk)?;
        loss += w * l;
        match grads.as_mut() {
            None => {
                let mut g = g;
                for x in g.iter_mut() {
                    *x *= w;
                }
                grads = Some(g);
            }
            Some(acc) => {
                for (a, x) in acc.iter_mut().zip(&g) {
                    *a += w * x;
                }
            }
        }
    }
    Ok((loss, grads.expect("at least one non-empty chunk")))
}
