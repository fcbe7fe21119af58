//! Operator CLI: generate worlds, build indexes, score trajectory logs,
//! train policies, and evaluate checkpoints.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data error.

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use steprl::config::RunConfig;
use steprl::corpus::Corpus;
use steprl::metrics::{best_over_golds, exact_match};
use steprl::microworld::{self, generate_world, QuestionItem};
use steprl::rewards::{score_trajectory, RewardConfig, RewardMode};
use steprl::rl::train::{episode_em, train, Checkpoint, TrainSettings, UpdateRecord};
use steprl::rl::{ActionSpace, Net, SampleOptions, SearchEnv, Vocab};
use steprl::rng::Rng;
use steprl::tfidf::{TfIdfConfig, TfIdfModel};
use steprl::trajectory;

#[derive(Parser)]
#[command(
    name = "steprl",
    version,
    about = "Step-wise RL for search-augmented QA on a deterministic toy stack"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-hop world (corpus + dataset + manifest).
    GenWorld(GenWorldArgs),
    /// Build and persist a TF-IDF index for a corpus file.
    Index(IndexArgs),
    /// Score a trajectory log against a dataset and corpus.
    Score(ScoreArgs),
    /// Train the policy on a generated world.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the oracle / a random baseline).
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run configuration file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set seed=3 --set hops=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenWorldArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for corpus.jsonl, dataset.jsonl, manifest.json.
    #[arg(long, default_value = "world")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus file (JSON lines with id, title, text).
    #[arg(long)]
    corpus: PathBuf,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
    /// Drop zero-score documents instead of padding retrievals to k.
    #[arg(long, default_value_t = false)]
    drop_zero_scores: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Trajectory log: JSON lines with question_id and raw.
    #[arg(long)]
    log: PathBuf,
    /// Dataset file with gold supervision records.
    #[arg(long)]
    dataset: PathBuf,
    /// Corpus file backing retrieval and golden documents.
    #[arg(long)]
    corpus: PathBuf,
    /// Optional prebuilt index; rebuilt from the corpus when omitted.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Per-episode report output (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gamma_key: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_sub: f64,
    /// Global reward mode: search-keys or sub-answers.
    #[arg(long, default_value = "search-keys")]
    mode: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for logs, curves, checkpoint, and manifest.
    #[arg(long, default_value = "runs/default")]
    out_dir: PathBuf,
    /// Resume from a checkpoint, continuing the update numbering.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long, required_unless_present_any = ["oracle", "random_baseline"])]
    checkpoint: Option<PathBuf>,
    /// Replay the golden-key oracle agent instead of a policy.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    /// Evaluate a freshly initialized (untrained) policy.
    #[arg(long, default_value_t = false)]
    random_baseline: bool,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Evaluate only the first N dataset items.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Seed for the random baseline and sampled decoding.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sampling temperature (0 = greedy).
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Write the evaluated episodes as a trajectory log.
    #[arg(long)]
    dump_episodes: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn usage(err: impl std::fmt::Display) -> CliError {
        CliError::Usage(err.to_string())
    }

    fn data(err: impl std::fmt::Display) -> CliError {
        CliError::Data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenWorld(args) => cmd_gen_world(args),
        Command::Index(args) => cmd_index(args),
        Command::Score(args) => cmd_score(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Load the run config, applying --set overrides onto the TOML table.
fn load_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::usage)?,
        None => String::new(),
    };
    let mut table: toml::Table = toml::from_str(&base).map_err(CliError::usage)?;
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let parsed: toml::Table = toml::from_str(&format!("{key} = {value}"))
            .or_else(|_| toml::from_str(&format!("{key} = \"{value}\"")))
            .map_err(|e| CliError::Usage(format!("cannot parse --set {kv}: {e}")))?;
        for (k, v) in parsed {
            table.insert(k, v);
        }
    }
    let merged = toml::to_string(&table).map_err(CliError::usage)?;
    RunConfig::from_toml(&merged).map_err(CliError::usage)
}

fn cmd_gen_world(args: GenWorldArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let world = generate_world(&cfg.world_config()).map_err(CliError::usage)?;
    let manifest = world.write_dump(&args.out_dir).map_err(CliError::data)?;
    std::fs::write(args.out_dir.join("run_config.toml"), cfg.to_toml()).map_err(CliError::data)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    );
    Ok(())
}

fn cmd_index(args: IndexArgs) -> Result<(), CliError> {
    let corpus = Corpus::from_jsonl_path(&args.corpus).map_err(CliError::usage)?;
    let model = TfIdfModel::build(
        &corpus,
        TfIdfConfig {
            drop_zero_scores: args.drop_zero_scores,
        },
    )
    .map_err(CliError::usage)?;
    model.save(&args.out).map_err(CliError::data)?;
    println!(
        "indexed {} documents, {} terms -> {}",
        corpus.len(),
        model.vocab_size(),
        args.out.display()
    );
    Ok(())
}

#[derive(Deserialize)]
struct LogRecord {
    question_id: String,
    raw: String,
}

#[derive(Serialize)]
struct ScoreSummary {
    episodes: usize,
    mean_em: f64,
    mean_f1: f64,
    mean_r_key: f64,
    mean_r_overall: f64,
    mean_total_gain: f64,
    mean_penalty: f64,
    format_valid_rate: f64,
}

fn load_model(
    corpus: &Corpus,
    index: &Option<PathBuf>,
    drop_zero_scores: bool,
) -> Result<TfIdfModel, CliError> {
    match index {
        Some(path) => {
            let model = TfIdfModel::load(path).map_err(CliError::usage)?;
            model.verify_corpus(corpus).map_err(CliError::data)?;
            Ok(model)
        }
        None => {
            TfIdfModel::build(corpus, TfIdfConfig { drop_zero_scores }).map_err(CliError::usage)
        }
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let corpus = Corpus::from_jsonl_path(&args.corpus).map_err(CliError::usage)?;
    let items = microworld::load_dataset(&args.dataset).map_err(CliError::data)?;
    let model = load_model(&corpus, &args.index, false)?;
    let mode = match args.mode.as_str() {
        "search-keys" => RewardMode::SearchKeys,
        "sub-answers" => RewardMode::SubAnswers,
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode `{other}` (expected search-keys or sub-answers)"
            )))
        }
    };
    let reward_cfg = RewardConfig {
        gamma_key: args.gamma_key,
        gamma_sub: args.gamma_sub,
        mode,
        retrieve_k: args.k,
        ..RewardConfig::default()
    };

    let log_text = std::fs::read_to_string(&args.log).map_err(CliError::usage)?;
    let mut report_lines: Vec<String> = Vec::new();
    let (mut n, mut em, mut f1, mut rkey, mut roverall) = (0usize, 0.0, 0.0, 0.0, 0.0);
    let (mut gain, mut penalty, mut valid) = (0.0, 0.0, 0.0);

    for (i, line) in log_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("log line {}: {e}", i + 1)))?;
        let item = items
            .iter()
            .find(|q| q.question_id == record.question_id)
            .ok_or_else(|| {
                CliError::Data(format!(
                    "episode `{}`: no dataset record with that question_id",
                    record.question_id
                ))
            })?;
        let gold = item.gold();
        let traj = trajectory::parse(&record.raw)
            .map_err(|e| CliError::Data(format!("episode `{}`: {e}", record.question_id)))?;
        let breakdown = score_trajectory(&traj, &gold, &model, &corpus, &reward_cfg)
            .map_err(|e| CliError::Data(format!("episode `{}`: {e}", record.question_id)))?;
        let episode_exact = match (&traj.answer, breakdown.format_valid) {
            (Some(seg), true) => {
                best_over_golds(seg.body.trim(), &gold.answers, exact_match).unwrap_or(0.0)
            }
            _ => 0.0,
        };
        n += 1;
        em += episode_exact;
        f1 += breakdown.r_answer;
        rkey += breakdown.r_key;
        roverall += breakdown.r_overall;
        gain += breakdown.total_gain();
        penalty += breakdown.mean_penalty();
        valid += if breakdown.format_valid { 1.0 } else { 0.0 };
        let mut value = serde_json::to_value(&breakdown).expect("breakdown serializes");
        value["em"] = serde_json::json!(episode_exact);
        report_lines.push(value.to_string());
    }

    let d = n.max(1) as f64;
    let summary = ScoreSummary {
        episodes: n,
        mean_em: em / d,
        mean_f1: f1 / d,
        mean_r_key: rkey / d,
        mean_r_overall: roverall / d,
        mean_total_gain: gain / d,
        mean_penalty: penalty / d,
        format_valid_rate: valid / d,
    };
    if let Some(out) = &args.out {
        let mut text = report_lines.join("\n");
        text.push('\n');
        std::fs::write(out, text).map_err(CliError::data)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    cfg.ppo_config().validate().map_err(CliError::usage)?;
    if cfg.holdout >= cfg.num_questions {
        return Err(CliError::Usage(format!(
            "holdout {} must be smaller than num_questions {}",
            cfg.holdout, cfg.num_questions
        )));
    }
    let world = generate_world(&cfg.world_config()).map_err(CliError::usage)?;
    let model = TfIdfModel::build(&world.corpus, cfg.tfidf_config()).map_err(CliError::usage)?;
    let split = world.questions.len() - cfg.holdout;
    let (train_items, probe_items) = world.questions.split_at(split);
    let vocab = Vocab::new(&world.vocab_words(), &world.render_extras(cfg.retrieve_k));
    let settings: TrainSettings = cfg.train_settings();

    std::fs::create_dir_all(&args.out_dir).map_err(CliError::data)?;
    world
        .write_dump(args.out_dir.join("world"))
        .map_err(CliError::data)?;
    std::fs::write(args.out_dir.join("manifest.toml"), cfg.to_toml()).map_err(CliError::data)?;

    let resume = match &args.resume {
        Some(path) => Some(Checkpoint::load(path).map_err(CliError::usage)?),
        None => None,
    };
    let fresh_run = resume.is_none();

    let log_path = args.out_dir.join("training_log.jsonl");
    let csv_path = args.out_dir.join("curves.csv");
    let mut log_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(CliError::data)?;
    let mut csv_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)
        .map_err(CliError::data)?;
    if fresh_run {
        log_file.set_len(0).map_err(CliError::data)?;
        csv_file.set_len(0).map_err(CliError::data)?;
        writeln!(csv_file, "{}", UpdateRecord::CSV_HEADER).map_err(CliError::data)?;
    }

    let mut on_update = |record: &UpdateRecord| {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(log_file, "{line}").expect("log write");
        writeln!(csv_file, "{}", record.csv_row()).expect("csv write");
        if record.update % 10 == 0 || record.update == 1 {
            eprintln!(
                "update {:>4}  r_answer {:.3}  r_key {:.3}  gain {:.3}  penalty {:.3}  probe_em {:.3}",
                record.update,
                record.mean_r_answer,
                record.mean_r_key,
                record.mean_gain,
                record.mean_penalty,
                record.probe_em
            );
        }
    };
    let outcome = train(
        &model,
        &world.corpus,
        train_items,
        probe_items,
        vocab,
        &settings,
        resume,
        &mut on_update,
    )
    .map_err(CliError::data)?;

    let ckpt_path = args.out_dir.join("checkpoint.json");
    outcome
        .checkpoint
        .save(&ckpt_path)
        .map_err(CliError::data)?;
    let final_em = outcome.records.last().map(|r| r.probe_em).unwrap_or(0.0);
    println!(
        "trained through update {} ({} new); final probe_em {:.3}; checkpoint {}",
        outcome.checkpoint.updates_done,
        outcome.records.len(),
        final_em,
        ckpt_path.display()
    );
    Ok(())
}

fn write_episode_log(path: &Path, episodes: &[(String, String)]) -> Result<(), CliError> {
    let mut out = String::new();
    for (question_id, raw) in episodes {
        out.push_str(&serde_json::json!({ "question_id": question_id, "raw": raw }).to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(CliError::data)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let corpus = Corpus::from_jsonl_path(&args.corpus).map_err(CliError::usage)?;
    let mut items = microworld::load_dataset(&args.dataset).map_err(CliError::data)?;
    if let Some(limit) = args.limit {
        items.truncate(limit);
    }
    let model = load_model(&corpus, &args.index, false)?;
    let env = SearchEnv::new(&model, &corpus, args.k);
    let reward_cfg = RewardConfig {
        retrieve_k: args.k,
        ..RewardConfig::default()
    };

    if args.oracle {
        let (mut em, mut f1, mut gain) = (0.0, 0.0, 0.0);
        let mut episodes = Vec::new();
        for item in &items {
            let (raw, _calls) = microworld::oracle_episode(&env, item).map_err(CliError::data)?;
            let gold = item.gold();
            let traj = trajectory::parse(&raw).map_err(CliError::data)?;
            let breakdown = score_trajectory(&traj, &gold, &model, &corpus, &reward_cfg)
                .map_err(CliError::data)?;
            let answer = traj.answer.as_ref().map(|s| s.body.trim().to_string());
            em += match (answer, breakdown.format_valid) {
                (Some(a), true) => best_over_golds(&a, &gold.answers, exact_match).unwrap_or(0.0),
                _ => 0.0,
            };
            f1 += breakdown.r_answer;
            gain += breakdown.total_gain();
            episodes.push((item.question_id.clone(), raw));
        }
        if let Some(path) = &args.dump_episodes {
            write_episode_log(path, &episodes)?;
        }
        let n = items.len().max(1) as f64;
        println!(
            "{}",
            serde_json::json!({
                "agent": "oracle",
                "episodes": items.len(),
                "em": em / n,
                "f1": f1 / n,
                "mean_total_gain": gain / n,
            })
        );
        return Ok(());
    }

    // Policy-backed evaluation: checkpoint or random baseline.
    let (policy, value, vocab, limits, grammar) = if args.random_baseline {
        let words = vocab_words_from_data(&corpus, &items);
        let extras: Vec<String> = ["Doc", "Title:", "##>"]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=args.k).map(|j| format!("{j}<##")))
            .collect();
        let vocab = Vocab::new(&words, &extras);
        let settings = TrainSettings::default();
        let mut rng = Rng::new(args.seed);
        let policy = Net::init(settings.policy_net_config(vocab.len()), &mut rng);
        let value = Net::init(settings.value_net_config(vocab.len()), &mut rng);
        (policy, value, vocab, settings.limits, settings.grammar)
    } else {
        let path = args.checkpoint.as_ref().expect("clap enforces presence");
        let ckpt = Checkpoint::load(path).map_err(CliError::usage)?;
        (ckpt.policy, ckpt.value, ckpt.vocab, ckpt.limits, ckpt.grammar)
    };

    let space = ActionSpace::new(vocab, limits, grammar);
    let opts = SampleOptions {
        temperature: args.temperature,
        top_p: 1.0,
    };
    let mut rng = Rng::new(args.seed);
    let mut episodes = Vec::new();
    let mut dump: Vec<(String, String)> = Vec::new();
    let (mut em, mut f1) = (0.0, 0.0);
    for item in &items {
        let ep = steprl::rl::rollout(
            &policy,
            &value,
            &env,
            &space,
            &item.question,
            &item.gold(),
            &reward_cfg,
            &opts,
            &mut rng,
        )
        .map_err(CliError::data)?;
        em += episode_em(&ep, item);
        f1 += ep.breakdown.r_answer;
        dump.push((item.question_id.clone(), ep.raw.clone()));
        episodes.push(ep);
    }
    if let Some(path) = &args.dump_episodes {
        write_episode_log(path, &dump)?;
    }
    let n = items.len().max(1) as f64;
    println!(
        "{}",
        serde_json::json!({
            "agent": if args.random_baseline { "random" } else { "checkpoint" },
            "episodes": items.len(),
            "em": em / n,
            "f1": f1 / n,
            "mean_response_len": episodes.iter().map(|e| e.response_len() as f64).sum::<f64>() / n,
            "mean_search_count": episodes.iter().map(|e| e.retrieval_calls as f64).sum::<f64>() / n,
        })
    );
    Ok(())
}

/// Content words observed in the dataset and corpus, in first-occurrence
/// order; used when no checkpoint vocabulary is available.
fn vocab_words_from_data(corpus: &Corpus, items: &[QuestionItem]) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push_tokens = |text: &str, words: &mut Vec<String>| {
        for tok in text.split_whitespace() {
            if seen.insert(tok.to_string()) {
                words.push(tok.to_string());
            }
        }
    };
    for item in items {
        push_tokens(&item.question, &mut words);
        for a in &item.answers {
            push_tokens(a, &mut words);
        }
    }
    for doc in corpus.iter() {
        push_tokens(&doc.text, &mut words);
    }
    words
}
