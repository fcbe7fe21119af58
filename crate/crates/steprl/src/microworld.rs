//! Deterministic synthetic multi-hop QA world.
//!
//! A world is an entity-relation graph with functional relations: for any
//! (subject, relation) there is at most one object. Questions chain h
//! relations from a start entity ("what is the R2 of the R1 of E?"); each
//! hop contributes one golden fact document, two paraphrase search keys,
//! and a sub-answer. The corpus is the chain facts plus distractor facts
//! over the same vocabulary, so TF-IDF retrieval is discriminative but
//! not trivial. Entity surface forms are pronounceable two-syllable
//! pseudo-words, one token each, keeping the policy vocabulary small.

use crate::corpus::{Corpus, CorpusError, Document};
use crate::rewards::{GoldSpec, SubQuestionSpec};
use crate::rl::rollout::SearchEnv;
use crate::rng::Rng;
use crate::tfidf::TfIdfError;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("infeasible world config: {0}")]
    Infeasible(String),
    #[error("dataset record {index}: {msg}")]
    DatasetRecord { index: usize, msg: String },
    #[error("oracle could not read an object for question `{0}` at hop {1}")]
    OracleStuck(String, usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] TfIdfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub num_entities: usize,
    pub num_relations: usize,
    /// Chain depth h (2 or 3).
    pub hops: usize,
    pub num_questions: usize,
    pub num_distractors: usize,
    /// Upper bound on distinct content words the world may introduce.
    pub vocab_bound: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 7,
            num_entities: 150,
            num_relations: 4,
            hops: 2,
            num_questions: 250,
            num_distractors: 100,
            vocab_bound: 400,
        }
    }
}

/// One generated question with its supervision bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub question_id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub subquestions: Vec<SubQuestionSpec>,
}

impl QuestionItem {
    pub fn gold(&self) -> GoldSpec {
        GoldSpec {
            question_id: self.question_id.clone(),
            answers: self.answers.clone(),
            subquestions: self.subquestions.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub config: WorldConfig,
    pub corpus: Corpus,
    pub questions: Vec<QuestionItem>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

const RELATION_POOL: [&str; 12] = [
    "mentor", "patron", "rival", "warden", "herald", "envoy", "keeper", "scribe", "sponsor",
    "tutor", "courier", "steward",
];

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

fn pseudo_word(rng: &mut Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.below(ONSETS.len())]);
        w.push_str(VOWELS[rng.below(VOWELS.len())]);
    }
    w
}

fn fact_text(relation: &str, subject: &str, object: &str) -> String {
    format!("the {relation} of {subject} is {object}")
}

/// Generate the corpus and question set for a config. Same config, same
/// world, bit for bit.
pub fn generate_world(cfg: &WorldConfig) -> Result<World, WorldError> {
    if cfg.hops < 2 || cfg.hops > 3 {
        return Err(WorldError::Infeasible(format!(
            "hops must be 2 or 3, got {}",
            cfg.hops
        )));
    }
    if cfg.num_entities < cfg.hops + 1 {
        return Err(WorldError::Infeasible(format!(
            "{} entities cannot support {}-hop chains",
            cfg.num_entities, cfg.hops
        )));
    }
    if cfg.num_relations < 2 || cfg.num_relations > RELATION_POOL.len() {
        return Err(WorldError::Infeasible(format!(
            "num_relations must be in 2..={}",
            RELATION_POOL.len()
        )));
    }

    let mut rng = Rng::new(cfg.seed);

    // Distinct pronounceable entity tokens.
    let mut entities: Vec<String> = Vec::with_capacity(cfg.num_entities);
    let mut seen: HashSet<String> = RELATION_POOL.iter().map(|s| s.to_string()).collect();
    while entities.len() < cfg.num_entities {
        let syl = if entities.len() < 600 { 2 } else { 3 };
        let w = pseudo_word(&mut rng, syl);
        if seen.insert(w.clone()) {
            entities.push(w);
        }
    }
    let relations: Vec<String> = RELATION_POOL[..cfg.num_relations]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let template_words = 4; // what, is, the, of
    let world_vocab = cfg.num_entities + cfg.num_relations + template_words;
    if world_vocab > cfg.vocab_bound {
        return Err(WorldError::Infeasible(format!(
            "world needs {world_vocab} content words, bound is {}",
            cfg.vocab_bound
        )));
    }

    // World state. Retrieval must be unambiguous: for every queried
    // (subject, relation) pair, the golden fact is the only document
    // containing both tokens. Three rules enforce that:
    //   - each entity keeps at most one incoming relation kind (its
    //     owner), so an object-side mention never shares the relation
    //     word with a golden key aimed at that entity;
    //   - consecutive chain relations differ, so a hop's key never
    //     matches the previous hop's fact;
    //   - no fact may take an already-queried (entity, relation) pair as
    //     its object-side in-edge.
    let mut fact_map: HashMap<(usize, usize), usize> = HashMap::new();
    let mut fact_ids: HashMap<(usize, usize), String> = HashMap::new();
    let mut owner: Vec<Option<usize>> = vec![None; cfg.num_entities];
    let mut queried: HashSet<(usize, usize)> = HashSet::new();
    let mut docs: Vec<Document> = Vec::new();

    // Questions: distinct (start entity, relation chain) tuples.
    let mut used: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut questions: Vec<QuestionItem> = Vec::with_capacity(cfg.num_questions);
    let mut attempts = 0usize;
    let attempt_cap = cfg.num_questions * 400 + 4000;
    while questions.len() < cfg.num_questions {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(WorldError::Infeasible(format!(
                "could not place {} collision-free questions (got {})",
                cfg.num_questions,
                questions.len()
            )));
        }
        let start = rng.below(cfg.num_entities);
        let mut chain: Vec<usize> = Vec::with_capacity(cfg.hops);
        for _ in 0..cfg.hops {
            let mut r = rng.below(cfg.num_relations);
            while chain.last() == Some(&r) {
                r = rng.below(cfg.num_relations);
            }
            chain.push(r);
        }
        if used.contains(&(start, chain.clone())) {
            continue;
        }

        // Validate and stage the whole chain before committing anything.
        let owner_of = |e: usize, owner: &[Option<usize>], staged: &HashMap<usize, usize>| {
            staged.get(&e).copied().or(owner[e])
        };
        let mut staged_facts: Vec<(usize, usize, usize)> = Vec::new();
        let mut staged_owner: HashMap<usize, usize> = HashMap::new();
        let mut cur = start;
        let mut hops: Vec<(usize, usize, usize)> = Vec::new();
        let mut ok = true;
        for &r in &chain {
            // An in-edge to `cur` under r would alias this hop's key.
            if owner_of(cur, &owner, &staged_owner) == Some(r) {
                ok = false;
                break;
            }
            let existing = fact_map.get(&(cur, r)).copied().or_else(|| {
                staged_facts
                    .iter()
                    .find(|f| (f.0, f.1) == (cur, r))
                    .map(|f| f.2)
            });
            let obj = match existing {
                Some(o) => o,
                None => {
                    let mut pick = None;
                    for _ in 0..200 {
                        let o = rng.below(cfg.num_entities);
                        let owned = owner_of(o, &owner, &staged_owner);
                        if o != cur
                            && (owned.is_none() || owned == Some(r))
                            && !queried.contains(&(o, r))
                        {
                            pick = Some(o);
                            break;
                        }
                    }
                    match pick {
                        Some(o) => {
                            staged_facts.push((cur, r, o));
                            staged_owner.insert(o, r);
                            o
                        }
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
            };
            hops.push((cur, r, obj));
            cur = obj;
        }
        if !ok {
            continue;
        }
        // A hop key must not alias another staged fact's object side.
        if hops.iter().any(|&(subj, r, _)| {
            staged_facts
                .iter()
                .any(|&(fs, fr, fo)| fo == subj && fr == r && fs != subj)
        }) {
            continue;
        }

        used.insert((start, chain.clone()));
        for (s, r, o) in staged_facts {
            let id = format!("f{:04}", docs.len());
            docs.push(Document {
                id: id.clone(),
                title: entities[s].clone(),
                text: fact_text(&relations[r], &entities[s], &entities[o]),
            });
            fact_map.insert((s, r), o);
            fact_ids.insert((s, r), id);
            owner[o] = Some(r);
        }
        let mut subquestions = Vec::with_capacity(cfg.hops);
        for &(s, r, o) in &hops {
            queried.insert((s, r));
            let subj = entities[s].clone();
            let rel = relations[r].clone();
            subquestions.push(SubQuestionSpec {
                question: format!("what is the {rel} of {subj}"),
                // Both paraphrase orders; stopword-free so word-level F1
                // cannot be farmed by emitting filler words.
                search_keys: vec![format!("{subj} {rel}"), format!("{rel} {subj}")],
                sub_answer: Some(entities[o].clone()),
                golden_doc_ids: vec![fact_ids[&(s, r)].clone()],
            });
        }
        // "what is the r_h of the r_{h-1} of ... the r_1 of e0"
        let mut phrase = entities[start].clone();
        for &r in &chain {
            phrase = format!("the {} of {phrase}", relations[r]);
        }
        questions.push(QuestionItem {
            question_id: format!("q{:04}", questions.len()),
            question: format!("what is {phrase}"),
            answers: vec![entities[cur].clone()],
            subquestions,
        });
    }

    // Distractors: facts over unused (subject, relation) pairs, subject
    // to the same collision rules.
    let mut placed = 0;
    let mut attempts = 0;
    let pair_space = cfg.num_entities * cfg.num_relations;
    while placed < cfg.num_distractors && attempts < pair_space * 40 {
        attempts += 1;
        let s = rng.below(cfg.num_entities);
        let r = rng.below(cfg.num_relations);
        if fact_map.contains_key(&(s, r)) {
            continue;
        }
        let o = rng.below(cfg.num_entities);
        if o == s || !(owner[o].is_none() || owner[o] == Some(r)) || queried.contains(&(o, r)) {
            continue;
        }
        let id = format!("f{:04}", docs.len());
        docs.push(Document {
            id: id.clone(),
            title: entities[s].clone(),
            text: fact_text(&relations[r], &entities[s], &entities[o]),
        });
        fact_map.insert((s, r), o);
        fact_ids.insert((s, r), id);
        owner[o] = Some(r);
        placed += 1;
    }

    Ok(World {
        config: *cfg,
        corpus: Corpus::from_documents(docs)?,
        questions,
        entities,
        relations,
    })
}

impl World {
    /// Content words the policy may emit: entities, relations, and the
    /// question/fact template words.
    pub fn vocab_words(&self) -> Vec<String> {
        let mut words: Vec<String> = vec![
            "what".to_string(),
            "is".to_string(),
            "the".to_string(),
            "of".to_string(),
        ];
        words.extend(self.relations.iter().cloned());
        words.extend(self.entities.iter().cloned());
        words
    }

    /// Render-only tokens appearing in information segments.
    pub fn render_extras(&self, k: usize) -> Vec<String> {
        let mut extras = vec!["Doc".to_string(), "Title:".to_string(), "##>".to_string()];
        extras.extend((1..=k).map(|j| format!("{j}<##")));
        extras
    }
}

/// The golden-key replay agent: one round per subquestion, querying the
/// first golden key and reading the hop object out of the returned
/// information text. Returns the raw trajectory text and the retrieval
/// call count. Errors if a hop's object cannot be read, which means the
/// golden document was not retrieved.
pub fn oracle_episode(env: &SearchEnv, item: &QuestionItem) -> Result<(String, usize), WorldError> {
    let mut raw = String::new();
    let mut calls = 0;
    let mut answer: Option<String> = None;
    for (hop, sq) in item.subquestions.iter().enumerate() {
        let key = &sq.search_keys[0];
        let terms: Vec<&str> = key.split_whitespace().collect();
        raw.push_str(&format!(
            "<think> {} </think>\n<search> {key} </search>\n",
            sq.question
        ));
        let resp = env.search(key)?;
        calls += 1;
        raw.push_str(&format!("<information> {} </information>\n", resp.body));

        // Fact lines read "the REL of SUBJ is OBJ"; take the first line
        // whose relation and subject slots match the key.
        let (subj, rel) = (terms[0], terms[1]);
        let mut object = None;
        for line in resp.body.lines() {
            let Some(idx) = line.find("##> ") else {
                continue;
            };
            let fact: Vec<&str> = line[idx + 4..].split_whitespace().collect();
            if fact.len() == 6 && fact[1] == rel && fact[3] == subj {
                object = Some(fact[5].to_string());
                break;
            }
        }
        match object {
            Some(obj) => answer = Some(obj),
            None => return Err(WorldError::OracleStuck(item.question_id.clone(), hop)),
        }
    }
    let answer = answer.ok_or_else(|| WorldError::OracleStuck(item.question_id.clone(), 0))?;
    raw.push_str(&format!("<answer> {answer} </answer>"));
    Ok((raw, calls))
}

/// Load a line-delimited dataset of question records.
pub fn load_dataset<P: AsRef<Path>>(path: P) -> Result<Vec<QuestionItem>, WorldError> {
    let data = std::fs::read_to_string(path)?;
    parse_dataset(&data)
}

pub fn parse_dataset(data: &str) -> Result<Vec<QuestionItem>, WorldError> {
    let mut items = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QuestionItem =
            serde_json::from_str(line).map_err(|e| WorldError::DatasetRecord {
                index: i + 1,
                msg: e.to_string(),
            })?;
        item.gold()
            .validate()
            .map_err(|e| WorldError::DatasetRecord {
                index: i + 1,
                msg: e.to_string(),
            })?;
        items.push(item);
    }
    Ok(items)
}

pub fn dataset_to_jsonl(items: &[QuestionItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

pub fn save_dataset<P: AsRef<Path>>(items: &[QuestionItem], path: P) -> Result<(), WorldError> {
    std::fs::write(path, dataset_to_jsonl(items))?;
    Ok(())
}

/// FNV-1a 64-bit content hash, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldManifest {
    pub config: WorldConfig,
    pub num_docs: usize,
    pub num_questions: usize,
    pub corpus_hash: String,
    pub dataset_hash: String,
}

impl World {
    /// Write corpus.jsonl, dataset.jsonl, and manifest.json into a
    /// directory; returns the manifest.
    pub fn write_dump<P: AsRef<Path>>(&self, dir: P) -> Result<WorldManifest, WorldError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let corpus_jsonl = self.corpus.to_jsonl();
        let dataset_jsonl = dataset_to_jsonl(&self.questions);
        let manifest = WorldManifest {
            config: self.config,
            num_docs: self.corpus.len(),
            num_questions: self.questions.len(),
            corpus_hash: content_hash(corpus_jsonl.as_bytes()),
            dataset_hash: content_hash(dataset_jsonl.as_bytes()),
        };
        std::fs::write(dir.join("corpus.jsonl"), corpus_jsonl)?;
        std::fs::write(dir.join("dataset.jsonl"), dataset_jsonl)?;
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tfidf::{TfIdfConfig, TfIdfModel};

    fn small_cfg() -> WorldConfig {
        WorldConfig {
            seed: 11,
            num_entities: 30,
            num_relations: 3,
            hops: 2,
            num_questions: 20,
            num_distractors: 15,
            vocab_bound: 200,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_world(&small_cfg()).unwrap();
        let b = generate_world(&small_cfg()).unwrap();
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(a.questions, b.questions);
    }

    #[test]
    fn two_hop_questions_have_two_golden_docs() {
        let world = generate_world(&small_cfg()).unwrap();
        for q in &world.questions {
            assert_eq!(q.subquestions.len(), 2);
            assert_eq!(q.gold().golden_doc_ids().len(), 2);
            assert_eq!(q.answers.len(), 1);
            for sq in &q.subquestions {
                assert_eq!(sq.search_keys.len(), 2);
                assert!(sq.sub_answer.is_some());
                for id in &sq.golden_doc_ids {
                    assert!(world.corpus.get(id).is_some(), "golden doc {id} resolves");
                }
            }
        }
    }

    #[test]
    fn infeasible_configs_rejected() {
        let mut cfg = small_cfg();
        cfg.num_entities = 2;
        assert!(matches!(
            generate_world(&cfg),
            Err(WorldError::Infeasible(_))
        ));

        let mut cfg = small_cfg();
        cfg.vocab_bound = 10;
        assert!(generate_world(&cfg).is_err());
    }

    #[test]
    fn fact_texts_mention_each_part_once() {
        let world = generate_world(&small_cfg()).unwrap();
        for q in &world.questions {
            for sq in &q.subquestions {
                let doc = world.corpus.get(&sq.golden_doc_ids[0]).unwrap();
                let tokens: Vec<&str> = doc.text.split_whitespace().collect();
                let subj = sq.search_keys[0].split_whitespace().next().unwrap();
                let rel = sq.search_keys[0].split_whitespace().nth(1).unwrap();
                let obj = sq.sub_answer.as_deref().unwrap();
                assert_eq!(tokens.iter().filter(|t| **t == subj).count(), 1);
                assert_eq!(tokens.iter().filter(|t| **t == rel).count(), 1);
                assert_eq!(tokens.iter().filter(|t| **t == obj).count(), 1);
            }
        }
    }

    #[test]
    fn chains_are_functional() {
        let world = generate_world(&small_cfg()).unwrap();
        let mut seen: HashMap<(String, String), String> = HashMap::new();
        for doc in world.corpus.iter() {
            let t: Vec<&str> = doc.text.split_whitespace().collect();
            // "the REL of SUBJ is OBJ"
            let (rel, subj, obj) = (t[1].to_string(), t[3].to_string(), t[5].to_string());
            if let Some(prev) = seen.insert((subj.clone(), rel.clone()), obj.clone()) {
                assert_eq!(prev, obj, "conflicting fact for ({subj}, {rel})");
            }
        }
    }

    #[test]
    fn oracle_solves_every_question() {
        let world = generate_world(&small_cfg()).unwrap();
        let model = TfIdfModel::build(&world.corpus, TfIdfConfig::default()).unwrap();
        let env = SearchEnv::new(&model, &world.corpus, 3);
        for item in &world.questions {
            let (raw, calls) = oracle_episode(&env, item).unwrap();
            assert_eq!(calls, 2);
            let traj = crate::trajectory::parse(&raw).unwrap();
            let em = crate::rewards::answer_reward(&traj, &item.gold());
            assert_eq!(em, 1.0, "oracle failed on {}: {raw}", item.question_id);
        }
    }

    #[test]
    fn dataset_round_trips() {
        let world = generate_world(&small_cfg()).unwrap();
        let jsonl = dataset_to_jsonl(&world.questions);
        let back = parse_dataset(&jsonl).unwrap();
        assert_eq!(back, world.questions);
    }

    #[test]
    fn dataset_schema_errors_name_field() {
        let bad = r#"{"question_id":"q1","question":"x","answers":["a"],"subquestions":[{"question":"s"}]}"#;
        let err = parse_dataset(bad).unwrap_err();
        match err {
            WorldError::DatasetRecord { index, msg } => {
                assert_eq!(index, 1);
                assert!(msg.contains("search_keys"), "message was: {msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dump_hashes_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let world = generate_world(&small_cfg()).unwrap();
        let m1 = world.write_dump(dir.path().join("a")).unwrap();
        let m2 = world.write_dump(dir.path().join("b")).unwrap();
        assert_eq!(m1.corpus_hash, m2.corpus_hash);
        assert_eq!(m1.dataset_hash, m2.dataset_hash);
    }
}
