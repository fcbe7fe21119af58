//! TF-IDF vectorization, cosine similarity, and top-k retrieval.
//!
//! This is both the simulated search engine behind the rollout loop and
//! the similarity backend for information-gain rewards. The weighting is
//! raw term frequency times smoothed idf:
//!
//! ```text
//! idf(t) = ln((1 + D) / (1 + df(t))) + 1
//! ```
//!
//! and similarity is the cosine of the raw weight vectors. Everything here
//! is a pure function of (corpus, config): the analyzer lowercases and
//! splits on non-alphanumeric runs, vocabulary indices follow first
//! occurrence, and retrieval ties break by ascending document id, so a
//! rebuilt model and a re-run query are bit-identical.

use crate::corpus::Corpus;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TfIdfError {
    #[error("cannot build a TF-IDF model over an empty corpus")]
    EmptyCorpus,
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index file version {found} unsupported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("index file does not match corpus: {0}")]
    CorpusMismatch(String),
    #[error("malformed index file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Analyzer and retrieval knobs. `drop_zero_scores = false` (the default)
/// pads retrieval results with zero-score documents so a query always
/// returns k documents when the corpus allows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfIdfConfig {
    pub drop_zero_scores: bool,
}

impl Default for TfIdfConfig {
    fn default() -> Self {
        TfIdfConfig {
            drop_zero_scores: false,
        }
    }
}

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn analyze(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sparse term-weight vector; entries sorted by ascending term index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_sorted(entries: Vec<(u32, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseVector { entries }
    }

    pub fn empty() -> Self {
        SparseVector { entries: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Dot product, accumulated in ascending term-index order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ti, wi) = self.entries[i];
            let (tj, wj) = other.entries[j];
            match ti.cmp(&tj) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wi * wj;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Cosine similarity in [0, 1] for non-negative weights; 0 when either
/// vector is all-zero.
pub fn cosine_sim(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    a.dot(b) / (a.norm() * b.norm())
}

/// Ranked retrieval output: scores non-increasing, ties by ascending id.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub ranked: Vec<(String, f64)>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<String> {
        self.ranked.iter().map(|(id, _)| id.clone()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TfIdfModel {
    terms: Vec<String>,
    vocab: HashMap<String, u32>,
    idf: Vec<f64>,
    doc_vectors: Vec<SparseVector>,
    doc_ids: Vec<String>,
    config: TfIdfConfig,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    config: TfIdfConfig,
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_vectors: Vec<Vec<(u32, f64)>>,
}

impl TfIdfModel {
    /// Build the model over a non-empty corpus.
    pub fn build(corpus: &Corpus, config: TfIdfConfig) -> Result<Self, TfIdfError> {
        if corpus.is_empty() {
            return Err(TfIdfError::EmptyCorpus);
        }
        let tokenized: Vec<Vec<String>> = corpus.iter().map(|d| analyze(&d.text)).collect();

        // Vocabulary in first-occurrence order keeps the build deterministic.
        let mut terms: Vec<String> = Vec::new();
        let mut vocab: HashMap<String, u32> = HashMap::new();
        for tokens in &tokenized {
            for tok in tokens {
                if !vocab.contains_key(tok) {
                    vocab.insert(tok.clone(), terms.len() as u32);
                    terms.push(tok.clone());
                }
            }
        }

        let mut df = vec![0usize; terms.len()];
        for tokens in &tokenized {
            let mut seen = vec![false; terms.len()];
            for tok in tokens {
                let idx = vocab[tok.as_str()] as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    df[idx] += 1;
                }
            }
        }
        let d = corpus.len() as f64;
        let idf: Vec<f64> = df
            .iter()
            .map(|&dfi| ((1.0 + d) / (1.0 + dfi as f64)).ln() + 1.0)
            .collect();

        let mut model = TfIdfModel {
            terms,
            vocab,
            idf,
            doc_vectors: Vec::new(),
            doc_ids: corpus.iter().map(|doc| doc.id.clone()).collect(),
            config,
        };
        model.doc_vectors = tokenized.iter().map(|t| model.weigh(t)).collect();
        Ok(model)
    }

    fn weigh(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for tok in tokens {
            if let Some(&idx) = self.vocab.get(tok.as_str()) {
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(idx, tf)| (idx, tf * self.idf[idx as usize]))
            .collect();
        entries.sort_by_key(|&(idx, _)| idx);
        SparseVector::from_sorted(entries)
    }

    /// Raw tf-idf vector of arbitrary text; unknown terms are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.weigh(&analyze(text))
    }

    pub fn doc_vector(&self, index: usize) -> &SparseVector {
        &self.doc_vectors[index]
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn term_index(&self, term: &str) -> Option<u32> {
        self.vocab.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i as usize])
    }

    pub fn config(&self) -> TfIdfConfig {
        self.config
    }

    /// Top-k documents by cosine similarity, score-descending, ties broken
    /// by ascending document id.
    pub fn retrieve(
        &self,
        corpus: &Corpus,
        query: &str,
        k: usize,
    ) -> Result<RetrievalResult, TfIdfError> {
        if k == 0 {
            return Err(TfIdfError::ZeroK);
        }
        if corpus.is_empty() {
            return Err(TfIdfError::EmptyCorpus);
        }
        if analyze(query).is_empty() {
            return Err(TfIdfError::EmptyQuery);
        }
        let qv = self.vectorize(query);
        let mut scored: Vec<(usize, f64)> = (0..corpus.len())
            .map(|i| (i, cosine_sim(&qv, &self.doc_vectors[i])))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| corpus.doc(a.0).id.cmp(&corpus.doc(b.0).id))
        });
        let ranked = scored
            .into_iter()
            .filter(|&(_, s)| !self.config.drop_zero_scores || s > 0.0)
            .take(k)
            .map(|(i, s)| (corpus.doc(i).id.clone(), s))
            .collect();
        Ok(RetrievalResult {
            query: query.to_string(),
            ranked,
        })
    }

    /// Versioned structured-text dump; round-trips exactly.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), TfIdfError> {
        let file = IndexFile {
            version: INDEX_FORMAT_VERSION,
            config: self.config,
            terms: self.terms.clone(),
            idf: self.idf.clone(),
            doc_ids: self.doc_ids.clone(),
            doc_vectors: self.doc_vectors.iter().map(|v| v.entries.clone()).collect(),
        };
        let json = serde_json::to_string(&file).expect("index serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, TfIdfError> {
        let data = std::fs::read_to_string(path)?;
        let file: IndexFile =
            serde_json::from_str(&data).map_err(|e| TfIdfError::Malformed(e.to_string()))?;
        if file.version != INDEX_FORMAT_VERSION {
            return Err(TfIdfError::Version {
                found: file.version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        if file.idf.len() != file.terms.len() {
            return Err(TfIdfError::Malformed(
                "idf length does not match vocabulary".into(),
            ));
        }
        if file.doc_vectors.len() != file.doc_ids.len() {
            return Err(TfIdfError::Malformed(
                "vector count does not match document ids".into(),
            ));
        }
        let vocab = file
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(TfIdfModel {
            terms: file.terms,
            vocab,
            idf: file.idf,
            doc_ids: file.doc_ids,
            doc_vectors: file
                .doc_vectors
                .into_iter()
                .map(SparseVector::from_sorted)
                .collect(),
            config: file.config,
        })
    }

    /// Check that this model was built over the same document list.
    pub fn verify_corpus(&self, corpus: &Corpus) -> Result<(), TfIdfError> {
        if self.doc_ids.len() != corpus.len() {
            return Err(TfIdfError::CorpusMismatch(format!(
                "{} indexed documents vs {} in corpus",
                self.doc_ids.len(),
                corpus.len()
            )));
        }
        for (i, doc) in corpus.iter().enumerate() {
            if self.doc_ids[i] != doc.id {
                return Err(TfIdfError::CorpusMismatch(format!(
                    "document {i} is `{}` in index but `{}` in corpus",
                    self.doc_ids[i], doc.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(texts: &[(&str, &str)]) -> Corpus {
        Corpus::from_documents(
            texts
                .iter()
                .map(|(id, text)| Document {
                    id: id.to_string(),
                    title: id.to_string(),
                    text: text.to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn idf_term_in_all_docs_is_one() {
        let c = corpus(&[("d1", "apple pie"), ("d2", "apple tart"), ("d3", "apple cake")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        assert_eq!(m.idf("apple").unwrap(), 1.0);
    }

    #[test]
    fn idf_hand_computed_two_docs() {
        let c = corpus(&[("d1", "a b"), ("d2", "a c")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        assert_eq!(m.idf("a").unwrap(), (3.0f64 / 3.0).ln() + 1.0);
        assert_eq!(m.idf("b").unwrap(), (3.0f64 / 2.0).ln() + 1.0);
        assert_eq!(m.idf("c").unwrap(), (3.0f64 / 2.0).ln() + 1.0);
    }

    #[test]
    fn vectorize_reproduces_stored_doc_vector() {
        let c = corpus(&[("d1", "red red fox"), ("d2", "blue fox jumps")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        for (i, doc) in c.iter().enumerate() {
            assert_eq!(&m.vectorize(&doc.text), m.doc_vector(i));
        }
    }

    #[test]
    fn build_is_deterministic() {
        let c = corpus(&[("d1", "x y z"), ("d2", "y z w"), ("d3", "unique words here")]);
        let a = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        let b = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        assert_eq!(a.terms, b.terms);
        assert_eq!(a.idf, b.idf);
        assert_eq!(a.doc_vectors, b.doc_vectors);
    }

    #[test]
    fn empty_corpus_rejected() {
        let c = Corpus::from_documents(vec![]).unwrap();
        assert!(matches!(
            TfIdfModel::build(&c, TfIdfConfig::default()),
            Err(TfIdfError::EmptyCorpus)
        ));
    }

    #[test]
    fn cosine_identity_and_orthogonal() {
        let v = SparseVector::from_sorted(vec![(0, 1.0), (2, 3.0)]);
        let w = SparseVector::from_sorted(vec![(1, 2.0), (3, 5.0)]);
        assert!((cosine_sim(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_sim(&v, &w), 0.0);
        assert_eq!(cosine_sim(&v, &SparseVector::empty()), 0.0);
    }

    #[test]
    fn cosine_hand_computed_half() {
        // (1,1,0) . (1,0,1) = 1, norms sqrt(2) each.
        let v = SparseVector::from_sorted(vec![(0, 1.0), (1, 1.0)]);
        let w = SparseVector::from_sorted(vec![(0, 1.0), (2, 1.0)]);
        assert!((cosine_sim(&v, &w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_symmetric_bit_exact() {
        let mut rng = crate::rng::Rng::new(99);
        for _ in 0..200 {
            let mut mk = |rng: &mut crate::rng::Rng| {
                let mut entries = Vec::new();
                for idx in 0..12u32 {
                    if rng.next_f64() < 0.4 {
                        entries.push((idx, rng.range_f64(0.1, 5.0)));
                    }
                }
                SparseVector::from_sorted(entries)
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            assert_eq!(cosine_sim(&a, &b).to_bits(), cosine_sim(&b, &a).to_bits());
        }
    }

    #[test]
    fn retrieve_self_text_ranks_first() {
        let c = corpus(&[
            ("d1", "red fox jumps over fence"),
            ("d2", "blue whale swims deep"),
            ("d3", "green turtle naps"),
        ]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        let r = m.retrieve(&c, "red fox jumps over fence", 2).unwrap();
        assert_eq!(r.ranked[0].0, "d1");
        assert!((r.ranked[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieve_ranks_by_overlap() {
        let c = corpus(&[
            ("a", "alpha shares one"),
            ("b", "alpha beta shares two terms"),
            ("c", "nothing relevant here"),
        ]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        let r = m.retrieve(&c, "alpha beta", 3).unwrap();
        assert_eq!(r.ranked[0].0, "b");
        assert_eq!(r.ranked[1].0, "a");
    }

    #[test]
    fn retrieve_pads_with_zero_scores_by_default() {
        let c = corpus(&[("a", "one"), ("b", "two"), ("c", "three")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        let r = m.retrieve(&c, "one", 3).unwrap();
        assert_eq!(r.ranked.len(), 3);
        assert_eq!(r.ranked[0].0, "a");
        // Zero-score tail ordered by ascending id.
        assert_eq!(r.ranked[1].0, "b");
        assert_eq!(r.ranked[2].0, "c");
        assert_eq!(r.ranked[1].1, 0.0);
    }

    #[test]
    fn retrieve_can_drop_zero_scores() {
        let c = corpus(&[("a", "one"), ("b", "two")]);
        let cfg = TfIdfConfig {
            drop_zero_scores: true,
        };
        let m = TfIdfModel::build(&c, cfg).unwrap();
        let r = m.retrieve(&c, "one", 2).unwrap();
        assert_eq!(r.ranked.len(), 1);
    }

    #[test]
    fn retrieve_rejects_blank_query() {
        let c = corpus(&[("a", "one")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        assert!(matches!(
            m.retrieve(&c, "   ", 1),
            Err(TfIdfError::EmptyQuery)
        ));
        assert!(matches!(m.retrieve(&c, "one", 0), Err(TfIdfError::ZeroK)));
    }

    #[test]
    fn scores_bounded_unit_interval() {
        let c = corpus(&[
            ("a", "w1 w2 w3 w1"),
            ("b", "w2 w2 w4"),
            ("c", "w5 w6"),
            ("d", "w1 w6 w6 w6"),
        ]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        for q in ["w1", "w2 w5", "w6 w6 w1 w4", "w1 w2 w3 w4 w5 w6"] {
            for (_, s) in m.retrieve(&c, q, 4).unwrap().ranked {
                assert!((0.0..=1.0 + 1e-15).contains(&s), "score {s} out of range");
            }
        }
    }

    #[test]
    fn save_load_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        let c = corpus(&[("a", "one two three"), ("b", "two three four")]);
        let m = TfIdfModel::build(&c, TfIdfConfig::default()).unwrap();
        m.save(&path).unwrap();
        let loaded = TfIdfModel::load(&path).unwrap();
        assert_eq!(m.terms, loaded.terms);
        assert_eq!(m.idf, loaded.idf);
        assert_eq!(m.doc_vectors, loaded.doc_vectors);
        loaded.verify_corpus(&c).unwrap();

        // Re-saving the loaded model is byte-identical.
        let path2 = dir.path().join("index2.json");
        loaded.save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}
