//! Document storage: the corpus behind retrieval and golden-document
//! similarity.
//!
//! Corpora are ingested from UTF-8 JSON-lines files with one
//! `{id, title, text}` record per line, keep insertion order, and are
//! immutable after construction.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("document id must be non-empty")]
    EmptyId,
    #[error("document `{0}` has empty text")]
    EmptyText(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

/// Ordered, id-indexed document collection.
#[derive(Clone, Debug)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if doc.text.is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus { docs, by_id })
    }

    /// Ingest a line-delimited record stream. Order is preserved; an empty
    /// stream yields an empty (valid) corpus.
    pub fn from_jsonl_reader<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document =
                serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            docs.push(doc);
        }
        Corpus::from_documents(docs)
    }

    pub fn from_jsonl_path<P: AsRef<Path>>(path: P) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        Corpus::from_jsonl_reader(std::io::BufReader::new(file))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&serde_json::to_string(doc).expect("document serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<P: AsRef<Path>>(&self, path: P) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn doc(&self, index: usize) -> &Document {
        &self.docs[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            id: id.to_string(),
            title: id.to_uppercase(),
            text: text.to_string(),
        }
    }

    #[test]
    fn ingest_preserves_order() {
        let jsonl = r#"{"id":"d1","title":"A","text":"alpha"}
{"id":"d2","title":"B","text":"beta"}
{"id":"d3","title":"C","text":"gamma"}"#;
        let corpus = Corpus::from_jsonl_reader(jsonl.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 3);
        let ids: Vec<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["d1", "d2", "d3"]);
        assert_eq!(corpus.get("d2").unwrap().text, "beta");
    }

    #[test]
    fn duplicate_id_names_offender() {
        let jsonl = r#"{"id":"d1","title":"A","text":"alpha"}
{"id":"d1","title":"B","text":"beta"}"#;
        let err = Corpus::from_jsonl_reader(jsonl.as_bytes()).unwrap_err();
        match err {
            CorpusError::DuplicateId(id) => assert_eq!(id, "d1"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let jsonl = "{\"id\":\"d1\",\"title\":\"A\",\"text\":\"alpha\"}\nnot json";
        let err = Corpus::from_jsonl_reader(jsonl.as_bytes()).unwrap_err();
        match err {
            CorpusError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn empty_stream_is_valid() {
        let corpus = Corpus::from_jsonl_reader("".as_bytes()).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus =
            Corpus::from_documents(vec![doc("a", "one two"), doc("b", "three")]).unwrap();
        let back = Corpus::from_jsonl_reader(corpus.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get("a").unwrap(), corpus.get("a").unwrap());
    }

    #[test]
    fn rejects_empty_text() {
        let err = Corpus::from_documents(vec![doc("a", "")]).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText(id) if id == "a"));
    }
}
