//! JSONL corpus ingestion and emission.
//!
//! Cases come one JSON object per line, `{"fact": "...", "accusation":
//! ["...", ...]}`; provisions as `{"accusation": "...", "provision": "..."}`.
//! Malformed lines are recorded with their line number and skipped; the run
//! continues. An optional label-list text file (one accusation per line)
//! fixes the label index order; otherwise labels are indexed in first-seen
//! order over the input.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::Tokenizer;
use super::types::{Dataset, KnowledgeBase, Sample, Split};
use super::vocab::{Vocabulary, UNK_ID};
use crate::error::{Error, Result};

/// A raw (unencoded) case line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawCase {
    pub fact: String,
    pub accusation: Vec<String>,
}

/// A raw provision line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawProvision {
    pub accusation: String,
    pub provision: String,
}

/// A line that failed to parse or violated an invariant.
#[derive(Debug, Clone)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parse outcome: good records plus the per-line error report.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    Ok(BufReader::new(file).lines())
}

/// Reads a cases JSONL file. Lines with an empty accusation array are
/// rejected with "empty label set" at their line number.
pub fn read_cases_jsonl(path: &Path) -> Result<Parsed<RawCase>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawCase>(&line) {
            Ok(case) if case.accusation.is_empty() => errors.push(LineError {
                line: lineno,
                message: "empty label set".into(),
            }),
            Ok(case) => records.push(case),
            Err(e) => errors.push(LineError {
                line: lineno,
                message: e.to_string(),
            }),
        }
    }
    Ok(Parsed { records, errors })
}

pub fn read_provisions_jsonl(path: &Path) -> Result<Parsed<RawProvision>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawProvision>(&line) {
            Ok(p) => records.push(p),
            Err(e) => errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(Parsed { records, errors })
}

pub fn write_cases_jsonl(path: &Path, cases: &[RawCase]) -> Result<()> {
    write_jsonl(path, cases)
}

pub fn write_provisions_jsonl(path: &Path, provisions: &[RawProvision]) -> Result<()> {
    write_jsonl(path, provisions)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)
            .map_err(|e| Error::Data(format!("serialize record: {e}")))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Ordered accusation-name -> index mapping.
#[derive(Debug, Clone)]
pub struct LabelIndex {
    names: Vec<String>,
    by_name: HashMap<String, usize>,
}

impl LabelIndex {
    /// Index order equals first appearance over the given cases.
    pub fn from_first_seen(cases: &[RawCase]) -> Self {
        let mut idx = LabelIndex {
            names: Vec::new(),
            by_name: HashMap::new(),
        };
        for case in cases {
            for name in &case.accusation {
                idx.insert_if_new(name);
            }
        }
        idx
    }

    /// Reads one accusation per line; order in the file is the index order.
    pub fn from_label_file(path: &Path) -> Result<Self> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingArtifact(path.to_path_buf()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut idx = LabelIndex {
            names: Vec::new(),
            by_name: HashMap::new(),
        };
        for line in text.lines() {
            let name = line.trim();
            if name.is_empty() {
                continue;
            }
            if !idx.insert_if_new(name) {
                return Err(Error::Data(format!(
                    "duplicate label {name:?} in {}",
                    path.display()
                )));
            }
        }
        if idx.names.is_empty() {
            return Err(Error::Data(format!("no labels in {}", path.display())));
        }
        Ok(idx)
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut idx = LabelIndex {
            names: Vec::new(),
            by_name: HashMap::new(),
        };
        for name in &names {
            if !idx.insert_if_new(name) {
                return Err(Error::Data(format!("duplicate label {name:?}")));
            }
        }
        Ok(idx)
    }

    fn insert_if_new(&mut self, name: &str) -> bool {
        if self.by_name.contains_key(name) {
            return false;
        }
        self.by_name.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        true
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(|s| s.as_str())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn write_label_file(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Encodes raw cases against a fixed vocabulary and label index.
///
/// An accusation missing from the index is a hard error: on a test split it
/// means the label space does not cover the data.
pub fn encode_dataset(
    cases: &[RawCase],
    labels: &LabelIndex,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
    split: Split,
) -> Result<Dataset> {
    if cases.is_empty() {
        return Err(Error::Data("no usable case records".into()));
    }
    let mut samples = Vec::with_capacity(cases.len());
    for case in cases {
        let mut label_set = BTreeSet::new();
        for name in &case.accusation {
            let idx = labels.get(name).ok_or_else(|| {
                Error::Data(format!("unknown accusation {name:?} in {split:?} split"))
            })?;
            label_set.insert(idx);
        }
        let tokens = vocab.encode(&tokenizer.tokenize(&case.fact));
        samples.push(Sample {
            tokens,
            labels: label_set,
            raw_text: case.fact.clone(),
        });
    }
    Ok(Dataset {
        samples,
        label_names: labels.names().to_vec(),
        split,
    })
}

/// Encodes provisions into the per-label knowledge base. Labels without a
/// provision get a single UNK token and are listed in `missing`.
pub fn encode_knowledge(
    provisions: &[RawProvision],
    labels: &LabelIndex,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
) -> Result<KnowledgeBase> {
    let mut table: Vec<Option<Vec<u32>>> = vec![None; labels.len()];
    for p in provisions {
        let Some(idx) = labels.get(&p.accusation) else {
            // Provision for an accusation outside the label space; ignore.
            continue;
        };
        table[idx] = Some(vocab.encode(&tokenizer.tokenize(&p.provision)));
    }
    let mut missing = Vec::new();
    let provisions = table
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            entry.unwrap_or_else(|| {
                missing.push(i);
                vec![UNK_ID]
            })
        })
        .collect();
    Ok(KnowledgeBase {
        provisions,
        missing,
    })
}

/// Convenience writer used by reports.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn loads_two_line_corpus() {
        let dir = tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "cases.jsonl",
            r#"{"fact": "took a phone", "accusation": ["theft"]}
{"fact": "took a phone by force", "accusation": ["theft", "robbery"]}
"#,
        );
        let parsed = read_cases_jsonl(&p).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert!(parsed.errors.is_empty());
        let labels = LabelIndex::from_first_seen(&parsed.records);
        assert_eq!(labels.len(), 2);
        assert_eq!(labels.get("theft"), Some(0));
        assert_eq!(labels.get("robbery"), Some(1));
        let tok = Tokenizer::default();
        let streams: Vec<Vec<String>> = parsed
            .records
            .iter()
            .map(|c| tok.tokenize(&c.fact))
            .collect();
        let vocab = Vocabulary::build(streams.iter().map(|s| s.as_slice()));
        let ds = encode_dataset(&parsed.records, &labels, &vocab, &tok, Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_labels(), 2);
        assert!(ds.samples[1].labels.contains(&1));
    }

    #[test]
    fn empty_label_set_is_recorded_with_line_number() {
        let dir = tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "cases.jsonl",
            r#"{"fact": "ok", "accusation": ["theft"]}
{"fact": "bad", "accusation": []}
"#,
        );
        let parsed = read_cases_jsonl(&p).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
        assert!(parsed.errors[0].message.contains("empty label set"));
    }

    #[test]
    fn malformed_line_recorded_and_run_continues() {
        let dir = tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "cases.jsonl",
            "{\"fact\": \"ok\", \"accusation\": [\"a\"]}\nnot json at all\n{\"fact\": \"ok2\", \"accusation\": [\"b\"]}\n",
        );
        let parsed = read_cases_jsonl(&p).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
    }

    #[test]
    fn unknown_accusation_in_test_split_errors() {
        let cases = vec![RawCase {
            fact: "x".into(),
            accusation: vec!["unheard-of".into()],
        }];
        let labels = LabelIndex::from_names(vec!["theft".into()]).unwrap();
        let tok = Tokenizer::default();
        let vocab = Vocabulary::build(std::iter::empty::<&[String]>());
        let err = encode_dataset(&cases, &labels, &vocab, &tok, Split::Test);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn round_trip_reproduces_records() {
        let dir = tempdir().unwrap();
        let cases = vec![
            RawCase {
                fact: "a b c".into(),
                accusation: vec!["x".into()],
            },
            RawCase {
                fact: "d e".into(),
                accusation: vec!["x".into(), "y".into()],
            },
        ];
        let p = dir.path().join("out.jsonl");
        write_cases_jsonl(&p, &cases).unwrap();
        let back = read_cases_jsonl(&p).unwrap();
        assert!(back.errors.is_empty());
        assert_eq!(back.records, cases);
    }

    #[test]
    fn missing_provision_is_unk_filled_and_flagged() {
        let labels = LabelIndex::from_names(vec!["theft".into(), "arson".into()]).unwrap();
        let provisions = vec![RawProvision {
            accusation: "theft".into(),
            provision: "whoever steals".into(),
        }];
        let tok = Tokenizer::default();
        let streams = [tok.tokenize("whoever steals")];
        let vocab = Vocabulary::build(streams.iter().map(|s| s.as_slice()));
        let kb = encode_knowledge(&provisions, &labels, &vocab, &tok).unwrap();
        assert_eq!(kb.num_labels(), 2);
        assert_eq!(kb.missing, vec![1]);
        assert_eq!(kb.provisions[1], vec![UNK_ID]);
    }

    #[test]
    fn label_file_round_trip() {
        let dir = tempdir().unwrap();
        let labels = LabelIndex::from_names(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let p = dir.path().join("labels.txt");
        labels.write_label_file(&p).unwrap();
        let back = LabelIndex::from_label_file(&p).unwrap();
        assert_eq!(back.names(), labels.names());
    }

    #[test]
    fn missing_file_is_missing_artifact() {
        let err = read_cases_jsonl(Path::new("/nonexistent/cases.jsonl"));
        assert!(matches!(err, Err(Error::MissingArtifact(_))));
    }
}
