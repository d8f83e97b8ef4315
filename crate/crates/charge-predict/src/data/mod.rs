//! Corpus ingestion, encoding, and synthetic data generation.
//!
//! Loads cases and law-provision JSONL, builds a vocabulary from the training
//! split, encodes samples against a fixed label index, and generates
//! synthetic corpora with a skewed label-count distribution. Loading and
//! synthesis are single-threaded; the resulting datasets are immutable.

pub mod jsonl;
pub mod synth;
pub mod tokenize;
pub mod types;
pub mod vocab;

pub use jsonl::{
    encode_dataset, encode_knowledge, read_cases_jsonl, read_provisions_jsonl, write_cases_jsonl,
    write_provisions_jsonl, LabelIndex, LineError, Parsed, RawCase, RawProvision,
};
pub use synth::{
    default_count_mixture, synthesize_corpus, synthesize_threshold_task, SynthConfig,
    SyntheticCorpus, ThresholdTask, ThresholdTaskConfig,
};
pub use tokenize::{Tokenizer, PAD_TOKEN, UNK_TOKEN};
pub use types::{
    count_class, count_class_with, CountTarget, Dataset, KnowledgeBase, Sample, Split,
    DEFAULT_COUNT_CLASSES,
};
pub use vocab::{Vocabulary, PAD_ID, UNK_ID};
