//! Tweet ingestion: tokenizing, stemming, keyword pre-filtering,
//! vocabularies, fixed-length encoding, stratified splits and folds.

mod porter;
mod split;
mod tokenize;
mod vocab;

pub use porter::porter_stem;
pub use split::{kfold, kfold_indices, stratified_split, stratified_split_indices};
pub use tokenize::{preprocess, tokenize, URL_TOKEN, USER_TOKEN};
pub use vocab::{Vocabulary, PAD, PAD_ID, RESERVED, UNK, UNK_ID};

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has an empty id")]
    EmptyId(usize),
    #[error("record `{id}` has label {label}; labels must be 0 or 1")]
    BadLabel { id: String, label: u8 },
    #[error("record `{0}` is unlabelled")]
    MissingLabel(String),
    #[error("no trainable vocabulary: corpus is empty or no token reaches min_count")]
    EmptyVocabulary,
    #[error("cannot encode a tweet with zero tokens")]
    EmptyTweet,
    #[error("class {class} has {have} records, needs at least {need}")]
    ClassTooSmall { class: u8, have: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("keyword set is empty")]
    NoKeywords,
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One raw tweet as stored in JSON Lines files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    /// Already-preprocessed tokens; when present they are used instead of
    /// tokenizing and stemming `text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<u8>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            tokens: None,
        }
    }

    /// Stored tokens, or the preprocessed text.
    pub fn tokens(&self) -> Vec<String> {
        match &self.tokens {
            Some(t) => t.clone(),
            None => preprocess(&self.text),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses JSON Lines records; blank lines are skipped.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<TweetRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TweetRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(CorpusError::EmptyId(i + 1));
        }
        if let Some(label) = rec.label {
            if label > 1 {
                return Err(CorpusError::BadLabel { id: rec.id, label });
            }
        }
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TweetRecord>> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    parse_jsonl(std::io::BufReader::new(f))
}

pub fn to_jsonl(records: &[TweetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, records: &[TweetRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(to_jsonl(records).as_bytes())
        .map_err(io_err(path))
}

/// Stemmed keyword set used for pre-filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    stems: BTreeSet<String>,
}

impl KeywordSet {
    pub const DEFAULT: [&'static str; 3] = ["whore", "slut", "rape"];

    pub fn new<I, S>(keywords: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stems: BTreeSet<String> = keywords
            .into_iter()
            .flat_map(|k| preprocess(k.as_ref()))
            .collect();
        if stems.is_empty() {
            return Err(CorpusError::NoKeywords);
        }
        Ok(Self { stems })
    }

    /// One keyword per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.stems.iter().map(String::as_str)
    }

    pub fn matches_tokens(&self, stemmed: &[String]) -> bool {
        stemmed.iter().any(|t| self.stems.contains(t))
    }
}

impl Default for KeywordSet {
    fn default() -> Self {
        Self::new(Self::DEFAULT).expect("default keywords are non-empty")
    }
}

/// True when any stemmed token of the record's text is a stemmed keyword.
pub fn prefilter(record: &TweetRecord, keywords: &KeywordSet) -> bool {
    keywords.matches_tokens(&record.tokens())
}

/// Fixed-length id sequence; positions at and after `true_len` are `<pad>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTweet {
    pub ids: Vec<usize>,
    pub true_len: usize,
}

pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Result<EncodedTweet> {
    if max_len == 0 {
        return Err(CorpusError::InvalidArgument("max_len must be >= 1".into()));
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptyTweet);
    }
    let true_len = tokens.len().min(max_len);
    let mut ids: Vec<usize> = tokens[..true_len]
        .iter()
        .map(|t| vocab.id_or_unk(t))
        .collect();
    ids.resize(max_len, PAD_ID);
    Ok(EncodedTweet { ids, true_len })
}

/// Tokens of the unpadded prefix.
pub fn decode(tweet: &EncodedTweet, vocab: &Vocabulary) -> Vec<String> {
    tweet.ids[..tweet.true_len]
        .iter()
        .map(|&id| vocab.token(id).unwrap_or(UNK).to_string())
        .collect()
}

/// A preprocessed, labelled tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

/// Labelled tweets kept at token level so that splitting, augmentation and
/// the baselines share one representation; [`LabeledDataset::encode`] gives
/// the index form for the CNN.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledDataset {
    records: Vec<Example>,
}

impl LabeledDataset {
    pub fn new(records: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if r.id.is_empty() {
                return Err(CorpusError::EmptyId(i));
            }
            if r.label > 1 {
                return Err(CorpusError::BadLabel {
                    id: r.id.clone(),
                    label: r.label,
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records })
    }

    /// Preprocesses labelled raw records. Unlabelled records are an error.
    pub fn from_records(records: &[TweetRecord]) -> Result<Self> {
        let examples = records
            .iter()
            .map(|r| {
                let label = r.label.ok_or_else(|| CorpusError::MissingLabel(r.id.clone()))?;
                Ok(Example {
                    id: r.id.clone(),
                    tokens: r.tokens(),
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(examples)
    }

    pub fn records(&self) -> &[Example] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Example> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Count of label 0 and label 1 records.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for r in &self.records {
            c[r.label as usize] += 1;
        }
        c
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn token_seqs(&self) -> impl Iterator<Item = &[String]> {
        self.records.iter().map(|r| r.tokens.as_slice())
    }

    /// Records at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Drops records whose token list is empty; returns how many were dropped.
    pub fn drop_empty(&mut self) -> usize {
        let before = self.records.len();
        self.records.retain(|r| !r.tokens.is_empty());
        before - self.records.len()
    }

    pub fn encode(&self, vocab: &Vocabulary, max_len: usize) -> Result<Vec<(EncodedTweet, u8)>> {
        self.records
            .iter()
            .map(|r| Ok((encode(&r.tokens, vocab, max_len)?, r.label)))
            .collect()
    }

    /// Records carrying their tokens, with the tokens joined by spaces as text.
    pub fn to_tweet_records(&self) -> Vec<TweetRecord> {
        self.records
            .iter()
            .map(|r| TweetRecord {
                id: r.id.clone(),
                text: r.tokens.join(" "),
                label: Some(r.label),
                tokens: Some(r.tokens.clone()),
            })
            .collect()
    }
}
