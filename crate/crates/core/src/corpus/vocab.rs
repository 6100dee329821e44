use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{CorpusError, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
/// Number of reserved entries at the start of every vocabulary.
pub const RESERVED: usize = 2;

/// Token universe with counts. Ids are contiguous from 0; `<pad>` is 0 and
/// `<unk>` is 1, both with count 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps tokens occurring at least `min_count` times, ordered by
    /// descending count and then lexicographically.
    pub fn build<I, S>(corpus: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        if min_count == 0 {
            return Err(CorpusError::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for seq in corpus {
            for tok in seq.as_ref() {
                *counts.entry(tok.clone()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && t != PAD && t != UNK)
            .collect();
        if kept.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::from_ordered(kept))
    }

    /// Builds from tokens in the given order, after the reserved entries.
    /// Reserved tokens in the input are skipped; duplicates keep the first.
    pub fn from_ordered(tokens: Vec<(String, u64)>) -> Self {
        let mut entries = vec![(PAD.to_string(), 0), (UNK.to_string(), 0)];
        let mut index = HashMap::new();
        index.insert(PAD.to_string(), PAD_ID);
        index.insert(UNK.to_string(), UNK_ID);
        for (tok, count) in tokens {
            if index.contains_key(&tok) {
                continue;
            }
            index.insert(tok.clone(), entries.len());
            entries.push((tok, count));
        }
        Self { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false: the reserved entries are present.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(|(t, _)| t.as_str())
    }

    pub fn count(&self, id: usize) -> Option<u64> {
        self.entries.get(id).map(|(_, c)| *c)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED
    }

    /// SHA-256 over the ordered token list; counts are not part of the hash.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for (tok, _) in &self.entries {
            h.update(tok.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// `token<TAB>count` per line, reserved entries included.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (tok, count) in &self.entries {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line.split_once('\t').ok_or_else(|| CorpusError::Parse {
                line: i + 1,
                message: "expected token<TAB>count".into(),
            })?;
            let count = count.parse::<u64>().map_err(|e| CorpusError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            tokens.push((tok.to_string(), count));
        }
        let vocab = Self::from_ordered(tokens);
        if vocab.len() <= RESERVED {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(spec: &[(&str, usize)]) -> Vec<Vec<String>> {
        spec.iter()
            .flat_map(|(t, n)| std::iter::repeat_n(vec![t.to_string()], *n))
            .collect()
    }

    #[test]
    fn min_count_filters() {
        let v = Vocabulary::build(seqs(&[("a", 3), ("b", 1)]), 2).unwrap();
        let toks: Vec<_> = v.entries().iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(toks, [PAD, UNK, "a"]);
        assert_eq!(v.count(2), Some(3));
    }

    #[test]
    fn single_token() {
        let v = Vocabulary::build(seqs(&[("a", 5)]), 1).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), Some(2));
        assert_eq!(v.id_or_unk("zzz"), UNK_ID);
    }

    #[test]
    fn ordering_count_then_lexicographic() {
        let v = Vocabulary::build(seqs(&[("c", 2), ("b", 2), ("a", 1), ("d", 4)]), 1).unwrap();
        let toks: Vec<_> = v.entries().iter().skip(2).map(|(t, _)| t.as_str()).collect();
        assert_eq!(toks, ["d", "b", "c", "a"]);
    }

    #[test]
    fn empty_corpus_errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(Vocabulary::build(empty, 1), Err(CorpusError::EmptyVocabulary)));
        assert!(matches!(
            Vocabulary::build(seqs(&[("a", 1)]), 2),
            Err(CorpusError::EmptyVocabulary)
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let v = Vocabulary::build(seqs(&[("x", 2), ("y", 7)]), 1).unwrap();
        let back = Vocabulary::from_tsv(&v.to_tsv()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash_hex(), v.hash_hex());
    }
}
