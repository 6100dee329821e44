//! Seeded synthetic corpora used by tests, examples and the acceptance suite.

use crate::corpus::{Example, LabeledDataset};
use crate::numerics::Rng;

/// Sentences alternating between two disjoint word clusters `x0..` and
/// `y0..`; each sentence uses words of one cluster only.
pub fn two_cluster_corpus(sentences: usize, words_per_cluster: usize, sentence_len: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = Rng::derive(seed, "two-cluster");
    (0..sentences)
        .map(|i| {
            let prefix = if i % 2 == 0 { "x" } else { "y" };
            (0..sentence_len)
                .map(|_| format!("{prefix}{}", rng.below(words_per_cluster)))
                .collect()
        })
        .collect()
}

/// Tweets of `len` filler words (`f0..`) in which one position holds a cue
/// word drawn from the label's cue list. Labels alternate 0, 1, 0, ...
pub fn cue_tweets(
    n: usize,
    cues: [&[String]; 2],
    fillers: usize,
    len: usize,
    id_prefix: &str,
    rng: &mut Rng,
) -> LabeledDataset {
    let records = (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let pool = cues[label as usize];
            let mut tokens: Vec<String> = (0..len).map(|_| format!("f{}", rng.below(fillers))).collect();
            tokens[rng.below(len)] = pool[rng.below(pool.len())].clone();
            Example {
                id: format!("{id_prefix}{i}"),
                tokens,
                label,
            }
        })
        .collect();
    LabeledDataset::new(records).expect("generated ids are unique")
}

pub fn words(prefix: &str, range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

/// A task whose test cue words never occur in the labelled training data but
/// share contexts with the training cue words in an unlabelled corpus.
#[derive(Debug, Clone)]
pub struct HeldOutCueTask {
    pub unlabelled: Vec<Vec<String>>,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn held_out_cue_task(train_size: usize, test_size: usize, unlabelled: usize, seed: u64) -> HeldOutCueTask {
    let mut rng = Rng::derive(seed, "held-out-cue");
    let (pos, neg) = (words("p", 0..20), words("n", 0..20));
    let fillers = 40;
    // In-domain text: a cluster's cue words appear together amid filler.
    let corpus = (0..unlabelled)
        .map(|i| {
            let cues = if i % 2 == 0 { &pos } else { &neg };
            (0..10)
                .map(|j| {
                    if j % 3 == 2 {
                        format!("f{}", rng.below(fillers))
                    } else {
                        cues[rng.below(cues.len())].clone()
                    }
                })
                .collect()
        })
        .collect();
    let train = cue_tweets(train_size, [&neg[..10], &pos[..10]], fillers, 8, "tr", &mut rng);
    let test = cue_tweets(test_size, [&neg[10..], &pos[10..]], fillers, 8, "te", &mut rng);
    HeldOutCueTask {
        unlabelled: corpus,
        train,
        test,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn held_out_cues_are_disjoint_from_training() {
        let task = held_out_cue_task(40, 20, 30, 1);
        let train_words: std::collections::HashSet<&String> = task.train.token_seqs().flatten().collect();
        for r in task.test.records() {
            let cue = r.tokens.iter().find(|t| !t.starts_with('f')).unwrap();
            assert!(!train_words.contains(cue));
            assert_eq!(cue.starts_with('p'), r.label == 1);
        }
        assert_eq!(task.train.class_counts(), [20, 20]);
    }

    #[test]
    fn cluster_sentences_stay_in_cluster() {
        for (i, s) in two_cluster_corpus(10, 5, 6, 2).iter().enumerate() {
            let p = if i % 2 == 0 { 'x' } else { 'y' };
            assert!(s.iter().all(|w| w.starts_with(p)));
        }
    }
}
