use std::collections::HashMap;

use super::{AugmentError, Result};
use crate::corpus::LabeledDataset;

/// Per-class tokens that occur markedly more often in that class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscriminativeLexicon {
    classes: [Vec<(String, f64)>; 2],
}

impl DiscriminativeLexicon {
    /// `(token, score)` pairs for `class`, highest score first.
    pub fn words(&self, class: u8) -> &[(String, f64)] {
        &self.classes[class as usize]
    }

    pub fn contains(&self, class: u8, token: &str) -> bool {
        self.classes[class as usize].iter().any(|(t, _)| t == token)
    }
}

/// A token belongs to class `c` when `(count_c + 1) / (count_other + 1) >= theta`
/// and `count_c >= min_count`, counting token occurrences.
pub fn discriminative_words(data: &LabeledDataset, theta: f64, min_count: u64) -> Result<DiscriminativeLexicon> {
    let [n0, n1] = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(AugmentError::EmptyClass(u8::from(n0 != 0)));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(AugmentError::InvalidParameter(format!("theta must be > 0, got {theta}")));
    }
    let mut counts: HashMap<&str, [u64; 2]> = HashMap::new();
    for r in data.records() {
        for t in &r.tokens {
            counts.entry(t.as_str()).or_default()[r.label as usize] += 1;
        }
    }
    let mut classes: [Vec<(String, f64)>; 2] = Default::default();
    for (tok, c) in counts {
        for class in 0..2 {
            let score = (c[class] + 1) as f64 / (c[1 - class] + 1) as f64;
            if c[class] >= min_count && score >= theta {
                classes[class].push((tok.to_string(), score));
            }
        }
    }
    for list in &mut classes {
        list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    }
    Ok(DiscriminativeLexicon { classes })
}
