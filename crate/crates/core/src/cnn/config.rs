use std::collections::BTreeMap;

use super::{CnnError, Result};

/// One filter bank: `count` filters spanning `height` consecutive words,
/// with dropout applied to the bank's pooled features.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub height: usize,
    pub count: usize,
    pub dropout: f64,
}

impl FilterSpec {
    pub fn new(height: usize, count: usize, dropout: f64) -> Self {
        Self {
            height,
            count,
            dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub filters: Vec<FilterSpec>,
    pub dense_units: usize,
    pub input_dropout: f64,
    pub dense_dropout: f64,
    /// Drop whole word rows at the input instead of single components.
    pub word_dropout: bool,
    /// Probability at or above which a tweet is labelled positive.
    pub threshold: f64,
    pub max_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters: vec![
                FilterSpec::new(3, 256, 0.5),
                FilterSpec::new(4, 256, 0.2),
                FilterSpec::new(5, 512, 0.2),
            ],
            dense_units: 256,
            input_dropout: 0.5,
            dense_dropout: 0.5,
            word_dropout: false,
            threshold: 0.5,
            max_len: 64,
            batch_size: 32,
            epochs: 50,
            patience: 5,
            learning_rate: 1e-3,
            seed: 1,
        }
    }
}

fn rate_ok(r: f64) -> bool {
    (0.0..1.0).contains(&r)
}

impl CnnConfig {
    pub fn total_filters(&self) -> usize {
        self.filters.iter().map(|f| f.count).sum()
    }

    pub fn max_height(&self) -> usize {
        self.filters.iter().map(|f| f.height).max().unwrap_or(0)
    }

    /// Same architecture with every dropout rate set to zero.
    pub fn without_dropout(mut self) -> Self {
        self.input_dropout = 0.0;
        self.dense_dropout = 0.0;
        for f in &mut self.filters {
            f.dropout = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CnnError::InvalidConfig(m));
        if self.filters.is_empty() {
            return bad("at least one filter bank is required".into());
        }
        let mut heights: Vec<usize> = self.filters.iter().map(|f| f.height).collect();
        heights.sort_unstable();
        heights.dedup();
        if heights.len() != self.filters.len() {
            return bad("filter heights must be distinct".into());
        }
        for f in &self.filters {
            if f.height == 0 || f.height > self.max_len {
                return bad(format!("filter height {} outside 1..={}", f.height, self.max_len));
            }
            if f.count == 0 {
                return bad(format!("filter bank h={} has no filters", f.height));
            }
            if !rate_ok(f.dropout) {
                return bad(format!("dropout {} for h={} outside [0, 1)", f.dropout, f.height));
            }
        }
        if !rate_ok(self.input_dropout) || !rate_ok(self.dense_dropout) {
            return bad("dropout rates must lie in [0, 1)".into());
        }
        if self.dense_units == 0 || self.batch_size == 0 {
            return bad("dense_units and batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0".into());
        }
        Ok(())
    }

    /// Flat `key=value` form, used for checkpoint headers.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let filters = self
            .filters
            .iter()
            .map(|f| format!("{}:{}:{}", f.height, f.count, f.dropout))
            .collect::<Vec<_>>()
            .join(",");
        [
            ("filters", filters),
            ("dense_units", self.dense_units.to_string()),
            ("input_dropout", self.input_dropout.to_string()),
            ("dense_dropout", self.dense_dropout.to_string()),
            ("word_dropout", self.word_dropout.to_string()),
            ("threshold", self.threshold.to_string()),
            ("max_len", self.max_len.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            kv.get(key)
                .ok_or_else(|| CnnError::InvalidConfig(format!("missing key `{key}`")))?
                .parse()
                .map_err(|_| CnnError::InvalidConfig(format!("bad value for `{key}`")))
        }
        let filters = parse_filters(
            kv.get("filters")
                .ok_or_else(|| CnnError::InvalidConfig("missing key `filters`".into()))?,
        )?;
        let cfg = Self {
            filters,
            dense_units: get(kv, "dense_units")?,
            input_dropout: get(kv, "input_dropout")?,
            dense_dropout: get(kv, "dense_dropout")?,
            word_dropout: get(kv, "word_dropout")?,
            threshold: get(kv, "threshold")?,
            max_len: get(kv, "max_len")?,
            batch_size: get(kv, "batch_size")?,
            epochs: get(kv, "epochs")?,
            patience: get(kv, "patience")?,
            learning_rate: get(kv, "learning_rate")?,
            seed: get(kv, "seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `h:count[:dropout],...`; a missing dropout means 0.
pub fn parse_filters(s: &str) -> Result<Vec<FilterSpec>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let bad = || CnnError::InvalidConfig(format!("bad filter spec `{part}`"));
            let fields: Vec<&str> = part.split(':').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(bad());
            }
            let height = fields[0].parse().map_err(|_| bad())?;
            let count = fields[1].parse().map_err(|_| bad())?;
            let dropout = match fields.get(2) {
                Some(d) => d.parse().map_err(|_| bad())?,
                None => 0.0,
            };
            Ok(FilterSpec::new(height, count, dropout))
        })
        .collect()
}
