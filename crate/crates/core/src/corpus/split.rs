use super::{CorpusError, LabeledDataset, Result};
use crate::numerics::Rng;

fn class_indices(data: &LabeledDataset) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, r) in data.records().iter().enumerate() {
        out[r.label as usize].push(i);
    }
    out
}

/// Train and test index sets, each sorted ascending.
pub fn stratified_split_indices(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = Rng::new(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in class_indices(data).into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(CorpusError::ClassTooSmall {
                class: class as u8,
                have: idx.len(),
                need: 2,
            });
        }
        rng.shuffle(&mut idx);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified train/test partition; deterministic for a given seed.
pub fn stratified_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(data, test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Validation index sets of `k` stratified folds, each sorted ascending.
pub fn kfold_indices(data: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(CorpusError::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let mut rng = Rng::new(seed);
    let mut folds = vec![Vec::new(); k];
    // Each class starts where the previous one stopped, so totals stay
    // balanced as well as per-class sizes.
    let mut offset = 0;
    for (class, mut idx) in class_indices(data).into_iter().enumerate() {
        if idx.len() < k {
            return Err(CorpusError::ClassTooSmall {
                class: class as u8,
                have: idx.len(),
                need: k,
            });
        }
        rng.shuffle(&mut idx);
        for (j, &i) in idx.iter().enumerate() {
            folds[(offset + j) % k].push(i);
        }
        offset = (offset + idx.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// `k` (train, validation) pairs with pairwise-disjoint, covering validation folds.
pub fn kfold(
    data: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<(LabeledDataset, LabeledDataset)>> {
    let folds = kfold_indices(data, k, seed)?;
    Ok(folds
        .iter()
        .map(|valid| {
            let mut in_valid = vec![false; data.len()];
            for &i in valid {
                in_valid[i] = true;
            }
            let train: Vec<usize> = (0..data.len()).filter(|&i| !in_valid[i]).collect();
            (data.subset(&train), data.subset(valid))
        })
        .collect())
}
