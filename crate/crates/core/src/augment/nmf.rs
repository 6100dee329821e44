use super::{AugmentError, Result};
use crate::numerics::{Rng, Tensor2D};

/// Denominator guard in the multiplicative updates.
pub const NMF_EPS: f64 = 1e-12;

/// `V ≈ W H` with `errors[0]` the error of the initial factors and
/// `errors[i]` the Frobenius error after iteration `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    pub w: Tensor2D,
    pub h: Tensor2D,
    pub rank: usize,
    pub errors: Vec<f64>,
}

impl NmfFactors {
    pub fn reconstruction(&self) -> Tensor2D {
        self.w.matmul(&self.h).expect("factor shapes agree")
    }

    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("trace holds the initial error")
    }
}

fn frobenius_error(v: &Tensor2D, w: &Tensor2D, h: &Tensor2D) -> Result<f64> {
    Ok(v.sub(&w.matmul(h)?)?.frobenius_norm())
}

fn update(target: &mut Tensor2D, numer: &Tensor2D, denom: &Tensor2D) {
    for ((t, n), d) in target
        .as_mut_slice()
        .iter_mut()
        .zip(numer.as_slice())
        .zip(denom.as_slice())
    {
        *t *= n / (d + NMF_EPS);
    }
}

/// Multiplicative-update factorisation minimising `||V - WH||_F`.
pub fn nmf(v: &Tensor2D, rank: usize, iterations: usize, seed: u64) -> Result<NmfFactors> {
    if let Some(i) = v.as_slice().iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(AugmentError::NegativeEntry(i / v.cols().max(1), i % v.cols().max(1)));
    }
    let (m, n) = v.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(AugmentError::InvalidParameter(format!(
            "rank {rank} outside 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let mut rng = Rng::derive(seed, "nmf");
    let mean = v.sum() / (m * n) as f64;
    let scale = (mean / rank as f64).sqrt().max(NMF_EPS);
    let mut w = Tensor2D::random_uniform(m, rank, 0.0, scale, &mut rng);
    let mut h = Tensor2D::random_uniform(rank, n, 0.0, scale, &mut rng);
    let mut errors = Vec::with_capacity(iterations + 1);
    errors.push(frobenius_error(v, &w, &h)?);
    for _ in 0..iterations {
        let wt = w.transpose();
        let numer = wt.matmul(v)?;
        let denom = wt.matmul(&w)?.matmul(&h)?;
        update(&mut h, &numer, &denom);
        let ht = h.transpose();
        let numer = v.matmul(&ht)?;
        let denom = w.matmul(&h.matmul(&ht)?)?;
        update(&mut w, &numer, &denom);
        errors.push(frobenius_error(v, &w, &h)?);
    }
    Ok(NmfFactors { w, h, rank, errors })
}

/// Term-count matrix over the sorted set of terms occurring in `docs`.
pub fn doc_term_matrix(docs: &[&[String]]) -> (Tensor2D, Vec<String>) {
    let mut terms: Vec<String> = docs.iter().flat_map(|d| d.iter().cloned()).collect();
    terms.sort();
    terms.dedup();
    let mut v = Tensor2D::zeros(docs.len(), terms.len());
    for (r, doc) in docs.iter().enumerate() {
        for t in doc.iter() {
            let c = terms.binary_search(t).expect("term collected above");
            v.set(r, c, v.get(r, c) + 1.0);
        }
    }
    (v, terms)
}

/// Indices of the `k` largest entries of `row`, ties by lower index.
pub(crate) fn top_indices(row: &[f64], k: usize, skip: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&i| !skip(i)).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_bad_rank() {
        let v = Tensor2D::from_rows(&[vec![1.0, -1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(nmf(&v, 1, 5, 1), Err(AugmentError::NegativeEntry(0, 1))));
        let v = Tensor2D::filled(2, 3, 1.0);
        assert!(nmf(&v, 3, 5, 1).is_err());
        assert!(nmf(&v, 0, 5, 1).is_err());
    }

    #[test]
    fn zero_matrix_stays_zero_error() {
        let f = nmf(&Tensor2D::zeros(3, 4), 2, 10, 1).unwrap();
        assert_eq!(f.final_error(), 0.0);
        assert_eq!(f.errors.len(), 11);
    }

    #[test]
    fn doc_term_counts() {
        let docs = [vec!["b".to_string(), "a".into(), "b".into()], vec!["c".to_string()]];
        let refs: Vec<&[String]> = docs.iter().map(|d| d.as_slice()).collect();
        let (v, terms) = doc_term_matrix(&refs);
        assert_eq!(terms, ["a", "b", "c"]);
        assert_eq!(v.row(0), &[1.0, 2.0, 0.0]);
        assert_eq!(v.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn top_indices_ties_and_skip() {
        assert_eq!(top_indices(&[1.0, 3.0, 3.0, 2.0], 3, |_| false), [1, 2, 3]);
        assert_eq!(top_indices(&[1.0, 3.0, 3.0, 2.0], 2, |i| i == 1), [2, 3]);
    }
}
