use std::collections::HashSet;
use std::sync::Arc;

use abusecnn::augment::{
    augment, default_suite, discriminative_words, nmf, run_at_suite, AugmentError, AugmentPolicy, PolicyKind,
};
use abusecnn::corpus::{Example, LabeledDataset, Vocabulary};
use abusecnn::embedding::EmbeddingMatrix;
use abusecnn::numerics::{Rng, Tensor2D};
use proptest::prelude::*;

/// 100 tweets: three words from the class's own list plus three shared fillers.
fn fixture() -> LabeledDataset {
    let mut rng = Rng::new(17);
    let records = (0..100)
        .map(|i| {
            let label = (i % 2) as u8;
            let prefix = if label == 1 { "a" } else { "b" };
            let mut tokens: Vec<String> = (0..3).map(|_| format!("{prefix}{}", rng.below(10))).collect();
            tokens.extend((0..3).map(|_| format!("f{}", rng.below(10))));
            Example { id: format!("t{i}"), tokens, label }
        })
        .collect();
    LabeledDataset::new(records).unwrap()
}

fn embedding(data: &LabeledDataset) -> EmbeddingMatrix {
    let mut tokens: Vec<Vec<String>> = data.token_seqs().map(|t| t.to_vec()).collect();
    tokens.push((0..30).map(|i| format!("e{i}")).collect());
    let vocab = Arc::new(Vocabulary::build(&tokens, 1).unwrap());
    EmbeddingMatrix::random_init(vocab, 8, &mut Rng::new(3)).unwrap()
}

fn allowed_tokens(data: &LabeledDataset, emb: &EmbeddingMatrix) -> HashSet<String> {
    let mut set: HashSet<String> = data.token_seqs().flatten().cloned().collect();
    set.extend(emb.vocab().entries().iter().map(|(t, _)| t.clone()));
    set
}

#[test]
fn nmf_error_is_monotone_on_random_matrix() {
    let mut rng = Rng::new(1);
    let v = Tensor2D::random_uniform(50, 100, 0.0, 1.0, &mut rng);
    let f = nmf(&v, 5, 200, 7).unwrap();
    assert_eq!(f.errors.len(), 201);
    for (i, w) in f.errors.windows(2).enumerate() {
        assert!(w[1] <= w[0] * (1.0 + 1e-10), "iteration {}: {} -> {}", i + 1, w[0], w[1]);
    }
    assert!(f.final_error() <= f.errors[0]);
    assert!(f.w.as_slice().iter().chain(f.h.as_slice()).all(|&x| x >= 0.0));
    assert_eq!((f.w.shape(), f.h.shape()), ((50, 5), (5, 100)));
}

#[test]
fn nmf_recovers_rank_one_matrix() {
    let mut rng = Rng::new(2);
    let u: Vec<f64> = (0..30).map(|_| rng.uniform_range(0.1, 2.0)).collect();
    let w: Vec<f64> = (0..40).map(|_| rng.uniform_range(0.1, 2.0)).collect();
    let mut v = Tensor2D::zeros(30, 40);
    for i in 0..30 {
        for j in 0..40 {
            v.set(i, j, u[i] * w[j]);
        }
    }
    let f = nmf(&v, 1, 200, 3).unwrap();
    let rel = v.sub(&f.reconstruction()).unwrap().frobenius_norm() / v.frobenius_norm();
    assert!(rel <= 1e-3, "relative error {rel}");
}

#[test]
fn lexicon_scores() {
    let mut records = Vec::new();
    for i in 0..10 {
        records.push(Example { id: format!("p{i}"), tokens: vec!["hot".into(), "same".into()], label: 1 });
        records.push(Example { id: format!("n{i}"), tokens: vec!["same".into()], label: 0 });
    }
    let data = LabeledDataset::new(records).unwrap();
    let lex = discriminative_words(&data, 2.0, 3).unwrap();
    assert_eq!(lex.words(1), &[("hot".to_string(), 11.0)]);
    assert!(lex.words(0).is_empty());
    assert!(!lex.contains(1, "same"));
}

#[test]
fn policy_output_sizes_and_labels() {
    let data = fixture();
    let emb = embedding(&data);
    let allowed = allowed_tokens(&data, &emb);
    for policy in default_suite(5) {
        let out = augment(&data, &policy, &emb).unwrap();
        let expected = match policy.kind {
            PolicyKind::At0 | PolicyKind::At3 | PolicyKind::At4 => 100,
            PolicyKind::At1 | PolicyKind::At2 | PolicyKind::At6 => 200,
            PolicyKind::At5 => 100 + 2 * policy.params.nmf_rank.unwrap(),
        };
        assert_eq!(out.len(), expected, "{}", policy.kind);
        for r in out.records() {
            assert!(r.tokens.iter().all(|t| allowed.contains(t)), "{}: {:?}", policy.kind, r.tokens);
        }
        match policy.kind {
            PolicyKind::At5 => {
                assert_eq!(&out.records()[..100], data.records());
                for r in &out.records()[100..] {
                    let class = r.id.split('-').nth(1).unwrap();
                    assert_eq!(class, format!("c{}", r.label));
                    assert_eq!(r.tokens.len(), 10);
                }
            }
            PolicyKind::At1 | PolicyKind::At2 | PolicyKind::At6 => {
                assert_eq!(&out.records()[..100], data.records());
                for (src, art) in data.records().iter().zip(&out.records()[100..]) {
                    assert_eq!(src.label, art.label);
                    assert!(art.id.starts_with(&src.id));
                }
            }
            _ => {
                for (src, r) in data.records().iter().zip(out.records()) {
                    assert_eq!((&src.id, src.label), (&r.id, r.label));
                    assert_eq!(&r.tokens[..src.tokens.len()], &src.tokens[..]);
                }
            }
        }
    }
}

#[test]
fn degenerate_and_counting_rules() {
    let data = fixture();
    let emb = embedding(&data);
    let mut at1 = AugmentPolicy::with_defaults(PolicyKind::At1, 1);
    at1.params.replace_prob = Some(0.0);
    let out = augment(&data, &at1, &emb).unwrap();
    for (a, b) in data.records().iter().zip(&out.records()[100..]) {
        assert_eq!(a.tokens, b.tokens);
    }

    let mut at3 = AugmentPolicy::with_defaults(PolicyKind::At3, 1);
    at3.params.expansion = Some(3);
    let out = augment(&data, &at3, &emb).unwrap();
    for (a, b) in data.records().iter().zip(out.records()) {
        assert_eq!(b.tokens.len(), a.tokens.len() + 3);
        let own: HashSet<&String> = a.tokens.iter().collect();
        assert!(b.tokens[a.tokens.len()..].iter().all(|t| !own.contains(t)));
    }
}

#[test]
fn at2_only_replaces_lexicon_words() {
    let data = fixture();
    let emb = embedding(&data);
    let mut policy = AugmentPolicy::with_defaults(PolicyKind::At2, 9);
    policy.params.replace_prob = Some(1.0);
    let lex = discriminative_words(&data, 2.0, 3).unwrap();
    let out = augment(&data, &policy, &emb).unwrap();
    let mut replaced = 0;
    for (src, art) in data.records().iter().zip(&out.records()[100..]) {
        for (a, b) in src.tokens.iter().zip(&art.tokens) {
            if a != b {
                assert!(lex.contains(src.label, a), "{a} replaced but not discriminative");
                replaced += 1;
            }
        }
    }
    assert!(replaced > 0);
}

#[test]
fn policy_parameter_mismatch_is_rejected() {
    let data = fixture();
    let emb = embedding(&data);
    let mut p = AugmentPolicy::with_defaults(PolicyKind::At3, 1);
    p.params.nmf_rank = Some(4);
    assert!(matches!(augment(&data, &p, &emb), Err(AugmentError::PolicyMismatch { .. })));
    let mut p = AugmentPolicy::with_defaults(PolicyKind::At1, 1);
    p.params.neighbors = None;
    assert!(matches!(augment(&data, &p, &emb), Err(AugmentError::PolicyMismatch { .. })));
    let mut p = AugmentPolicy::with_defaults(PolicyKind::At5, 1);
    p.params.nmf_rank = Some(60);
    assert!(augment(&data, &p, &emb).is_err());
    assert_eq!(PolicyKind::parse("at4").unwrap(), PolicyKind::At4);
}

#[test]
fn suite_is_deterministic_and_manifests_sizes() {
    let data = fixture();
    let emb = embedding(&data);
    let policies = default_suite(11);
    let a = run_at_suite(&data, &emb, &policies).unwrap();
    let b = run_at_suite(&data, &emb, &policies).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 7);
    assert_eq!(a[0].dataset, data);
    for e in &a {
        let m = e.manifest();
        assert!(m.starts_with(&format!("policy={}\nseed={}\n", e.policy.kind, e.policy.seed)));
        assert!(m.contains(&format!("input_size=100\noutput_size={}\n", e.output_size())));
    }
    let other = run_at_suite(&data, &emb, &default_suite(12)).unwrap();
    assert_ne!(a[1].dataset, other[1].dataset);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn class_lexicons_never_overlap(seed in 0u64..1000, theta in 1.01f64..4.0) {
        let mut rng = Rng::new(seed);
        let records = (0..30)
            .map(|i| Example {
                id: format!("r{i}"),
                tokens: (0..5).map(|_| format!("w{}", rng.below(8))).collect(),
                label: (i % 2) as u8,
            })
            .collect();
        let data = LabeledDataset::new(records).unwrap();
        let lex = discriminative_words(&data, theta, 1).unwrap();
        for (t, s) in lex.words(1) {
            prop_assert!(!lex.contains(0, t));
            prop_assert!(*s >= theta);
        }
    }

    #[test]
    fn nmf_factors_stay_non_negative(seed in 0u64..1000, rank in 1usize..4) {
        let mut rng = Rng::new(seed);
        let v = Tensor2D::random_uniform(6, 7, 0.0, 3.0, &mut rng);
        let f = nmf(&v, rank, 30, seed).unwrap();
        prop_assert!(f.w.as_slice().iter().chain(f.h.as_slice()).all(|&x| x >= 0.0));
        for w in f.errors.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }
}
