//! Small-data tweet classification.
//!
//! The crate covers the whole experimental pipeline for detecting abusive
//! tweets from a few thousand labelled examples:
//!
//! - [`corpus`]: tokenizing, Porter stemming, keyword pre-filtering,
//!   vocabularies, encoding, stratified splits and folds.
//! - [`numerics`]: dense tensors, seeded randomness, Adam, dropout and a
//!   finite-difference gradient checker.
//! - [`embedding`]: CBOW / skip-gram word vectors with negative sampling.
//! - [`cnn`]: the multi-width convolutional classifier and its training loop.
//! - [`baselines`]: feedforward network, multinomial naive Bayes, kNN, ridge.
//! - [`augment`]: NMF and the six augmentation policies.
//! - [`eval`]: confusion matrices, metrics and comparison tables.

pub mod augment;
pub mod baselines;
pub mod cnn;
pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod numerics;
pub mod synthetic;
