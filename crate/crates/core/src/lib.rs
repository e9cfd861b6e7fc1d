//! Ban-evasion detection toolkit.
//!
//! The pipeline runs in batch over a corpus of accounts, revisions and
//! sockpuppet records:
//!
//! 1. [`corpus`] loads or synthesizes the data.
//! 2. [`pairing`] merges sockpuppet records into groups and extracts
//!    `(parent, child)` evasion pairs.
//! 3. [`matching`] builds matched negatives for the three tasks (evasion
//!    prediction, early detection, ban-time detection) and candidate sets
//!    for parent attribution.
//! 4. [`features`] turns accounts and account pairs into feature vectors
//!    using the text primitives in [`textstats`].
//! 5. [`model`] trains L2-regularized logistic regression with recursive
//!    feature elimination.
//! 6. [`eval`] splits temporally, removes leakage and scores AUC, MRR and
//!    Recall@K; [`analysis`] produces the descriptive statistics.
//!
//! [`pipeline`] chains everything end to end and [`cli`] exposes it on the
//! command line.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod jsonl;
pub mod matching;
pub mod model;
pub mod pairing;
pub mod pipeline;
pub mod textstats;
pub mod time;

mod parallel;
