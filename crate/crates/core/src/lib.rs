//! Kano-factor classification of app reviews.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: labelled review datasets, ingestion, preprocessing,
//!   undersampling and fold assignment.
//! - [`textproc`]: tokenisation, stop words and the tf-idf model.
//! - [`classifiers`]: the keyword-driven and logistic-regression baselines,
//!   plus classifiers served by an external adapter process.
//! - [`metrics`]: confusion matrices, precision/recall/F1, Cohen's kappa and
//!   the phi coefficient.
//! - [`experiments`]: the cross-validation, cross-dataset and
//!   agreement-split evaluation protocols and their reports.
//! - [`adapter`]: the line-delimited JSON protocol spoken with adapter
//!   processes, with an in-process mock.

pub mod adapter;
pub mod classifiers;
pub mod corpus;
pub mod experiments;
pub mod metrics;
pub mod seed;
pub mod textproc;

pub use classifiers::{ClassifierKind, ClassifierSpec, TrainedClassifier};
pub use corpus::{Agreement, Dataset, FoldPlan, KanoLabel, Review};
pub use metrics::{ClassScores, ConfusionMatrix};
pub use textproc::TfIdfModel;
