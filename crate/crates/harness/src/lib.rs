//! Experiment harness: synthetic corpora with planted signal,
//! detector cells, attack variants and baselines, convergence theory,
//! adversarial retraining and report emission.

pub mod corpus;
pub mod experiment;
pub mod manifest;
pub mod retrain;
pub mod theory;

pub use corpus::{gen_corpus, load_corpus, write_corpus, Corpus, CorpusConfig, CorpusError};
pub use experiment::{
    aggregate_cell, attack_cell, run_experiment, sample_seed, select_attack_samples, split_corpus,
    train_cell, AttackSpec, AttackVariant, CellReport, CellSpec, ClassifierName, CorpusSource,
    ExperimentConfig, ExperimentError, ExperimentReport, ExtractorSpec, TrainedCell, TryCatchStat,
};
pub use manifest::{sha256_hex, write_manifest, RunManifest};
pub use retrain::{
    adversarial_retrain_eval, load_successful_results, RetrainConfig, RetrainCurve, RetrainPoint,
};
pub use theory::{n_star_asymptotic, n_star_exact, prob_all_found, TheoryError};
