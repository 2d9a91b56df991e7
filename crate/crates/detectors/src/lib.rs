//! Detection pipelines attacked by the search: Markov-chain transition
//! features, name-cluster features and a GCN, each feeding binary
//! classifiers trained from scratch.

mod apigraph;
mod classifier;
mod error;
mod feature;
mod gcn_detector;
mod mamadroid;
mod model;

pub use apigraph::{apigraph_fit, ApigraphExtractor, ClusterMap};
pub use classifier::{
    train_classifier, AdaBoostModel, Classifier, ClassifierKind, ClassifierSpec, KnnModel,
    MlpConfig, MlpModel, Verdict,
};
pub use error::DetectorError;
pub use feature::{markov_matrix, FeatureVector};
pub use gcn_detector::{DenseHead, GcnDetector, GcnTrainConfig};
pub use mamadroid::MamadroidExtractor;
pub use model::{DetectorModel, FeatureExtractor};
