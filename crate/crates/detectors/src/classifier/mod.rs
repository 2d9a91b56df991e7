//! Binary classifiers over feature vectors. All three kinds are
//! trained from scratch and deterministic given their seed.

mod adaboost;
mod knn;
mod mlp;

pub use adaboost::AdaBoostModel;
pub use knn::KnnModel;
pub use mlp::{MlpConfig, MlpModel};

use serde::{Deserialize, Serialize};

use crate::error::DetectorError;
use crate::feature::FeatureVector;

/// The binary decision a detector returns. This is the only value that
/// ever crosses the oracle boundary; scores stay crate-private.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Benign,
    Malicious,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Benign => write!(f, "benign"),
            Verdict::Malicious => write!(f, "malicious"),
        }
    }
}

/// What to train. `Knn` stores the dataset; the other kinds fit
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn { k: usize },
    Mlp(MlpConfig),
    AdaBoost { rounds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn(KnnModel),
    Mlp(MlpModel),
    AdaBoost(AdaBoostModel),
}

/// A trained classifier bound to one feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub schema_id: String,
    pub input_dim: usize,
    /// decision threshold on the internal score
    pub threshold: f64,
    pub model: ClassifierKind,
}

impl Classifier {
    /// Binary decision; pure function of the trained parameters and
    /// the input.
    pub fn classify(&self, v: &FeatureVector) -> Result<Verdict, DetectorError> {
        if v.schema_id != self.schema_id || v.values.len() != self.input_dim {
            return Err(DetectorError::SchemaMismatch {
                expected: format!("{} (dim {})", self.schema_id, self.input_dim),
                got: format!("{} (dim {})", v.schema_id, v.values.len()),
            });
        }
        let score = self.score(&v.values);
        Ok(if score > self.threshold {
            Verdict::Malicious
        } else {
            Verdict::Benign
        })
    }

    /// Malicious-class score in [0, 1]. Never exposed outside the
    /// crate: the oracle boundary only carries verdicts.
    pub(crate) fn score(&self, values: &[f64]) -> f64 {
        match &self.model {
            ClassifierKind::Knn(m) => m.score(values),
            ClassifierKind::Mlp(m) => m.score(values),
            ClassifierKind::AdaBoost(m) => m.score(values),
        }
    }
}

/// Trains a classifier of the requested kind on (features, malicious)
/// pairs sharing one schema.
pub fn train_classifier(
    spec: &ClassifierSpec,
    data: &[(FeatureVector, bool)],
) -> Result<Classifier, DetectorError> {
    if data.is_empty() {
        return Err(DetectorError::EmptyClass("dataset is empty"));
    }
    let schema_id = data[0].0.schema_id.clone();
    let input_dim = data[0].0.values.len();
    for (i, (v, _)) in data.iter().enumerate() {
        if v.schema_id != schema_id || v.values.len() != input_dim {
            return Err(DetectorError::SchemaMismatch {
                expected: schema_id,
                got: v.schema_id.clone(),
            });
        }
        if !v.is_finite() {
            return Err(DetectorError::NonFinite { sample: i });
        }
    }
    let malicious = data.iter().filter(|(_, y)| *y).count();
    let benign = data.len() - malicious;
    let needs_fit = !matches!(spec, ClassifierSpec::Knn { .. });
    let min_per_class = if needs_fit { 2 } else { 1 };
    if malicious < min_per_class {
        return Err(DetectorError::EmptyClass("malicious"));
    }
    if benign < min_per_class {
        return Err(DetectorError::EmptyClass("benign"));
    }

    let model = match spec {
        ClassifierSpec::Knn { k } => {
            if *k != 1 && *k != 3 {
                return Err(DetectorError::InvalidConfig(
                    "k-nearest-neighbor supports k = 1 or 3".into(),
                ));
            }
            ClassifierKind::Knn(KnnModel::fit(*k, data))
        }
        ClassifierSpec::Mlp(cfg) => ClassifierKind::Mlp(MlpModel::fit(cfg, data)?),
        ClassifierSpec::AdaBoost { rounds } => {
            ClassifierKind::AdaBoost(AdaBoostModel::fit(*rounds, data))
        }
    };
    Ok(Classifier {
        schema_id,
        input_dim,
        threshold: 0.5,
        model,
    })
}
