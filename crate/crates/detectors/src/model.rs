//! A complete detector (feature extractor + trained classifier) and
//! its versioned save/load file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fcg_core::FunctionCallGraph;

use crate::apigraph::ApigraphExtractor;
use crate::classifier::{Classifier, Verdict};
use crate::error::DetectorError;
use crate::feature::FeatureVector;
use crate::gcn_detector::GcnDetector;
use crate::mamadroid::MamadroidExtractor;

const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "extractor", rename_all = "snake_case")]
pub enum FeatureExtractor {
    Mamadroid(MamadroidExtractor),
    Apigraph(ApigraphExtractor),
}

impl FeatureExtractor {
    pub fn extract(&self, g: &FunctionCallGraph) -> FeatureVector {
        match self {
            FeatureExtractor::Mamadroid(m) => m.extract(g),
            FeatureExtractor::Apigraph(a) => a.extract(g),
        }
    }

    pub fn schema_id(&self) -> String {
        match self {
            FeatureExtractor::Mamadroid(m) => m.schema_id(),
            FeatureExtractor::Apigraph(a) => a.schema_id(),
        }
    }
}

/// One deployable detection pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum DetectorModel {
    Vector {
        name: String,
        extractor: FeatureExtractor,
        classifier: Classifier,
    },
    Gcn {
        name: String,
        detector: GcnDetector,
    },
}

impl DetectorModel {
    pub fn name(&self) -> &str {
        match self {
            DetectorModel::Vector { name, .. } | DetectorModel::Gcn { name, .. } => name,
        }
    }

    /// Binary decision for one graph.
    pub fn classify(&self, g: &FunctionCallGraph) -> Result<Verdict, DetectorError> {
        match self {
            DetectorModel::Vector {
                extractor,
                classifier,
                ..
            } => classifier.classify(&extractor.extract(g)),
            DetectorModel::Gcn { detector, .. } => Ok(if detector.score(g)? > 0.5 {
                Verdict::Malicious
            } else {
                Verdict::Benign
            }),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            version: u32,
            model: &'a DetectorModel,
        }
        let mut s = serde_json::to_string_pretty(&File {
            version: MODEL_FILE_VERSION,
            model: self,
        })
        .expect("model serialization is infallible");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectorError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| DetectorError::ModelFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        #[derive(Deserialize)]
        struct File {
            version: u32,
            model: DetectorModel,
        }
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DetectorError::ModelFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let file: File = serde_json::from_str(&text).map_err(|e| DetectorError::ModelFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if file.version != MODEL_FILE_VERSION {
            return Err(DetectorError::UnsupportedVersion(file.version));
        }
        Ok(file.model)
    }
}
