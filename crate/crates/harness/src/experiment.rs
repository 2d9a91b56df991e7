//! Experiment orchestration: corpus splits, detector cells, attack
//! variants, and aggregate metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;
use thiserror::Error;

use apoem::{
    run_attack, run_random_insertion, ApoemConfig, AttackError, AttackResult, AttackStatus,
    RandomInsertionConfig,
};
use detectors::{
    apigraph_fit, train_classifier, ApigraphExtractor, ClassifierSpec, DetectorError,
    DetectorModel, FeatureExtractor, FeatureVector, GcnDetector, GcnTrainConfig,
    MamadroidExtractor, MlpConfig, Verdict,
};
use fcg_core::{AppLabel, FunctionCallGraph, Granularity};
use oracle::OracleEndpoint;

use crate::corpus::{gen_corpus, load_corpus, Corpus, CorpusConfig, CorpusError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error(transparent)]
    Detector(#[from] DetectorError),

    #[error("attack on {app_id}: {source}")]
    Attack {
        app_id: String,
        #[source]
        source: AttackError,
    },

    #[error("invalid experiment config: {0}")]
    Invalid(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Which feature pipeline a cell uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "extractor", rename_all = "snake_case")]
pub enum ExtractorSpec {
    Mamadroid { level: Granularity },
    Apigraph { k: usize },
    Gcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierName {
    Knn1,
    Knn3,
    Mlp,
    Adaboost,
}

impl ClassifierName {
    pub(crate) fn spec(&self, seed: u64) -> ClassifierSpec {
        match self {
            ClassifierName::Knn1 => ClassifierSpec::Knn { k: 1 },
            ClassifierName::Knn3 => ClassifierSpec::Knn { k: 3 },
            ClassifierName::Mlp => ClassifierSpec::Mlp(MlpConfig {
                seed,
                ..MlpConfig::default()
            }),
            ClassifierName::Adaboost => ClassifierSpec::AdaBoost { rounds: 50 },
        }
    }

    fn name(&self) -> &'static str {
        match self {
            ClassifierName::Knn1 => "knn1",
            ClassifierName::Knn3 => "knn3",
            ClassifierName::Mlp => "mlp",
            ClassifierName::Adaboost => "adaboost",
        }
    }
}

/// One (feature pipeline, classifier) target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    #[serde(flatten)]
    pub extractor: ExtractorSpec,
    pub classifier: Option<ClassifierName>,
}

impl CellSpec {
    pub fn name(&self) -> String {
        let head = match &self.extractor {
            ExtractorSpec::Mamadroid { level } => format!("mamadroid-{level}"),
            ExtractorSpec::Apigraph { k } => format!("apigraph-k{k}"),
            ExtractorSpec::Gcn => "gcn".to_string(),
        };
        match (&self.extractor, self.classifier) {
            (ExtractorSpec::Gcn, _) => head,
            (_, Some(c)) => format!("{head}+{}", c.name()),
            (_, None) => head,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackVariant {
    Apoem,
    SinglePopulation,
    NoSubstitute,
    RandomInsertion,
}

/// Attack settings: the search parameters plus which variant runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSpec {
    pub variant: AttackVariant,
    /// population granularity for the single-population variant
    pub granularity: Granularity,
    #[serde(flatten)]
    pub base: ApoemConfig,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            variant: AttackVariant::Apoem,
            granularity: Granularity::Family,
            base: ApoemConfig::default(),
        }
    }
}

impl AttackSpec {
    pub fn apoem_config(&self, seed: u64) -> ApoemConfig {
        let mut cfg = self.base.clone();
        cfg.seed = seed;
        match self.variant {
            AttackVariant::Apoem => {}
            AttackVariant::SinglePopulation => {
                cfg.populations = vec![self.granularity];
                cfg.substitute.enabled = false;
            }
            AttackVariant::NoSubstitute => {
                cfg.substitute.enabled = false;
            }
            AttackVariant::RandomInsertion => {}
        }
        cfg
    }

    pub fn random_insertion_config(&self, seed: u64) -> RandomInsertionConfig {
        RandomInsertionConfig {
            budget: self
                .base
                .max_queries
                .unwrap_or((self.base.survivors * self.base.r_max) as u64),
            size_frac: self.base.init_size_frac,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSource {
    Dir { corpus_dir: String },
    Inline { corpus: CorpusConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub samples_per_cell: usize,
    pub train_fraction: f64,
    #[serde(flatten)]
    pub corpus: CorpusSource,
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub attack: AttackSpec,
}

impl ExperimentConfig {
    pub fn load_corpus(&self) -> Result<Corpus, CorpusError> {
        match &self.corpus {
            CorpusSource::Dir { corpus_dir } => load_corpus(std::path::Path::new(corpus_dir)),
            CorpusSource::Inline { corpus } => gen_corpus(corpus),
        }
    }
}

/// Stratified seeded split into (train, test) index lists.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5117);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [AppLabel::Benign, AppLabel::Malicious, AppLabel::Unknown] {
        let mut ids: Vec<usize> = (0..corpus.graphs.len())
            .filter(|&i| corpus.graphs[i].label == class)
            .collect();
        ids.shuffle(&mut rng);
        let cut = (ids.len() as f64 * train_fraction).round() as usize;
        train.extend(&ids[..cut.min(ids.len())]);
        test.extend(&ids[cut.min(ids.len())..]);
    }
    train.sort();
    test.sort();
    (train, test)
}

/// A trained target cell.
pub struct TrainedCell {
    pub name: String,
    pub model: Arc<DetectorModel>,
    pub heldout_accuracy: f64,
}

/// Fits the cell's extractor and classifier on the train split and
/// scores accuracy on the test split.
pub fn train_cell(
    corpus: &Corpus,
    train_ids: &[usize],
    test_ids: &[usize],
    spec: &CellSpec,
    seed: u64,
) -> Result<TrainedCell, ExperimentError> {
    let train: Vec<&FunctionCallGraph> = train_ids.iter().map(|&i| &corpus.graphs[i]).collect();
    let name = spec.name();
    let model = match &spec.extractor {
        ExtractorSpec::Gcn => {
            let data: Vec<(&FunctionCallGraph, bool)> = train
                .iter()
                .map(|g| (*g, g.label == AppLabel::Malicious))
                .collect();
            let cfg = GcnTrainConfig {
                seed,
                ..GcnTrainConfig::default()
            };
            let (detector, _) = GcnDetector::train(&data, &cfg)?;
            DetectorModel::Gcn {
                name: name.clone(),
                detector,
            }
        }
        _ => {
            let extractor = match &spec.extractor {
                ExtractorSpec::Mamadroid { level } => {
                    FeatureExtractor::Mamadroid(MamadroidExtractor::fit(&train, *level)?)
                }
                ExtractorSpec::Apigraph { k } => FeatureExtractor::Apigraph(ApigraphExtractor {
                    map: apigraph_fit(&train, *k, seed)?,
                }),
                ExtractorSpec::Gcn => unreachable!(),
            };
            let data: Vec<(FeatureVector, bool)> = train
                .iter()
                .map(|g| (extractor.extract(g), g.label == AppLabel::Malicious))
                .collect();
            let classifier_name = spec.classifier.ok_or_else(|| {
                ExperimentError::Invalid(format!("cell {name} needs a classifier"))
            })?;
            let classifier = train_classifier(&classifier_name.spec(seed), &data)?;
            DetectorModel::Vector {
                name: name.clone(),
                extractor,
                classifier,
            }
        }
    };
    let mut correct = 0usize;
    for &i in test_ids {
        let g = &corpus.graphs[i];
        let verdict = model.classify(g)?;
        let truth = g.label == AppLabel::Malicious;
        if (verdict == Verdict::Malicious) == truth {
            correct += 1;
        }
    }
    let heldout_accuracy = correct as f64 / test_ids.len().max(1) as f64;
    Ok(TrainedCell {
        name,
        model: Arc::new(model),
        heldout_accuracy,
    })
}

/// Try-catch block ratio before and after the evading perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TryCatchStat {
    pub app_id: String,
    pub added_edges: u64,
    pub ratio_before: f64,
    pub ratio_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub heldout_accuracy: f64,
    pub attempted: usize,
    pub evaded: usize,
    pub unattackable: usize,
    pub asr: f64,
    /// mean added-to-total edge ratio over evaded samples
    pub mean_apr: f64,
    /// mean target-query count over evaded samples
    pub mean_ir: f64,
    pub trycatch: Vec<TryCatchStat>,
    /// (apr bound, asr at that bound) curve
    pub cdf: Vec<(f64, f64)>,
    pub results: Vec<AttackResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Derives the per-sample attack seed from the master seed, the cell
/// and the app id; stable under any evaluation order.
pub fn sample_seed(master: u64, cell: &str, app_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(cell.as_bytes());
    hasher.update(b"/");
    hasher.update(app_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Selects up to `count` malicious test graphs the model classifies
/// correctly, in seeded shuffled order.
pub fn select_attack_samples<'c>(
    corpus: &'c Corpus,
    test_ids: &[usize],
    model: &DetectorModel,
    count: usize,
    seed: u64,
) -> Result<Vec<&'c FunctionCallGraph>, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa77ac4);
    let mut candidates: Vec<&FunctionCallGraph> = Vec::new();
    for &i in test_ids {
        let g = &corpus.graphs[i];
        if g.label == AppLabel::Malicious && model.classify(g)? == Verdict::Malicious {
            candidates.push(g);
        }
    }
    candidates.shuffle(&mut rng);
    candidates.truncate(count);
    candidates.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    Ok(candidates)
}

/// Runs the configured attack variant against one cell for every
/// selected sample, in parallel with per-sample seeds.
pub fn attack_cell(
    samples: &[&FunctionCallGraph],
    cell: &TrainedCell,
    attack: &AttackSpec,
    master_seed: u64,
) -> Result<Vec<AttackResult>, ExperimentError> {
    let endpoint = OracleEndpoint::in_process(cell.model.clone());
    let mut results: Vec<AttackResult> = samples
        .par_iter()
        .map(|g| {
            let seed = sample_seed(master_seed, &cell.name, &g.app_id);
            let run = match attack.variant {
                AttackVariant::RandomInsertion => {
                    run_random_insertion(g, &endpoint, &attack.random_insertion_config(seed))
                }
                _ => run_attack(g, &endpoint, &attack.apoem_config(seed)),
            };
            run.map_err(|source| ExperimentError::Attack {
                app_id: g.app_id.clone(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    results.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    Ok(results)
}

/// APR grid of the ASR-vs-allowed-perturbation curve.
pub const CDF_GRID_STEP: f64 = 0.01;
pub const CDF_GRID_MAX: f64 = 0.5;

pub fn aggregate_cell(
    name: &str,
    heldout_accuracy: f64,
    results: Vec<AttackResult>,
) -> CellReport {
    let attempted = results.len();
    let evaded: Vec<&AttackResult> = results
        .iter()
        .filter(|r| r.status == AttackStatus::Evaded)
        .collect();
    let unattackable = results
        .iter()
        .filter(|r| r.status == AttackStatus::FailedUnattackable)
        .count();
    let n_evaded = evaded.len();
    let asr = if attempted == 0 {
        0.0
    } else {
        n_evaded as f64 / attempted as f64
    };
    let mean = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = xs.collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let mean_apr = mean(&mut evaded.iter().map(|r| r.apr));
    let mean_ir = mean(&mut evaded.iter().map(|r| r.ir as f64));
    let trycatch = evaded
        .iter()
        .map(|r| {
            let added = r.best.as_ref().map(|b| b.size() as u64).unwrap_or(0);
            TryCatchStat {
                app_id: r.app_id.clone(),
                added_edges: added,
                ratio_before: r.trycatch_count as f64 / r.e_total as f64,
                ratio_after: (r.trycatch_count + added) as f64 / (r.e_total + added) as f64,
            }
        })
        .collect();
    let mut cdf = Vec::new();
    let steps = (CDF_GRID_MAX / CDF_GRID_STEP).round() as usize;
    for step in 0..=steps {
        let bound = step as f64 * CDF_GRID_STEP;
        let hit = results
            .iter()
            .filter(|r| r.status == AttackStatus::Evaded && r.apr <= bound + 1e-12)
            .count();
        cdf.push((bound, hit as f64 / attempted.max(1) as f64));
    }
    CellReport {
        name: name.to_string(),
        heldout_accuracy,
        attempted,
        evaded: n_evaded,
        unattackable,
        asr,
        mean_apr,
        mean_ir,
        trycatch,
        cdf,
        results,
    }
}

/// The full experiment: corpus, split, per-cell training, attacks and
/// aggregation.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if cfg.cells.is_empty() {
        return Err(ExperimentError::Invalid("no cells configured".into()));
    }
    let corpus = cfg.load_corpus()?;
    let (train_ids, test_ids) = split_corpus(&corpus, cfg.train_fraction, cfg.seed);
    let mut cells = Vec::new();
    for spec in &cfg.cells {
        let trained = train_cell(&corpus, &train_ids, &test_ids, spec, cfg.seed)?;
        let samples = select_attack_samples(
            &corpus,
            &test_ids,
            &trained.model,
            cfg.samples_per_cell,
            cfg.seed,
        )?;
        log::info!(
            "cell {}: heldout accuracy {:.3}, attacking {} samples",
            trained.name,
            trained.heldout_accuracy,
            samples.len()
        );
        let results = attack_cell(&samples, &trained, &cfg.attack, cfg.seed)?;
        cells.push(aggregate_cell(
            &trained.name,
            trained.heldout_accuracy,
            results,
        ));
    }
    Ok(ExperimentReport {
        seed: cfg.seed,
        cells,
    })
}
