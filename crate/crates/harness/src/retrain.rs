//! Adversarial retraining: fold fractions of collected adversarial
//! examples back into the training set and measure how the attack's
//! success rate on held-out adversarial examples responds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use apoem::{AttackResult, AttackStatus};
use detectors::{
    train_classifier, DetectorModel, FeatureVector, GcnDetector, GcnTrainConfig, Verdict,
};
use fcg_core::{apply_perturbation, candidate_endpoints, AppLabel, FunctionCallGraph};

use crate::experiment::{
    split_corpus, train_cell, CellSpec, ExperimentConfig, ExperimentError, ExtractorSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// which configured cell to retrain
    #[serde(default)]
    pub cell_index: usize,
    /// directory holding per-sample attack results for that cell
    pub results_dir: String,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainPoint {
    pub fraction: f64,
    /// share of held-out adversarial examples still evading
    pub asr: f64,
    pub heldout_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainCurve {
    pub cell: String,
    pub evaluated_aes: usize,
    pub retrain_pool: usize,
    pub points: Vec<RetrainPoint>,
}

impl RetrainCurve {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("curve serialization");
        s.push('\n');
        s
    }
}

/// Loads the evaded attack results for `cell` from a results
/// directory written by the attack command.
pub fn load_successful_results(
    results_dir: &std::path::Path,
    cell: &str,
) -> Result<Vec<AttackResult>, ExperimentError> {
    let dir = results_dir.join(cell);
    let mut paths: Vec<_> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let result = AttackResult::from_json(&text)
            .map_err(|e| ExperimentError::Invalid(format!("{}: {e}", path.display())))?;
        if result.status == AttackStatus::Evaded && result.best.is_some() {
            results.push(result);
        }
    }
    results.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    Ok(results)
}

fn perturbed_graph(
    corpus_graph: &FunctionCallGraph,
    result: &AttackResult,
) -> Result<FunctionCallGraph, ExperimentError> {
    let candidates = candidate_endpoints(corpus_graph);
    let best = result.best.as_ref().expect("filtered to evaded results");
    apply_perturbation(corpus_graph, &candidates, &best.concretization)
        .map_err(|e| ExperimentError::Invalid(format!("{}: {e}", result.app_id)))
}

pub fn adversarial_retrain_eval(cfg: &RetrainConfig) -> Result<RetrainCurve, ExperimentError> {
    let corpus = cfg.experiment.load_corpus()?;
    let (train_ids, test_ids) = split_corpus(&corpus, cfg.experiment.train_fraction, cfg.experiment.seed);
    let spec: &CellSpec = cfg
        .experiment
        .cells
        .get(cfg.cell_index)
        .ok_or_else(|| ExperimentError::Invalid("cell_index out of range".into()))?;
    let cell_name = spec.name();
    let successes = load_successful_results(std::path::Path::new(&cfg.results_dir), &cell_name)?;
    if successes.len() < 20 {
        return Err(ExperimentError::Invalid(format!(
            "adversarial retraining needs at least 20 successful adversarial examples, found {}",
            successes.len()
        )));
    }

    // rebuild every adversarial example in problem space
    let mut aes: Vec<(String, FunctionCallGraph)> = Vec::new();
    for result in &successes {
        let graph = corpus
            .by_id(&result.app_id)
            .ok_or_else(|| ExperimentError::Invalid(format!("{} not in corpus", result.app_id)))?;
        aes.push((result.app_id.clone(), perturbed_graph(graph, result)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed ^ 0x7e74a1);
    aes.shuffle(&mut rng);
    let eval = aes.split_off(aes.len() / 2);
    let pool = aes;

    let mut points = Vec::new();
    for &fraction in &cfg.fractions {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(ExperimentError::Invalid(format!(
                "fraction {fraction} outside [0,1]"
            )));
        }
        let take = ((fraction * pool.len() as f64).ceil() as usize).min(pool.len());
        let model = retrain_model(
            &corpus,
            &train_ids,
            &test_ids,
            spec,
            &pool[..take],
            cfg.experiment.seed,
        )?;
        let mut still_evading = 0usize;
        for (_, graph) in &eval {
            if model.classify(graph)? == Verdict::Benign {
                still_evading += 1;
            }
        }
        let mut correct = 0usize;
        for &i in &test_ids {
            let g = &corpus.graphs[i];
            if (model.classify(g)? == Verdict::Malicious) == (g.label == AppLabel::Malicious) {
                correct += 1;
            }
        }
        points.push(RetrainPoint {
            fraction,
            asr: still_evading as f64 / eval.len().max(1) as f64,
            heldout_accuracy: correct as f64 / test_ids.len().max(1) as f64,
        });
    }
    Ok(RetrainCurve {
        cell: cell_name,
        evaluated_aes: eval.len(),
        retrain_pool: pool.len(),
        points,
    })
}

/// Retrains the cell with the given adversarial examples appended to
/// the training data as malicious samples. The feature vocabulary and
/// seed stay fixed; only the classifier refits.
fn retrain_model(
    corpus: &crate::corpus::Corpus,
    train_ids: &[usize],
    test_ids: &[usize],
    spec: &CellSpec,
    extra_malicious: &[(String, FunctionCallGraph)],
    seed: u64,
) -> Result<DetectorModel, ExperimentError> {
    if extra_malicious.is_empty() {
        // fraction 0 is the unmodified detector
        return Ok(train_cell(corpus, train_ids, test_ids, spec, seed)?
            .model
            .as_ref()
            .clone());
    }
    match &spec.extractor {
        ExtractorSpec::Gcn => {
            let mut data: Vec<(&FunctionCallGraph, bool)> = train_ids
                .iter()
                .map(|&i| {
                    let g = &corpus.graphs[i];
                    (g, g.label == AppLabel::Malicious)
                })
                .collect();
            data.extend(extra_malicious.iter().map(|(_, g)| (g, true)));
            let cfg = GcnTrainConfig {
                seed,
                ..GcnTrainConfig::default()
            };
            let (detector, _) = GcnDetector::train(&data, &cfg)?;
            Ok(DetectorModel::Gcn {
                name: spec.name(),
                detector,
            })
        }
        _ => {
            let base = train_cell(corpus, train_ids, test_ids, spec, seed)?;
            let DetectorModel::Vector {
                name, extractor, ..
            } = base.model.as_ref().clone()
            else {
                unreachable!("vector extractor spec builds a vector model");
            };
            let mut data: Vec<(FeatureVector, bool)> = train_ids
                .iter()
                .map(|&i| {
                    let g = &corpus.graphs[i];
                    (extractor.extract(g), g.label == AppLabel::Malicious)
                })
                .collect();
            data.extend(
                extra_malicious
                    .iter()
                    .map(|(_, g)| (extractor.extract(g), true)),
            );
            let classifier_name = spec
                .classifier
                .ok_or_else(|| ExperimentError::Invalid("cell needs a classifier".into()))?;
            let classifier = train_classifier(&classifier_name.spec(seed), &data)?;
            Ok(DetectorModel::Vector {
                name,
                extractor,
                classifier,
            })
        }
    }
}
