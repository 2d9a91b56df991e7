//! Boosted decision stumps: the tree-ensemble member of the
//! classifier suite. Each round fits the exhaustively best
//! single-feature threshold stump under the current sample weights.

use serde::{Deserialize, Serialize};

use crate::feature::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// +1: predict malicious when value > threshold, -1: inverted
    pub polarity: i8,
    pub alpha: f64,
}

impl Stump {
    /// +1 for malicious, -1 for benign.
    fn predict(&self, x: &[f64]) -> f64 {
        let raw = if x[self.feature] > self.threshold {
            1.0
        } else {
            -1.0
        };
        raw * self.polarity as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
}

impl AdaBoostModel {
    pub fn fit(rounds: usize, data: &[(FeatureVector, bool)]) -> Self {
        let n = data.len();
        let dim = data[0].0.values.len();
        let targets: Vec<f64> = data.iter().map(|(_, y)| if *y { 1.0 } else { -1.0 }).collect();
        let mut weights = vec![1.0 / n as f64; n];
        let mut stumps = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let (stump, error, predictions) = best_stump(data, dim, &weights, &targets);
            let eps = error.clamp(1e-10, 1.0 - 1e-10);
            let alpha = 0.5 * ((1.0 - eps) / eps).ln();
            let mut total = 0.0;
            for i in 0..n {
                weights[i] *= (-alpha * targets[i] * predictions[i]).exp();
                total += weights[i];
            }
            for w in &mut weights {
                *w /= total;
            }
            stumps.push(Stump {
                alpha,
                ..stump
            });
            if error <= 0.0 {
                break; // a perfect stump decides the ensemble
            }
        }
        AdaBoostModel { stumps }
    }

    pub(crate) fn margin(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.predict(x)).sum()
    }

    /// Logistic squashing of the ensemble margin, so the shared
    /// threshold rule (score > 0.5 means malicious) applies.
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.margin(x)).exp())
    }
}

/// Exhaustive weighted stump search: every feature, every midpoint
/// threshold (plus one below all values), both polarities. Ties keep
/// the first candidate in scan order, which makes fitting
/// deterministic.
fn best_stump(
    data: &[(FeatureVector, bool)],
    dim: usize,
    weights: &[f64],
    targets: &[f64],
) -> (Stump, f64, Vec<f64>) {
    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..dim {
        let mut values: Vec<f64> = data.iter().map(|(v, _)| v.values[feature]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
        values.dedup();
        let mut thresholds = Vec::with_capacity(values.len() + 1);
        thresholds.push(values[0] - 1.0);
        for pair in values.windows(2) {
            thresholds.push((pair[0] + pair[1]) / 2.0);
        }
        for &threshold in &thresholds {
            for polarity in [1i8, -1] {
                let stump = Stump {
                    feature,
                    threshold,
                    polarity,
                    alpha: 0.0,
                };
                let error: f64 = data
                    .iter()
                    .enumerate()
                    .filter(|(i, (v, _))| stump.predict(&v.values) != targets[*i])
                    .map(|(i, _)| weights[i])
                    .sum();
                if best.as_ref().is_none_or(|(_, e)| error < *e) {
                    best = Some((stump, error));
                }
            }
        }
    }
    let (stump, error) = best.expect("at least one candidate stump");
    let predictions = data.iter().map(|(v, _)| stump.predict(&v.values)).collect();
    (stump, error, predictions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            schema_id: "s".into(),
            values,
        }
    }

    #[test]
    fn threshold_separable_1d_reaches_zero_training_error() {
        let data: Vec<(FeatureVector, bool)> = (0..20)
            .map(|i| (fv(vec![i as f64]), i >= 10))
            .collect();
        let model = AdaBoostModel::fit(50, &data);
        for (v, y) in &data {
            assert_eq!(model.score(&v.values) > 0.5, *y);
        }
    }

    #[test]
    fn needs_multiple_stumps_for_interval_class() {
        // malicious iff value in [3, 7): not separable by one stump
        let data: Vec<(FeatureVector, bool)> = (0..10)
            .map(|i| (fv(vec![i as f64]), (3..7).contains(&i)))
            .collect();
        let model = AdaBoostModel::fit(50, &data);
        let correct = data
            .iter()
            .filter(|(v, y)| (model.score(&v.values) > 0.5) == *y)
            .count();
        assert!(correct >= 9, "boosted accuracy {correct}/10");
        assert!(model.stumps.len() > 1);
    }

    #[test]
    fn first_round_matches_exhaustive_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(4..16);
            let data: Vec<(FeatureVector, bool)> = (0..n)
                .map(|_| {
                    (
                        fv(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]),
                        rng.random_bool(0.5),
                    )
                })
                .collect();
            if data.iter().all(|(_, y)| *y) || data.iter().all(|(_, y)| !*y) {
                continue;
            }
            let weights = vec![1.0 / n as f64; n];
            let targets: Vec<f64> =
                data.iter().map(|(_, y)| if *y { 1.0 } else { -1.0 }).collect();
            let (stump, error, _) = best_stump(&data, 2, &weights, &targets);
            // reference: brute force over a dense threshold grid
            let mut best_ref = f64::INFINITY;
            for feature in 0..2 {
                for step in -40..=40 {
                    let threshold = step as f64 / 10.0 - 0.05;
                    for polarity in [1.0f64, -1.0] {
                        let err: f64 = data
                            .iter()
                            .enumerate()
                            .filter(|(i, (v, _))| {
                                let raw =
                                    if v.values[feature] > threshold { 1.0 } else { -1.0 };
                                raw * polarity != targets[*i]
                            })
                            .map(|(i, _)| weights[i])
                            .sum();
                        best_ref = best_ref.min(err);
                    }
                }
            }
            assert!(
                error <= best_ref + 1e-12,
                "stump error {error} worse than reference {best_ref} ({stump:?})"
            );
        }
    }
}
