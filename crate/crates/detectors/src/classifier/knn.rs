//! k-nearest-neighbor over stored training vectors.

use serde::{Deserialize, Serialize};

use crate::feature::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train: Vec<(Vec<f64>, bool)>,
}

impl KnnModel {
    pub fn fit(k: usize, data: &[(FeatureVector, bool)]) -> Self {
        KnnModel {
            k,
            train: data
                .iter()
                .map(|(v, y)| (v.values.clone(), *y))
                .collect(),
        }
    }

    /// Fraction of malicious labels among the k nearest training
    /// points. Exact distance ties break toward the lower training
    /// index, which makes the neighbor set deterministic.
    pub(crate) fn score(&self, query: &[f64]) -> f64 {
        let mut by_distance: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, (v, _))| (sq_dist(v, query), i))
            .collect();
        by_distance.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let k = self.k.min(by_distance.len());
        let malicious = by_distance[..k]
            .iter()
            .filter(|(_, i)| self.train[*i].1)
            .count();
        malicious as f64 / k as f64
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
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
    fn distance_ties_break_by_training_index() {
        // two points equidistant from the query with opposite labels;
        // 1-NN must pick index 0
        let m = KnnModel::fit(1, &[(fv(vec![1.0]), true), (fv(vec![-1.0]), false)]);
        assert_eq!(m.score(&[0.0]), 1.0);
        let m = KnnModel::fit(1, &[(fv(vec![1.0]), false), (fv(vec![-1.0]), true)]);
        assert_eq!(m.score(&[0.0]), 0.0);
    }

    #[test]
    fn matches_exhaustive_reference_on_random_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(3..20);
            let dim = rng.random_range(1..4);
            let data: Vec<(FeatureVector, bool)> = (0..n)
                .map(|_| {
                    let values = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (fv(values), rng.random_bool(0.5))
                })
                .collect();
            let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            for k in [1usize, 3] {
                let model = KnnModel::fit(k, &data);
                // independent reference: full selection sort of
                // (distance, index) pairs
                let mut pairs: Vec<(f64, usize)> = data
                    .iter()
                    .enumerate()
                    .map(|(i, (v, _))| {
                        let d: f64 = v
                            .values
                            .iter()
                            .zip(&query)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (d, i)
                    })
                    .collect();
                let mut expected = 0usize;
                let kk = k.min(pairs.len());
                for _ in 0..kk {
                    let (pos, _) = pairs
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                        .unwrap();
                    let (_, idx) = pairs.remove(pos);
                    if data[idx].1 {
                        expected += 1;
                    }
                }
                assert_eq!(model.score(&query), expected as f64 / kk as f64);
            }
        }
    }
}
