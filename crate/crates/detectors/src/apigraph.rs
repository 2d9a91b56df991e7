//! Name-cluster features: API functions are clustered by the token
//! bags of their dotted names, and the call graph is re-expressed over
//! cluster ids before the Markov transition matrix is taken.
//!
//! States are the k clusters, plus one state for user-defined code and
//! one "other" state for API names unseen at fit time.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fcg_core::{node_label, FunctionCallGraph, Granularity};

use crate::error::DetectorError;
use crate::feature::{markov_matrix, FeatureVector};

/// Total assignment of API function names to cluster ids in [0, k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    pub k: usize,
    pub assignment: BTreeMap<String, u32>,
}

/// Splits a function-level label into its name tokens:
/// package dot-tokens, class and method.
fn name_tokens(label: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    for part in label.split("::") {
        for tok in part.split('.') {
            if !tok.is_empty() {
                tokens.push(tok);
            }
        }
    }
    tokens
}

/// Clusters the corpus API vocabulary with seeded k-means over
/// name-token bag vectors.
pub fn apigraph_fit<G: std::borrow::Borrow<FunctionCallGraph>>(
    corpus: &[G],
    k: usize,
    seed: u64,
) -> Result<ClusterMap, DetectorError> {
    if k < 2 {
        return Err(DetectorError::InvalidConfig("cluster count must be >= 2".into()));
    }
    if corpus.is_empty() {
        return Err(DetectorError::InvalidConfig("corpus must be non-empty".into()));
    }
    let mut names: BTreeSet<String> = BTreeSet::new();
    for g in corpus {
        for node in &g.borrow().nodes {
            if !node.user_defined {
                names.insert(node_label(node, Granularity::Function));
            }
        }
    }
    if k > names.len() {
        return Err(DetectorError::TooManyClusters {
            k,
            vocab: names.len(),
        });
    }
    let names: Vec<String> = names.into_iter().collect();
    let mut token_vocab: BTreeSet<&str> = BTreeSet::new();
    for name in &names {
        token_vocab.extend(name_tokens(name));
    }
    let token_index: BTreeMap<&str, usize> = token_vocab
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();
    let dim = token_index.len();
    let vectors: Vec<Vec<f64>> = names
        .iter()
        .map(|name| {
            let mut v = vec![0.0; dim];
            for tok in name_tokens(name) {
                v[token_index[tok]] += 1.0;
            }
            v
        })
        .collect();

    let assignment = kmeans(&vectors, k, 100, seed);
    Ok(ClusterMap {
        k,
        assignment: names
            .into_iter()
            .zip(assignment)
            .map(|(name, c)| (name, c as u32))
            .collect(),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ initialization followed by capped Lloyd iterations.
fn kmeans(points: &[Vec<f64>], k: usize, max_iter: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centroid; take the
            // first point not yet chosen as one
            (0..n)
                .find(|&i| centroids.iter().all(|c| sq_dist(&points[i], c) > 0.0))
                .unwrap_or(0)
        } else {
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(&points[i], centroids.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assignment = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .map(|c| (sq_dist(p, &centroids[c]), c))
                .min_by(|a, b| a.partial_cmp(b).expect("distances are finite"))
                .map(|(_, c)| c)
                .expect("k >= 1");
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty cluster with the point farthest
                // from its current centroid
                let far = (0..n)
                    .map(|i| (sq_dist(&points[i], &centroids[assignment[i]]), i))
                    .max_by(|a, b| a.partial_cmp(b).expect("finite"))
                    .map(|(_, i)| i)
                    .expect("non-empty");
                centroids[c] = points[far].clone();
                assignment[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    assignment
}

/// Feature extractor over a fitted cluster map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApigraphExtractor {
    pub map: ClusterMap,
}

impl ApigraphExtractor {
    /// States: clusters 0..k, user-defined bucket k, other bucket k+1.
    pub fn n_states(&self) -> usize {
        self.map.k + 2
    }

    pub fn schema_id(&self) -> String {
        format!("apigraph-k{}-{}", self.map.k, self.n_states())
    }

    fn state_of(&self, node: &fcg_core::FunctionNode) -> usize {
        if node.user_defined {
            self.map.k
        } else {
            let label = node_label(node, Granularity::Function);
            self.map
                .assignment
                .get(&label)
                .map(|&c| c as usize)
                .unwrap_or(self.map.k + 1)
        }
    }

    pub fn extract(&self, g: &FunctionCallGraph) -> FeatureVector {
        let n = self.n_states();
        let index = g.node_index();
        let values = markov_matrix(
            g.edges.iter().map(|(&(u, v), &c)| {
                ((self.state_of(index[&u]), self.state_of(index[&v])), c)
            }),
            n,
        );
        FeatureVector {
            schema_id: self.schema_id(),
            values,
        }
    }
}
