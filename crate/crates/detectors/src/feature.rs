//! Dense feature vectors and the shared transition-matrix builder.

use serde::{Deserialize, Serialize};

/// A dense feature vector tagged with the schema (extractor and
/// granularity) that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Row-major row-stochastic matrix over `n_states` states built from
/// transition counts. Rows with no outgoing count stay all-zero.
pub fn markov_matrix(
    transitions: impl Iterator<Item = ((usize, usize), u64)>,
    n_states: usize,
) -> Vec<f64> {
    let mut matrix = vec![0.0f64; n_states * n_states];
    for ((from, to), count) in transitions {
        debug_assert!(from < n_states && to < n_states);
        matrix[from * n_states + to] += count as f64;
    }
    for row in 0..n_states {
        let cells = &mut matrix[row * n_states..(row + 1) * n_states];
        let total: f64 = cells.iter().sum();
        if total > 0.0 {
            for v in cells {
                *v /= total;
            }
        }
    }
    matrix
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_normalize_or_stay_zero() {
        let m = markov_matrix([((0, 1), 3), ((0, 2), 1)].into_iter(), 3);
        assert_eq!(m[1], 0.75);
        assert_eq!(m[2], 0.25);
        // rows 1 and 2 have no out-count
        assert!(m[3..].iter().all(|&v| v == 0.0));
    }
}
