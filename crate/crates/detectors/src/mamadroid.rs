//! Markov-chain features over abstracted call graphs.
//!
//! The label vocabulary is fixed when the extractor is fitted on a
//! training corpus; labels unseen at inference map to a reserved
//! "other" state appended after the vocabulary.

use serde::{Deserialize, Serialize};

use fcg_core::{project_graph, FunctionCallGraph, Granularity};

use crate::error::DetectorError;
use crate::feature::{markov_matrix, FeatureVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamadroidExtractor {
    pub level: Granularity,
    /// sorted label vocabulary; state index = position, "other" = len
    pub vocab: Vec<String>,
}

impl MamadroidExtractor {
    /// Fixes the label vocabulary from a training corpus.
    pub fn fit<G: std::borrow::Borrow<FunctionCallGraph>>(
        corpus: &[G],
        level: Granularity,
    ) -> Result<Self, DetectorError> {
        if level == Granularity::Function {
            return Err(DetectorError::InvalidConfig(
                "markov features are defined for class, package and family levels".into(),
            ));
        }
        let mut vocab: Vec<String> = corpus
            .iter()
            .flat_map(|g| project_graph(g.borrow(), level).nodes)
            .collect();
        vocab.sort();
        vocab.dedup();
        Ok(MamadroidExtractor { level, vocab })
    }

    pub fn n_states(&self) -> usize {
        self.vocab.len() + 1
    }

    fn state_of(&self, label: &str) -> usize {
        self.vocab
            .binary_search_by(|v| v.as_str().cmp(label))
            .unwrap_or(self.vocab.len())
    }

    pub fn schema_id(&self) -> String {
        format!("mamadroid-{}-{}", self.level, self.n_states())
    }

    /// Flattened row-stochastic transition matrix of `g` at the fitted
    /// level, over vocabulary + other states.
    pub fn extract(&self, g: &FunctionCallGraph) -> FeatureVector {
        let n = self.n_states();
        let projected = project_graph(g, self.level);
        let values = markov_matrix(
            projected
                .edges
                .iter()
                .map(|((u, v), c)| ((self.state_of(u), self.state_of(v)), *c)),
            n,
        );
        FeatureVector {
            schema_id: self.schema_id(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fcg_core::{AppLabel, FunctionNode};

    fn node(id: u32, package: &str) -> FunctionNode {
        FunctionNode {
            id,
            package: package.into(),
            class_name: format!("C{id}"),
            method: format!("m{id}"),
            user_defined: false,
            is_public: true,
            simple_params: true,
        }
    }

    fn graph(nodes: Vec<FunctionNode>, edges: Vec<(u32, u32, u64)>) -> FunctionCallGraph {
        FunctionCallGraph::new("t", AppLabel::Unknown, 2020, 0, nodes, edges).unwrap()
    }

    #[test]
    fn single_transition_yields_indicator_row() {
        let g = graph(
            vec![node(0, "alpha.a"), node(1, "beta.b")],
            vec![(0, 1, 1)],
        );
        let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), Granularity::Family).unwrap();
        assert_eq!(ex.vocab, vec!["alpha", "beta"]);
        let f = ex.extract(&g);
        // 3 states (alpha, beta, other); row alpha = indicator of beta
        assert_eq!(f.values.len(), 9);
        assert_eq!(f.values[1], 1.0);
        assert_eq!(f.values.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn eleven_families_make_144_features() {
        let nodes: Vec<FunctionNode> =
            (0..11).map(|i| node(i, &format!("fam{i:02}.p"))).collect();
        let edges = (0..10).map(|i| (i, i + 1, 1)).collect();
        let g = graph(nodes, edges);
        let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), Granularity::Family).unwrap();
        assert_eq!(ex.vocab.len(), 11);
        assert_eq!(ex.extract(&g).values.len(), 144);
    }

    #[test]
    fn counts_normalize_within_rows() {
        let g = graph(
            vec![node(0, "a.p"), node(1, "b.p"), node(2, "c.p")],
            vec![(0, 1, 3), (0, 2, 1)],
        );
        let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), Granularity::Family).unwrap();
        let f = ex.extract(&g);
        let n = ex.n_states();
        assert_eq!(f.values[1], 0.75); // a -> b
        assert_eq!(f.values[2], 0.25); // a -> c
        let row_sum: f64 = f.values[..n].iter().sum();
        assert!((row_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_labels_fall_into_other_bucket() {
        let train = graph(vec![node(0, "a.p"), node(1, "b.p")], vec![(0, 1, 1)]);
        let ex = MamadroidExtractor::fit(std::slice::from_ref(&train), Granularity::Family).unwrap();
        let test = graph(vec![node(0, "zzz.p"), node(1, "b.p")], vec![(0, 1, 1)]);
        let f = ex.extract(&test);
        let n = ex.n_states();
        let other = n - 1;
        // transition recorded from the other row into "b"
        assert_eq!(f.values[other * n + 1], 1.0);
    }

    #[test]
    fn function_level_is_rejected() {
        let g = graph(vec![node(0, "a.p"), node(1, "b.p")], vec![(0, 1, 1)]);
        assert!(MamadroidExtractor::fit(std::slice::from_ref(&g), Granularity::Function).is_err());
    }
}
