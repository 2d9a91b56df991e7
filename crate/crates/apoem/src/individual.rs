//! Individuals and populations of the co-evolutionary search.

use serde::{Deserialize, Serialize};

use fcg_core::{AbstractEdge, Granularity};

/// Threat degree of an evaluated individual: 1 - detector output, so
/// higher means closer to evading. Binary in target mode, continuous
/// in substitute mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub threat: f64,
}

/// One candidate perturbation: added abstract edges plus the frozen
/// function-level realization of each edge. The perturbation size L is
/// the edge count and is never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub granularity: Granularity,
    pub edges: Vec<AbstractEdge>,
    pub concretization: Vec<(u32, u32)>,
    pub fitness: Option<Fitness>,
    /// monotone creation counter, the final selection tie-break
    pub created_at: u64,
}

impl Individual {
    /// Perturbation amount L.
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn threat(&self) -> f64 {
        self.fitness.map(|f| f.threat).unwrap_or(0.0)
    }

    /// Structural invariants: parallel lists, L >= 1, every edge at
    /// the individual's granularity.
    pub fn is_well_formed(&self) -> bool {
        !self.edges.is_empty()
            && self.edges.len() == self.concretization.len()
            && self.edges.iter().all(|e| e.granularity == self.granularity)
    }
}

/// All members share the population's granularity.
#[derive(Debug, Clone)]
pub struct Population {
    pub granularity: Granularity,
    pub members: Vec<Individual>,
}

impl Population {
    pub fn new(granularity: Granularity) -> Self {
        Population {
            granularity,
            members: Vec::new(),
        }
    }

    /// Fraction of members whose last evaluation puts them on the
    /// evading side (threat >= 0.5). This is the per-generation
    /// survival proportion reported in attack traces.
    pub fn survival_proportion(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        let alive = self
            .members
            .iter()
            .filter(|m| m.threat() >= 0.5)
            .count();
        alive as f64 / self.members.len() as f64
    }

    /// Best (threat, size, age) member, if any are evaluated.
    pub fn best(&self) -> Option<&Individual> {
        self.members
            .iter()
            .filter(|m| m.fitness.is_some())
            .min_by(|a, b| super::ops::elite_order(a, b))
    }
}
