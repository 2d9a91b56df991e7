//! Search configuration and its defaults.

use serde::{Deserialize, Serialize};

use fcg_core::Granularity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub add: f64,
    pub remove: f64,
    pub exchange: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            add: 0.3,
            remove: 0.3,
            exchange: 0.4,
        }
    }
}

impl MutationRates {
    pub fn is_valid(&self) -> bool {
        let in_range =
            |r: f64| (0.0..=1.0).contains(&r);
        in_range(self.add)
            && in_range(self.remove)
            && in_range(self.exchange)
            && (self.add + self.remove + self.exchange - 1.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstituteConfig {
    pub enabled: bool,
    pub hidden: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    /// per-epoch training subsample drawn from the buffer; keeps one
    /// substitute generation cheap at desk scale
    pub train_batch: usize,
}

impl Default for SubstituteConfig {
    fn default() -> Self {
        SubstituteConfig {
            enabled: true,
            hidden: 32,
            learning_rate: 0.05,
            buffer_capacity: 2048,
            train_batch: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApoemConfig {
    /// N: survivors kept per population each generation
    pub survivors: usize,
    /// r_max: generation cap
    pub r_max: usize,
    /// K: parent pairs per population per generation (default N/2)
    pub crossover_pairs: Option<usize>,
    pub mutation: MutationRates,
    /// elite copies sent along each directed population pair
    pub migrants_per_direction: usize,
    /// generations without best-size improvement before stopping
    pub patience: usize,
    /// initial individual size is uniform in [1, ceil(frac * E_total)]
    pub init_size_frac: f64,
    /// individuals labeled by the target per population in a
    /// substitute generation
    pub target_label_sample_size: usize,
    /// optional hard cap on target queries
    pub max_queries: Option<u64>,
    pub populations: Vec<Granularity>,
    pub substitute: SubstituteConfig,
    pub seed: u64,
}

impl Default for ApoemConfig {
    fn default() -> Self {
        ApoemConfig {
            survivors: 20,
            r_max: 200,
            crossover_pairs: None,
            mutation: MutationRates::default(),
            migrants_per_direction: 2,
            patience: 10,
            init_size_frac: 0.05,
            target_label_sample_size: 4,
            max_queries: None,
            populations: Granularity::POPULATIONS.to_vec(),
            substitute: SubstituteConfig::default(),
            seed: 0,
        }
    }
}

impl ApoemConfig {
    pub fn crossover_pairs(&self) -> usize {
        self.crossover_pairs.unwrap_or(self.survivors / 2)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.survivors < 2 {
            return Err("survivors must be >= 2".into());
        }
        if !self.mutation.is_valid() {
            return Err("mutation rates must be in [0,1] and sum to 1".into());
        }
        if self.populations.is_empty() {
            return Err("at least one population granularity required".into());
        }
        if self.populations.contains(&Granularity::Function) {
            return Err("function level is the concretization substrate, not a population".into());
        }
        if !(0.0..=1.0).contains(&self.init_size_frac) {
            return Err("init_size_frac must be in [0,1]".into());
        }
        Ok(())
    }

    /// Upper bound of the initial size range for a graph with
    /// `e_total` calls.
    pub fn init_size_max(&self, e_total: u64) -> usize {
        ((e_total as f64 * self.init_size_frac).ceil() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(ApoemConfig::default().validate().is_ok());
        assert_eq!(ApoemConfig::default().crossover_pairs(), 10);
    }

    #[test]
    fn bad_rates_rejected() {
        let cfg = ApoemConfig {
            mutation: MutationRates {
                add: 0.5,
                remove: 0.5,
                exchange: 0.5,
            },
            ..ApoemConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn init_range_scales_with_graph_size() {
        let cfg = ApoemConfig::default();
        assert_eq!(cfg.init_size_max(100), 5);
        assert_eq!(cfg.init_size_max(1), 1);
        assert_eq!(cfg.init_size_max(0), 1);
    }
}
