//! Exact accounting of target-model queries.
//!
//! Counters are atomic so concurrent evaluators can share one ledger;
//! a query is counted if and only if it succeeded.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Which stage of an attack issued the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryPhase {
    /// pre-attack check that the sample is detected at all
    Initialization,
    /// fitness evaluation of individuals
    Evolution,
    /// labeling samples to train the substitute
    SubstituteLabeling,
}

impl QueryPhase {
    pub const ALL: [QueryPhase; 3] = [
        QueryPhase::Initialization,
        QueryPhase::Evolution,
        QueryPhase::SubstituteLabeling,
    ];
}

#[derive(Debug, Default)]
pub struct QueryLedger {
    initialization: AtomicU64,
    evolution: AtomicU64,
    substitute_labeling: AtomicU64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record(&self, phase: QueryPhase) {
        let counter = match phase {
            QueryPhase::Initialization => &self.initialization,
            QueryPhase::Evolution => &self.evolution,
            QueryPhase::SubstituteLabeling => &self.substitute_labeling,
        };
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            initialization: self.initialization.load(Ordering::Relaxed),
            evolution: self.evolution.load(Ordering::Relaxed),
            substitute_labeling: self.substitute_labeling.load(Ordering::Relaxed),
        }
    }
}

/// Point-in-time ledger counts; total is always the phase sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub initialization: u64,
    pub evolution: u64,
    pub substitute_labeling: u64,
}

impl LedgerSnapshot {
    pub fn total(&self) -> u64 {
        self.initialization + self.evolution + self.substitute_labeling
    }
}

/// Totals plus phase breakdown, as reported in experiment outputs.
pub fn ledger_report(ledger: &QueryLedger) -> LedgerSnapshot {
    ledger.snapshot()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_ledger_is_all_zero() {
        let ledger = QueryLedger::new();
        let snap = ledger_report(&ledger);
        assert_eq!(snap, LedgerSnapshot::default());
        assert_eq!(snap.total(), 0);
    }

    #[test]
    fn phase_counts_sum_to_total() {
        let ledger = QueryLedger::new();
        for (i, phase) in [
            QueryPhase::Initialization,
            QueryPhase::Evolution,
            QueryPhase::Evolution,
            QueryPhase::SubstituteLabeling,
        ]
        .iter()
        .enumerate()
        {
            ledger.record(*phase);
            assert_eq!(ledger.total(), i as u64 + 1);
        }
        let snap = ledger.snapshot();
        assert_eq!(snap.initialization, 1);
        assert_eq!(snap.evolution, 2);
        assert_eq!(snap.substitute_labeling, 1);
        assert_eq!(snap.total(), 4);
    }
}
