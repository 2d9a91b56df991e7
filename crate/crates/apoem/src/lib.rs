//! Co-evolutionary generation of minimal evading edge insertions:
//! one population per candidate feature granularity, coupled by
//! immigration and guided by a substitute model between target
//! queries.

mod attack;
mod config;
mod context;
mod individual;
pub mod ops;

pub use attack::{
    run_attack, run_random_insertion, AttackError, AttackResult, AttackStatus, GenMode,
    GenerationRecord, PopulationStats, RandomInsertionConfig,
};
pub use config::{ApoemConfig, MutationRates, SubstituteConfig};
pub use context::AttackContext;
pub use individual::{Fitness, Individual, Population};
