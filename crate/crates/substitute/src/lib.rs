//! Substitute model: a from-scratch GCN scoring perturbed
//! function-level call graphs, trained on query-reply pairs.

mod buffer;
mod gcn;

pub use buffer::{BufferEntry, ReplayBuffer};
pub use gcn::{
    degree_features, degree_features_with, norm_adjacency, GcnError, GcnGrads, GcnModel, GcnStack,
    NormAdj, StackCache, StackGrads,
};
