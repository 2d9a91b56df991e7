//! Call-graph core: parse, project, perturb and serialize function
//! call graphs; construct legal candidate edges; emit manipulation
//! plans.

mod candidate;
mod error;
mod granularity;
mod graph;
mod io;
mod perturb;
mod plan;
mod project;
#[cfg(feature = "testutil")]
pub mod testutil;

pub use candidate::{candidate_endpoints, concretize_edge, CandidateSets};
pub use error::FcgError;
pub use granularity::{family_of, node_label, reproject_label, Granularity};
pub use graph::{AppLabel, FunctionCallGraph, FunctionNode};
pub use io::{parse_fcg, parse_fcg_str, to_canonical_json, write_fcg};
pub use perturb::apply_perturbation;
pub use plan::{emit_manipulation_plan, ExceptionKind, FunctionRef, ManipulationPlan, PlanEntry};
pub use project::{project_graph, AbstractEdge, AbstractGraph};
