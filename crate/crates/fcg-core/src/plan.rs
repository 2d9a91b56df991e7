//! Machine-readable manipulation plans.
//!
//! A plan lists the caller/callee function pairs to wire together with
//! a try-catch trap, plus which guaranteed runtime exception guards
//! each inserted call. Emitting the plan is where this artifact stops:
//! applying it to smali code is external tooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSets;
use crate::error::FcgError;
use crate::graph::FunctionCallGraph;

/// The exception template placed in front of the inserted call so the
/// call statement itself is never executed. Three analytically
/// guaranteed variants keep the inserted code non-stationary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionKind {
    ArrayIndexOutOfBounds,
    ArithmeticDivZero,
    NumberFormat,
}

impl ExceptionKind {
    pub const ALL: [ExceptionKind; 3] = [
        ExceptionKind::ArrayIndexOutOfBounds,
        ExceptionKind::ArithmeticDivZero,
        ExceptionKind::NumberFormat,
    ];
}

/// Fully qualified function reference in a plan entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionRef {
    pub package: String,
    pub class: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub caller: FunctionRef,
    pub callee: FunctionRef,
    pub exception: ExceptionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulationPlan {
    pub app_id: String,
    pub insertions: Vec<PlanEntry>,
}

impl ManipulationPlan {
    /// Canonical pretty-printed JSON, newline terminated.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, FcgError> {
        serde_json::from_str(s).map_err(|e| FcgError::malformed(format!("plan: {e}")))
    }
}

/// Resolves each insertion to full function triples and assigns each a
/// uniformly random exception template.
pub fn emit_manipulation_plan<R: Rng + ?Sized>(
    g: &FunctionCallGraph,
    candidates: &CandidateSets,
    insertions: &[(u32, u32)],
    rng: &mut R,
) -> Result<ManipulationPlan, FcgError> {
    let mut entries = Vec::with_capacity(insertions.len());
    for &(caller, callee) in insertions {
        if !candidates.callers.contains(&caller) || !candidates.callees.contains(&callee) {
            return Err(FcgError::IllegalInsertion {
                caller,
                callee,
                reason: "pair violates candidate rules".into(),
            });
        }
        let as_ref = |id: u32| {
            let n = g.node(id).expect("candidate id exists");
            FunctionRef {
                package: n.package.clone(),
                class: n.class_name.clone(),
                method: n.method.clone(),
            }
        };
        let exception = ExceptionKind::ALL[rng.random_range(0..ExceptionKind::ALL.len())];
        entries.push(PlanEntry {
            caller: as_ref(caller),
            callee: as_ref(callee),
            exception,
        });
    }
    Ok(ManipulationPlan {
        app_id: g.app_id.clone(),
        insertions: entries,
    })
}
