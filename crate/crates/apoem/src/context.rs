//! Per-graph sampling context: candidate endpoints indexed by label at
//! every population granularity.
//!
//! Fresh edges during evolution are drawn abstract-first (uniform over
//! the label pairs realizable by candidates at the population's
//! granularity, then a uniform concrete realization). This gives each
//! population a search distribution native to its own granularity;
//! coarse populations concentrate probability on coarse label pairs
//! instead of inheriting the finer levels' label frequencies.

use std::collections::BTreeMap;

use rand::Rng;

use fcg_core::{
    candidate_endpoints, node_label, reproject_label, AbstractEdge, CandidateSets,
    FunctionCallGraph, Granularity,
};

#[derive(Debug)]
pub struct AttackContext<'g> {
    pub graph: &'g FunctionCallGraph,
    pub candidates: CandidateSets,
    caller_ids: Vec<u32>,
    callee_ids: Vec<u32>,
    caller_labels: BTreeMap<Granularity, Vec<String>>,
    callee_labels: BTreeMap<Granularity, Vec<String>>,
    caller_by_label: BTreeMap<(Granularity, String), Vec<u32>>,
    callee_by_label: BTreeMap<(Granularity, String), Vec<u32>>,
}

impl<'g> AttackContext<'g> {
    /// Returns `None` when the graph has no candidate callers or
    /// callees (the sample is unattackable).
    pub fn new(graph: &'g FunctionCallGraph) -> Option<Self> {
        let candidates = candidate_endpoints(graph);
        if !candidates.is_attackable() {
            return None;
        }
        let caller_ids: Vec<u32> = candidates.callers.iter().copied().collect();
        let callee_ids: Vec<u32> = candidates.callees.iter().copied().collect();
        let mut ctx = AttackContext {
            graph,
            candidates,
            caller_ids,
            callee_ids,
            caller_labels: BTreeMap::new(),
            callee_labels: BTreeMap::new(),
            caller_by_label: BTreeMap::new(),
            callee_by_label: BTreeMap::new(),
        };
        for level in Granularity::POPULATIONS {
            ctx.index_level(level);
        }
        Some(ctx)
    }

    fn index_level(&mut self, level: Granularity) {
        let index = |ids: &[u32],
                         labels: &mut BTreeMap<Granularity, Vec<String>>,
                         by_label: &mut BTreeMap<(Granularity, String), Vec<u32>>| {
            let mut grouped: BTreeMap<String, Vec<u32>> = BTreeMap::new();
            for &id in ids {
                let node = self.graph.node(id).expect("candidate id exists");
                grouped.entry(node_label(node, level)).or_default().push(id);
            }
            labels.insert(level, grouped.keys().cloned().collect());
            for (label, ids) in grouped {
                by_label.insert((level, label), ids);
            }
        };
        let caller_ids = self.caller_ids.clone();
        index(
            &caller_ids,
            &mut self.caller_labels,
            &mut self.caller_by_label,
        );
        let callee_ids = self.callee_ids.clone();
        index(
            &callee_ids,
            &mut self.callee_labels,
            &mut self.callee_by_label,
        );
    }

    /// Uniform concrete candidate pair, the initialization sampler.
    pub fn sample_concrete_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let caller = self.caller_ids[rng.random_range(0..self.caller_ids.len())];
        let callee = self.callee_ids[rng.random_range(0..self.callee_ids.len())];
        (caller, callee)
    }

    /// Label pair of a concrete pair at `level`.
    pub fn abstract_of(&self, pair: (u32, u32), level: Granularity) -> AbstractEdge {
        let label = |id: u32| node_label(self.graph.node(id).expect("valid id"), level);
        AbstractEdge {
            granularity: level,
            caller_label: label(pair.0),
            callee_label: label(pair.1),
        }
    }

    /// Uniform abstract edge over the label pairs realizable at
    /// `level`, with a uniform concretization: the evolution sampler.
    pub fn sample_edge<R: Rng + ?Sized>(
        &self,
        level: Granularity,
        rng: &mut R,
    ) -> (AbstractEdge, (u32, u32)) {
        let callers = &self.caller_labels[&level];
        let callees = &self.callee_labels[&level];
        let caller_label = callers[rng.random_range(0..callers.len())].clone();
        let callee_label = callees[rng.random_range(0..callees.len())].clone();
        let edge = AbstractEdge {
            granularity: level,
            caller_label,
            callee_label,
        };
        let pair = self
            .concretize(&edge, rng)
            .expect("labels come from the candidate index");
        (edge, pair)
    }

    /// Uniform qualifying concrete pair for `edge`, or `None` if no
    /// candidate realizes one of its labels.
    pub fn concretize<R: Rng + ?Sized>(
        &self,
        edge: &AbstractEdge,
        rng: &mut R,
    ) -> Option<(u32, u32)> {
        let callers = self
            .caller_by_label
            .get(&(edge.granularity, edge.caller_label.clone()))?;
        let callees = self
            .callee_by_label
            .get(&(edge.granularity, edge.callee_label.clone()))?;
        Some((
            callers[rng.random_range(0..callers.len())],
            callees[rng.random_range(0..callees.len())],
        ))
    }

    /// Uniformly picks a label at the finer level `to` that projects
    /// back onto `coarse_label`, among labels realized by candidates
    /// on the given side. `None` when nothing matches.
    pub fn refine_label<R: Rng + ?Sized>(
        &self,
        coarse_label: &str,
        from: Granularity,
        to: Granularity,
        callee_side: bool,
        rng: &mut R,
    ) -> Option<String> {
        debug_assert!(to < from, "refinement goes coarse to fine");
        let pool = if callee_side {
            &self.callee_labels[&to]
        } else {
            &self.caller_labels[&to]
        };
        let matches: Vec<&String> = pool
            .iter()
            .filter(|l| {
                reproject_label(l, to, from)
                    .map(|up| up == coarse_label)
                    .unwrap_or(false)
            })
            .collect();
        if matches.is_empty() {
            return None;
        }
        Some(matches[rng.random_range(0..matches.len())].clone())
    }

    /// Distinct realizable label pairs at `level`; the size of the
    /// abstract search alphabet.
    pub fn alphabet_size(&self, level: Granularity) -> usize {
        self.caller_labels[&level].len() * self.callee_labels[&level].len()
    }
}
