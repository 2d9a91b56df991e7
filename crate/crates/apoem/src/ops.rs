//! The evolution operators: initialization, elitist selection,
//! immigration, crossover and mutation.

use std::cmp::Ordering;

use rand::Rng;

use fcg_core::{reproject_label, Granularity};

use crate::config::{ApoemConfig, MutationRates};
use crate::context::AttackContext;
use crate::individual::{Individual, Population};

/// Monotone creation counter shared by all operators of one attack.
#[derive(Debug, Default)]
pub struct CreationCounter(u64);

impl CreationCounter {
    pub fn next(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

/// Builds one population per configured granularity, each with N
/// individuals whose sizes are uniform in [1, ceil(frac * E_total)].
/// Initial abstract edges are projections of uniformly sampled
/// concrete candidate pairs.
pub fn init_populations<R: Rng + ?Sized>(
    ctx: &AttackContext,
    cfg: &ApoemConfig,
    counter: &mut CreationCounter,
    rng: &mut R,
) -> Vec<Population> {
    let max_size = cfg.init_size_max(ctx.graph.e_total());
    cfg.populations
        .iter()
        .map(|&granularity| {
            let mut pop = Population::new(granularity);
            for _ in 0..cfg.survivors {
                let size = rng.random_range(1..=max_size);
                let mut edges = Vec::with_capacity(size);
                let mut concretization = Vec::with_capacity(size);
                for _ in 0..size {
                    let pair = ctx.sample_concrete_pair(rng);
                    edges.push(ctx.abstract_of(pair, granularity));
                    concretization.push(pair);
                }
                pop.members.push(Individual {
                    granularity,
                    edges,
                    concretization,
                    fitness: None,
                    created_at: counter.next(),
                });
            }
            pop
        })
        .collect()
}

/// Selection order: higher threat first, then fewer edges, then
/// earlier creation.
pub fn elite_order(a: &Individual, b: &Individual) -> Ordering {
    b.threat()
        .partial_cmp(&a.threat())
        .expect("threat is finite")
        .then(a.size().cmp(&b.size()))
        .then(a.created_at.cmp(&b.created_at))
}

/// Keeps the lexicographically fittest min(N, |pop|) members.
pub fn select_elite(pop: &mut Population, survivors: usize) {
    pop.members.sort_by(elite_order);
    pop.members.truncate(survivors);
}

/// Copies the top `migrants` members of every population into every
/// other population, translating granularity: projection when moving
/// fine to coarse (concretization preserved), random consistent
/// refinement when moving coarse to fine (concretization redrawn).
/// Untranslatable migrants are skipped.
pub fn immigrate<R: Rng + ?Sized>(
    populations: &mut [Population],
    ctx: &AttackContext,
    migrants: usize,
    counter: &mut CreationCounter,
    rng: &mut R,
) {
    let mut arrivals: Vec<(usize, Individual)> = Vec::new();
    for src in 0..populations.len() {
        for dst in 0..populations.len() {
            if src == dst {
                continue;
            }
            let to = populations[dst].granularity;
            for member in populations[src].members.iter().take(migrants) {
                match translate(member, to, ctx, counter, rng) {
                    Some(translated) => arrivals.push((dst, translated)),
                    None => log::debug!(
                        "skipping infeasible migrant {} -> {}",
                        member.granularity,
                        to
                    ),
                }
            }
        }
    }
    for (dst, individual) in arrivals {
        populations[dst].members.push(individual);
    }
}

fn translate<R: Rng + ?Sized>(
    source: &Individual,
    to: Granularity,
    ctx: &AttackContext,
    counter: &mut CreationCounter,
    rng: &mut R,
) -> Option<Individual> {
    let from = source.granularity;
    debug_assert_ne!(from, to);
    if to > from {
        // fine to coarse: project labels, keep the concrete pairs
        let edges = source
            .edges
            .iter()
            .map(|e| {
                Some(fcg_core::AbstractEdge {
                    granularity: to,
                    caller_label: reproject_label(&e.caller_label, from, to)?,
                    callee_label: reproject_label(&e.callee_label, from, to)?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Individual {
            granularity: to,
            edges,
            concretization: source.concretization.clone(),
            fitness: None,
            created_at: counter.next(),
        })
    } else {
        // coarse to fine: refine each label uniformly among realized
        // finer labels, then draw a fresh concretization
        let mut edges = Vec::with_capacity(source.edges.len());
        let mut concretization = Vec::with_capacity(source.edges.len());
        for e in &source.edges {
            let caller_label = ctx.refine_label(&e.caller_label, from, to, false, rng)?;
            let callee_label = ctx.refine_label(&e.callee_label, from, to, true, rng)?;
            let edge = fcg_core::AbstractEdge {
                granularity: to,
                caller_label,
                callee_label,
            };
            let pair = ctx.concretize(&edge, rng)?;
            edges.push(edge);
            concretization.push(pair);
        }
        Some(Individual {
            granularity: to,
            edges,
            concretization,
            fitness: None,
            created_at: counter.next(),
        })
    }
}

/// Appends 2K offspring: for each of K parent pairs (distinct members,
/// uniformly drawn), the trailing floor(n/2) edges of each parent are
/// exchanged together with their concretizations.
pub fn crossover_population<R: Rng + ?Sized>(
    pop: &mut Population,
    pairs: usize,
    counter: &mut CreationCounter,
    rng: &mut R,
) {
    if pop.members.len() < 2 {
        return;
    }
    let len = pop.members.len();
    for _ in 0..pairs {
        let first = rng.random_range(0..len);
        let mut second = rng.random_range(0..len - 1);
        if second >= first {
            second += 1;
        }
        let (a, b) = (&pop.members[first], &pop.members[second]);
        let keep_a = a.size() - a.size() / 2;
        let keep_b = b.size() - b.size() / 2;
        let child = |head: &Individual, head_keep: usize, tail: &Individual, tail_keep: usize, id: u64| {
            let mut edges = head.edges[..head_keep].to_vec();
            edges.extend_from_slice(&tail.edges[tail_keep..]);
            let mut concretization = head.concretization[..head_keep].to_vec();
            concretization.extend_from_slice(&tail.concretization[tail_keep..]);
            Individual {
                granularity: head.granularity,
                edges,
                concretization,
                fitness: None,
                created_at: id,
            }
        };
        let o1 = child(a, keep_a, b, keep_b, counter.next());
        let o2 = child(b, keep_b, a, keep_a, counter.next());
        debug_assert!(o1.is_well_formed() && o2.is_well_formed());
        pop.members.push(o1);
        pop.members.push(o2);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MutationMode {
    Add,
    Remove,
    Exchange,
}

fn draw_mode<R: Rng + ?Sized>(rates: &MutationRates, rng: &mut R) -> MutationMode {
    let draw: f64 = rng.random();
    if draw < rates.add {
        MutationMode::Add
    } else if draw < rates.add + rates.remove {
        MutationMode::Remove
    } else {
        MutationMode::Exchange
    }
}

/// Appends one mutant per member of `pop.members[..survivors]`:
/// add appends a fresh sampled edge, remove deletes a uniform edge
/// (skipped at size 1 so individuals never become empty), exchange
/// replaces a uniform edge with a fresh one.
pub fn mutate_population<R: Rng + ?Sized>(
    pop: &mut Population,
    survivors: usize,
    ctx: &AttackContext,
    rates: &MutationRates,
    counter: &mut CreationCounter,
    rng: &mut R,
) {
    let count = survivors.min(pop.members.len());
    for i in 0..count {
        let mode = draw_mode(rates, rng);
        let parent = &pop.members[i];
        let mut edges = parent.edges.clone();
        let mut concretization = parent.concretization.clone();
        match mode {
            MutationMode::Add => {
                let (edge, pair) = ctx.sample_edge(pop.granularity, rng);
                edges.push(edge);
                concretization.push(pair);
            }
            MutationMode::Remove => {
                if edges.len() > 1 {
                    let victim = rng.random_range(0..edges.len());
                    edges.remove(victim);
                    concretization.remove(victim);
                }
            }
            MutationMode::Exchange => {
                let victim = rng.random_range(0..edges.len());
                let (edge, pair) = ctx.sample_edge(pop.granularity, rng);
                edges[victim] = edge;
                concretization[victim] = pair;
            }
        }
        pop.members.push(Individual {
            granularity: pop.granularity,
            edges,
            concretization,
            fitness: None,
            created_at: counter.next(),
        });
    }
}
