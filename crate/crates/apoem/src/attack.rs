//! The attack driver: evaluate, select, immigrate, cross over and
//! mutate until an evading perturbation stops shrinking, the budget
//! runs out, or the generation cap is hit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use fcg_core::{apply_perturbation, FcgError, FunctionCallGraph, Granularity};
use oracle::{query, LedgerSnapshot, OracleEndpoint, OracleError, QueryLedger, QueryPhase, Verdict};
use substitute::{GcnError, GcnModel, ReplayBuffer};

use crate::config::ApoemConfig;
use crate::context::AttackContext;
use crate::individual::{Fitness, Individual, Population};
use crate::ops::{
    crossover_population, elite_order, immigrate, init_populations, mutate_population,
    select_elite, CreationCounter,
};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("target labels the unperturbed sample benign; nothing to evade")]
    VacuousTarget,

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error(transparent)]
    Graph(#[from] FcgError),

    #[error(transparent)]
    Substitute(#[from] GcnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStatus {
    Evaded,
    FailedUnattackable,
    FailedBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    Target,
    Substitute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub granularity: Granularity,
    pub best_threat: f64,
    pub best_size: usize,
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub r: usize,
    pub mode: GenMode,
    pub populations: Vec<PopulationStats>,
    pub cumulative_queries: u64,
}

/// Outcome of one attack run. `status == Evaded` implies `best` holds
/// a target-confirmed evading individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub app_id: String,
    pub status: AttackStatus,
    pub best: Option<Individual>,
    pub generations: usize,
    pub queries: LedgerSnapshot,
    /// target-model interactions (ledger total)
    pub ir: u64,
    /// added-to-total edge ratio of the best evader, 0 when none
    pub apr: f64,
    pub e_total: u64,
    pub trycatch_count: u64,
    pub per_generation: Vec<GenerationRecord>,
}

impl AttackResult {
    pub fn to_canonical_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("attack result serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn unattackable(g: &FunctionCallGraph) -> Self {
        AttackResult {
            app_id: g.app_id.clone(),
            status: AttackStatus::FailedUnattackable,
            best: None,
            generations: 0,
            queries: LedgerSnapshot::default(),
            ir: 0,
            apr: 0.0,
            e_total: g.e_total(),
            trycatch_count: g.trycatch_count,
            per_generation: Vec::new(),
        }
    }
}

/// Tracks the smallest target-confirmed evader seen so far.
struct EvaderTracker {
    best: Option<Individual>,
    improved_this_generation: bool,
}

impl EvaderTracker {
    fn new() -> Self {
        EvaderTracker {
            best: None,
            improved_this_generation: false,
        }
    }

    fn offer(&mut self, candidate: &Individual) {
        let better = match &self.best {
            None => true,
            Some(best) => candidate.size() < best.size(),
        };
        if better {
            let mut confirmed = candidate.clone();
            confirmed.fitness = Some(Fitness { threat: 1.0 });
            self.best = Some(confirmed);
            self.improved_this_generation = true;
        }
    }
}

pub fn run_attack(
    g: &FunctionCallGraph,
    endpoint: &OracleEndpoint,
    cfg: &ApoemConfig,
) -> Result<AttackResult, AttackError> {
    cfg.validate().map_err(AttackError::Config)?;
    let Some(ctx) = AttackContext::new(g) else {
        return Ok(AttackResult::unattackable(g));
    };
    let ledger = QueryLedger::new();
    if query(endpoint, &ledger, QueryPhase::Initialization, g)? == Verdict::Benign {
        return Err(AttackError::VacuousTarget);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counter = CreationCounter::default();
    let mut populations = init_populations(&ctx, cfg, &mut counter, &mut rng);
    let mut substitute = cfg
        .substitute
        .enabled
        .then(|| GcnModel::init(cfg.substitute.hidden, &mut rng));
    let mut buffer = ReplayBuffer::new(cfg.substitute.buffer_capacity);
    let base = Arc::new(g.clone());

    let mut tracker = EvaderTracker::new();
    let mut stagnation = 0usize;
    let mut evaderless_target_generations = 0usize;
    let mut trace: Vec<GenerationRecord> = Vec::new();
    let mut generations = 0usize;
    let mut status = None;

    for r in 1..=cfg.r_max {
        generations = r;
        let substitute_mode = substitute.is_some()
            && (r as f64 - 3.0) / cfg.r_max as f64 > rng.random::<f64>();
        let mode = if substitute_mode {
            GenMode::Substitute
        } else {
            GenMode::Target
        };
        tracker.improved_this_generation = false;

        for pop in &mut populations {
            evaluate_population(
                pop,
                &ctx,
                endpoint,
                &ledger,
                mode,
                substitute.as_ref(),
                &base,
                &mut buffer,
                &mut tracker,
            )?;
        }

        if mode == GenMode::Substitute {
            label_top_individuals(
                &populations,
                &ctx,
                endpoint,
                &ledger,
                cfg.target_label_sample_size,
                &base,
                &mut buffer,
                &mut tracker,
            )?;
            if let Some(model) = substitute.as_mut() {
                train_substitute(model, &buffer, cfg, &mut rng)?;
            }
        }

        trace.push(GenerationRecord {
            r,
            mode,
            populations: populations
                .iter()
                .map(|p| {
                    let best = p.best();
                    PopulationStats {
                        granularity: p.granularity,
                        best_threat: best.map(|b| b.threat()).unwrap_or(0.0),
                        best_size: best.map(|b| b.size()).unwrap_or(0),
                        survival: p.survival_proportion(),
                    }
                })
                .collect(),
            cumulative_queries: ledger.total(),
        });

        // termination
        if let Some(best) = &tracker.best {
            if tracker.improved_this_generation {
                stagnation = 0;
            } else {
                stagnation += 1;
            }
            let at_floor = best.size() == 1;
            if at_floor || stagnation >= cfg.patience {
                status = Some(AttackStatus::Evaded);
                break;
            }
        } else if mode == GenMode::Target && r > cfg.r_max / 2 {
            // the give-up window opens at half budget: an unbroken
            // streak of evader-less target generations ends the run
            evaderless_target_generations += 1;
            if evaderless_target_generations >= cfg.patience {
                status = Some(AttackStatus::FailedBudget);
                break;
            }
        } else if mode == GenMode::Substitute {
            evaderless_target_generations = 0;
        }
        if let Some(budget) = cfg.max_queries {
            if ledger.total() >= budget {
                status = Some(if tracker.best.is_some() {
                    AttackStatus::Evaded
                } else {
                    AttackStatus::FailedBudget
                });
                break;
            }
        }

        for pop in &mut populations {
            select_elite(pop, cfg.survivors);
        }
        immigrate(
            &mut populations,
            &ctx,
            cfg.migrants_per_direction,
            &mut counter,
            &mut rng,
        );
        for pop in &mut populations {
            crossover_population(pop, cfg.crossover_pairs(), &mut counter, &mut rng);
            mutate_population(
                pop,
                cfg.survivors,
                &ctx,
                &cfg.mutation,
                &mut counter,
                &mut rng,
            );
        }
    }

    let status = status.unwrap_or(if tracker.best.is_some() {
        AttackStatus::Evaded
    } else {
        AttackStatus::FailedBudget
    });
    let best = tracker.best;
    let apr = best
        .as_ref()
        .map(|b| b.size() as f64 / g.e_total() as f64)
        .unwrap_or(0.0);
    Ok(AttackResult {
        app_id: g.app_id.clone(),
        status,
        best,
        generations,
        queries: ledger.snapshot(),
        ir: ledger.total(),
        apr,
        e_total: g.e_total(),
        trycatch_count: g.trycatch_count,
        per_generation: trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_population(
    pop: &mut Population,
    ctx: &AttackContext,
    endpoint: &OracleEndpoint,
    ledger: &QueryLedger,
    mode: GenMode,
    substitute: Option<&GcnModel>,
    base: &Arc<FunctionCallGraph>,
    buffer: &mut ReplayBuffer,
    tracker: &mut EvaderTracker,
) -> Result<(), AttackError> {
    for member in &mut pop.members {
        let threat = match mode {
            GenMode::Target => {
                let perturbed =
                    apply_perturbation(ctx.graph, &ctx.candidates, &member.concretization)?;
                let verdict = query(endpoint, ledger, QueryPhase::Evolution, &perturbed)?;
                buffer.record(
                    base.clone(),
                    member.concretization.clone(),
                    verdict == Verdict::Malicious,
                );
                if verdict == Verdict::Benign {
                    tracker.offer(member);
                    1.0
                } else {
                    0.0
                }
            }
            GenMode::Substitute => {
                let model = substitute.expect("substitute mode requires a model");
                1.0 - model.score(ctx.graph, &member.concretization)?
            }
        };
        member.fitness = Some(Fitness { threat });
    }
    Ok(())
}

/// In a substitute generation, the top individuals per population are
/// labeled by the target to grow the replay buffer (and may confirm
/// evaders as a side effect).
#[allow(clippy::too_many_arguments)]
fn label_top_individuals(
    populations: &[Population],
    ctx: &AttackContext,
    endpoint: &OracleEndpoint,
    ledger: &QueryLedger,
    sample_size: usize,
    base: &Arc<FunctionCallGraph>,
    buffer: &mut ReplayBuffer,
    tracker: &mut EvaderTracker,
) -> Result<(), AttackError> {
    for pop in populations {
        let mut order: Vec<&Individual> = pop.members.iter().collect();
        order.sort_by(|a, b| elite_order(a, b));
        for member in order.into_iter().take(sample_size) {
            let perturbed =
                apply_perturbation(ctx.graph, &ctx.candidates, &member.concretization)?;
            let verdict = query(endpoint, ledger, QueryPhase::SubstituteLabeling, &perturbed)?;
            buffer.record(
                base.clone(),
                member.concretization.clone(),
                verdict == Verdict::Malicious,
            );
            if verdict == Verdict::Benign {
                tracker.offer(member);
            }
        }
    }
    Ok(())
}

/// One full-batch step on a seeded subsample of the replay buffer.
fn train_substitute(
    model: &mut GcnModel,
    buffer: &ReplayBuffer,
    cfg: &ApoemConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), AttackError> {
    if buffer.is_empty() {
        return Ok(());
    }
    let take = cfg.substitute.train_batch.min(buffer.len());
    let indices = rand::seq::index::sample(rng, buffer.len(), take);
    let batch: Vec<(&FunctionCallGraph, &[(u32, u32)], bool)> = indices
        .iter()
        .map(|i| {
            let entry = buffer.get(i).expect("sampled index in range");
            (
                entry.graph.as_ref(),
                entry.insertions.as_slice(),
                entry.malicious,
            )
        })
        .collect();
    let loss = model.train_epoch(&batch, cfg.substitute.learning_rate)?;
    log::debug!("substitute epoch: loss {loss:.4}, buffer {}", buffer.len());
    Ok(())
}

/// Config for the random-insertion baseline: fresh uniform insertion
/// sets are queried until one evades or the budget is spent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomInsertionConfig {
    pub budget: u64,
    pub size_frac: f64,
    pub seed: u64,
}

pub fn run_random_insertion(
    g: &FunctionCallGraph,
    endpoint: &OracleEndpoint,
    cfg: &RandomInsertionConfig,
) -> Result<AttackResult, AttackError> {
    let Some(ctx) = AttackContext::new(g) else {
        return Ok(AttackResult::unattackable(g));
    };
    let ledger = QueryLedger::new();
    if query(endpoint, &ledger, QueryPhase::Initialization, g)? == Verdict::Benign {
        return Err(AttackError::VacuousTarget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_size = ((g.e_total() as f64 * cfg.size_frac).ceil() as usize).max(1);
    let mut rounds = 0usize;
    let mut best: Option<Individual> = None;
    while ledger.total() < cfg.budget {
        rounds += 1;
        let size = rng.random_range(1..=max_size);
        let concretization: Vec<(u32, u32)> =
            (0..size).map(|_| ctx.sample_concrete_pair(&mut rng)).collect();
        let perturbed = apply_perturbation(ctx.graph, &ctx.candidates, &concretization)?;
        let verdict = query(endpoint, &ledger, QueryPhase::Evolution, &perturbed)?;
        if verdict == Verdict::Benign {
            let edges = concretization
                .iter()
                .map(|&pair| ctx.abstract_of(pair, Granularity::Function))
                .collect();
            best = Some(Individual {
                granularity: Granularity::Function,
                edges,
                concretization,
                fitness: Some(Fitness { threat: 1.0 }),
                created_at: rounds as u64,
            });
            break;
        }
    }
    let apr = best
        .as_ref()
        .map(|b| b.size() as f64 / g.e_total() as f64)
        .unwrap_or(0.0);
    Ok(AttackResult {
        app_id: g.app_id.clone(),
        status: if best.is_some() {
            AttackStatus::Evaded
        } else {
            AttackStatus::FailedBudget
        },
        best,
        generations: rounds,
        queries: ledger.snapshot(),
        ir: ledger.total(),
        apr,
        e_total: g.e_total(),
        trycatch_count: g.trycatch_count,
        per_generation: Vec::new(),
    })
}
