//! The many-network loop.
//!
//! Every network evolves its own population. Every `k` generations a network
//! whose progress slowed receives elites from its assisted networks, mapped
//! into its node space and repaired. How much each source sends adapts to how
//! many of its previous gifts made it into the target's elite.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_pair, map_edge_solution, AlignHyper, NodeMapping, PairAlignment};
use crate::community::{detect_greedy_modularity, Partition};
use crate::embedding::{train_gae, GaeHyper, GcnParams};
use crate::error::{Error, Result};
use crate::evo::{
    evolve_generation, initial_population, CandidatePool, Chromosome, EvoConfig, FitnessCache,
    Genome, GuidedCandidates, Population, Problem, Task,
};
use crate::graph::Graph;
use crate::rng;
use crate::similarity::{init_similarity_and_assisted, SimilarityMatrix, SimilarityProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub enabled: bool,
    /// Generations between transfer checks.
    pub k: usize,
    /// Solutions sent to a target per transfer, summed over its sources.
    pub total: usize,
    pub assisted_override: Option<usize>,
    /// Feed transferred additions into addition candidates (and deletions
    /// into deletion candidates) instead of the crossed default wiring.
    pub swap_mutation_candidates: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            enabled: true,
            k: 5,
            total: 30,
            assisted_override: None,
            swap_mutation_candidates: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub gae: GaeHyper,
    pub alignment: AlignHyper,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MdeoConfig {
    pub evo: EvoConfig,
    pub transfer: TransferConfig,
    pub learn: LearnConfig,
    pub seed: u64,
}

/// `F(n) = history[n]`. True at generations `n ≥ 2k`, `n mod k = 0`, when
/// the last `k` generations improved less than the `k` before them.
pub fn transfer_condition(history: &[f64], k: usize, gen: usize) -> bool {
    if k == 0 || gen < 2 * k || !gen.is_multiple_of(k) || history.len() <= gen {
        return false;
    }
    let d1 = (history[gen] - history[gen - k]).abs();
    let d2 = (history[gen - k] - history[gen - 2 * k]).abs();
    d1 < d2
}

/// Splits `total` proportionally to `weights` by largest remainder; equal
/// remainders favor the lower index. An all-zero row splits uniformly.
pub fn allocate_transfers(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return vec![];
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let shares: Vec<f64> = if sum > 0.0 {
        weights
            .iter()
            .map(|w| w.max(0.0) / sum * total as f64)
            .collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Share of the current elite that is new since the last transfer and came
/// from that transfer.
pub fn measure_contribution(
    elite_now: &[Genome],
    elite_before: &[Genome],
    transferred: &[Genome],
) -> f64 {
    if elite_now.is_empty() {
        return 0.0;
    }
    let before: HashSet<&Genome> = elite_before.iter().collect();
    let sent: HashSet<&Genome> = transferred.iter().collect();
    let now: HashSet<&Genome> = elite_now.iter().collect();
    let hits = now
        .iter()
        .filter(|g| !before.contains(*g) && sent.contains(*g))
        .count();
    hits as f64 / elite_now.len() as f64
}

/// Transfer memory of one target network.
#[derive(Clone, Debug, Default)]
pub struct TransferLedger {
    /// Genomes last received from each source.
    pub last_transfer: HashMap<usize, Vec<Genome>>,
    /// Distinct elite genomes just before the last transfer.
    pub elite_snapshot: Vec<Genome>,
    pub last_generation: Option<usize>,
    pub candidates: Option<GuidedCandidates>,
}

/// One network's learned context and evolutionary state.
pub struct DomainState {
    pub name: String,
    pub problem: Problem,
    pub partition: Option<Partition>,
    pub population: Option<Population>,
    pub cache: FitnessCache,
    pub history: Vec<f64>,
    pub gae: Option<GcnParams>,
    pub embeddings: Option<Array2<f64>>,
    /// Mapping from each assisted source into this network.
    pub mappings_in: HashMap<usize, NodeMapping>,
    pub ledger: TransferLedger,
    evolve_rng: rng::Rng,
}

impl DomainState {
    pub fn new(name: impl Into<String>, problem: Problem, index: usize, seed: u64) -> Self {
        DomainState {
            name: name.into(),
            problem,
            partition: None,
            population: None,
            cache: FitnessCache::new(),
            history: Vec::new(),
            gae: None,
            embeddings: None,
            mappings_in: HashMap::new(),
            ledger: TransferLedger::default(),
            evolve_rng: rng::substream(seed, "evolve", &[index as u64]),
        }
    }

    fn init(&mut self, config: &EvoConfig, index: usize, seed: u64) -> Result<()> {
        let mut init_rng = rng::substream(seed, "init", &[index as u64]);
        let pop = initial_population(&self.problem, config, &mut self.cache, &mut init_rng)?;
        self.history.push(pop.best_fitness());
        self.population = Some(pop);
        Ok(())
    }

    fn step(&mut self, config: &EvoConfig) -> Result<()> {
        let pop = self.population.as_ref().expect("initialized");
        let next = evolve_generation(
            &self.problem,
            pop,
            config,
            &mut self.cache,
            self.ledger.candidates.as_ref(),
            &mut self.evolve_rng,
        )?;
        self.history.push(next.best_fitness());
        self.population = Some(next);
        Ok(())
    }

    fn population(&self) -> &Population {
        self.population.as_ref().expect("initialized")
    }
}

/// One row of the per-generation CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub network: String,
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub transfer_in_count: usize,
    pub sources: Vec<String>,
    pub mean_rho: f64,
    pub min_rho: usize,
    pub max_rho: usize,
}

impl GenerationRecord {
    fn of(state: &DomainState, generation: usize) -> Self {
        let pop = state.population();
        let (mean_rho, min_rho, max_rho) = pop.rho_stats();
        GenerationRecord {
            network: state.name.clone(),
            generation,
            best_fitness: pop.best_fitness(),
            mean_fitness: pop.mean_fitness(),
            transfer_in_count: 0,
            sources: vec![],
            mean_rho,
            min_rho,
            max_rho,
        }
    }
}

pub fn write_generation_csv<W: Write>(records: &[GenerationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "network",
        "generation",
        "best_fitness",
        "mean_fitness",
        "transfer_in_count",
        "sources",
    ])?;
    for r in records {
        w.write_record([
            r.network.clone(),
            r.generation.to_string(),
            r.best_fitness.to_string(),
            r.mean_fitness.to_string(),
            r.transfer_in_count.to_string(),
            r.sources.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_rho_csv<W: Write>(records: &[GenerationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["network", "generation", "mean_rho", "min_rho", "max_rho"])?;
    for r in records {
        w.write_record([
            r.network.clone(),
            r.generation.to_string(),
            r.mean_rho.to_string(),
            r.min_rho.to_string(),
            r.max_rho.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferEvent {
    pub generation: usize,
    pub target: usize,
    pub source: usize,
    pub count: usize,
    /// Contribution of this source's previous transfer, if there was one.
    pub contribution: Option<f64>,
    /// Similarity weight after the update, used for allocation.
    pub similarity: f64,
    pub degenerate_genes: usize,
}

pub fn write_transfer_csv<W: Write>(
    events: &[TransferEvent],
    names: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "generation",
        "target",
        "source",
        "count",
        "contribution",
        "similarity",
        "degenerate_genes",
    ])?;
    for e in events {
        w.write_record([
            e.generation.to_string(),
            names[e.target].clone(),
            names[e.source].clone(),
            e.count.to_string(),
            e.contribution.map_or(String::new(), |c| c.to_string()),
            e.similarity.to_string(),
            e.degenerate_genes.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct NetworkResult {
    pub name: String,
    pub best: Chromosome,
    pub best_fitness: f64,
    /// Best fitness per generation, generation 0 first.
    pub history: Vec<f64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub networks: Vec<NetworkResult>,
    pub records: Vec<GenerationRecord>,
    pub transfers: Vec<TransferEvent>,
    pub similarity: Option<SimilarityMatrix>,
}

/// Checks everything that can be checked before spending compute.
pub fn validate_inputs(problems: &[(String, Problem)], config: &MdeoConfig) -> Result<()> {
    config.evo.validate()?;
    if problems.is_empty() {
        return Err(Error::TooFewNetworks { needed: 1, got: 0 });
    }
    if config.transfer.enabled {
        if problems.len() < 2 {
            return Err(Error::TooFewNetworks {
                needed: 2,
                got: problems.len(),
            });
        }
        if config.transfer.k == 0 {
            return Err(Error::Config(
                "transfer interval k must be at least 1".into(),
            ));
        }
        let kinds: HashSet<bool> = problems
            .iter()
            .map(|(_, p)| matches!(p.task, Task::Deception { .. }))
            .collect();
        if kinds.len() > 1 {
            return Err(Error::Config(
                "all networks must share one task kind".into(),
            ));
        }
        if config.learn.gae.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
    }
    let mut names = HashSet::new();
    for (name, _) in problems {
        if !names.insert(name) {
            return Err(Error::Config(format!("duplicate network name `{name}`")));
        }
    }
    Ok(())
}

/// Learned context shared by the transfer phase.
pub struct TransferContext {
    pub similarity: SimilarityMatrix,
    pub alignments: HashMap<(usize, usize), PairAlignment>,
}

/// Detects communities, builds similarity profiles, trains the per-network
/// autoencoders and aligns every assisted pair.
pub fn prepare_transfer(
    states: &mut [DomainState],
    config: &MdeoConfig,
) -> Result<TransferContext> {
    let partitions: Vec<Partition> = states
        .par_iter()
        .map(|s| match s.problem.base_partition() {
            Some(p) => Ok(p.clone()),
            None => detect_greedy_modularity(&s.problem.graph),
        })
        .collect::<Result<_>>()?;
    let profiles: Vec<SimilarityProfile> = states
        .iter()
        .zip(&partitions)
        .map(|(s, p)| SimilarityProfile::new(&s.problem.graph, p.clone()))
        .collect::<Result<_>>()?;
    let similarity = init_similarity_and_assisted(&profiles, config.transfer.assisted_override)?;

    let trained: Vec<_> = states
        .par_iter()
        .zip(&partitions)
        .enumerate()
        .map(|(i, (s, p))| {
            let hyper = GaeHyper {
                seed: rng::derive_seed(config.seed, "gae", &[i as u64]),
                ..config.learn.gae.clone()
            };
            train_gae(&s.problem.graph, p, &hyper)
        })
        .collect::<Result<_>>()?;
    for ((s, t), p) in states.iter_mut().zip(trained).zip(&partitions) {
        s.gae = Some(t.params);
        s.embeddings = Some(t.embeddings);
        s.partition = Some(p.clone());
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..states.len() {
        for &j in &similarity.assisted[i] {
            let key = (i.min(j), i.max(j));
            if !pairs.contains(&key) {
                pairs.push(key);
            }
        }
    }
    pairs.sort_unstable();
    let aligned: Vec<PairAlignment> = pairs
        .par_iter()
        .map(|&(a, b)| {
            align_pair(
                &states[a].problem.graph,
                &profiles[a],
                states[a].embeddings.as_ref().expect("trained"),
                &states[b].problem.graph,
                &profiles[b],
                states[b].embeddings.as_ref().expect("trained"),
                &config.learn.alignment,
            )
        })
        .collect::<Result<_>>()?;
    let alignments: HashMap<(usize, usize), PairAlignment> =
        pairs.into_iter().zip(aligned).collect();
    for (i, state) in states.iter_mut().enumerate() {
        for &j in &similarity.assisted[i] {
            let pair = &alignments[&(i.min(j), i.max(j))];
            // mapping from source j into target i
            let m = if j < i {
                pair.forward_mapping.clone()
            } else {
                pair.backward_mapping.clone()
            };
            state.mappings_in.insert(j, m);
        }
    }
    Ok(TransferContext {
        similarity,
        alignments,
    })
}

/// Chromosomes to inject into one target, plus the events describing them.
pub struct TransferOutcome {
    pub injected: Vec<Chromosome>,
    pub events: Vec<TransferEvent>,
}

/// Runs one transfer into `target`, reading source populations from the
/// pre-transfer `snapshot`. Updates the similarity row and the ledger.
pub fn perform_transfer(
    target: usize,
    state: &mut DomainState,
    snapshot: &[Population],
    similarity: &mut SimilarityMatrix,
    config: &MdeoConfig,
    generation: usize,
) -> Result<TransferOutcome> {
    let elite_count = config.evo.elite_count();
    let elite_now: Vec<Genome> = state
        .population()
        .export_elites(elite_count)
        .into_iter()
        .map(|c| c.genome)
        .collect();
    let sources = similarity.assisted[target].clone();

    let mut contributions: HashMap<usize, f64> = HashMap::new();
    if state.ledger.last_generation.is_some() {
        for &j in &sources {
            let sent = state
                .ledger
                .last_transfer
                .get(&j)
                .map_or(&[][..], Vec::as_slice);
            contributions.insert(
                j,
                measure_contribution(&elite_now, &state.ledger.elite_snapshot, sent),
            );
        }
        let mut update: Vec<(usize, f64)> = contributions.iter().map(|(&j, &c)| (j, c)).collect();
        update.sort_by_key(|x| x.0);
        similarity.update(target, &update);
    }

    let row = similarity.row(target);
    let weights: Vec<f64> = row.iter().map(|x| x.1).collect();
    let counts = allocate_transfers(&weights, config.transfer.total);

    let mut repair_rng =
        rng::substream(config.seed, "transfer", &[target as u64, generation as u64]);
    let mut injected = Vec::new();
    let mut events = Vec::new();
    let mut last_transfer = HashMap::new();
    for ((j, weight), count) in row.iter().copied().zip(counts) {
        let mut genomes = Vec::with_capacity(count);
        let mut degenerate = 0;
        if count > 0 {
            let mapping = state.mappings_in.get(&j).ok_or_else(|| {
                Error::Config(format!(
                    "no node mapping from network {j} into network {target}"
                ))
            })?;
            for elite in snapshot[j].export_elites(count) {
                let (raw, flags) = map_edge_solution(&elite.genome, mapping);
                degenerate += flags.iter().filter(|f| **f).count();
                let repaired = state.problem.repair(&raw, &mut repair_rng)?;
                genomes.push(repaired.clone());
                injected.push(Chromosome {
                    genome: repaired,
                    origin: Some(j),
                });
            }
        }
        events.push(TransferEvent {
            generation,
            target,
            source: j,
            count: genomes.len(),
            contribution: contributions.get(&j).copied(),
            similarity: weight,
            degenerate_genes: degenerate,
        });
        last_transfer.insert(j, genomes);
    }

    let pools = row
        .iter()
        .map(|&(j, p)| {
            let sent = &last_transfer[&j];
            let mut adds: Vec<_> = sent
                .iter()
                .flat_map(|g: &Genome| g.additions().iter().copied())
                .collect();
            let mut dels: Vec<_> = sent
                .iter()
                .flat_map(|g: &Genome| g.deletions().iter().copied())
                .collect();
            let mut nodes: Vec<_> = sent
                .iter()
                .flat_map(|g: &Genome| g.seeds().iter().copied())
                .collect();
            for v in [&mut adds, &mut dels] {
                v.sort_unstable();
                v.dedup();
            }
            nodes.sort_unstable();
            nodes.dedup();
            let (additions, deletions) = if config.transfer.swap_mutation_candidates {
                (adds, dels)
            } else {
                (dels, adds)
            };
            CandidatePool {
                network: j,
                probability: p,
                additions,
                deletions,
                nodes,
            }
        })
        .collect();
    state.ledger = TransferLedger {
        last_transfer,
        elite_snapshot: elite_now,
        last_generation: Some(generation),
        candidates: Some(GuidedCandidates { pools }),
    };
    Ok(TransferOutcome { injected, events })
}

fn finish(states: Vec<DomainState>) -> Vec<NetworkResult> {
    states
        .into_iter()
        .map(|s| {
            let pop = s.population.expect("initialized");
            let (best, best_fitness) = pop
                .best()
                .map(|(c, f)| (c.clone(), f))
                .expect("non-empty population");
            NetworkResult {
                name: s.name,
                best,
                best_fitness,
                history: s.history,
                cache_hits: s.cache.hits,
                cache_misses: s.cache.misses,
            }
        })
        .collect()
}

fn make_states(problems: Vec<(String, Problem)>, seed: u64) -> Vec<DomainState> {
    problems
        .into_iter()
        .enumerate()
        .map(|(i, (name, p))| DomainState::new(name, p, i, seed))
        .collect()
}

/// Multi-domain optimization. With transfer disabled this is exactly
/// [`run_sdeo`].
pub fn run_mdeo(problems: Vec<(String, Problem)>, config: &MdeoConfig) -> Result<RunResult> {
    if !config.transfer.enabled {
        return run_sdeo(problems, config);
    }
    validate_inputs(&problems, config)?;
    let mut states = make_states(problems, config.seed);
    let mut ctx = prepare_transfer(&mut states, config)?;
    let names: Vec<String> = states.iter().map(|s| s.name.clone()).collect();
    log::info!(
        "similarity and alignment ready for {} networks",
        states.len()
    );

    let mut records = Vec::new();
    let mut transfers = Vec::new();
    states
        .par_iter_mut()
        .enumerate()
        .map(|(i, s)| s.init(&config.evo, i, config.seed))
        .collect::<Result<()>>()?;
    records.extend(states.iter().map(|s| GenerationRecord::of(s, 0)));

    for gen in 1..=config.evo.generations {
        states
            .par_iter_mut()
            .map(|s| s.step(&config.evo))
            .collect::<Result<()>>()?;
        let mut gen_records: Vec<GenerationRecord> = states
            .iter()
            .map(|s| GenerationRecord::of(s, gen))
            .collect();

        let eligible: Vec<usize> = (0..states.len())
            .filter(|&i| transfer_condition(&states[i].history, config.transfer.k, gen))
            .collect();
        if !eligible.is_empty() {
            let snapshot: Vec<Population> = states.iter().map(|s| s.population().clone()).collect();
            let mut pending = Vec::with_capacity(eligible.len());
            for &i in &eligible {
                let out = perform_transfer(
                    i,
                    &mut states[i],
                    &snapshot,
                    &mut ctx.similarity,
                    config,
                    gen,
                )?;
                pending.push((i, out));
            }
            for (i, out) in pending {
                let s = &mut states[i];
                let rec = &mut gen_records[i];
                rec.transfer_in_count = out.injected.len();
                rec.sources = out
                    .events
                    .iter()
                    .filter(|e| e.count > 0)
                    .map(|e| names[e.source].clone())
                    .collect();
                if !out.injected.is_empty() {
                    let mut pop = s.population.take().expect("initialized");
                    let added = Population::evaluate(&s.problem, &mut s.cache, out.injected)?;
                    pop.individuals.extend(added.individuals);
                    pop.fitness.extend(added.fitness);
                    s.population = Some(pop);
                }
                log::debug!(
                    "generation {gen}: {} received {} solutions",
                    s.name,
                    rec.transfer_in_count
                );
                transfers.extend(out.events);
            }
        }
        records.extend(gen_records);
    }

    Ok(RunResult {
        networks: finish(states),
        records,
        transfers,
        similarity: Some(ctx.similarity),
    })
}

/// Independent single-domain runs with the same per-network random streams.
pub fn run_sdeo(problems: Vec<(String, Problem)>, config: &MdeoConfig) -> Result<RunResult> {
    let config = MdeoConfig {
        transfer: TransferConfig {
            enabled: false,
            ..config.transfer.clone()
        },
        ..config.clone()
    };
    validate_inputs(&problems, &config)?;
    let mut states = make_states(problems, config.seed);
    let per_network: Vec<Vec<GenerationRecord>> = states
        .par_iter_mut()
        .enumerate()
        .map(|(i, s)| {
            s.init(&config.evo, i, config.seed)?;
            let mut recs = vec![GenerationRecord::of(s, 0)];
            for gen in 1..=config.evo.generations {
                s.step(&config.evo)?;
                recs.push(GenerationRecord::of(s, gen));
            }
            Ok(recs)
        })
        .collect::<Result<_>>()?;
    // generation-major order, matching the multi-domain loop
    let mut records = Vec::with_capacity(per_network.iter().map(Vec::len).sum());
    for gen in 0..=config.evo.generations {
        for recs in &per_network {
            records.push(recs[gen].clone());
        }
    }
    Ok(RunResult {
        networks: finish(states),
        records,
        transfers: vec![],
        similarity: None,
    })
}

/// Convenience constructor for a deception batch sharing one attacker.
pub fn deception_problems(
    graphs: Vec<(String, Arc<Graph>, usize)>,
    detector: Arc<dyn crate::community::CommunityDetector>,
) -> Result<Vec<(String, Problem)>> {
    graphs
        .into_iter()
        .map(|(name, g, budget)| Ok((name, Problem::deception(g, budget, detector.clone())?)))
        .collect()
}
