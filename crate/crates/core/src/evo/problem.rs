use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::chromosome::{sample_edge, sample_node, sample_non_edge, Genome, RawGenome};
use super::fitness::{deception_fitness, ic_spread};
use crate::community::{CommunityDetector, Partition};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::rng;

/// The optimization task on one network.
#[derive(Clone)]
pub enum Task {
    /// Rewire exactly `budget` edges to hide `base` from `detector`.
    Deception {
        base: Partition,
        budget: usize,
        detector: Arc<dyn CommunityDetector>,
    },
    /// Choose `seed_count` nodes maximizing independent-cascade spread.
    /// Spread is estimated with `samples` cascades driven by a stream keyed
    /// on the genome and `eval_seed`, so fitness is a pure function.
    InfluenceMax {
        seed_count: usize,
        probability: f64,
        samples: usize,
        eval_seed: u64,
    },
}

impl std::fmt::Debug for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Deception {
                budget, detector, ..
            } => write!(f, "Deception {{ budget: {budget}, detector: {} }}", detector.name()),
            Task::InfluenceMax {
                seed_count,
                probability,
                samples,
                ..
            } => write!(
                f,
                "InfluenceMax {{ seed_count: {seed_count}, probability: {probability}, samples: {samples} }}"
            ),
        }
    }
}

/// A network paired with its task.
#[derive(Clone, Debug)]
pub struct Problem {
    pub graph: Arc<Graph>,
    pub task: Task,
}

impl Problem {
    pub fn deception(
        graph: Arc<Graph>,
        budget: usize,
        detector: Arc<dyn CommunityDetector>,
    ) -> Result<Self> {
        let available = graph.edge_count() + graph.non_edge_count();
        if budget > available {
            return Err(Error::InfeasibleBudget { budget, available });
        }
        let base = detector.detect(&graph)?;
        Ok(Problem {
            graph,
            task: Task::Deception {
                base,
                budget,
                detector,
            },
        })
    }

    pub fn influence_max(
        graph: Arc<Graph>,
        seed_count: usize,
        probability: f64,
        samples: usize,
        eval_seed: u64,
    ) -> Result<Self> {
        if seed_count > graph.node_count() {
            return Err(Error::InfeasibleBudget {
                budget: seed_count,
                available: graph.node_count(),
            });
        }
        Ok(Problem {
            graph,
            task: Task::InfluenceMax {
                seed_count,
                probability,
                samples,
                eval_seed,
            },
        })
    }

    /// Genome length: β for deception, the seed-set size for IM.
    pub fn genome_len(&self) -> usize {
        match &self.task {
            Task::Deception { budget, .. } => *budget,
            Task::InfluenceMax { seed_count, .. } => *seed_count,
        }
    }

    pub fn base_partition(&self) -> Option<&Partition> {
        match &self.task {
            Task::Deception { base, .. } => Some(base),
            Task::InfluenceMax { .. } => None,
        }
    }

    pub fn evaluate(&self, genome: &Genome) -> Result<f64> {
        match &self.task {
            Task::Deception { base, detector, .. } => {
                deception_fitness(&self.graph, base, genome, detector.as_ref())
            }
            Task::InfluenceMax {
                probability,
                samples,
                eval_seed,
                ..
            } => {
                let key = genome
                    .seeds()
                    .iter()
                    .flat_map(|s| (*s as u64).to_le_bytes())
                    .collect::<Vec<u8>>();
                let seed = rng::derive_seed(*eval_seed, "ic-genome", &[rng::fnv1a(&key)]);
                Ok(ic_spread(
                    &self.graph,
                    genome.seeds(),
                    *probability,
                    *samples,
                    seed,
                ))
            }
        }
    }

    pub fn validate(&self, genome: &Genome) -> Result<()> {
        match (&self.task, genome) {
            (Task::Deception { .. }, Genome::Deception { .. })
            | (Task::InfluenceMax { .. }, Genome::InfluenceMax { .. }) => {
                genome.validate(&self.graph, self.genome_len())
            }
            _ => Err(Error::InvalidChromosome(
                "genome kind does not match task".into(),
            )),
        }
    }

    /// Uniform random genome: for deception ρ ~ U{0..β} clamped to what the
    /// graph can supply, additions from non-edges, deletions from edges.
    pub fn random_genome(&self, rng: &mut impl Rng) -> Result<Genome> {
        let g = &self.graph;
        match &self.task {
            Task::Deception { budget, .. } => {
                let lo = budget.saturating_sub(g.edge_count());
                let hi = (*budget).min(g.non_edge_count());
                let rho = rng.gen_range(0..=*budget).clamp(lo, hi);
                let mut taken = HashSet::new();
                let mut adds = Vec::with_capacity(rho);
                for _ in 0..rho {
                    let e = sample_non_edge(g, &taken, rng).ok_or(Error::InfeasibleBudget {
                        budget: *budget,
                        available: g.non_edge_count(),
                    })?;
                    taken.insert(e);
                    adds.push(e);
                }
                let mut dels = Vec::with_capacity(budget - rho);
                for _ in rho..*budget {
                    let e = sample_edge(g, &taken, rng).ok_or(Error::InfeasibleBudget {
                        budget: *budget,
                        available: g.edge_count(),
                    })?;
                    taken.insert(e);
                    dels.push(e);
                }
                Ok(Genome::deception(adds, dels))
            }
            Task::InfluenceMax { seed_count, .. } => {
                let mut all: Vec<usize> = (0..g.node_count()).collect();
                all.shuffle(rng);
                all.truncate(*seed_count);
                Ok(Genome::influence(all))
            }
        }
    }

    /// Turns any raw genome into a valid one for this network.
    ///
    /// Degenerate, repeated and wrong-part genes are replaced with fresh
    /// uniform genes of the same part (the other part if that pool is
    /// exhausted). Surplus genes are then dropped uniformly at random and
    /// missing genes sampled with a uniformly chosen part.
    pub fn repair(&self, raw: &RawGenome, rng: &mut impl Rng) -> Result<Genome> {
        let g = &self.graph;
        let n = g.node_count();
        match (&self.task, raw) {
            (Task::Deception { budget, .. }, RawGenome::Deception { genes, rho }) => {
                let available = g.edge_count() + g.non_edge_count();
                if *budget > available {
                    return Err(Error::InfeasibleBudget {
                        budget: *budget,
                        available,
                    });
                }
                let rho = (*rho).min(genes.len());
                let mut taken: HashSet<Edge> = HashSet::new();
                // (gene, is_addition); None marks a slot to refill
                let mut slots: Vec<(Option<Edge>, bool)> = Vec::with_capacity(genes.len());
                for (i, &(a, b)) in genes.iter().enumerate() {
                    let addition = i < rho;
                    let e = Edge::new(a, b);
                    let valid =
                        !e.is_loop() && e.1 < n && g.contains(e) != addition && !taken.contains(&e);
                    if valid {
                        taken.insert(e);
                        slots.push((Some(e), addition));
                    } else {
                        slots.push((None, addition));
                    }
                }
                let mut kept: Vec<(Edge, bool)> = Vec::with_capacity(slots.len());
                for (gene, addition) in slots {
                    let gene = match gene {
                        Some(e) => (e, addition),
                        None => {
                            fresh_gene(g, &taken, addition, rng).ok_or(Error::InfeasibleBudget {
                                budget: *budget,
                                available,
                            })?
                        }
                    };
                    taken.insert(gene.0);
                    kept.push(gene);
                }
                while kept.len() > *budget {
                    let i = rng.gen_range(0..kept.len());
                    let (e, _) = kept.remove(i);
                    taken.remove(&e);
                }
                while kept.len() < *budget {
                    let addition = rng.gen_bool(0.5);
                    let gene =
                        fresh_gene(g, &taken, addition, rng).ok_or(Error::InfeasibleBudget {
                            budget: *budget,
                            available,
                        })?;
                    taken.insert(gene.0);
                    kept.push(gene);
                }
                let (adds, dels): (Vec<_>, Vec<_>) = kept.into_iter().partition(|(_, a)| *a);
                Ok(Genome::deception(
                    adds.into_iter().map(|x| x.0).collect(),
                    dels.into_iter().map(|x| x.0).collect(),
                ))
            }
            (Task::InfluenceMax { seed_count, .. }, RawGenome::InfluenceMax { seeds }) => {
                if *seed_count > n {
                    return Err(Error::InfeasibleBudget {
                        budget: *seed_count,
                        available: n,
                    });
                }
                let mut taken = HashSet::new();
                let mut slots = Vec::with_capacity(seeds.len());
                for &s in seeds {
                    if s < n && taken.insert(s) {
                        slots.push(Some(s));
                    } else {
                        slots.push(None);
                    }
                }
                let mut kept = Vec::with_capacity(slots.len());
                for s in slots {
                    let s = match s {
                        Some(s) => s,
                        None => match sample_node(n, &taken, rng) {
                            Some(s) => s,
                            // more raw seeds than nodes; truncation below fixes the length
                            None => continue,
                        },
                    };
                    taken.insert(s);
                    kept.push(s);
                }
                while kept.len() > *seed_count {
                    let i = rng.gen_range(0..kept.len());
                    taken.remove(&kept.remove(i));
                }
                while kept.len() < *seed_count {
                    let s = sample_node(n, &taken, rng).ok_or(Error::InfeasibleBudget {
                        budget: *seed_count,
                        available: n,
                    })?;
                    taken.insert(s);
                    kept.push(s);
                }
                Ok(Genome::influence(kept))
            }
            _ => Err(Error::InvalidChromosome(
                "genome kind does not match task".into(),
            )),
        }
    }
}

/// Fresh valid gene of the requested part, falling back to the other part.
pub(crate) fn fresh_gene(
    g: &Graph,
    taken: &HashSet<Edge>,
    addition: bool,
    rng: &mut impl Rng,
) -> Option<(Edge, bool)> {
    let draw = |add: bool, rng: &mut _| {
        if add {
            sample_non_edge(g, taken, rng)
        } else {
            sample_edge(g, taken, rng)
        }
    };
    draw(addition, rng)
        .map(|e| (e, addition))
        .or_else(|| draw(!addition, rng).map(|e| (e, !addition)))
}
