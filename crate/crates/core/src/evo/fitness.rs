use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use super::chromosome::Genome;
use super::problem::Problem;
use crate::community::{CommunityDetector, Partition};
use crate::error::Result;
use crate::graph::Graph;
use crate::rng;

/// Deception score of a detected partition against the base partition.
///
/// With confusion counts `m_ij = |C_i ∩ C'_j|`:
/// `F = −Σ_ij (m_ij/|V|)·log2(m_ij/|C_i|) · exp(−max_ij (m_ij/|C'_j|)·log2|C'_j|)`.
/// Zero counts contribute nothing.
pub fn partition_deception_score(base: &Partition, detected: &Partition) -> f64 {
    let n = base.node_count() as f64;
    let mut m: HashMap<(usize, usize), usize> = HashMap::new();
    for v in 0..base.node_count() {
        *m.entry((base.community_of(v), detected.community_of(v)))
            .or_default() += 1;
    }
    let base_sizes: Vec<f64> = base.communities().iter().map(|c| c.len() as f64).collect();
    let new_sizes: Vec<f64> = detected
        .communities()
        .iter()
        .map(|c| c.len() as f64)
        .collect();
    let mut inner = 0.0;
    let mut max_prime = f64::NEG_INFINITY;
    let mut cells: Vec<_> = m.into_iter().collect();
    cells.sort_unstable();
    for ((i, j), count) in cells {
        let count = count as f64;
        let frac = count / base_sizes[i];
        inner += (base_sizes[i] / n) * frac * frac.log2();
        max_prime = max_prime.max(count / new_sizes[j] * new_sizes[j].log2());
    }
    let f = -inner * (-max_prime).exp();
    // -0.0 and tiny negative rounding both read as "no deception"
    if f > 0.0 {
        f
    } else {
        0.0
    }
}

/// Applies the genome's edits, re-runs the attacker and scores the result.
pub fn deception_fitness(
    g: &Graph,
    base: &Partition,
    genome: &Genome,
    detector: &dyn CommunityDetector,
) -> Result<f64> {
    let edited = g.apply_edits(&genome.edit_set())?;
    let detected = detector.detect(&edited)?;
    Ok(partition_deception_score(base, &detected))
}

/// Mean activated-set size of `samples` independent-cascade runs. Each newly
/// active node gets one chance to activate each inactive neighbor with
/// probability `p`.
pub fn ic_spread(g: &Graph, seeds: &[usize], p: f64, samples: usize, seed: u64) -> f64 {
    if samples == 0 {
        return seeds.len() as f64;
    }
    let mut rng = rng::substream(seed, "cascade", &[]);
    let n = g.node_count();
    let mut active = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    let mut total = 0usize;
    for run in 0..samples as u32 {
        let mut count = 0;
        for &s in seeds {
            if active[s] != run {
                active[s] = run;
                count += 1;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if active[w] != run && rng.gen::<f64>() < p {
                    active[w] = run;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        total += count;
    }
    total as f64 / samples as f64
}

/// Genome-keyed memo of fitness values for one network.
#[derive(Debug, Default, Clone)]
pub struct FitnessCache {
    values: HashMap<Genome, f64>,
    pub hits: u64,
    pub misses: u64,
}

impl FitnessCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, g: &Genome) -> Option<f64> {
        self.values.get(g).copied()
    }

    /// Fitness of every genome, evaluating unseen ones in parallel.
    pub fn evaluate_all(&mut self, problem: &Problem, genomes: &[&Genome]) -> Result<Vec<f64>> {
        let mut fresh: Vec<&Genome> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for &g in genomes {
            if !self.values.contains_key(g) && queued.insert(g) {
                fresh.push(g);
            }
        }
        self.misses += fresh.len() as u64;
        self.hits += (genomes.len() - fresh.len()) as u64;
        let scored: Vec<f64> = fresh
            .par_iter()
            .map(|g| problem.evaluate(g))
            .collect::<Result<_>>()?;
        for (g, f) in fresh.into_iter().zip(scored) {
            self.values.insert(g.clone(), f);
        }
        Ok(genomes.iter().map(|g| self.values[*g]).collect())
    }

    pub fn evaluate(&mut self, problem: &Problem, genome: &Genome) -> Result<f64> {
        Ok(self.evaluate_all(problem, &[genome])?[0])
    }
}
