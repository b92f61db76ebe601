use std::collections::HashSet;

use rand::Rng;

use super::chromosome::{sample_node, Chromosome, Genome, RawGenome};
use super::problem::{fresh_gene, Problem};
use crate::error::Result;
use crate::graph::Edge;

/// Attempts at drawing a valid gene from the guided pools before falling back.
pub const GUIDED_TRIES: usize = 10;

/// Genes contributed by one assisting network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidatePool {
    pub network: usize,
    /// Selection weight; pools are sampled proportionally.
    pub probability: f64,
    /// Candidates for replacing an addition gene.
    pub additions: Vec<Edge>,
    /// Candidates for replacing a deletion gene.
    pub deletions: Vec<Edge>,
    /// Candidates for replacing a seed node.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GuidedCandidates {
    pub pools: Vec<CandidatePool>,
}

impl GuidedCandidates {
    pub fn is_empty(&self) -> bool {
        self.pools.iter().all(|p| {
            p.probability <= 0.0
                || (p.additions.is_empty() && p.deletions.is_empty() && p.nodes.is_empty())
        })
    }

    fn pick_pool(&self, rng: &mut impl Rng) -> Option<&CandidatePool> {
        let total: f64 = self.pools.iter().map(|p| p.probability.max(0.0)).sum();
        if total <= 0.0 {
            return None;
        }
        let mut x = rng.gen::<f64>() * total;
        for p in &self.pools {
            x -= p.probability.max(0.0);
            if x < 0.0 {
                return Some(p);
            }
        }
        self.pools.iter().rev().find(|p| p.probability > 0.0)
    }
}

/// `size` uniform random genomes.
pub fn init_population(
    problem: &Problem,
    size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>> {
    (0..size)
        .map(|_| problem.random_genome(rng).map(Chromosome::new))
        .collect()
}

/// Segment crossover. With probability `prob` the children swap a uniformly
/// chosen contiguous segment of their addition parts and, independently, of
/// their deletion parts (seed lists swap genes uniformly). Children are
/// repaired; without crossover the parents are copied.
pub fn crossover(
    problem: &Problem,
    a: &Chromosome,
    b: &Chromosome,
    prob: f64,
    rng: &mut impl Rng,
) -> Result<(Chromosome, Chromosome)> {
    if prob <= 0.0 || !rng.gen_bool(prob.min(1.0)) {
        return Ok((a.clone(), b.clone()));
    }
    let (ra, rb) = match (&a.genome, &b.genome) {
        (Genome::Deception { .. }, Genome::Deception { .. }) => {
            let mut adds_a = a.genome.additions().to_vec();
            let mut adds_b = b.genome.additions().to_vec();
            let mut dels_a = a.genome.deletions().to_vec();
            let mut dels_b = b.genome.deletions().to_vec();
            swap_segment(&mut adds_a, &mut adds_b, rng);
            swap_segment(&mut dels_a, &mut dels_b, rng);
            (raw_deception(adds_a, dels_a), raw_deception(adds_b, dels_b))
        }
        _ => {
            let mut sa = a.genome.seeds().to_vec();
            let mut sb = b.genome.seeds().to_vec();
            for i in 0..sa.len().min(sb.len()) {
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut sa[i], &mut sb[i]);
                }
            }
            (
                RawGenome::InfluenceMax { seeds: sa },
                RawGenome::InfluenceMax { seeds: sb },
            )
        }
    };
    let ca = problem.repair(&ra, rng)?;
    let cb = problem.repair(&rb, rng)?;
    Ok((Chromosome::new(ca), Chromosome::new(cb)))
}

fn swap_segment<T>(x: &mut [T], y: &mut [T], rng: &mut impl Rng) {
    let len = x.len().min(y.len());
    if len == 0 {
        return;
    }
    let mut s = rng.gen_range(0..=len);
    let mut e = rng.gen_range(0..=len);
    if s > e {
        std::mem::swap(&mut s, &mut e);
    }
    x[s..e].swap_with_slice(&mut y[s..e]);
}

fn raw_deception(adds: Vec<Edge>, dels: Vec<Edge>) -> RawGenome {
    let rho = adds.len();
    RawGenome::Deception {
        genes: adds.iter().chain(&dels).map(|e| (e.0, e.1)).collect(),
        rho,
    }
}

/// One-gene mutation applied with probability `prob`.
///
/// With guided candidates the replacement is drawn from a pool chosen by
/// its probability, using the pool part that matches the replaced gene.
/// After [`GUIDED_TRIES`] invalid draws (or with no candidates) a uniform
/// random valid gene is used instead.
pub fn mutate(
    problem: &Problem,
    c: &Chromosome,
    guided: Option<&GuidedCandidates>,
    prob: f64,
    rng: &mut impl Rng,
) -> Result<Chromosome> {
    if prob <= 0.0 || c.genome.is_empty() || !rng.gen_bool(prob.min(1.0)) {
        return Ok(c.clone());
    }
    let g = &problem.graph;
    let guided = guided.filter(|gc| !gc.is_empty());
    let genome = match &c.genome {
        Genome::Deception { genes, rho } => {
            let idx = rng.gen_range(0..genes.len());
            let addition = idx < *rho;
            let taken: HashSet<Edge> = genes.iter().copied().collect();
            let mut replacement = None;
            if let Some(gc) = guided {
                for _ in 0..GUIDED_TRIES {
                    let Some(pool) = gc.pick_pool(rng) else { break };
                    let part = if addition {
                        &pool.additions
                    } else {
                        &pool.deletions
                    };
                    if part.is_empty() {
                        continue;
                    }
                    let e = part[rng.gen_range(0..part.len())];
                    if !e.is_loop()
                        && e.1 < g.node_count()
                        && g.contains(e) != addition
                        && !taken.contains(&e)
                    {
                        replacement = Some((e, addition));
                        break;
                    }
                }
            }
            let replacement = match replacement {
                Some(r) => r,
                None => match fresh_gene(g, &taken, addition, rng) {
                    Some(r) => r,
                    None => return Ok(c.clone()),
                },
            };
            let mut adds = Vec::with_capacity(*rho + 1);
            let mut dels = Vec::with_capacity(genes.len() - rho + 1);
            for (i, &e) in genes.iter().enumerate() {
                if i == idx {
                    continue;
                }
                if i < *rho {
                    adds.push(e);
                } else {
                    dels.push(e);
                }
            }
            if replacement.1 {
                adds.push(replacement.0);
            } else {
                dels.push(replacement.0);
            }
            Genome::deception(adds, dels)
        }
        Genome::InfluenceMax { seeds } => {
            let idx = rng.gen_range(0..seeds.len());
            let taken: HashSet<usize> = seeds.iter().copied().collect();
            let n = g.node_count();
            let mut replacement = None;
            if let Some(gc) = guided {
                for _ in 0..GUIDED_TRIES {
                    let Some(pool) = gc.pick_pool(rng) else { break };
                    if pool.nodes.is_empty() {
                        continue;
                    }
                    let v = pool.nodes[rng.gen_range(0..pool.nodes.len())];
                    if v < n && !taken.contains(&v) {
                        replacement = Some(v);
                        break;
                    }
                }
            }
            let replacement = match replacement.or_else(|| sample_node(n, &taken, rng)) {
                Some(v) => v,
                None => return Ok(c.clone()),
            };
            let mut out = seeds.clone();
            out[idx] = replacement;
            Genome::influence(out)
        }
    };
    Ok(Chromosome {
        genome,
        origin: c.origin,
    })
}
