use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, EditSet, Graph};

/// One candidate solution.
///
/// Genomes are kept canonical: the addition part and the deletion part are
/// each sorted, and seed sets are sorted. Equality is therefore set equality,
/// which is what fitness memoization and contribution counting rely on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Genome {
    /// `genes[..rho]` are edges to add, `genes[rho..]` edges to delete.
    Deception {
        genes: Vec<Edge>,
        rho: usize,
    },
    InfluenceMax {
        seeds: Vec<usize>,
    },
}

impl Genome {
    pub fn deception(mut additions: Vec<Edge>, mut deletions: Vec<Edge>) -> Self {
        additions.sort_unstable();
        deletions.sort_unstable();
        let rho = additions.len();
        additions.extend(deletions);
        Genome::Deception {
            genes: additions,
            rho,
        }
    }

    pub fn influence(mut seeds: Vec<usize>) -> Self {
        seeds.sort_unstable();
        Genome::InfluenceMax { seeds }
    }

    pub fn len(&self) -> usize {
        match self {
            Genome::Deception { genes, .. } => genes.len(),
            Genome::InfluenceMax { seeds } => seeds.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn additions(&self) -> &[Edge] {
        match self {
            Genome::Deception { genes, rho } => &genes[..*rho],
            Genome::InfluenceMax { .. } => &[],
        }
    }

    pub fn deletions(&self) -> &[Edge] {
        match self {
            Genome::Deception { genes, rho } => &genes[*rho..],
            Genome::InfluenceMax { .. } => &[],
        }
    }

    pub fn seeds(&self) -> &[usize] {
        match self {
            Genome::InfluenceMax { seeds } => seeds,
            Genome::Deception { .. } => &[],
        }
    }

    pub fn edit_set(&self) -> EditSet {
        EditSet::new(self.additions().to_vec(), self.deletions().to_vec())
    }

    /// Checks every invariant against `g` and the expected length.
    pub fn validate(&self, g: &Graph, expected_len: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidChromosome(m));
        if self.len() != expected_len {
            return bad(format!("length {} but budget {}", self.len(), expected_len));
        }
        match self {
            Genome::Deception { genes, rho } => {
                if *rho > genes.len() {
                    return bad(format!("rho {rho} exceeds length {}", genes.len()));
                }
                let mut seen = HashSet::new();
                for (i, &e) in genes.iter().enumerate() {
                    if e.0 > e.1 || e.is_loop() || e.1 >= g.node_count() {
                        return bad(format!("gene {e} is not a valid node pair"));
                    }
                    if !seen.insert(e) {
                        return bad(format!("gene {e} repeats"));
                    }
                    let is_addition = i < *rho;
                    if is_addition == g.contains(e) {
                        return bad(format!(
                            "gene {e} is {} but the graph {} it",
                            if is_addition {
                                "an addition"
                            } else {
                                "a deletion"
                            },
                            if is_addition { "already has" } else { "lacks" }
                        ));
                    }
                }
                if !genes[..*rho].is_sorted() || !genes[*rho..].is_sorted() {
                    return bad("parts are not canonical".into());
                }
            }
            Genome::InfluenceMax { seeds } => {
                if !seeds.is_sorted() {
                    return bad("seeds are not canonical".into());
                }
                if seeds.windows(2).any(|w| w[0] == w[1]) {
                    return bad("repeated seed".into());
                }
                if seeds.iter().any(|&s| s >= g.node_count()) {
                    return bad("seed out of range".into());
                }
            }
        }
        Ok(())
    }
}

/// A genome with its transfer provenance. The origin is diagnostic only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chromosome {
    pub genome: Genome,
    pub origin: Option<usize>,
}

impl Chromosome {
    pub fn new(genome: Genome) -> Self {
        Chromosome {
            genome,
            origin: None,
        }
    }
}

/// A genome that may violate the invariants: the image of a solution under a
/// node mapping, or an offspring before repair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawGenome {
    Deception {
        genes: Vec<(usize, usize)>,
        rho: usize,
    },
    InfluenceMax {
        seeds: Vec<usize>,
    },
}

impl RawGenome {
    /// Genes that collapse to a self-loop or repeat an earlier gene.
    pub fn degenerate(&self) -> Vec<bool> {
        match self {
            RawGenome::Deception { genes, .. } => {
                let mut seen = HashSet::new();
                genes
                    .iter()
                    .map(|&(a, b)| a == b || !seen.insert(Edge::new(a, b)))
                    .collect()
            }
            RawGenome::InfluenceMax { seeds } => {
                let mut seen = HashSet::new();
                seeds.iter().map(|&s| !seen.insert(s)).collect()
            }
        }
    }
}

impl From<&Genome> for RawGenome {
    fn from(g: &Genome) -> Self {
        match g {
            Genome::Deception { genes, rho } => RawGenome::Deception {
                genes: genes.iter().map(|e| (e.0, e.1)).collect(),
                rho: *rho,
            },
            Genome::InfluenceMax { seeds } => RawGenome::InfluenceMax {
                seeds: seeds.clone(),
            },
        }
    }
}

const REJECTION_TRIES: usize = 64;

/// Uniform non-edge of `g` outside `exclude`, or `None` when there is none.
pub fn sample_non_edge(g: &Graph, exclude: &HashSet<Edge>, rng: &mut impl Rng) -> Option<Edge> {
    let n = g.node_count();
    if n < 2 {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let e = Edge::new(a, b);
        if !e.is_loop() && !g.contains(e) && !exclude.contains(&e) {
            return Some(e);
        }
    }
    let mut pool = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let e = Edge(a, b);
            if !g.contains(e) && !exclude.contains(&e) {
                pool.push(e);
            }
        }
    }
    (!pool.is_empty()).then(|| pool[rng.gen_range(0..pool.len())])
}

/// Uniform edge of `g` outside `exclude`.
pub fn sample_edge(g: &Graph, exclude: &HashSet<Edge>, rng: &mut impl Rng) -> Option<Edge> {
    let edges = g.edges();
    if edges.is_empty() {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let e = edges[rng.gen_range(0..edges.len())];
        if !exclude.contains(&e) {
            return Some(e);
        }
    }
    let pool: Vec<Edge> = edges
        .iter()
        .copied()
        .filter(|e| !exclude.contains(e))
        .collect();
    (!pool.is_empty()).then(|| pool[rng.gen_range(0..pool.len())])
}

/// Uniform node in `0..n` outside `exclude`.
pub fn sample_node(n: usize, exclude: &HashSet<usize>, rng: &mut impl Rng) -> Option<usize> {
    if exclude.len() >= n {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let v = rng.gen_range(0..n);
        if !exclude.contains(&v) {
            return Some(v);
        }
    }
    let pool: Vec<usize> = (0..n).filter(|v| !exclude.contains(v)).collect();
    (!pool.is_empty()).then(|| pool[rng.gen_range(0..pool.len())])
}
