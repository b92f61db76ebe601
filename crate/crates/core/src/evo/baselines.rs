use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::chromosome::{sample_edge, sample_non_edge};
use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graph::{Edge, EditSet, Graph};

fn check_budget(g: &Graph, budget: usize) -> Result<()> {
    let available = g.edge_count() + g.non_edge_count();
    if budget > available {
        return Err(Error::InfeasibleBudget { budget, available });
    }
    Ok(())
}

/// One uniform random operation: an addition or a deletion with equal
/// chance, falling back to the other kind when one pool is exhausted.
fn random_op(g: &Graph, taken: &HashSet<Edge>, rng: &mut impl Rng) -> Option<(Edge, bool)> {
    let add = rng.gen_bool(0.5);
    let draw = |add: bool, rng: &mut _| {
        if add {
            sample_non_edge(g, taken, rng)
        } else {
            sample_edge(g, taken, rng)
        }
    };
    draw(add, rng)
        .map(|e| (e, add))
        .or_else(|| draw(!add, rng).map(|e| (e, !add)))
}

/// Random attack: `budget` uniformly random additions and deletions.
pub fn ram_baseline(g: &Graph, budget: usize, rng: &mut impl Rng) -> Result<EditSet> {
    check_budget(g, budget)?;
    let mut taken = HashSet::new();
    let (mut adds, mut dels) = (Vec::new(), Vec::new());
    fill_random(g, budget, &mut taken, &mut adds, &mut dels, rng);
    Ok(EditSet::new(adds, dels))
}

fn fill_random(
    g: &Graph,
    budget: usize,
    taken: &mut HashSet<Edge>,
    adds: &mut Vec<Edge>,
    dels: &mut Vec<Edge>,
    rng: &mut impl Rng,
) {
    while adds.len() + dels.len() < budget {
        let (e, add) =
            random_op(g, taken, rng).expect("budget checked against available operations");
        taken.insert(e);
        if add {
            adds.push(e);
        } else {
            dels.push(e);
        }
    }
}

/// DICE: delete `⌈β/2⌉` random intra-community edges and add `⌊β/2⌋`
/// random inter-community non-edges. Shortfalls are topped up with random
/// operations.
pub fn dice_baseline(
    g: &Graph,
    p: &Partition,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<EditSet> {
    check_budget(g, budget)?;
    if p.node_count() != g.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: p.node_count(),
            graph: g.node_count(),
        });
    }
    let mut intra: Vec<Edge> = g
        .edges()
        .iter()
        .copied()
        .filter(|e| p.community_of(e.0) == p.community_of(e.1))
        .collect();
    intra.shuffle(rng);
    let mut dels: Vec<Edge> = intra.into_iter().take(budget.div_ceil(2)).collect();
    let mut taken: HashSet<Edge> = dels.iter().copied().collect();

    let want_adds = budget / 2;
    let mut adds = Vec::with_capacity(want_adds);
    let n = g.node_count();
    let inter_pairs: usize = {
        let sizes: Vec<usize> = p.communities().iter().map(Vec::len).collect();
        let total: usize = sizes.iter().sum();
        let same: usize = sizes.iter().map(|s| s * s.saturating_sub(1) / 2).sum();
        total * total.saturating_sub(1) / 2 - same
    };
    let inter_edges = g
        .edges()
        .iter()
        .filter(|e| p.community_of(e.0) != p.community_of(e.1))
        .count();
    let inter_available = inter_pairs - inter_edges;
    if inter_available > 0 && n >= 2 {
        let mut misses = 0;
        while adds.len() < want_adds.min(inter_available) && misses < 64 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let e = Edge::new(a, b);
            if p.community_of(a) != p.community_of(b) && !g.contains(e) && taken.insert(e) {
                adds.push(e);
                misses = 0;
            } else {
                misses += 1;
            }
        }
        if adds.len() < want_adds.min(inter_available) {
            let mut pool: Vec<Edge> = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let e = Edge(a, b);
                    if p.community_of(a) != p.community_of(b)
                        && !g.contains(e)
                        && !taken.contains(&e)
                    {
                        pool.push(e);
                    }
                }
            }
            pool.shuffle(rng);
            for e in pool
                .into_iter()
                .take(want_adds.min(inter_available) - adds.len())
            {
                taken.insert(e);
                adds.push(e);
            }
        }
    }
    fill_random(g, budget, &mut taken, &mut adds, &mut dels, rng);
    Ok(EditSet::new(adds, dels))
}
