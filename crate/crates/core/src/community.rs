//! Partitions, greedy modularity detection and Newman modularity.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Assignment of every node to exactly one community.
///
/// Community ids are canonical: they are numbered 0.. in order of the
/// smallest node they contain, so two partitions with the same blocks compare
/// equal regardless of how they were labelled.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    communities: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition from arbitrary labels, relabelling canonically.
    pub fn from_labels<T: std::hash::Hash + Eq + Clone>(labels: &[T]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut communities: Vec<Vec<usize>> = Vec::new();
        for (v, label) in labels.iter().enumerate() {
            let next = map.len();
            let c = *map.entry(label.clone()).or_insert(next);
            if c == communities.len() {
                communities.push(Vec::new());
            }
            communities[c].push(v);
            assignment.push(c);
        }
        Partition {
            assignment,
            communities,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn whole(n: usize) -> Self {
        Partition::from_labels(&vec![0usize; n])
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn community_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Member lists, each ascending.
    pub fn communities(&self) -> &[Vec<usize>] {
        &self.communities
    }

    pub fn check_covers(&self, g: &Graph) -> Result<()> {
        if self.node_count() != g.node_count() {
            return Err(Error::NodeSetMismatch {
                partition: self.node_count(),
                graph: g.node_count(),
            });
        }
        Ok(())
    }
}

/// A community detection algorithm usable as the deception attacker.
pub trait CommunityDetector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, g: &Graph) -> Result<Partition>;
}

/// Clauset-Newman-Moore agglomerative modularity maximization.
///
/// Starts from singletons and repeatedly merges the pair of adjacent
/// communities with the largest modularity gain, stopping once no merge has a
/// positive gain. Equal gains go to the smallest `(community, community)` pair,
/// so the result is a pure function of the graph.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyModularity;

impl CommunityDetector for GreedyModularity {
    fn name(&self) -> &str {
        "greedy-modularity"
    }

    fn detect(&self, g: &Graph) -> Result<Partition> {
        detect_greedy_modularity(g)
    }
}

pub fn detect_greedy_modularity(g: &Graph) -> Result<Partition> {
    let m = g.edge_count();
    if m == 0 {
        return Err(Error::EdgelessGraph);
    }
    let n = g.node_count();
    let half = 1.0 / (2.0 * m as f64);
    // rows[i]: (neighbor community, e_ij) sorted by neighbor; e_ij is the
    // fraction of edge endpoints running between i and j.
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| g.neighbors(v).iter().map(|&u| (u, half)).collect())
        .collect();
    let mut a: Vec<f64> = (0..n).map(|v| g.degree(v) as f64 * half).collect();
    let mut alive = vec![true; n];
    // parent pointers for recovering membership
    let mut merged_into: Vec<usize> = (0..n).collect();

    let gain = |rows_a: &[f64], i: usize, j: usize, e: f64| 2.0 * (e - rows_a[i] * rows_a[j]);
    let row_best = |rows: &[Vec<(usize, f64)>], a: &[f64], i: usize| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for &(j, e) in &rows[i] {
            let dq = gain(a, i, j, e);
            match best {
                Some((b, _)) if dq <= b => {}
                _ => best = Some((dq, j)),
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = (0..n).map(|i| row_best(&rows, &a, i)).collect();

    loop {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            if let Some((dq, j)) = best[i] {
                let (lo, hi) = (i.min(j), i.max(j));
                let better = match pick {
                    None => true,
                    Some((pdq, plo, phi)) => dq > pdq || (dq == pdq && (lo, hi) < (plo, phi)),
                };
                if better {
                    pick = Some((dq, lo, hi));
                }
            }
        }
        let Some((dq, lo, hi)) = pick else { break };
        if dq <= 0.0 {
            break;
        }

        // Merge `hi` into `lo`.
        let row_hi = std::mem::take(&mut rows[hi]);
        let row_lo = std::mem::take(&mut rows[lo]);
        let mut merged = Vec::with_capacity(row_lo.len() + row_hi.len());
        let (mut x, mut y) = (0, 0);
        while x < row_lo.len() || y < row_hi.len() {
            let take_lo = y >= row_hi.len() || (x < row_lo.len() && row_lo[x].0 < row_hi[y].0);
            let take_hi = x >= row_lo.len() || (y < row_hi.len() && row_hi[y].0 < row_lo[x].0);
            let entry = if take_lo {
                x += 1;
                row_lo[x - 1]
            } else if take_hi {
                y += 1;
                row_hi[y - 1]
            } else {
                x += 1;
                y += 1;
                (row_lo[x - 1].0, row_lo[x - 1].1 + row_hi[y - 1].1)
            };
            if entry.0 != lo && entry.0 != hi {
                merged.push(entry);
            }
        }
        for &(k, e) in &merged {
            let row = &mut rows[k];
            if let Ok(p) = row.binary_search_by_key(&hi, |r| r.0) {
                row.remove(p);
            }
            match row.binary_search_by_key(&lo, |r| r.0) {
                Ok(p) => row[p].1 = e,
                Err(p) => row.insert(p, (lo, e)),
            }
        }
        rows[lo] = merged;
        a[lo] += a[hi];
        a[hi] = 0.0;
        alive[hi] = false;
        best[hi] = None;
        merged_into[hi] = lo;

        best[lo] = row_best(&rows, &a, lo);
        for idx in 0..rows[lo].len() {
            let k = rows[lo][idx].0;
            best[k] = row_best(&rows, &a, k);
        }
    }

    let root = |mut v: usize| {
        while merged_into[v] != v {
            v = merged_into[v];
        }
        v
    };
    let labels: Vec<usize> = (0..n).map(root).collect();
    Ok(Partition::from_labels(&labels))
}

/// Newman modularity `Σ_c [e_c/m − (d_c/2m)²]` of an unweighted graph.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    p.check_covers(g)?;
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut intra = vec![0.0; p.len()];
    let mut deg = vec![0.0; p.len()];
    for e in g.edges() {
        let (c0, c1) = (p.community_of(e.0), p.community_of(e.1));
        if c0 == c1 {
            intra[c0] += 1.0;
        }
    }
    for v in 0..g.node_count() {
        deg[p.community_of(v)] += g.degree(v) as f64;
    }
    Ok(intra
        .iter()
        .zip(&deg)
        .map(|(&e, &d)| e / m - (d / (2.0 * m)).powi(2))
        .sum())
}
