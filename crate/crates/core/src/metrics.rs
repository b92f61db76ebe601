//! Partition agreement and structural-change indices.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use crate::community::{modularity, CommunityDetector, Partition};
use crate::error::{Error, Result};
use crate::graph::{EditSet, Graph};

fn contingency(p1: &Partition, p2: &Partition) -> Result<HashMap<(usize, usize), usize>> {
    if p1.node_count() != p2.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: p1.node_count(),
            graph: p2.node_count(),
        });
    }
    let mut m = HashMap::new();
    for v in 0..p1.node_count() {
        *m.entry((p1.community_of(v), p2.community_of(v)))
            .or_insert(0) += 1;
    }
    Ok(m)
}

fn entropy(sizes: impl Iterator<Item = usize>, n: f64) -> f64 {
    sizes
        .filter(|&s| s > 0)
        .map(|s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `2·I/(H1 + H2)`; two single-cluster
/// partitions score 1.
pub fn nmi(p1: &Partition, p2: &Partition) -> Result<f64> {
    let m = contingency(p1, p2)?;
    let n = p1.node_count() as f64;
    if n == 0.0 {
        return Ok(1.0);
    }
    let h1 = entropy(p1.communities().iter().map(Vec::len), n);
    let h2 = entropy(p2.communities().iter().map(Vec::len), n);
    if h1 + h2 == 0.0 {
        return Ok(1.0);
    }
    let mut cells: Vec<_> = m.into_iter().collect();
    cells.sort_unstable();
    let mut mi = 0.0;
    for ((i, j), c) in cells {
        let c = c as f64;
        let a = p1.communities()[i].len() as f64;
        let b = p2.communities()[j].len() as f64;
        mi += c / n * (c * n / (a * b)).ln();
    }
    Ok((2.0 * mi / (h1 + h2)).clamp(0.0, 1.0))
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Degenerate cases where the expected index equals
/// the maximum (both partitions trivial) score 1.
pub fn ari(p1: &Partition, p2: &Partition) -> Result<f64> {
    let m = contingency(p1, p2)?;
    let n = p1.node_count();
    let mut cells: Vec<_> = m.into_values().collect();
    cells.sort_unstable();
    let index: f64 = cells.iter().map(|&c| pairs(c)).sum();
    let a: f64 = p1.communities().iter().map(|c| pairs(c.len())).sum();
    let b: f64 = p2.communities().iter().map(|c| pairs(c.len())).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Local clustering coefficient per node; nodes of degree < 2 get 0.
pub fn local_clustering(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            let d = g.degree(v);
            if d < 2 {
                return 0.0;
            }
            let nb = g.neighbors(v);
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a, b) {
                        links += 1;
                    }
                }
            }
            links as f64 / pairs(d)
        })
        .collect()
}

pub fn clustering_coefficient(g: &Graph) -> f64 {
    if g.node_count() == 0 {
        return 0.0;
    }
    local_clustering(g).iter().sum::<f64>() / g.node_count() as f64
}

/// Mean shortest-path length over ordered node pairs of the largest
/// connected component (the lowest-id one among equal sizes).
pub fn average_shortest_distance(g: &Graph) -> f64 {
    let comps = g.connected_components();
    let Some(largest) = comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
    else {
        return 0.0;
    };
    if largest.len() < 2 {
        return 0.0;
    }
    let mut total = 0usize;
    for &s in largest {
        total += g.bfs_distances(s).iter().flatten().sum::<usize>();
    }
    total as f64 / (largest.len() * (largest.len() - 1)) as f64
}

/// Brandes betweenness (unnormalized, each unordered pair counted once).
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
            preds[v].clear();
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    bc.iter().map(|b| b / 2.0).collect()
}

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-10;

/// Power-iteration PageRank. Dangling nodes spread their mass uniformly.
/// Iteration stops once the L1 change drops below `tol`.
pub fn pagerank(g: &Graph, damping: f64, tol: f64) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return vec![];
    }
    let nf = n as f64;
    let mut r = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..10_000 {
        let dangling: f64 = (0..n).filter(|&v| g.degree(v) == 0).map(|v| r[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for v in 0..n {
            let d = g.degree(v);
            if d > 0 {
                let share = damping * r[v] / d as f64;
                for &w in g.neighbors(v) {
                    next[w] += share;
                }
            }
        }
        let change: f64 = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut next);
        if change < tol {
            break;
        }
    }
    r
}

/// The `⌈0.2·n⌉` highest-scoring nodes, ties by id.
pub fn top_fifth(scores: &[f64]) -> Vec<usize> {
    let k = (scores.len() as f64 * 0.2).ceil() as usize;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn overlap(before: &[usize], after: &[usize]) -> f64 {
    if before.is_empty() {
        return 1.0;
    }
    let hits = before
        .iter()
        .filter(|v| after.binary_search(v).is_ok())
        .count();
    hits as f64 / before.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuralReport {
    pub edits_count: usize,
    pub clustering_before: f64,
    pub clustering_after: f64,
    pub asd_before: f64,
    pub asd_after: f64,
    pub betweenness_overlap: f64,
    pub pagerank_overlap: f64,
    pub modularity_before: f64,
    pub modularity_after: f64,
}

impl StructuralReport {
    pub const CSV_HEADER: [&'static str; 10] = [
        "network",
        "edits",
        "modularity_before",
        "modularity_after",
        "cc_before",
        "cc_after",
        "asd_before",
        "asd_after",
        "top20_betweenness_overlap",
        "top20_pagerank_overlap",
    ];

    pub fn csv_row(&self, network: &str) -> Vec<String> {
        vec![
            network.to_string(),
            self.edits_count.to_string(),
            self.modularity_before.to_string(),
            self.modularity_after.to_string(),
            self.clustering_before.to_string(),
            self.clustering_after.to_string(),
            self.asd_before.to_string(),
            self.asd_after.to_string(),
            self.betweenness_overlap.to_string(),
            self.pagerank_overlap.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(rows: &[(String, StructuralReport)], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for (name, r) in rows {
            w.write_record(r.csv_row(name))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Structural change caused by applying `edits` to `g`. Modularity is taken
/// on each graph's own detected partition.
pub fn structural_report(
    g: &Graph,
    edits: &EditSet,
    detector: &dyn CommunityDetector,
) -> Result<StructuralReport> {
    let after = g.apply_edits(edits)?;
    let modularity_of = |h: &Graph| -> Result<f64> {
        if h.edge_count() == 0 {
            return Ok(0.0);
        }
        modularity(h, &detector.detect(h)?)
    };
    Ok(StructuralReport {
        edits_count: edits.len(),
        clustering_before: clustering_coefficient(g),
        clustering_after: clustering_coefficient(&after),
        asd_before: average_shortest_distance(g),
        asd_after: average_shortest_distance(&after),
        betweenness_overlap: overlap(
            &top_fifth(&betweenness(g)),
            &top_fifth(&betweenness(&after)),
        ),
        pagerank_overlap: overlap(
            &top_fifth(&pagerank(g, PAGERANK_DAMPING, PAGERANK_TOL)),
            &top_fifth(&pagerank(&after, PAGERANK_DAMPING, PAGERANK_TOL)),
        ),
        modularity_before: modularity_of(g)?,
        modularity_after: modularity_of(&after)?,
    })
}
