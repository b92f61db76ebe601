//! Synthetic networks with planted communities.

use std::io::Write;

use rand::Rng;

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::rng;

/// Planted-partition graph: nodes are split into consecutive blocks of the
/// given sizes; each same-block pair is linked with probability `p_in` and
/// each cross-block pair with probability `p_out`.
pub fn planted_partition(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Partition)> {
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "edge probability {p} is not in [0, 1]"
            )));
        }
    }
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut r = rng::substream(seed, "planted", &[]);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if labels[a] == labels[b] { p_in } else { p_out };
            if r.gen::<f64>() < p {
                edges.push(Edge(a, b));
            }
        }
    }
    Ok((
        Graph::from_edges(n, edges)?,
        Partition::from_labels(&labels),
    ))
}

/// Writes `u v` lines, one per edge.
pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    let mut s = String::with_capacity(g.edge_count() * 8);
    for e in g.edges() {
        s.push_str(&format!("{} {}\n", e.0, e.1));
    }
    out.write_all(s.as_bytes())
        .map_err(|e| Error::io("<edge list>", e))
}
