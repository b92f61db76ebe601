//! Undirected simple graphs with dense node ids.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected edge, stored with the smaller endpoint first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn is_loop(self) -> bool {
        self.0 == self.1
    }

    pub fn touches(self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Edge additions and deletions applied together as `(E ∪ additions) \ deletions`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EditSet {
    pub additions: Vec<Edge>,
    pub deletions: Vec<Edge>,
}

impl EditSet {
    pub fn new(additions: Vec<Edge>, deletions: Vec<Edge>) -> Self {
        EditSet {
            additions,
            deletions,
        }
    }

    pub fn len(&self) -> usize {
        self.additions.len() + self.deletions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The edit set that undoes this one on the edited graph.
    pub fn inverse(&self) -> EditSet {
        EditSet {
            additions: self.deletions.clone(),
            deletions: self.additions.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    weights: Option<Vec<f64>>,
}

impl Graph {
    /// Builds a graph on `node_count` nodes. Self-loops and repeated edges are
    /// dropped; endpoints outside `0..node_count` are an error.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut list: Vec<Edge> = edges.into_iter().collect();
        if let Some(&bad) = list.iter().find(|e| e.1 >= node_count) {
            return Err(Error::InvalidEdit {
                present: vec![],
                absent: vec![],
                out_of_range: vec![bad],
            });
        }
        list.retain(|e| !e.is_loop());
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted(node_count, list, None))
    }

    /// Builds a weighted graph. Later duplicates of an edge are ignored.
    pub fn from_weighted_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (Edge, f64)>,
    ) -> Result<Self> {
        let mut list: Vec<(Edge, f64)> = edges.into_iter().filter(|(e, _)| !e.is_loop()).collect();
        if let Some(&(bad, _)) = list.iter().find(|(e, _)| e.1 >= node_count) {
            return Err(Error::InvalidEdit {
                present: vec![],
                absent: vec![],
                out_of_range: vec![bad],
            });
        }
        list.sort_by_key(|a| a.0);
        list.dedup_by(|later, earlier| later.0 == earlier.0);
        let (edges, weights): (Vec<Edge>, Vec<f64>) = list.into_iter().unzip();
        Ok(Self::from_sorted(node_count, edges, Some(weights)))
    }

    fn from_sorted(node_count: usize, edges: Vec<Edge>, weights: Option<Vec<f64>>) -> Self {
        let mut adj = vec![Vec::new(); node_count];
        for e in &edges {
            adj[e.0].push(e.1);
            adj[e.1].push(e.0);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph {
            adj,
            edges,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && a < self.adj.len() && self.adj[a].binary_search(&b).is_ok()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.has_edge(e.0, e.1)
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Weight of an edge; 1.0 for unweighted graphs and 0.0 for absent edges.
    pub fn weight(&self, e: Edge) -> f64 {
        match self.edges.binary_search(&e) {
            Ok(i) => self.weights.as_ref().map_or(1.0, |w| w[i]),
            Err(_) => 0.0,
        }
    }

    /// Sum of incident edge weights (plain degree when unweighted).
    pub fn weighted_degree(&self, v: usize) -> f64 {
        match &self.weights {
            None => self.degree(v) as f64,
            Some(_) => self.adj[v]
                .iter()
                .map(|&u| self.weight(Edge::new(u, v)))
                .sum(),
        }
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        match &self.weights {
            None => self.adj.iter().map(|a| a.len() as f64).collect(),
            Some(w) => {
                let mut out = vec![0.0; self.node_count()];
                for (e, &wt) in self.edges.iter().zip(w) {
                    out[e.0] += wt;
                    out[e.1] += wt;
                }
                out
            }
        }
    }

    /// Number of node pairs that are not edges.
    pub fn non_edge_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1) / 2 - self.edge_count()
    }

    /// Returns `(E ∪ additions) \ deletions`. Additions must be absent,
    /// deletions present; every offender is reported at once.
    pub fn apply_edits(&self, edits: &EditSet) -> Result<Graph> {
        let n = self.node_count();
        let mut present = Vec::new();
        let mut absent = Vec::new();
        let mut out_of_range = Vec::new();
        let mut seen = HashSet::new();
        for &e in &edits.additions {
            let e = Edge::new(e.0, e.1);
            if e.1 >= n || e.is_loop() {
                out_of_range.push(e);
            } else if self.contains(e) || !seen.insert(e) {
                present.push(e);
            }
        }
        let mut removed = HashSet::new();
        for &e in &edits.deletions {
            let e = Edge::new(e.0, e.1);
            if e.1 >= n || e.is_loop() {
                out_of_range.push(e);
            } else if !self.contains(e) || !removed.insert(e) {
                absent.push(e);
            }
        }
        if !(present.is_empty() && absent.is_empty() && out_of_range.is_empty()) {
            return Err(Error::InvalidEdit {
                present,
                absent,
                out_of_range,
            });
        }
        let weighted = self.weights.is_some();
        let mut list: Vec<(Edge, f64)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !removed.contains(e))
            .map(|(i, &e)| (e, self.weights.as_ref().map_or(1.0, |w| w[i])))
            .collect();
        list.extend(seen.into_iter().map(|e| (e, 1.0)));
        list.sort_by_key(|a| a.0);
        let (edges, weights): (Vec<Edge>, Vec<f64>) = list.into_iter().unzip();
        Ok(Self::from_sorted(n, edges, weighted.then_some(weights)))
    }

    /// Copy of the graph where node `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if perm.len() != n || check.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::Shape(format!(
                "relabel needs a permutation of 0..{n}"
            )));
        }
        match &self.weights {
            None => Graph::from_edges(
                n,
                self.edges.iter().map(|e| Edge::new(perm[e.0], perm[e.1])),
            ),
            Some(w) => Graph::from_weighted_edges(
                n,
                self.edges
                    .iter()
                    .zip(w)
                    .map(|(e, &wt)| (Edge::new(perm[e.0], perm[e.1]), wt)),
            ),
        }
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &w in &self.adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Number of common neighbors of `a` and `b`.
    pub fn common_neighbors(&self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.adj[a], &self.adj[b]);
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }
}

/// Triangle-motif reweighting: an edge keeps weight equal to the number of
/// triangles through it; edges on no triangle are dropped.
pub fn motif_weighted_graph(g: &Graph) -> Graph {
    let weighted: Vec<(Edge, f64)> = g
        .edges()
        .iter()
        .filter_map(|&e| {
            let t = g.common_neighbors(e.0, e.1);
            (t > 0).then_some((e, t as f64))
        })
        .collect();
    let (edges, weights): (Vec<Edge>, Vec<f64>) = weighted.into_iter().unzip();
    Graph::from_sorted(g.node_count(), edges, Some(weights))
}

/// A graph read from an edge list, with the original node labels.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// `labels[id]` is the token the node had in the file.
    pub labels: Vec<String>,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

/// Parses whitespace-separated node pairs, one per line. Lines starting with
/// `#` and blank lines are skipped. Ids are assigned in order of first
/// appearance.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<LoadedGraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let (mut loops, mut dups) = (0, 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 2 tokens, found {}", tokens.len()),
            });
        }
        let mut id = |tok: &str| {
            *ids.entry(tok.to_string()).or_insert_with(|| {
                labels.push(tok.to_string());
                labels.len() - 1
            })
        };
        let (a, b) = (id(tokens[0]), id(tokens[1]));
        let e = Edge::new(a, b);
        if e.is_loop() {
            loops += 1;
        } else if !seen.insert(e) {
            dups += 1;
        } else {
            edges.push(e);
        }
    }
    if loops + dups > 0 {
        log::warn!(
            "{}: dropped {loops} self-loops and {dups} duplicate edges",
            origin.display()
        );
    }
    edges.sort_unstable();
    Ok(LoadedGraph {
        graph: Graph::from_sorted(labels.len(), edges, None),
        labels,
        self_loops_dropped: loops,
        duplicates_dropped: dups,
    })
}
