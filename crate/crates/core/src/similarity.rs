//! Community-level graph similarity.
//!
//! Each community is summarized by a five-bin histogram of member degrees
//! scaled by the network's largest degree, once on the plain graph and once on
//! its triangle-motif reweighting. Communities of two networks are compared by
//! a size-penalized symmetric KL divergence, matched greedily, and the graph
//! similarity is the mean matched similarity scaled into (0, 1].

use std::io::Write;

use crate::community::{detect_greedy_modularity, Partition};
use crate::error::{Error, Result};
use crate::graph::{motif_weighted_graph, Graph};

pub const BIN_COUNT: usize = 5;
pub const KL_SMOOTHING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeHistogram {
    pub bins: [f64; BIN_COUNT],
    pub community_size: usize,
}

impl DegreeHistogram {
    /// Bins `value / max` into intervals of width 0.2; a ratio of exactly 1
    /// lands in the top bin. With `max == 0` every member falls in bin 0.
    pub fn from_scaled(values: impl IntoIterator<Item = f64>, max: f64) -> Result<Self> {
        let mut bins = [0.0; BIN_COUNT];
        let mut size = 0;
        for v in values {
            let j = if max > 0.0 {
                // v * 5 / max avoids the rounding of (v / max) / 0.2
                ((v * BIN_COUNT as f64 / max).floor() as usize).min(BIN_COUNT - 1)
            } else {
                0
            };
            bins[j] += 1.0;
            size += 1;
        }
        if size == 0 {
            return Err(Error::EmptyCommunity);
        }
        for b in &mut bins {
            *b /= size as f64;
        }
        Ok(DegreeHistogram {
            bins,
            community_size: size,
        })
    }
}

/// Histogram of a community's (weighted) degrees, scaled by the network-wide
/// maximum (weighted) degree of `g`.
pub fn degree_interval_histogram(community: &[usize], g: &Graph) -> Result<DegreeHistogram> {
    let degrees = g.weighted_degrees();
    let max = degrees.iter().cloned().fold(0.0, f64::max);
    DegreeHistogram::from_scaled(community.iter().map(|&v| degrees[v]), max)
}

fn smoothed(h: &[f64; BIN_COUNT]) -> [f64; BIN_COUNT] {
    let total: f64 = h.iter().map(|b| b + KL_SMOOTHING).sum();
    let mut out = [0.0; BIN_COUNT];
    for (o, b) in out.iter_mut().zip(h) {
        *o = (b + KL_SMOOTHING) / total;
    }
    out
}

fn kl(p: &[f64; BIN_COUNT], q: &[f64; BIN_COUNT]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Symmetric KL divergence of the smoothed histograms times the community
/// size ratio (≥ 1).
pub fn community_diff(a: &DegreeHistogram, b: &DegreeHistogram) -> f64 {
    let (p, q) = (smoothed(&a.bins), smoothed(&b.bins));
    let sym = 0.5 * (kl(&p, &q) + kl(&q, &p));
    let (sa, sb) = (a.community_size as f64, b.community_size as f64);
    (sym * (sa / sb).max(sb / sa)).max(0.0)
}

/// Per-network data needed for similarity: partition and the degree
/// histograms of every community on the plain and motif graphs.
#[derive(Clone, Debug)]
pub struct SimilarityProfile {
    pub partition: Partition,
    pub plain: Vec<DegreeHistogram>,
    pub motif: Vec<DegreeHistogram>,
}

impl SimilarityProfile {
    pub fn new(g: &Graph, partition: Partition) -> Result<Self> {
        partition.check_covers(g)?;
        let motif_graph = motif_weighted_graph(g);
        let plain = partition
            .communities()
            .iter()
            .map(|c| degree_interval_histogram(c, g))
            .collect::<Result<Vec<_>>>()?;
        let motif = partition
            .communities()
            .iter()
            .map(|c| degree_interval_histogram(c, &motif_graph))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimilarityProfile {
            partition,
            plain,
            motif,
        })
    }

    pub fn detect(g: &Graph) -> Result<Self> {
        Self::new(g, detect_greedy_modularity(g)?)
    }

    /// `k × k'` matrix of community similarities against `other`.
    pub fn community_matrix(&self, other: &SimilarityProfile) -> Vec<Vec<f64>> {
        (0..self.plain.len())
            .map(|i| {
                (0..other.plain.len())
                    .map(|j| {
                        pair_similarity(
                            &self.plain[i],
                            &other.plain[j],
                            &self.motif[i],
                            &other.motif[j],
                        )
                    })
                    .collect()
            })
            .collect()
    }
}

fn pair_similarity(
    a: &DegreeHistogram,
    b: &DegreeHistogram,
    a_motif: &DegreeHistogram,
    b_motif: &DegreeHistogram,
) -> f64 {
    (-community_diff(a, b)).exp() + (-community_diff(a_motif, b_motif)).exp()
}

/// `exp(−Diff) + exp(−Diff^M)` for one community of each network; lies in (0, 2].
pub fn community_similarity(
    community_a: &[usize],
    community_b: &[usize],
    graph_a: &Graph,
    graph_b: &Graph,
    motif_a: &Graph,
    motif_b: &Graph,
) -> Result<f64> {
    Ok(pair_similarity(
        &degree_interval_histogram(community_a, graph_a)?,
        &degree_interval_histogram(community_b, graph_b)?,
        &degree_interval_histogram(community_a, motif_a)?,
        &degree_interval_histogram(community_b, motif_b)?,
    ))
}

/// Greedy one-to-one matching of communities.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedCommunities {
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

/// Repeatedly takes the largest remaining entry and retires its row and
/// column, `min(k, k')` times. Equal entries go to the smallest `(row, col)`.
pub fn align_communities(s: &[Vec<f64>]) -> AlignedCommunities {
    let rows = s.len();
    let cols = s.first().map_or(0, Vec::len);
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut out = AlignedCommunities {
        pairs: vec![],
        values: vec![],
    };
    for _ in 0..rows.min(cols) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in s.iter().enumerate() {
            if row_used[i] {
                continue;
            }
            for (j, &v) in row.iter().enumerate() {
                if col_used[j] {
                    continue;
                }
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((v, i, j)) = best else { break };
        row_used[i] = true;
        col_used[j] = true;
        out.pairs.push((i, j));
        out.values.push(v);
    }
    out
}

/// Mean aligned-community similarity divided by 2, in (0, 1].
pub fn profile_similarity(a: &SimilarityProfile, b: &SimilarityProfile) -> f64 {
    let aligned = align_communities(&a.community_matrix(b));
    if aligned.values.is_empty() {
        return 0.0;
    }
    aligned.values.iter().sum::<f64>() / aligned.values.len() as f64 / 2.0
}

pub fn graph_similarity(a: &Graph, b: &Graph) -> Result<f64> {
    Ok(profile_similarity(
        &SimilarityProfile::detect(a)?,
        &SimilarityProfile::detect(b)?,
    ))
}

/// Number of assisted networks for `n` networks: `round(√n)`, at least 1 and
/// at most `n − 1`.
pub fn assisted_count(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize)
        .max(1)
        .min(n.saturating_sub(1))
}

/// Live pairwise similarity state.
///
/// `raw` keeps the symmetric matrix as computed. In `values`, each row is
/// zero outside the row's assisted set and sums to 1 over it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub raw: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub assisted: Vec<Vec<usize>>,
}

impl SimilarityMatrix {
    /// Picks each row's `assisted` most similar other networks (ties to the
    /// smaller index), zeroes the rest and normalizes.
    pub fn from_raw(raw: Vec<Vec<f64>>, assisted: usize) -> Result<Self> {
        let n = raw.len();
        if n < 2 {
            return Err(Error::TooFewNetworks { needed: 2, got: n });
        }
        let k = assisted.clamp(1, n - 1);
        let mut values = vec![vec![0.0; n]; n];
        let mut sets = Vec::with_capacity(n);
        for i in 0..n {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&x, &y| raw[i][y].total_cmp(&raw[i][x]).then(x.cmp(&y)));
            let mut chosen = others[..k].to_vec();
            chosen.sort_unstable();
            for &j in &chosen {
                values[i][j] = raw[i][j];
            }
            sets.push(chosen);
        }
        let mut s = SimilarityMatrix {
            raw,
            values,
            assisted: sets,
        };
        for i in 0..n {
            s.normalize_row(i);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn normalize_row(&mut self, i: usize) {
        let total: f64 = self.assisted[i].iter().map(|&j| self.values[i][j]).sum();
        let k = self.assisted[i].len() as f64;
        for &j in &self.assisted[i] {
            self.values[i][j] = if total > 0.0 {
                self.values[i][j] / total
            } else {
                1.0 / k
            };
        }
    }

    /// Adds each assisted network's contribution to row `i`, then
    /// renormalizes the row over the assisted set. Entries for networks
    /// outside the assisted set are ignored.
    pub fn update(&mut self, i: usize, contributions: &[(usize, f64)]) {
        for &(j, c) in contributions {
            if self.assisted[i].contains(&j) {
                self.values[i][j] += c;
            }
        }
        self.normalize_row(i);
    }

    /// Transfer/mutation probabilities over the assisted set of row `i`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        self.assisted[i]
            .iter()
            .map(|&j| (j, self.values[i][j]))
            .collect()
    }

    /// CSV with network names as the header row and as the first column.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W, normalized: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["network".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        let m = if normalized { &self.values } else { &self.raw };
        for (name, row) in names.iter().zip(m) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Pairwise similarities of all profiles and the assisted-set matrix.
pub fn init_similarity_and_assisted(
    profiles: &[SimilarityProfile],
    assisted_override: Option<usize>,
) -> Result<SimilarityMatrix> {
    let n = profiles.len();
    if n < 2 {
        return Err(Error::TooFewNetworks { needed: 2, got: n });
    }
    let mut raw = vec![vec![0.0; n]; n];
    for i in 0..n {
        raw[i][i] = 1.0;
        for j in i + 1..n {
            let s = profile_similarity(&profiles[i], &profiles[j]);
            raw[i][j] = s;
            raw[j][i] = s;
        }
    }
    SimilarityMatrix::from_raw(raw, assisted_override.unwrap_or_else(|| assisted_count(n)))
}
