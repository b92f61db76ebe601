//! Cross-network node alignment.
//!
//! Anchors come from aligned communities: the i-th highest-degree nodes of a
//! matched community pair are paired, and each such pair drags along its
//! least-degree neighbors as a loosely matched group. Two affine maps between
//! the embedding spaces are fitted on the anchors plus an automapping term.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::embedding::{row_distance_sq, train_gae, Adam, GaeHyper};
use crate::error::{Error, Result};
use crate::evo::{Genome, RawGenome};
use crate::graph::Graph;
use crate::rng;
use crate::similarity::{align_communities, AlignedCommunities, SimilarityProfile};

/// `x ↦ x·W + b` on row vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        AffineMap {
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// Applies the map to every row of `x`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("affine-map v1\n");
        s.push_str(&crate::embedding::matrix_to_text("weight", &self.weight));
        s.push_str(&crate::embedding::matrix_to_text(
            "bias",
            &self.bias.clone().insert_axis(Axis(0)),
        ));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next() != Some("affine-map v1") {
            return Err(Error::Shape("not an affine-map v1 file".into()));
        }
        let weight = crate::embedding::matrix_from_lines("weight", &mut lines)?;
        let bias = crate::embedding::matrix_from_lines("bias", &mut lines)?;
        if !weight.is_square() || bias.nrows() != 1 || bias.ncols() != weight.nrows() {
            return Err(Error::Shape("affine map dimensions disagree".into()));
        }
        Ok(AffineMap {
            weight,
            bias: bias.index_axis(Axis(0), 0).to_owned(),
        })
    }
}

/// A large-degree anchor pair and the least-degree neighbors on each side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmallGroup {
    pub anchor: (usize, usize),
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnchorSet {
    pub large_pairs: Vec<(usize, usize)>,
    pub small_groups: Vec<SmallGroup>,
}

fn floor_log2(x: usize) -> usize {
    if x == 0 {
        0
    } else {
        x.ilog2() as usize
    }
}

fn by_degree(g: &Graph, nodes: &[usize], descending: bool) -> Vec<usize> {
    let mut v = nodes.to_vec();
    v.sort_by(|&a, &b| {
        let ord = g.degree(a).cmp(&g.degree(b));
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    v
}

/// Anchors from every aligned community pair: `⌊min(log2|C|, log2|C'|)⌋`
/// degree-rank pairs, each with `⌊min(log2 deg u, log2 deg v)⌋`
/// least-degree neighbors per side. Degree ties go to the smaller id.
pub fn select_anchors(
    aligned: &AlignedCommunities,
    ga: &Graph,
    gb: &Graph,
    pa: &Partition,
    pb: &Partition,
) -> AnchorSet {
    let mut out = AnchorSet::default();
    for &(i, j) in &aligned.pairs {
        let ca = &pa.communities()[i];
        let cb = &pb.communities()[j];
        let kl = floor_log2(ca.len()).min(floor_log2(cb.len()));
        let ra = by_degree(ga, ca, true);
        let rb = by_degree(gb, cb, true);
        for r in 0..kl {
            let (u, v) = (ra[r], rb[r]);
            out.large_pairs.push((u, v));
            let ks = floor_log2(ga.degree(u)).min(floor_log2(gb.degree(v)));
            if ks > 0 {
                out.small_groups.push(SmallGroup {
                    anchor: (u, v),
                    left: by_degree(ga, ga.neighbors(u), false)[..ks].to_vec(),
                    right: by_degree(gb, gb.neighbors(v), false)[..ks].to_vec(),
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlignmentLosses {
    pub large: f64,
    pub small: f64,
    pub unsupervised: f64,
}

impl AlignmentLosses {
    pub fn total(&self) -> f64 {
        self.large + self.small + self.unsupervised
    }
}

/// Weighted supervised row pairs `(u, v, weight)`.
fn supervised_pairs(anchors: &AnchorSet) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let large = anchors
        .large_pairs
        .iter()
        .map(|&(u, v)| (u, v, 1.0))
        .collect();
    let mut small = Vec::new();
    for grp in &anchors.small_groups {
        let w = 1.0 / grp.left.len() as f64;
        for &u in &grp.left {
            for &v in &grp.right {
                small.push((u, v, w));
            }
        }
    }
    (large, small)
}

fn check_shapes(ab: &AffineMap, ba: &AffineMap, ea: &Array2<f64>, eb: &Array2<f64>) -> Result<()> {
    let d = ea.ncols();
    if eb.ncols() != d
        || ab.dim() != d
        || ba.dim() != d
        || ab.weight.dim() != (d, d)
        || ba.weight.dim() != (d, d)
    {
        return Err(Error::Shape(format!(
            "embedding dims {} and {} with map dims {} and {}",
            ea.ncols(),
            eb.ncols(),
            ab.dim(),
            ba.dim()
        )));
    }
    Ok(())
}

fn gather(e: &Array2<f64>, rows: impl Iterator<Item = usize>) -> Array2<f64> {
    let rows: Vec<usize> = rows.collect();
    e.select(Axis(0), &rows)
}

/// Gradient accumulator for both maps.
struct Grads {
    ab_w: Array2<f64>,
    ab_b: Array1<f64>,
    ba_w: Array2<f64>,
    ba_b: Array1<f64>,
}

/// Two-way weighted MSE over pairs, with gradients when `grads` is given.
fn two_way_term(
    ab: &AffineMap,
    ba: &AffineMap,
    ea: &Array2<f64>,
    eb: &Array2<f64>,
    pairs: &[(usize, usize, f64)],
    grads: Option<&mut Grads>,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let d = ea.ncols() as f64;
    let xa = gather(ea, pairs.iter().map(|p| p.0));
    let xb = gather(eb, pairs.iter().map(|p| p.1));
    let w = Array1::from_iter(pairs.iter().map(|p| p.2)).insert_axis(Axis(1));
    let ra = ab.apply(&xa) - &xb;
    let rb = ba.apply(&xb) - &xa;
    let loss = ((&ra * &ra) * &w).sum() / d + ((&rb * &rb) * &w).sum() / d;
    if let Some(gr) = grads {
        let sa = &ra * &w * (2.0 / d);
        let sb = &rb * &w * (2.0 / d);
        gr.ab_w += &xa.t().dot(&sa);
        gr.ab_b += &sa.sum_axis(Axis(0));
        gr.ba_w += &xb.t().dot(&sb);
        gr.ba_b += &sb.sum_axis(Axis(0));
    }
    loss
}

/// Mean reconstruction error of `second ∘ first` on the rows of `x`.
fn automap_term(
    first: &AffineMap,
    second: &AffineMap,
    x: &Array2<f64>,
    grads: Option<(
        &mut Array2<f64>,
        &mut Array1<f64>,
        &mut Array2<f64>,
        &mut Array1<f64>,
    )>,
) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let d = x.ncols() as f64;
    let c = 1.0 / x.nrows() as f64;
    let h = first.apply(x);
    let r = second.apply(&h) - x;
    let loss = c * (&r * &r).sum() / d;
    if let Some((g1w, g1b, g2w, g2b)) = grads {
        let s = &r * (2.0 * c / d);
        *g2w += &h.t().dot(&s);
        *g2b += &s.sum_axis(Axis(0));
        let dh = s.dot(&second.weight.t());
        *g1w += &x.t().dot(&dh);
        *g1b += &dh.sum_axis(Axis(0));
    }
    loss
}

fn losses_impl(
    ab: &AffineMap,
    ba: &AffineMap,
    ea: &Array2<f64>,
    eb: &Array2<f64>,
    anchors: &AnchorSet,
    mut grads: Option<&mut Grads>,
) -> AlignmentLosses {
    let (large_pairs, small_pairs) = supervised_pairs(anchors);
    let large = two_way_term(ab, ba, ea, eb, &large_pairs, grads.as_deref_mut());
    let small = two_way_term(ab, ba, ea, eb, &small_pairs, grads.as_deref_mut());
    let unsupervised = match grads {
        Some(gr) => {
            automap_term(
                ab,
                ba,
                ea,
                Some((&mut gr.ab_w, &mut gr.ab_b, &mut gr.ba_w, &mut gr.ba_b)),
            ) + automap_term(
                ba,
                ab,
                eb,
                Some((&mut gr.ba_w, &mut gr.ba_b, &mut gr.ab_w, &mut gr.ab_b)),
            )
        }
        None => automap_term(ab, ba, ea, None) + automap_term(ba, ab, eb, None),
    };
    AlignmentLosses {
        large,
        small,
        unsupervised,
    }
}

/// Supervised losses on large anchor pairs and small groups plus the
/// automapping loss averaged over all nodes of each network.
pub fn alignment_losses(
    ab: &AffineMap,
    ba: &AffineMap,
    ea: &Array2<f64>,
    eb: &Array2<f64>,
    anchors: &AnchorSet,
) -> Result<AlignmentLosses> {
    check_shapes(ab, ba, ea, eb)?;
    Ok(losses_impl(ab, ba, ea, eb, anchors, None))
}

/// Total loss with gradients `(dW_ab, db_ab, dW_ba, db_ba)`.
pub fn alignment_gradients(
    ab: &AffineMap,
    ba: &AffineMap,
    ea: &Array2<f64>,
    eb: &Array2<f64>,
    anchors: &AnchorSet,
) -> Result<(f64, AffineMap, AffineMap)> {
    check_shapes(ab, ba, ea, eb)?;
    let d = ea.ncols();
    let mut g = Grads {
        ab_w: Array2::zeros((d, d)),
        ab_b: Array1::zeros(d),
        ba_w: Array2::zeros((d, d)),
        ba_b: Array1::zeros(d),
    };
    let l = losses_impl(ab, ba, ea, eb, anchors, Some(&mut g));
    Ok((
        l.total(),
        AffineMap {
            weight: g.ab_w,
            bias: g.ab_b,
        },
        AffineMap {
            weight: g.ba_w,
            bias: g.ba_b,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AlignHyper {
    fn default() -> Self {
        AlignHyper {
            epochs: 500,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedAlignment {
    pub forward: AffineMap,
    pub backward: AffineMap,
    /// Total loss before each update, then the final loss.
    pub losses: Vec<f64>,
}

/// Fits both maps with Adam, starting from the identity.
pub fn train_alignment(
    ea: &Array2<f64>,
    eb: &Array2<f64>,
    anchors: &AnchorSet,
    hyper: &AlignHyper,
) -> Result<TrainedAlignment> {
    let d = ea.ncols();
    let mut ab = AffineMap::identity(d);
    let mut ba = AffineMap::identity(d);
    check_shapes(&ab, &ba, ea, eb)?;
    let as_row = |b: &Array1<f64>| b.clone().insert_axis(Axis(0));
    let mut ab_b = as_row(&ab.bias);
    let mut ba_b = as_row(&ba.bias);
    let mut adam = Adam::new(hyper.learning_rate, &[&ab.weight, &ab_b, &ba.weight, &ba_b]);
    let mut losses = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..hyper.epochs {
        ab.bias = ab_b.index_axis(Axis(0), 0).to_owned();
        ba.bias = ba_b.index_axis(Axis(0), 0).to_owned();
        let (loss, gab, gba) = alignment_gradients(&ab, &ba, ea, eb, anchors)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
        adam.step(
            &mut [&mut ab.weight, &mut ab_b, &mut ba.weight, &mut ba_b],
            &[
                &gab.weight,
                &as_row(&gab.bias),
                &gba.weight,
                &as_row(&gba.bias),
            ],
        );
    }
    ab.bias = ab_b.index_axis(Axis(0), 0).to_owned();
    ba.bias = ba_b.index_axis(Axis(0), 0).to_owned();
    let last = alignment_losses(&ab, &ba, ea, eb, anchors)?.total();
    if !last.is_finite() {
        return Err(Error::Diverged {
            epoch: hyper.epochs,
            loss: last,
        });
    }
    losses.push(last);
    Ok(TrainedAlignment {
        forward: ab,
        backward: ba,
        losses,
    })
}

/// Source node → target node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMapping {
    pub map: Vec<usize>,
}

impl NodeMapping {
    pub fn identity(n: usize) -> Self {
        NodeMapping {
            map: (0..n).collect(),
        }
    }

    pub fn apply(&self, v: usize) -> usize {
        self.map[v]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source_id", "target_id"])?;
        for (s, t) in self.map.iter().enumerate() {
            w.write_record([s.to_string(), t.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Nearest target embedding to each mapped source embedding; ties go to the
/// smallest target id.
pub fn node_mapping(map: &AffineMap, ea: &Array2<f64>, eb: &Array2<f64>) -> Result<NodeMapping> {
    if map.dim() != ea.ncols() || ea.ncols() != eb.ncols() {
        return Err(Error::Shape("embedding and map dimensions disagree".into()));
    }
    if eb.nrows() == 0 {
        return Err(Error::Shape("target embedding has no rows".into()));
    }
    let mapped = map.apply(ea);
    let out = (0..mapped.nrows())
        .map(|u| {
            let mut best = (f64::INFINITY, 0);
            for v in 0..eb.nrows() {
                let dist = row_distance_sq(&mapped, u, eb, v);
                if dist < best.0 {
                    best = (dist, v);
                }
            }
            best.1
        })
        .collect();
    Ok(NodeMapping { map: out })
}

/// Image of a solution under a node mapping, with degenerate genes flagged.
pub fn map_edge_solution(genome: &Genome, m: &NodeMapping) -> (RawGenome, Vec<bool>) {
    let raw = match genome {
        Genome::Deception { genes, rho } => RawGenome::Deception {
            genes: genes.iter().map(|e| (m.apply(e.0), m.apply(e.1))).collect(),
            rho: *rho,
        },
        Genome::InfluenceMax { seeds } => RawGenome::InfluenceMax {
            seeds: seeds.iter().map(|&s| m.apply(s)).collect(),
        },
    };
    let flags = raw.degenerate();
    (raw, flags)
}

/// Everything learned for one ordered pair of networks.
#[derive(Clone, Debug)]
pub struct PairAlignment {
    pub anchors: AnchorSet,
    pub trained: TrainedAlignment,
    /// Source → target.
    pub forward_mapping: NodeMapping,
    /// Target → source.
    pub backward_mapping: NodeMapping,
}

/// Aligns two embedded networks end to end.
pub fn align_pair(
    ga: &Graph,
    profile_a: &SimilarityProfile,
    ea: &Array2<f64>,
    gb: &Graph,
    profile_b: &SimilarityProfile,
    eb: &Array2<f64>,
    hyper: &AlignHyper,
) -> Result<PairAlignment> {
    let aligned = align_communities(&profile_a.community_matrix(profile_b));
    let anchors = select_anchors(&aligned, ga, gb, &profile_a.partition, &profile_b.partition);
    let trained = train_alignment(ea, eb, &anchors, hyper)?;
    let forward_mapping = node_mapping(&trained.forward, ea, eb)?;
    let backward_mapping = node_mapping(&trained.backward, eb, ea)?;
    Ok(PairAlignment {
        anchors,
        trained,
        forward_mapping,
        backward_mapping,
    })
}

/// Aligns `g` with a randomly relabeled copy of itself and reports the
/// fraction of top-decile-degree nodes mapped onto their own copy.
pub fn self_alignment_accuracy(
    g: &Graph,
    gae: &GaeHyper,
    hyper: &AlignHyper,
    seed: u64,
) -> Result<f64> {
    let n = g.node_count();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::substream(seed, "relabel", &[]));
    let copy = g.relabel(&perm)?;
    let pa = SimilarityProfile::detect(g)?;
    let pb = SimilarityProfile::detect(&copy)?;
    let ea = train_gae(g, &pa.partition, gae)?.embeddings;
    let eb = train_gae(&copy, &pb.partition, gae)?.embeddings;
    let pair = align_pair(g, &pa, &ea, &copy, &pb, &eb, hyper)?;
    let top = by_degree(g, &(0..n).collect::<Vec<_>>(), true);
    let k = n.div_ceil(10).max(1);
    let hits = top[..k]
        .iter()
        .filter(|&&v| pair.forward_mapping.apply(v) == perm[v])
        .count();
    Ok(hits as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use rand::{Rng, SeedableRng};

    fn random_embedding(n: usize, d: usize, r: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| r.gen_range(-1.0..1.0))
    }

    #[test]
    fn anchor_counts() {
        assert_eq!(floor_log2(16).min(floor_log2(64)), 4);
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(8).min(floor_log2(4)), 2);

        // hub 0 with 8 leaves vs hub 0 with 4 leaves
        let ga = Graph::from_edges(9, (1..9).map(|l| Edge(0, l))).unwrap();
        let gb = Graph::from_edges(5, (1..5).map(|l| Edge(0, l))).unwrap();
        let aligned = AlignedCommunities {
            pairs: vec![(0, 0)],
            values: vec![1.0],
        };
        let a = select_anchors(
            &aligned,
            &ga,
            &gb,
            &Partition::whole(9),
            &Partition::whole(5),
        );
        assert_eq!(a.large_pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.small_groups.len(), 1);
        assert_eq!(a.small_groups[0].left, vec![1, 2]);
        assert_eq!(a.small_groups[0].right, vec![1, 2]);
    }

    #[test]
    fn identity_maps_on_equal_embeddings_have_zero_loss() {
        let mut r = rng::Rng::seed_from_u64(1);
        let e = random_embedding(6, 3, &mut r);
        let anchors = AnchorSet {
            large_pairs: vec![(0, 0), (2, 2)],
            small_groups: vec![SmallGroup {
                anchor: (0, 0),
                left: vec![1],
                right: vec![1],
            }],
        };
        let id = AffineMap::identity(3);
        let l = alignment_losses(&id, &id, &e, &e, &anchors).unwrap();
        assert_eq!(l, AlignmentLosses::default());
        let none = alignment_losses(&id, &id, &e, &e, &AnchorSet::default()).unwrap();
        assert_eq!(none.large + none.small, 0.0);
    }

    #[test]
    fn zero_epochs_leave_identity() {
        let mut r = rng::Rng::seed_from_u64(2);
        let e = random_embedding(5, 2, &mut r);
        let hyper = AlignHyper {
            epochs: 0,
            ..AlignHyper::default()
        };
        let t = train_alignment(&e, &e, &AnchorSet::default(), &hyper).unwrap();
        assert_eq!(t.forward, AffineMap::identity(2));
        assert_eq!(t.losses.len(), 1);
    }

    #[test]
    fn training_fits_a_known_rotation() {
        let mut r = rng::Rng::seed_from_u64(3);
        let ea = random_embedding(30, 2, &mut r);
        let rot = ndarray::arr2(&[[0.0, 1.0], [-1.0, 0.0]]);
        let eb = ea.dot(&rot);
        let anchors = AnchorSet {
            large_pairs: (0..30).map(|i| (i, i)).collect(),
            small_groups: vec![],
        };
        let hyper = AlignHyper {
            epochs: 2000,
            learning_rate: 0.02,
            seed: 0,
        };
        let t = train_alignment(&ea, &eb, &anchors, &hyper).unwrap();
        assert!(t.losses.last().unwrap() < &t.losses[0]);
        let m = node_mapping(&t.forward, &ea, &eb).unwrap();
        assert!(m.map.iter().enumerate().filter(|(i, v)| i == *v).count() >= 27);
    }

    #[test]
    fn nearest_neighbor_exact_match_and_ties() {
        let eb = ndarray::arr2(&[[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]);
        let ea = ndarray::arr2(&[[1.0, 1.0], [0.1, 0.0]]);
        let m = node_mapping(&AffineMap::identity(2), &ea, &eb).unwrap();
        assert_eq!(m.map, vec![1, 0]);
    }

    #[test]
    fn mapped_solutions_flag_collisions() {
        let g = Genome::deception(vec![Edge(0, 1)], vec![Edge(1, 2), Edge(2, 3)]);
        let (raw, flags) = map_edge_solution(&g, &NodeMapping::identity(4));
        assert_eq!(raw, RawGenome::from(&g));
        assert_eq!(flags, vec![false; 3]);
        let squash = NodeMapping {
            map: vec![0, 0, 1, 2],
        };
        let (_, flags) = map_edge_solution(&g, &squash);
        assert_eq!(flags, vec![true, false, false]);
        let (raw, flags) = map_edge_solution(&Genome::influence(vec![0, 1, 3]), &squash);
        assert_eq!(
            raw,
            RawGenome::InfluenceMax {
                seeds: vec![0, 0, 2]
            }
        );
        assert_eq!(flags, vec![false, true, false]);
    }

    #[test]
    fn affine_map_text_roundtrip() {
        let mut r = rng::Rng::seed_from_u64(4);
        let m = AffineMap {
            weight: random_embedding(3, 3, &mut r),
            bias: Array1::from_vec(vec![0.5, -1.25, 1e-300]),
        };
        assert_eq!(AffineMap::from_text(&m.to_text()).unwrap(), m);
    }
}
