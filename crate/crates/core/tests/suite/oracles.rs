//! Library results checked against small independent re-implementations.

use mdeo::alignment::{node_mapping, AffineMap};
use mdeo::community::Partition;
use mdeo::graph::{motif_weighted_graph, Edge, Graph};
use mdeo::metrics::{ari, nmi};
use mdeo::rng::Rng;
use mdeo::similarity::{
    align_communities, community_diff, degree_interval_histogram, DegreeHistogram,
};
use ndarray::Array2;
use rand::{Rng as _, SeedableRng};

fn random_graph(n: usize, p: f64, r: &mut Rng) -> Graph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen::<f64>() < p {
                edges.push(Edge(a, b));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn histogram_by_hand() {
    // degrees: hub 4, leaves 1, plus a 3-path tail
    let g = Graph::from_edges(
        7,
        [
            Edge(0, 1),
            Edge(0, 2),
            Edge(0, 3),
            Edge(0, 4),
            Edge(4, 5),
            Edge(5, 6),
        ],
    )
    .unwrap();
    // max degree 4; scaled: 0 → 1.0, 1,2,3 → 0.25, 4 → 0.5, 5 → 0.5, 6 → 0.25
    let h = degree_interval_histogram(&[0, 1, 2, 3, 4, 5, 6], &g).unwrap();
    assert_eq!(h.bins, [0.0, 4.0 / 7.0, 2.0 / 7.0, 0.0, 1.0 / 7.0]);
    // boundary values: 0.2 and 0.6 of the max land in bins 1 and 3
    let b = DegreeHistogram::from_scaled([1.0, 3.0, 5.0, 0.0], 5.0).unwrap();
    assert_eq!(b.bins, [0.25, 0.25, 0.0, 0.25, 0.25]);
}

pub fn histogram_matches_enumeration_on_random_graphs() {
    let mut r = Rng::seed_from_u64(10);
    for _ in 0..50 {
        let n = r.gen_range(2..30);
        let g = random_graph(n, r.gen_range(0.05..0.6), &mut r);
        let community: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.5)).collect();
        if community.is_empty() {
            continue;
        }
        let dmax = (0..n).map(|v| g.degree(v)).max().unwrap();
        let mut counts = [0usize; 5];
        for &v in &community {
            // integer arithmetic: bin j holds j/5 ≤ d/dmax < (j+1)/5
            let j = if dmax == 0 {
                0
            } else {
                (0..5).rev().find(|&j| 5 * g.degree(v) >= j * dmax).unwrap()
            };
            counts[j] += 1;
        }
        let h = degree_interval_histogram(&community, &g).unwrap();
        for j in 0..5 {
            assert_eq!(h.bins[j], counts[j] as f64 / community.len() as f64);
        }
    }
}

fn kl_oracle(a: &[f64; 5], b: &[f64; 5], sa: usize, sb: usize) -> f64 {
    let eps = 1e-6;
    let za: f64 = a.iter().map(|x| x + eps).sum();
    let zb: f64 = b.iter().map(|x| x + eps).sum();
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..5 {
        let p = (a[i] + eps) / za;
        let q = (b[i] + eps) / zb;
        forward += p * (p.ln() - q.ln());
        backward += q * (q.ln() - p.ln());
    }
    let ratio = if sa > sb {
        sa as f64 / sb as f64
    } else {
        sb as f64 / sa as f64
    };
    (forward + backward) / 2.0 * ratio
}

pub fn symmetric_kl_matches_scripted_oracle() {
    let mut r = Rng::seed_from_u64(11);
    for _ in 0..200 {
        let sa = r.gen_range(1..40);
        let sb = r.gen_range(1..40);
        let draw = |size: usize, r: &mut Rng| {
            let mut bins = [0.0; 5];
            for _ in 0..size {
                bins[r.gen_range(0..5)] += 1.0;
            }
            bins.map(|b| b / size as f64)
        };
        let a = DegreeHistogram {
            bins: draw(sa, &mut r),
            community_size: sa,
        };
        let b = DegreeHistogram {
            bins: draw(sb, &mut r),
            community_size: sb,
        };
        let expected = kl_oracle(&a.bins, &b.bins, sa, sb);
        assert!((community_diff(&a, &b) - expected).abs() < 1e-9);
        assert!((community_diff(&b, &a) - expected).abs() < 1e-9);
    }
    let h = DegreeHistogram {
        bins: [0.2, 0.2, 0.2, 0.2, 0.2],
        community_size: 5,
    };
    assert_eq!(community_diff(&h, &h), 0.0);
}

fn greedy_oracle(s: &[Vec<f64>]) -> Vec<(usize, usize)> {
    // flatten, sort by value desc then (row, col), sweep
    let mut cells: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in s.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cells.push((v, i, j));
        }
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut rows = std::collections::HashSet::new();
    let mut cols = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (_, i, j) in cells {
        if !rows.contains(&i) && !cols.contains(&j) {
            rows.insert(i);
            cols.insert(j);
            out.push((i, j));
        }
    }
    out
}

pub fn greedy_alignment_matches_independent_greedy() {
    let mut r = Rng::seed_from_u64(12);
    for _ in 0..300 {
        let k = r.gen_range(1..8);
        let kp = r.gen_range(1..8);
        // coarse values force ties
        let s: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..kp).map(|_| r.gen_range(0..5) as f64 / 4.0).collect())
            .collect();
        assert_eq!(align_communities(&s).pairs, greedy_oracle(&s));
    }
}

fn contingency_oracle(a: &[usize], b: &[usize]) -> (f64, f64) {
    let n = a.len();
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0; kb]; ka];
    for v in 0..n {
        table[a[v]][b[v]] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let nf = n as f64;
    let h = |xs: &[f64]| -> f64 {
        xs.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -(x / nf) * (x / nf).log2())
            .sum()
    };
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let c = table[i][j];
            if c > 0.0 {
                mi += (c / nf) * ((c * nf) / (rows[i] * cols[j])).log2();
            }
        }
    }
    let (ha, hb) = (h(&rows), h(&cols));
    let nmi = if ha + hb == 0.0 {
        1.0
    } else {
        2.0 * mi / (ha + hb)
    };
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let sa: f64 = rows.iter().map(|&x| c2(x)).sum();
    let sb: f64 = cols.iter().map(|&x| c2(x)).sum();
    let exp = sa * sb / c2(nf);
    let ari = (sum_cells - exp) / ((sa + sb) / 2.0 - exp);
    (nmi, ari)
}

pub fn nmi_and_ari_match_contingency_oracle() {
    let mut r = Rng::seed_from_u64(13);
    for _ in 0..300 {
        let ka = r.gen_range(2..6);
        let kb = r.gen_range(2..6);
        let a: Vec<usize> = (0..30).map(|_| r.gen_range(0..ka)).collect();
        let b: Vec<usize> = (0..30).map(|_| r.gen_range(0..kb)).collect();
        let (pa, pb) = (Partition::from_labels(&a), Partition::from_labels(&b));
        let (on, oa) = contingency_oracle(&a, &b);
        let n = nmi(&pa, &pb).unwrap();
        let ad = ari(&pa, &pb).unwrap();
        assert!((n - on).abs() < 1e-9, "{n} vs {on}");
        assert!((ad - oa).abs() < 1e-9, "{ad} vs {oa}");
        assert!((nmi(&pb, &pa).unwrap() - n).abs() < 1e-12);
        assert!((ari(&pb, &pa).unwrap() - ad).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&n));
        assert!((-1.0..=1.0).contains(&ad));
    }
}

pub fn nearest_neighbor_matches_full_scan() {
    let mut r = Rng::seed_from_u64(14);
    for _ in 0..40 {
        let d = r.gen_range(1..5);
        let na = r.gen_range(1..30);
        let nb = r.gen_range(1..30);
        // integer grid values create exact ties
        let ea = Array2::from_shape_fn((na, d), |_| r.gen_range(-3..3) as f64);
        let eb = Array2::from_shape_fn((nb, d), |_| r.gen_range(-3..3) as f64);
        let map = AffineMap {
            weight: Array2::from_shape_fn((d, d), |_| r.gen_range(-2..3) as f64),
            bias: ndarray::Array1::from_shape_fn(d, |_| r.gen_range(-1..2) as f64),
        };
        let got = node_mapping(&map, &ea, &eb).unwrap();
        for u in 0..na {
            let mut image = vec![0.0; d];
            for (k, slot) in image.iter_mut().enumerate() {
                *slot = map.bias[k] + (0..d).map(|i| ea[[u, i]] * map.weight[[i, k]]).sum::<f64>();
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for v in 0..nb {
                let dist: f64 = (0..d).map(|k| (image[k] - eb[[v, k]]).powi(2)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = v;
                }
            }
            assert_eq!(got.map[u], best);
        }
    }
}

pub fn motif_weights_match_common_neighbor_count() {
    let mut r = Rng::seed_from_u64(15);
    for _ in 0..30 {
        let n = r.gen_range(3..25);
        let g = random_graph(n, r.gen_range(0.1..0.7), &mut r);
        let m = motif_weighted_graph(&g);
        for a in 0..n {
            for b in a + 1..n {
                let triangles = (0..n)
                    .filter(|&c| c != a && c != b && g.has_edge(a, c) && g.has_edge(b, c))
                    .count();
                let e = Edge(a, b);
                if g.has_edge(a, b) && triangles > 0 {
                    assert!(m.contains(e));
                    assert_eq!(m.weight(e), triangles as f64);
                } else {
                    assert!(!m.contains(e));
                }
            }
        }
    }
}
