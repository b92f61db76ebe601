//! Gradient checks, training behavior and self-alignment.

use mdeo::alignment::{
    alignment_gradients, alignment_losses, self_alignment_accuracy, AffineMap, AlignHyper,
    AnchorSet, SmallGroup,
};
use mdeo::community::{detect_greedy_modularity, Partition};
use mdeo::embedding::{
    build_features, loss_and_gradients, normalized_adjacency, target_adjacency, train_gae,
    GaeHyper, GcnParams, FEATURE_DIM,
};
use mdeo::graph::{load_edge_list, Edge, Graph};
use mdeo::rng::Rng;
use ndarray::{Array1, Array2};
use rand::{Rng as _, SeedableRng};

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-4;

fn random_connected_graph(n: usize, p: f64, r: &mut Rng) -> Graph {
    let mut edges: Vec<Edge> = (1..n).map(|v| Edge::new(v, r.gen_range(0..v))).collect();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen::<f64>() < p {
                edges.push(Edge(a, b));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), with both zero reading as agreement.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn central_difference(mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(STEP) - f(-STEP)) / (2.0 * STEP)
}

pub fn gae_gradients_match_finite_differences() {
    let mut r = Rng::seed_from_u64(20);
    for instance in 0..20 {
        let n = r.gen_range(3..12);
        let g = random_connected_graph(n, 0.25, &mut r);
        let p = detect_greedy_modularity(&g).unwrap();
        let x = build_features(&g, &p).unwrap();
        let a = normalized_adjacency(&g);
        let t = target_adjacency(&g);
        let params = GcnParams::init(FEATURE_DIM, r.gen_range(2..6), r.gen_range(2..5), &mut r);
        let (_, grads) = loss_and_gradients(&params, &x, &a, &t).unwrap();

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for which in 0..2 {
            let m = if which == 0 { &params.w0 } else { &params.w1 };
            let gm = if which == 0 { &grads.w0 } else { &grads.w1 };
            for idx in ndarray::indices(m.raw_dim()) {
                analytic.push(gm[idx]);
                numeric.push(central_difference(|h| {
                    let mut q = params.clone();
                    if which == 0 {
                        q.w0[idx] += h;
                    } else {
                        q.w1[idx] += h;
                    }
                    loss_and_gradients(&q, &x, &a, &t).unwrap().0
                }));
            }
        }
        let err = relative_error(&analytic, &numeric);
        assert!(err < REL_TOL, "instance {instance}: relative error {err}");
    }
}

fn random_map(d: usize, r: &mut Rng) -> AffineMap {
    AffineMap {
        weight: Array2::from_shape_fn((d, d), |_| r.gen_range(-1.0..1.0)),
        bias: Array1::from_shape_fn(d, |_| r.gen_range(-0.5..0.5)),
    }
}

fn random_anchors(na: usize, nb: usize, r: &mut Rng) -> AnchorSet {
    let large_pairs = (0..r.gen_range(0..5))
        .map(|_| (r.gen_range(0..na), r.gen_range(0..nb)))
        .collect();
    let small_groups = (0..r.gen_range(0..3))
        .map(|_| {
            let ks = r.gen_range(1..4);
            SmallGroup {
                anchor: (0, 0),
                left: (0..ks).map(|_| r.gen_range(0..na)).collect(),
                right: (0..ks).map(|_| r.gen_range(0..nb)).collect(),
            }
        })
        .collect();
    AnchorSet {
        large_pairs,
        small_groups,
    }
}

pub fn alignment_gradients_match_finite_differences() {
    let mut r = Rng::seed_from_u64(21);
    for instance in 0..25 {
        let d = r.gen_range(1..5);
        let (na, nb) = (r.gen_range(2..10), r.gen_range(2..10));
        let ea = Array2::from_shape_fn((na, d), |_| r.gen_range(-1.0..1.0));
        let eb = Array2::from_shape_fn((nb, d), |_| r.gen_range(-1.0..1.0));
        let ab = random_map(d, &mut r);
        let ba = random_map(d, &mut r);
        let anchors = random_anchors(na, nb, &mut r);
        let (_, gab, gba) = alignment_gradients(&ab, &ba, &ea, &eb, &anchors).unwrap();

        let total = |ab: &AffineMap, ba: &AffineMap| {
            alignment_losses(ab, ba, &ea, &eb, &anchors)
                .unwrap()
                .total()
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for forward in [true, false] {
            let g = if forward { &gab } else { &gba };
            for idx in ndarray::indices((d, d)) {
                analytic.push(g.weight[idx]);
                numeric.push(central_difference(|h| {
                    let (mut a, mut b) = (ab.clone(), ba.clone());
                    if forward {
                        a.weight[idx] += h;
                    } else {
                        b.weight[idx] += h;
                    }
                    total(&a, &b)
                }));
            }
            for k in 0..d {
                analytic.push(g.bias[k]);
                numeric.push(central_difference(|h| {
                    let (mut a, mut b) = (ab.clone(), ba.clone());
                    if forward {
                        a.bias[k] += h;
                    } else {
                        b.bias[k] += h;
                    }
                    total(&a, &b)
                }));
            }
        }
        let err = relative_error(&analytic, &numeric);
        assert!(err < REL_TOL, "instance {instance}: relative error {err}");
    }
}

pub fn alignment_losses_are_nonnegative_and_match_a_direct_formula() {
    let mut r = Rng::seed_from_u64(22);
    for _ in 0..20 {
        let d = r.gen_range(1..4);
        let (na, nb) = (r.gen_range(2..8), r.gen_range(2..8));
        let ea = Array2::from_shape_fn((na, d), |_| r.gen_range(-1.0..1.0));
        let eb = Array2::from_shape_fn((nb, d), |_| r.gen_range(-1.0..1.0));
        let ab = random_map(d, &mut r);
        let ba = random_map(d, &mut r);
        let anchors = random_anchors(na, nb, &mut r);
        let l = alignment_losses(&ab, &ba, &ea, &eb, &anchors).unwrap();

        let apply = |m: &AffineMap, x: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|k| m.bias[k] + (0..d).map(|i| x[i] * m.weight[[i, k]]).sum::<f64>())
                .collect()
        };
        let mse = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d as f64
        };
        let row = |e: &Array2<f64>, i: usize| e.row(i).to_vec();
        let two_way = |u: usize, v: usize| {
            mse(&apply(&ab, &row(&ea, u)), &row(&eb, v))
                + mse(&apply(&ba, &row(&eb, v)), &row(&ea, u))
        };
        let large: f64 = anchors
            .large_pairs
            .iter()
            .map(|&(u, v)| two_way(u, v))
            .sum();
        let small: f64 = anchors
            .small_groups
            .iter()
            .map(|g| {
                let s: f64 = g
                    .left
                    .iter()
                    .flat_map(|&u| g.right.iter().map(move |&v| (u, v)))
                    .map(|(u, v)| two_way(u, v))
                    .sum();
                s / g.left.len() as f64
            })
            .sum();
        let us_a: f64 = (0..na)
            .map(|u| mse(&apply(&ba, &apply(&ab, &row(&ea, u))), &row(&ea, u)))
            .sum::<f64>()
            / na as f64;
        let us_b: f64 = (0..nb)
            .map(|v| mse(&apply(&ab, &apply(&ba, &row(&eb, v))), &row(&eb, v)))
            .sum::<f64>()
            / nb as f64;
        assert!((l.large - large).abs() < 1e-9);
        assert!((l.small - small).abs() < 1e-9);
        assert!((l.unsupervised - (us_a + us_b)).abs() < 1e-9);
        assert!(l.large >= 0.0 && l.small >= 0.0 && l.unsupervised >= 0.0);
    }
}

pub fn gae_loss_decreases_over_training() {
    let g = load_edge_list(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/karate.edges"
    ))
    .unwrap()
    .graph;
    let p = detect_greedy_modularity(&g).unwrap();
    let t = train_gae(&g, &p, &GaeHyper::default()).unwrap();
    let first = t.losses[0];
    let last = *t.losses.last().unwrap();
    assert!(last < first, "{first} -> {last}");
    // windowed means never rise by more than Adam's jitter on the plateau
    let window = 50;
    let means: Vec<f64> = t
        .losses
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    assert!(
        means.windows(2).all(|w| w[1] <= w[0] + 1e-3 * means[0]),
        "{means:?}"
    );
}

pub fn gae_is_seeded() {
    let g = Graph::from_edges(
        6,
        [
            Edge(0, 1),
            Edge(1, 2),
            Edge(0, 2),
            Edge(3, 4),
            Edge(4, 5),
            Edge(3, 5),
            Edge(2, 3),
        ],
    )
    .unwrap();
    let p = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
    let hyper = GaeHyper {
        epochs: 40,
        ..GaeHyper::default()
    };
    let a = train_gae(&g, &p, &hyper).unwrap();
    let b = train_gae(&g, &p, &hyper).unwrap();
    assert_eq!(a.embeddings, b.embeddings);
}

pub fn self_alignment_recovers_high_degree_nodes() {
    let g = load_edge_list(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/lesmis.edges"
    ))
    .unwrap()
    .graph;
    let runs = 5;
    let mean: f64 = (0..runs)
        .map(|s| {
            self_alignment_accuracy(&g, &GaeHyper::default(), &AlignHyper::default(), s).unwrap()
        })
        .sum::<f64>()
        / runs as f64;
    assert!(mean >= 0.8, "mean top-decile recovery {mean}");
}
