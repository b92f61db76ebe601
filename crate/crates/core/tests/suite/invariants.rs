//! Property and fuzz checks of the structural invariants.

use std::sync::Arc;

use mdeo::alignment::{map_edge_solution, NodeMapping};
use mdeo::community::{GreedyModularity, Partition};
use mdeo::evo::{
    crossover, init_population, mutate, CandidatePool, Chromosome, GuidedCandidates, Problem,
    RawGenome,
};
use mdeo::graph::{Edge, Graph};
use mdeo::metrics::{ari, nmi, pagerank, PAGERANK_DAMPING, PAGERANK_TOL};
use mdeo::rng::Rng;
use mdeo::similarity::{graph_similarity, init_similarity_and_assisted, SimilarityProfile};
use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};

fn graph_from(n: usize, pairs: &[(usize, usize)]) -> Graph {
    Graph::from_edges(
        n,
        pairs
            .iter()
            .map(|&(a, b)| Edge::new(a % n, b % n))
            .filter(|e| !e.is_loop()),
    )
    .unwrap()
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (4usize..25).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), n..4 * n).prop_map(move |pairs| graph_from(n, &pairs))
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    fn self_similarity_is_one(g in arb_graph()) {
        prop_assume!(g.edge_count() > 0);
        let s = graph_similarity(&g, &g).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-9, "{}", s);
    }

    fn initial_similarity_is_symmetric(gs in prop::collection::vec(arb_graph(), 2..5)) {
        prop_assume!(gs.iter().all(|g| g.edge_count() > 0));
        let profiles: Vec<_> = gs.iter().map(|g| SimilarityProfile::detect(g).unwrap()).collect();
        let s = init_similarity_and_assisted(&profiles, None).unwrap();
        for i in 0..gs.len() {
            for j in 0..gs.len() {
                prop_assert!((s.raw[i][j] - s.raw[j][i]).abs() < 1e-9);
            }
            let row: f64 = s.values[i].iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
        }
    }

    fn similarity_rows_stay_normalized(
        seed in any::<u64>(),
        updates in prop::collection::vec((0usize..5, prop::collection::vec(0.0f64..1.0, 5)), 1..20),
    ) {
        let mut r = Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        let mut s = mdeo::similarity::SimilarityMatrix::from_raw(raw, 2).unwrap();
        for (i, contrib) in updates {
            let c: Vec<(usize, f64)> = contrib.into_iter().enumerate().collect();
            s.update(i, &c);
            for row in 0..5 {
                let total: f64 = s.values[row].iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                for j in 0..5 {
                    if !s.assisted[row].contains(&j) {
                        prop_assert_eq!(s.values[row][j], 0.0);
                    }
                }
            }
        }
    }

    fn agreement_scores_ignore_labels(labels in prop::collection::vec(0usize..4, 2..40), other in prop::collection::vec(0usize..4, 40), shift in 1usize..10) {
        let other = &other[..labels.len()];
        let a = Partition::from_labels(&labels);
        let b = Partition::from_labels(other);
        let renamed: Vec<usize> = labels.iter().map(|l| (l + shift) * 7).collect();
        let a2 = Partition::from_labels(&renamed);
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&a2, &b).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&a, &b).unwrap() - ari(&a2, &b).unwrap()).abs() < 1e-12);
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
    }

    fn pagerank_is_a_distribution(g in arb_graph()) {
        let r = pagerank(&g, PAGERANK_DAMPING, PAGERANK_TOL);
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }
}

fn fuzz_graph(r: &mut Rng) -> Graph {
    let n = r.gen_range(6..30);
    let p = r.gen_range(0.1..0.5);
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

fn random_pool(n: usize, r: &mut Rng) -> GuidedCandidates {
    let pools = (0..r.gen_range(1..4))
        .map(|j| CandidatePool {
            network: j,
            probability: r.gen_range(0.0..1.0),
            // arbitrary pairs: many are the wrong part, loops or out of range
            additions: (0..r.gen_range(0..6))
                .map(|_| Edge::new(r.gen_range(0..n + 3), r.gen_range(0..n + 3)))
                .collect(),
            deletions: (0..r.gen_range(0..6))
                .map(|_| Edge::new(r.gen_range(0..n + 3), r.gen_range(0..n + 3)))
                .collect(),
            nodes: (0..r.gen_range(0..6))
                .map(|_| r.gen_range(0..n + 3))
                .collect(),
        })
        .collect();
    GuidedCandidates { pools }
}

pub fn operators_never_produce_invalid_chromosomes() {
    let mut r = Rng::seed_from_u64(99);
    let mut checked = 0usize;
    while checked < 100_000 {
        let g = Arc::new(fuzz_graph(&mut r));
        let n = g.node_count();
        let problem = if r.gen_bool(0.7) {
            let cap = (g.edge_count() + g.non_edge_count()).min(12);
            let budget = r.gen_range(0..=cap);
            Problem::deception(g.clone(), budget, Arc::new(GreedyModularity)).unwrap()
        } else {
            Problem::influence_max(g.clone(), r.gen_range(0..=n.min(8)), 0.1, 5, 0).unwrap()
        };
        let pop = init_population(&problem, 6, &mut r).unwrap();
        for c in &pop {
            problem.validate(&c.genome).unwrap();
        }
        for _ in 0..250 {
            let a = &pop[r.gen_range(0..pop.len())];
            let b = &pop[r.gen_range(0..pop.len())];
            let (x, y) = crossover(&problem, a, b, r.gen_range(0.0..1.0), &mut r).unwrap();
            problem.validate(&x.genome).unwrap();
            problem.validate(&y.genome).unwrap();
            let guided = random_pool(n, &mut r);
            let m = mutate(
                &problem,
                &x,
                r.gen_bool(0.5).then_some(&guided),
                1.0,
                &mut r,
            )
            .unwrap();
            problem.validate(&m.genome).unwrap();

            // a random node mapping followed by repair models a transfer
            let mapping = NodeMapping {
                map: (0..n).map(|_| r.gen_range(0..n)).collect(),
            };
            let (raw, _) = map_edge_solution(&m.genome, &mapping);
            let repaired = problem.repair(&raw, &mut r).unwrap();
            problem.validate(&repaired).unwrap();

            // arbitrary corruption of length and content
            let corrupt = match &raw {
                RawGenome::Deception { genes, .. } => {
                    let len = r.gen_range(0..genes.len() + 4);
                    RawGenome::Deception {
                        genes: (0..len)
                            .map(|_| (r.gen_range(0..n + 2), r.gen_range(0..n + 2)))
                            .collect(),
                        rho: r.gen_range(0..len + 2),
                    }
                }
                RawGenome::InfluenceMax { seeds } => RawGenome::InfluenceMax {
                    seeds: (0..r.gen_range(0..seeds.len() + 4))
                        .map(|_| r.gen_range(0..n + 2))
                        .collect(),
                },
            };
            problem
                .validate(&problem.repair(&corrupt, &mut r).unwrap())
                .unwrap();
            checked += 5;
        }
    }
}

pub fn chromosome_origin_survives_mutation() {
    let g = Arc::new(Graph::from_edges(8, (0..8).map(|i| Edge::new(i, (i + 1) % 8))).unwrap());
    let p = Problem::deception(g, 3, Arc::new(GreedyModularity)).unwrap();
    let mut r = Rng::seed_from_u64(1);
    let c = Chromosome {
        origin: Some(2),
        ..init_population(&p, 1, &mut r).unwrap().remove(0)
    };
    assert_eq!(mutate(&p, &c, None, 1.0, &mut r).unwrap().origin, Some(2));
}

pub fn self_similarity_is_one_property() {
    self_similarity_is_one();
}

pub fn initial_similarity_is_symmetric_property() {
    initial_similarity_is_symmetric();
}

pub fn similarity_rows_stay_normalized_property() {
    similarity_rows_stay_normalized();
}

pub fn agreement_scores_ignore_labels_property() {
    agreement_scores_ignore_labels();
}

pub fn pagerank_is_a_distribution_property() {
    pagerank_is_a_distribution();
}
