//! End-to-end behavior of the multi-network loop on small synthetic networks.

use std::sync::Arc;

use mdeo::alignment::NodeMapping;
use mdeo::community::GreedyModularity;
use mdeo::evo::{init_population, EvoConfig, FitnessCache, Population, Problem};
use mdeo::orchestrator::{
    deception_problems, perform_transfer, run_mdeo, run_sdeo, transfer_condition,
    write_generation_csv, DomainState, MdeoConfig, TransferConfig,
};
use mdeo::rng::Rng;
use mdeo::similarity::SimilarityMatrix;
use mdeo::synth::planted_partition;
use rand::SeedableRng;

fn small_batch() -> Vec<(String, Problem)> {
    let nets = [
        (&[8, 8, 8][..], 0.5, 0.05, 1u64, 4usize),
        (&[10, 10][..], 0.4, 0.05, 2, 4),
        (&[6, 6, 6, 6][..], 0.6, 0.04, 3, 5),
        (&[12, 9][..], 0.4, 0.06, 4, 3),
    ];
    let graphs = nets
        .iter()
        .enumerate()
        .map(|(i, &(sizes, pin, pout, seed, budget))| {
            let (g, _) = planted_partition(sizes, pin, pout, seed).unwrap();
            (format!("net{i}"), Arc::new(g), budget)
        })
        .collect();
    deception_problems(graphs, Arc::new(GreedyModularity)).unwrap()
}

fn small_config(seed: u64) -> MdeoConfig {
    let mut c = MdeoConfig {
        seed,
        ..MdeoConfig::default()
    };
    c.evo.population = 30;
    c.evo.generations = 60;
    c.transfer.total = 12;
    c.learn.gae.epochs = 60;
    c.learn.alignment.epochs = 60;
    c
}

fn csv_of(r: &mdeo::orchestrator::RunResult) -> String {
    let mut buf = Vec::new();
    write_generation_csv(&r.records, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn disabled_transfer_equals_sdeo() {
    let mut off = small_config(5);
    off.transfer.enabled = false;
    let a = run_mdeo(small_batch(), &off).unwrap();
    let b = run_sdeo(small_batch(), &small_config(5)).unwrap();
    assert_eq!(csv_of(&a), csv_of(&b));
    for (x, y) in a.networks.iter().zip(&b.networks) {
        assert_eq!(x.best, y.best);
    }
}

#[test]
fn runs_are_reproducible() {
    let a = run_mdeo(small_batch(), &small_config(9)).unwrap();
    let b = run_mdeo(small_batch(), &small_config(9)).unwrap();
    assert_eq!(csv_of(&a), csv_of(&b));
    assert_eq!(a.transfers, b.transfers);
}

#[test]
fn transfer_log_respects_gating_and_budgets() {
    let config = small_config(3);
    let r = run_mdeo(small_batch(), &config).unwrap();
    assert!(!r.transfers.is_empty(), "expected at least one transfer");
    for net in &r.networks {
        assert!(
            net.history.windows(2).all(|w| w[1] >= w[0]),
            "{}: {:?}",
            net.name,
            net.history
        );
    }
    let k = config.transfer.k;
    let mut per_round: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for e in &r.transfers {
        assert!(e.generation >= 2 * k && e.generation % k == 0);
        assert!(transfer_condition(
            &r.networks[e.target].history,
            k,
            e.generation
        ));
        *per_round.entry((e.generation, e.target)).or_default() += e.count;
    }
    for (_, total) in per_round {
        assert_eq!(total, config.transfer.total);
    }
    for rec in &r.records {
        if rec.transfer_in_count > 0 {
            assert!(!rec.sources.is_empty());
        }
    }
}

#[test]
fn injection_grows_then_selection_restores_population() {
    let problems = small_batch();
    let config = small_config(1);
    let evo = EvoConfig {
        population: 20,
        ..config.evo.clone()
    };
    let mut states: Vec<DomainState> = problems
        .into_iter()
        .enumerate()
        .map(|(i, (name, p))| DomainState::new(name, p, i, 1))
        .collect();
    let mut r = Rng::seed_from_u64(4);
    for s in &mut states {
        let mut cache = FitnessCache::new();
        let pop = init_population(&s.problem, evo.population, &mut r).unwrap();
        s.population = Some(Population::evaluate(&s.problem, &mut cache, pop).unwrap());
    }
    let n = states.len();
    let raw = vec![vec![1.0; n]; n];
    let mut sim = SimilarityMatrix::from_raw(raw, 2).unwrap();
    let sizes: Vec<usize> = states
        .iter()
        .map(|s| s.problem.graph.node_count())
        .collect();
    for &j in &sim.assisted[0].clone() {
        // collapse everything onto a few target nodes to force repairs
        let map = (0..sizes[j]).map(|v| v % 5).collect();
        states[0].mappings_in.insert(j, NodeMapping { map });
    }
    let snapshot: Vec<Population> = states
        .iter()
        .map(|s| s.population.clone().unwrap())
        .collect();
    let out = perform_transfer(0, &mut states[0], &snapshot, &mut sim, &config, 10).unwrap();
    assert_eq!(out.injected.len(), config.transfer.total);
    assert_eq!(
        out.events.iter().map(|e| e.count).sum::<usize>(),
        config.transfer.total
    );
    for c in &out.injected {
        states[0].problem.validate(&c.genome).unwrap();
        assert!(c.origin.is_some());
    }
    assert!(states[0].ledger.candidates.is_some());
    assert_eq!(states[0].ledger.last_generation, Some(10));

    let s = &mut states[0];
    let mut cache = FitnessCache::new();
    let mut pop = s.population.take().unwrap();
    let added = Population::evaluate(&s.problem, &mut cache, out.injected).unwrap();
    pop.individuals.extend(added.individuals);
    pop.fitness.extend(added.fitness);
    assert_eq!(pop.len(), evo.population + config.transfer.total);
    let next = mdeo::evo::evolve_generation(
        &s.problem,
        &pop,
        &evo,
        &mut cache,
        s.ledger.candidates.as_ref(),
        &mut r,
    )
    .unwrap();
    assert_eq!(next.len(), evo.population);
    for c in &next.individuals {
        s.problem.validate(&c.genome).unwrap();
    }

    // a second transfer measures contributions and keeps the row normalized
    s.population = Some(next);
    let snapshot2: Vec<Population> = snapshot.clone();
    let out2 = perform_transfer(0, s, &snapshot2, &mut sim, &config, 15).unwrap();
    assert!(out2.events.iter().all(|e| e.contribution.is_some()));
    let row: f64 = sim.values[0].iter().sum();
    assert!((row - 1.0).abs() < 1e-9);
}

#[test]
fn influence_batch_runs_with_transfer() {
    let graphs: Vec<_> = [(1u64, &[15, 15][..]), (2, &[10, 10, 10][..])]
        .iter()
        .map(|&(seed, sizes)| Arc::new(planted_partition(sizes, 0.3, 0.05, seed).unwrap().0))
        .collect();
    let problems: Vec<(String, Problem)> = graphs
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            (
                format!("im{i}"),
                Problem::influence_max(g, 4, 0.1, 50, i as u64).unwrap(),
            )
        })
        .collect();
    let mut config = small_config(2);
    config.evo.generations = 30;
    config.transfer = TransferConfig {
        total: 8,
        ..TransferConfig::default()
    };
    let r = run_mdeo(problems, &config).unwrap();
    for net in &r.networks {
        assert!(net.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(net.best.genome.seeds().len(), 4);
    }
}

#[test]
fn mixed_tasks_are_rejected_before_work() {
    let mut problems = small_batch();
    let g = problems[0].1.graph.clone();
    problems[1] = (
        "im".into(),
        Problem::influence_max(g, 2, 0.1, 10, 0).unwrap(),
    );
    assert!(run_mdeo(problems, &small_config(0)).is_err());
}
