use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chromosome::{Chromosome, Genome};
use super::fitness::FitnessCache;
use super::operators::{crossover, init_population, mutate, GuidedCandidates};
use super::problem::Problem;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elite_fraction: f64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population: 100,
            generations: 200,
            crossover_prob: 0.5,
            mutation_prob: 0.1,
            elite_fraction: 0.1,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
            ("elite_fraction", self.elite_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if self.population < 2 {
            return Err(Error::Config("population must be at least 2".into()));
        }
        Ok(())
    }

    /// `⌈elite_fraction · population⌉`, at least one.
    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

/// Individuals with their fitness values.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub individuals: Vec<Chromosome>,
    pub fitness: Vec<f64>,
}

impl Population {
    pub fn evaluate(
        problem: &Problem,
        cache: &mut FitnessCache,
        individuals: Vec<Chromosome>,
    ) -> Result<Self> {
        let genomes: Vec<&Genome> = individuals.iter().map(|c| &c.genome).collect();
        let fitness = cache.evaluate_all(problem, &genomes)?;
        Ok(Population {
            individuals,
            fitness,
        })
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Indices by fitness, best first; ties keep insertion order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.fitness[b].total_cmp(&self.fitness[a]).then(a.cmp(&b)));
        idx
    }

    pub fn best(&self) -> Option<(&Chromosome, f64)> {
        self.ranking()
            .first()
            .map(|&i| (&self.individuals[i], self.fitness[i]))
    }

    pub fn best_fitness(&self) -> f64 {
        self.best().map_or(f64::NAN, |b| b.1)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.len() as f64
    }

    pub fn rho_stats(&self) -> (f64, usize, usize) {
        let rhos: Vec<usize> = self
            .individuals
            .iter()
            .map(|c| c.genome.additions().len())
            .collect();
        let mean = rhos.iter().sum::<usize>() as f64 / rhos.len().max(1) as f64;
        (
            mean,
            rhos.iter().copied().min().unwrap_or(0),
            rhos.iter().copied().max().unwrap_or(0),
        )
    }

    /// The `count` best distinct genomes, ties by insertion order. Asking for
    /// more than the population holds is clamped with a warning.
    pub fn export_elites(&self, count: usize) -> Vec<Chromosome> {
        if count > self.len() {
            log::warn!(
                "asked for {count} elites from a population of {}",
                self.len()
            );
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(count);
        for i in self.ranking() {
            if out.len() == count {
                break;
            }
            if seen.insert(&self.individuals[i].genome) {
                out.push(self.individuals[i].clone());
            }
        }
        out
    }
}

/// Initial evaluated population.
pub fn initial_population(
    problem: &Problem,
    config: &EvoConfig,
    cache: &mut FitnessCache,
    rng: &mut impl Rng,
) -> Result<Population> {
    let individuals = init_population(problem, config.population, rng)?;
    Population::evaluate(problem, cache, individuals)
}

/// One generation: the elites survive unchanged, the rest of the base-size
/// population is bred from uniformly chosen parents. An oversized input (after
/// transfer injection) shrinks back to `config.population`.
pub fn evolve_generation(
    problem: &Problem,
    pop: &Population,
    config: &EvoConfig,
    cache: &mut FitnessCache,
    guided: Option<&GuidedCandidates>,
    rng: &mut impl Rng,
) -> Result<Population> {
    let size = config.population;
    let mut next: Vec<Chromosome> = pop
        .ranking()
        .into_iter()
        .take(config.elite_count())
        .map(|i| pop.individuals[i].clone())
        .collect();
    while next.len() < size {
        let a = &pop.individuals[rng.gen_range(0..pop.len())];
        let b = &pop.individuals[rng.gen_range(0..pop.len())];
        let (x, y) = crossover(problem, a, b, config.crossover_prob, rng)?;
        next.push(mutate(problem, &x, guided, config.mutation_prob, rng)?);
        if next.len() < size {
            next.push(mutate(problem, &y, guided, config.mutation_prob, rng)?);
        }
    }
    Population::evaluate(problem, cache, next)
}

/// Result of evolving one network.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub best: Chromosome,
    pub best_fitness: f64,
    /// Best fitness per generation, generation 0 first.
    pub history: Vec<f64>,
    pub mean_history: Vec<f64>,
}

/// Plain evolutionary loop for one network.
pub fn run_single(problem: &Problem, config: &EvoConfig, rng: &mut impl Rng) -> Result<RunOutcome> {
    config.validate()?;
    let mut cache = FitnessCache::new();
    let mut pop = initial_population(problem, config, &mut cache, rng)?;
    let mut history = vec![pop.best_fitness()];
    let mut mean_history = vec![pop.mean_fitness()];
    for _ in 0..config.generations {
        pop = evolve_generation(problem, &pop, config, &mut cache, None, rng)?;
        history.push(pop.best_fitness());
        mean_history.push(pop.mean_fitness());
    }
    let (best, best_fitness) = pop
        .best()
        .map(|(c, f)| (c.clone(), f))
        .expect("non-empty population");
    Ok(RunOutcome {
        best,
        best_fitness,
        history,
        mean_history,
    })
}
