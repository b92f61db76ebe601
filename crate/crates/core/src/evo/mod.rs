//! Single-network evolutionary search: encodings, fitness, operators, the
//! generational loop and the random baselines.

pub mod baselines;
pub mod chromosome;
pub mod engine;
pub mod fitness;
pub mod operators;
pub mod problem;

pub use chromosome::{Chromosome, Genome, RawGenome};
pub use engine::{
    evolve_generation, initial_population, run_single, EvoConfig, Population, RunOutcome,
};
pub use fitness::{deception_fitness, ic_spread, partition_deception_score, FitnessCache};
pub use operators::{crossover, init_population, mutate, CandidatePool, GuidedCandidates};
pub use problem::{Problem, Task};
