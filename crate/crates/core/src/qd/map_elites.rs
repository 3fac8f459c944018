use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gait::ContactMask;
use crate::scalar::Real;

use super::{polynomial_mutate, Archive, Elite, Genotype, InsertOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population: usize,
    /// Generations after the random initial one.
    pub generations: usize,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Distribution index of the polynomial mutation.
    pub eta_m: f64,
    pub seed: u64,
}

impl EvolutionConfig {
    pub fn new(population: usize, generations: usize, mutation_rate: f64, seed: u64) -> Self {
        Self { population, generations, mutation_rate, eta_m: 10.0, seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population == 0 || self.population % 2 != 0 {
            return Err(format!("population must be even and positive, got {}", self.population));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(format!("mutation rate {} outside [0, 1]", self.mutation_rate));
        }
        if !(self.eta_m > 0.0) {
            return Err(format!("eta_m must be positive, got {}", self.eta_m));
        }
        Ok(())
    }

    pub fn total_evaluations(&self) -> usize {
        self.population * (self.generations + 1)
    }
}

/// What an evaluator reports for one genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub bd: Vec<T>,
    pub mask: Option<ContactMask>,
    pub fitness: T,
    pub outcome: Vec<T>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no lower-layer elite to decode into: {0}")]
    Lookup(String),
    #[error("invalid genotype: {0}")]
    Invalid(String),
}

/// A deterministic, thread-safe fitness/descriptor function.
pub trait Evaluator<T>: Sync {
    fn genome_len(&self) -> usize;
    fn evaluate(&self, g: &Genotype<T>) -> Result<Evaluation<T>, EvalError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub evaluations: usize,
    /// Offspring whose evaluation failed and were discarded.
    pub rejected_evaluations: usize,
    pub added: usize,
    pub replaced: usize,
    pub rejected: usize,
}

/// Runs MAP-Elites into `archive`.
///
/// Generation 0 evaluates `population` uniform random genotypes; each later
/// generation mutates `population` parents drawn uniformly from the archive.
/// Offspring are produced serially from the seeded generator, evaluated in
/// parallel, and inserted in offspring order, so the result does not depend
/// on the number of worker threads.
pub fn map_elites<T, A, E>(evaluator: &E, config: &EvolutionConfig, archive: &mut A) -> RunStats
where
    T: Real,
    A: Archive<T>,
    E: Evaluator<T>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let len = evaluator.genome_len();
    let mut stats = RunStats::default();
    for generation in 0..=config.generations {
        let offspring: Vec<Genotype<T>> = (0..config.population)
            .map(|_| {
                if generation == 0 || archive.is_empty() {
                    Genotype::random(len, &mut rng)
                } else {
                    let parent = &archive.get(rng.gen_range(0..archive.len())).genotype;
                    polynomial_mutate(parent, config.mutation_rate, config.eta_m, &mut rng)
                }
            })
            .collect();
        let results: Vec<_> = offspring.par_iter().map(|g| evaluator.evaluate(g)).collect();
        for (genotype, result) in offspring.into_iter().zip(results) {
            stats.evaluations += 1;
            let Ok(ev) = result else {
                stats.rejected_evaluations += 1;
                continue;
            };
            let elite = Elite {
                id: 0,
                genotype,
                bd: ev.bd,
                mask: ev.mask,
                fitness: ev.fitness,
                outcome: ev.outcome,
            };
            match archive.insert(elite) {
                InsertOutcome::Added => stats.added += 1,
                InsertOutcome::Replaced => stats.replaced += 1,
                InsertOutcome::Rejected => stats.rejected += 1,
            }
        }
    }
    stats
}
