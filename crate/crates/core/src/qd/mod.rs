//! Quality-Diversity core: archives, polynomial mutation and the MAP-Elites loop.

mod grid;
mod index;
mod kdtree;
pub mod io;
mod map_elites;
mod metrics;
mod mutation;
mod threshold;

use rand::Rng;

use crate::gait::ContactMask;
use crate::scalar::Real;

pub use grid::GridArchive;
pub use index::NearestIndex;
pub use map_elites::{map_elites, EvalError, Evaluation, Evaluator, EvolutionConfig, RunStats};
pub use metrics::{metrics, ArchiveMetrics, Projection};
pub use mutation::polynomial_mutate;
pub use threshold::ThresholdArchive;

/// Real-valued genome with every gene in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Genotype<T>(pub Vec<T>);

impl<T: Real> Genotype<T> {
    /// Clamps every gene into `[0, 1]`.
    pub fn new(mut values: Vec<T>) -> Self {
        for v in &mut values {
            *v = v.max(T::zero()).min(T::one());
        }
        Self(values)
    }

    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| T::lit(rng.gen::<f64>())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// An archived solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Elite<T> {
    /// Insertion counter of the archive that stores it.
    pub id: u64,
    pub genotype: Genotype<T>,
    /// Primary behavioural descriptor, in raw units.
    pub bd: Vec<T>,
    pub mask: Option<ContactMask>,
    pub fitness: T,
    /// Layer-specific recorded result (e.g. the measured displacement).
    pub outcome: Vec<T>,
}

impl<T: Real> Elite<T> {
    pub fn new(genotype: Genotype<T>, bd: Vec<T>, fitness: T) -> Self {
        Self { id: 0, genotype, bd, mask: None, fitness, outcome: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    Replaced,
    Rejected,
}

impl InsertOutcome {
    pub fn accepted(self) -> bool {
        self != InsertOutcome::Rejected
    }
}

/// Common surface of every archive variant.
pub trait Archive<T> {
    fn insert(&mut self, elite: Elite<T>) -> InsertOutcome;
    fn len(&self) -> usize;
    /// Elite by position in a stable iteration order.
    fn get(&self, i: usize) -> &Elite<T>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn iter(&self) -> Box<dyn Iterator<Item = &Elite<T>> + '_> {
        Box::new((0..self.len()).map(move |i| self.get(i)))
    }
}

/// Maps a raw value into `[0, 1]` units of its bounds.
#[inline]
pub fn normalize<T: Real>(v: T, (lo, hi): (T, T)) -> T {
    (v - lo) / (hi - lo)
}

pub fn normalize_all<T: Real>(bd: &[T], bounds: &[(T, T)]) -> Vec<T> {
    bd.iter().zip(bounds).map(|(&v, &b)| normalize(v, b)).collect()
}

pub fn denormalize<T: Real>(u: T, (lo, hi): (T, T)) -> T {
    lo + u * (hi - lo)
}

pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
}
