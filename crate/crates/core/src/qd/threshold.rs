use crate::scalar::Real;

use super::{normalize_all, Archive, Elite, InsertOutcome, NearestIndex};

/// Unstructured archive: stored descriptors stay more than `l` apart after
/// normalising each dimension by its bounds.
#[derive(Debug, Clone)]
pub struct ThresholdArchive<T> {
    l: T,
    bounds: Vec<(T, T)>,
    elites: Vec<Elite<T>>,
    index: NearestIndex<T>,
    next_id: u64,
}

impl<T: Real> ThresholdArchive<T> {
    pub fn new(l: T, bounds: Vec<(T, T)>) -> Self {
        assert!(l > T::zero(), "threshold must be positive");
        assert!(bounds.iter().all(|(lo, hi)| hi > lo), "empty bounds");
        let dim = bounds.len();
        Self { l, bounds, elites: Vec::new(), index: NearestIndex::new(dim, l), next_id: 0 }
    }

    pub fn l(&self) -> T {
        self.l
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn normalized(&self, bd: &[T]) -> Vec<T> {
        normalize_all(bd, &self.bounds)
    }

    pub fn elites(&self) -> &[Elite<T>] {
        &self.elites
    }

    pub fn index(&self) -> &NearestIndex<T> {
        &self.index
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Nearest stored elite to a raw descriptor: `(slot, normalised distance)`.
    pub fn nearest(&self, bd: &[T]) -> Option<(usize, T)> {
        self.index.nearest(&self.normalized(bd)).map(|(s, d2)| (s, d2.sqrt()))
    }

    /// Competes `elite` against its nearest neighbour, keeping its id.
    pub fn insert_with_id(&mut self, elite: Elite<T>) -> InsertOutcome {
        self.insert_slot(elite).0
    }

    /// Like [`insert_with_id`](Self::insert_with_id), also returning the slot
    /// that now holds the elite.
    pub fn insert_slot(&mut self, elite: Elite<T>) -> (InsertOutcome, Option<usize>) {
        assert_eq!(elite.bd.len(), self.bounds.len(), "descriptor dimension mismatch");
        let q = self.normalized(&elite.bd);
        let close = self.index.within(&q, self.l);
        let near = match close.as_slice() {
            [] => return (InsertOutcome::Added, Some(self.push(q, elite))),
            [only] => *only,
            // the newcomer cannot replace one neighbour while sitting within l of another
            _ => return (InsertOutcome::Rejected, None),
        };
        if elite.fitness <= self.elites[near].fitness {
            return (InsertOutcome::Rejected, None);
        }
        self.next_id = self.next_id.max(elite.id + 1);
        self.index.update(near, &q, elite.id);
        self.elites[near] = elite;
        (InsertOutcome::Replaced, Some(near))
    }

    fn push(&mut self, q: Vec<T>, elite: Elite<T>) -> usize {
        self.next_id = self.next_id.max(elite.id + 1);
        self.index.push(&q, elite.id);
        self.elites.push(elite);
        self.elites.len() - 1
    }

    /// Appends without competing; for restoring a saved archive.
    pub fn restore(&mut self, elite: Elite<T>) {
        let q = self.normalized(&elite.bd);
        self.push(q, elite);
    }
}

impl<T: Real> Archive<T> for ThresholdArchive<T> {
    fn insert(&mut self, mut elite: Elite<T>) -> InsertOutcome {
        elite.id = self.next_id;
        self.insert_with_id(elite)
    }

    fn len(&self) -> usize {
        self.elites.len()
    }

    fn get(&self, i: usize) -> &Elite<T> {
        &self.elites[i]
    }
}

#[cfg(test)]
mod tests {
    use super::super::{sq_dist, Genotype};
    use super::*;
    use proptest::prelude::*;

    fn elite(bd: Vec<f64>, fitness: f64) -> Elite<f64> {
        Elite::new(Genotype(bd.clone()), bd, fitness)
    }

    fn min_pairwise(a: &ThresholdArchive<f64>) -> f64 {
        let pts: Vec<Vec<f64>> = a.elites().iter().map(|e| a.normalized(&e.bd)).collect();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(sq_dist(&pts[i], &pts[j]).sqrt());
            }
        }
        best
    }

    #[test]
    fn empty_accepts() {
        let mut a = ThresholdArchive::new(0.05, vec![(0.0, 1.0); 2]);
        assert_eq!(a.insert(elite(vec![0.5, 0.5], -1.0)), InsertOutcome::Added);
    }

    #[test]
    fn identical_descriptor_better_fitness_replaces() {
        let mut a = ThresholdArchive::new(0.05, vec![(0.0, 1.0); 2]);
        a.insert(elite(vec![0.5, 0.5], -1.0));
        assert_eq!(a.insert(elite(vec![0.5, 0.5], -0.5)), InsertOutcome::Replaced);
        assert_eq!(a.insert(elite(vec![0.5, 0.5], -0.5)), InsertOutcome::Rejected);
        assert_eq!(a.len(), 1);
        assert_eq!(a.get(0).fitness, -0.5);
    }

    #[test]
    fn replacement_blocked_by_second_neighbour() {
        let mut a = ThresholdArchive::new(0.1, vec![(0.0, 1.0)]);
        a.insert(elite(vec![0.40], -1.0));
        a.insert(elite(vec![0.55], -1.0));
        // nearest is 0.55, but 0.48 is also within l of 0.40
        assert_eq!(a.insert(elite(vec![0.48], 0.0)), InsertOutcome::Rejected);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn normalisation_makes_l_dimensionless() {
        let mut a = ThresholdArchive::new(0.05, vec![(0.0, 100.0)]);
        a.insert(elite(vec![10.0], -1.0));
        assert_eq!(a.insert(elite(vec![14.0], -1.0)), InsertOutcome::Rejected);
        assert_eq!(a.insert(elite(vec![16.0], -1.0)), InsertOutcome::Added);
    }

    #[test]
    fn thousand_random_inserts_keep_spacing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut a = ThresholdArchive::new(0.05, vec![(0.0, 1.0); 3]);
        for _ in 0..1000 {
            let bd: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            a.insert(elite(bd, rng.gen_range(-1.0..0.0)));
        }
        assert!(a.len() > 100);
        assert!(min_pairwise(&a) > 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spacing_invariant_holds_after_every_insert(
            stream in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, -1.0f64..0.0), 1..150)
        ) {
            let mut a = ThresholdArchive::new(0.1, vec![(0.0, 1.0); 2]);
            let mut size = 0;
            for (x, y, f) in stream {
                a.insert(elite(vec![x, y], f));
                prop_assert!(a.len() >= size);
                size = a.len();
                prop_assert!(min_pairwise(&a) > 0.1);
            }
        }
    }
}
