use crate::gait::ContactMask;
use crate::qd::{normalize_all, Archive, Elite, InsertOutcome, NearestIndex, ThresholdArchive};

/// Middle layer: one threshold archive per contact mask plus an index over
/// all of them for lookups that ignore the mask.
///
/// Elites are addressed by a bank position that is assigned when the elite
/// first enters and is kept by whoever replaces it.
#[derive(Debug, Clone)]
pub struct MiddleBank {
    bounds: Vec<(f64, f64)>,
    subs: Vec<ThresholdArchive<f64>>,
    /// Bank position -> (mask, slot in that sub-archive).
    order: Vec<(u8, usize)>,
    /// Per mask: slot -> bank position.
    positions: Vec<Vec<usize>>,
    all: NearestIndex<f64>,
    next_id: u64,
}

impl MiddleBank {
    pub fn new(l: f64, bounds: Vec<(f64, f64)>) -> Self {
        let dim = bounds.len();
        Self {
            subs: (0..64).map(|_| ThresholdArchive::new(l, bounds.clone())).collect(),
            bounds,
            order: Vec::new(),
            positions: vec![Vec::new(); 64],
            all: NearestIndex::new(dim, l),
            next_id: 0,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn l(&self) -> f64 {
        self.subs[0].l()
    }

    pub fn sub(&self, mask: ContactMask) -> &ThresholdArchive<f64> {
        &self.subs[mask.index()]
    }

    pub fn mask_of(&self, pos: usize) -> ContactMask {
        ContactMask::from_index(self.order[pos].0 as usize)
    }

    /// Nearest elite to a normalised query: `(bank position, normalised distance)`.
    pub fn nearest(&self, q: &[f64], mask: Option<ContactMask>) -> Option<(usize, f64)> {
        match mask {
            None => self.all.nearest(q).map(|(p, d2)| (p, d2.sqrt())),
            Some(m) => {
                let sub = m.index();
                self.subs[sub].index().nearest(q).map(|(s, d2)| (self.positions[sub][s], d2.sqrt()))
            }
        }
    }

    fn insert_routed(&mut self, elite: Elite<f64>) -> InsertOutcome {
        let mask = elite.mask.expect("middle elites carry a contact mask");
        let m = mask.index();
        let q = normalize_all(&elite.bd, &self.bounds);
        let id = elite.id;
        let (out, slot) = self.subs[m].insert_slot(elite);
        match (out, slot) {
            (InsertOutcome::Added, Some(s)) => {
                let pos = self.order.len();
                self.order.push((m as u8, s));
                self.positions[m].push(pos);
                self.all.push(&q, id);
            }
            (InsertOutcome::Replaced, Some(s)) => {
                let pos = self.positions[m][s];
                self.all.update(pos, &q, id);
            }
            _ => {}
        }
        if out.accepted() {
            self.next_id = self.next_id.max(id + 1);
        }
        out
    }

    /// Appends a saved elite without competition.
    pub fn restore(&mut self, elite: Elite<f64>) {
        let m = elite.mask.expect("middle elites carry a contact mask").index();
        let q = normalize_all(&elite.bd, &self.bounds);
        let id = elite.id;
        let s = self.subs[m].len();
        self.subs[m].restore(elite);
        let pos = self.order.len();
        self.order.push((m as u8, s));
        self.positions[m].push(pos);
        self.all.push(&q, id);
        self.next_id = self.next_id.max(id + 1);
    }

    /// Number of non-empty sub-archives.
    pub fn occupied_masks(&self) -> usize {
        self.subs.iter().filter(|s| !s.is_empty()).count()
    }
}

impl Archive<f64> for MiddleBank {
    fn insert(&mut self, mut elite: Elite<f64>) -> InsertOutcome {
        elite.id = self.next_id;
        self.insert_routed(elite)
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn get(&self, i: usize) -> &Elite<f64> {
        let (m, s) = self.order[i];
        self.subs[m as usize].get(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qd::{sq_dist, Genotype};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bank() -> MiddleBank {
        MiddleBank::new(0.05, vec![(-1.0, 1.0), (-1.0, 1.0), (-3.0, 3.0)])
    }

    fn elite(bd: Vec<f64>, mask: u8, f: f64) -> Elite<f64> {
        let mut e = Elite::new(Genotype(vec![]), bd, f);
        e.mask = ContactMask::new(mask);
        e
    }

    #[test]
    fn routes_by_mask() {
        let mut b = bank();
        assert_eq!(b.insert(elite(vec![0.0, 0.0, 0.0], 3, -1.0)), InsertOutcome::Added);
        // same descriptor, different mask: a separate sub-archive
        assert_eq!(b.insert(elite(vec![0.0, 0.0, 0.0], 5, -1.0)), InsertOutcome::Added);
        assert_eq!(b.insert(elite(vec![0.0, 0.0, 0.0], 5, -0.5)), InsertOutcome::Replaced);
        assert_eq!(b.len(), 2);
        assert_eq!(b.occupied_masks(), 2);
        for pos in 0..b.len() {
            assert_eq!(b.get(pos).mask, Some(b.mask_of(pos)));
        }
        assert_eq!(b.get(1).fitness, -0.5);
    }

    #[test]
    fn lookups_match_linear_scans() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut b = bank();
        for _ in 0..3000 {
            let bd = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)];
            b.insert(elite(bd, rng.gen_range(0..64), rng.gen_range(-3.0..0.0)));
        }
        let norm: Vec<Vec<f64>> = (0..b.len()).map(|p| normalize_all(&b.get(p).bd, b.bounds())).collect();
        let scan = |q: &[f64], mask: Option<ContactMask>| {
            let mut best: Option<(usize, f64)> = None;
            for (p, v) in norm.iter().enumerate() {
                if mask.is_some_and(|m| b.mask_of(p) != m) {
                    continue;
                }
                let d = sq_dist(v, q);
                let better = match best {
                    None => true,
                    Some((bp, bd)) => d < bd || (d == bd && b.get(p).id < b.get(bp).id),
                };
                if better {
                    best = Some((p, d));
                }
            }
            best.map(|(p, _)| p)
        };
        for _ in 0..1000 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let m = ContactMask::from_index(rng.gen_range(0..64));
            assert_eq!(b.nearest(&q, None).map(|r| r.0), scan(&q, None));
            assert_eq!(b.nearest(&q, Some(m)).map(|r| r.0), scan(&q, Some(m)));
        }
    }
}
