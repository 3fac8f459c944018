use std::collections::HashMap;
use std::sync::OnceLock;

use crate::scalar::Real;

use super::kdtree::KdTree;
use super::sq_dist;

/// Grid hashing is used up to this many dimensions; beyond it radius queries
/// are linear scans.
const MAX_GRID_DIMS: usize = 4;
/// Below this many points a linear scan beats the grid and the tree.
const LINEAR_BELOW: usize = 128;

type Key = [i32; MAX_GRID_DIMS];

/// Exact nearest-neighbour index over normalised descriptors.
///
/// Radius queries use a uniform bucket grid, which stays cheap while points
/// are being added. Nearest queries use a k-d tree that is built on first use
/// and dropped whenever the points change. Equal distances resolve to the
/// lowest id.
#[derive(Debug, Clone)]
pub struct NearestIndex<T> {
    dim: usize,
    cell: T,
    coords: Vec<T>,
    ids: Vec<u64>,
    keys: Vec<Key>,
    grid: HashMap<Key, Vec<usize>>,
    lo: Key,
    hi: Key,
    tree: OnceLock<KdTree<T>>,
}

impl<T: Real> NearestIndex<T> {
    pub fn new(dim: usize, cell: T) -> Self {
        assert!(cell > T::zero(), "cell size must be positive");
        Self {
            dim,
            cell,
            coords: Vec::new(),
            ids: Vec::new(),
            keys: Vec::new(),
            grid: HashMap::new(),
            lo: [i32::MAX; MAX_GRID_DIMS],
            hi: [i32::MIN; MAX_GRID_DIMS],
            tree: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, slot: usize) -> &[T] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn id(&self, slot: usize) -> u64 {
        self.ids[slot]
    }

    fn gridded(&self) -> bool {
        self.dim <= MAX_GRID_DIMS
    }

    fn key(&self, p: &[T]) -> Key {
        let mut k = [0i32; MAX_GRID_DIMS];
        for (d, &v) in p.iter().enumerate().take(MAX_GRID_DIMS) {
            let c = (v / self.cell).floor().as_f64();
            k[d] = c.clamp(-1e6, 1e6) as i32;
        }
        k
    }

    pub fn push(&mut self, point: &[T], id: u64) -> usize {
        assert_eq!(point.len(), self.dim, "descriptor dimension mismatch");
        let slot = self.ids.len();
        self.tree = OnceLock::new();
        self.coords.extend_from_slice(point);
        self.ids.push(id);
        let key = if self.gridded() { self.key(point) } else { [0; MAX_GRID_DIMS] };
        self.keys.push(key);
        if self.gridded() {
            self.grid.entry(key).or_default().push(slot);
            for d in 0..self.dim {
                self.lo[d] = self.lo[d].min(key[d]);
                self.hi[d] = self.hi[d].max(key[d]);
            }
        }
        slot
    }

    /// Overwrites the point stored in `slot`.
    pub fn update(&mut self, slot: usize, point: &[T], id: u64) {
        assert_eq!(point.len(), self.dim, "descriptor dimension mismatch");
        self.coords[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(point);
        self.ids[slot] = id;
        self.tree = OnceLock::new();
        if !self.gridded() {
            return;
        }
        let old = self.keys[slot];
        let new = self.key(point);
        if old != new {
            if let Some(bucket) = self.grid.get_mut(&old) {
                bucket.retain(|&s| s != slot);
                if bucket.is_empty() {
                    self.grid.remove(&old);
                }
            }
            self.grid.entry(new).or_default().push(slot);
            self.keys[slot] = new;
            for d in 0..self.dim {
                self.lo[d] = self.lo[d].min(new[d]);
                self.hi[d] = self.hi[d].max(new[d]);
            }
        }
    }

    #[inline]
    fn better(&self, slot: usize, d2: T, best: Option<(usize, T)>) -> bool {
        match best {
            None => true,
            Some((b, bd)) => d2 < bd || (d2 == bd && self.ids[slot] < self.ids[b]),
        }
    }

    fn linear_nearest(&self, q: &[T], accept: &dyn Fn(usize) -> bool) -> Option<(usize, T)> {
        let mut best = None;
        for slot in 0..self.len() {
            if !accept(slot) {
                continue;
            }
            let d2 = sq_dist(self.point(slot), q);
            if self.better(slot, d2, best) {
                best = Some((slot, d2));
            }
        }
        best
    }

    /// Visits every bucket whose key lies in `[lo, hi]`.
    fn visit_box(&self, lo: &Key, hi: &Key, f: &mut dyn FnMut(usize)) {
        let dim = self.dim;
        let mut cur = *lo;
        loop {
            if let Some(bucket) = self.grid.get(&cur) {
                for &s in bucket {
                    f(s);
                }
            }
            // odometer increment over the box
            let mut d = 0;
            loop {
                if d == dim {
                    return;
                }
                if cur[d] < hi[d] {
                    cur[d] += 1;
                    break;
                }
                cur[d] = lo[d];
                d += 1;
            }
        }
    }

    /// Nearest accepted point to `q`: `(slot, squared distance)`.
    pub fn nearest_filtered(&self, q: &[T], accept: &dyn Fn(usize) -> bool) -> Option<(usize, T)> {
        if self.len() < LINEAR_BELOW {
            return self.linear_nearest(q, accept);
        }
        let tree = self.tree.get_or_init(|| KdTree::build(&self.coords, self.dim));
        tree.nearest(&self.coords, self.dim, q, accept, &|s, d2, best| self.better(s, d2, best))
    }

    pub fn nearest(&self, q: &[T]) -> Option<(usize, T)> {
        self.nearest_filtered(q, &|_| true)
    }

    /// Slots whose point lies within `radius` of `q` (inclusive), ascending.
    pub fn within(&self, q: &[T], radius: T) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        if !self.gridded() || self.len() < LINEAR_BELOW {
            out.extend((0..self.len()).filter(|&s| sq_dist(self.point(s), q) <= r2));
            return out;
        }
        let span = (radius / self.cell).ceil().as_f64() as i32 + 1;
        let qk = self.key(q);
        let mut lo = [0; MAX_GRID_DIMS];
        let mut hi = [0; MAX_GRID_DIMS];
        for d in 0..self.dim {
            lo[d] = (qk[d] - span).max(self.lo[d]);
            hi[d] = (qk[d] + span).min(self.hi[d]);
            if lo[d] > hi[d] {
                return out;
            }
        }
        self.visit_box(&lo, &hi, &mut |s| {
            if sq_dist(self.point(s), q) <= r2 {
                out.push(s);
            }
        });
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec<f64>], q: &[f64]) -> usize {
        let mut best = 0;
        for (i, p) in points.iter().enumerate() {
            if sq_dist(p, q) < sq_dist(&points[best], q) {
                best = i;
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=5 {
            let mut idx = NearestIndex::new(dim, 0.05);
            let mut pts = Vec::new();
            for i in 0..600 {
                let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                idx.push(&p, i);
                pts.push(p);
            }
            for _ in 0..300 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..1.5)).collect();
                let (slot, _) = idx.nearest(&q).unwrap();
                assert_eq!(slot, brute(&pts, &q), "dim {dim}");
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let mut idx = NearestIndex::new(1, 0.1);
        idx.push(&[0.0], 7);
        idx.push(&[1.0], 3);
        assert_eq!(idx.nearest(&[0.5]).unwrap().0, 1);
    }

    #[test]
    fn within_matches_scan_after_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut idx = NearestIndex::new(3, 0.05);
        for i in 0..500 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            idx.push(&p, i);
        }
        for s in (0..500).step_by(7) {
            let p: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            idx.update(s, &p, 1000 + s as u64);
        }
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let expected: Vec<usize> =
                (0..idx.len()).filter(|&s| sq_dist(idx.point(s), &q) <= 0.1 * 0.1).collect();
            assert_eq!(idx.within(&q, 0.1), expected);
        }
    }
}
