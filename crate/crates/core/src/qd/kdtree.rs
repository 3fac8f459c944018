use crate::scalar::Real;

use super::sq_dist;

/// Static k-d tree over the points of a [`NearestIndex`](super::NearestIndex),
/// stored implicitly: the node of a sub-range is its middle element.
#[derive(Debug, Clone)]
pub(crate) struct KdTree<T> {
    perm: Vec<u32>,
    split: Vec<u8>,
    /// Bounding box of all points, per dimension.
    bbox: Vec<(T, T)>,
}

/// Query state shared by the recursive search.
struct Query<'a, T> {
    coords: &'a [T],
    dim: usize,
    q: &'a [T],
    accept: &'a dyn Fn(usize) -> bool,
    better: &'a dyn Fn(usize, T, Option<(usize, T)>) -> bool,
    best: Option<(usize, T)>,
    /// Per-dimension gap between the query and the current cell.
    off: Vec<T>,
}

impl<T: Real> KdTree<T> {
    pub(crate) fn build(coords: &[T], dim: usize) -> Self {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        let mut bbox = vec![(T::infinity(), T::neg_infinity()); dim];
        for p in coords.chunks_exact(dim.max(1)) {
            for (b, &v) in bbox.iter_mut().zip(p) {
                *b = (b.0.min(v), b.1.max(v));
            }
        }
        let mut tree = Self { perm: (0..n as u32).collect(), split: vec![0; n], bbox };
        tree.build_range(coords, dim, 0, n);
        tree
    }

    fn build_range(&mut self, coords: &[T], dim: usize, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        // split along the widest dimension of the range
        let mut best = (0, T::neg_infinity());
        for d in 0..dim {
            let (mut mn, mut mx) = (T::infinity(), T::neg_infinity());
            for &p in &self.perm[lo..hi] {
                let v = coords[p as usize * dim + d];
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if mx - mn > best.1 {
                best = (d, mx - mn);
            }
        }
        let d = best.0;
        let mid = lo + (hi - lo) / 2;
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            let va = coords[a as usize * dim + d];
            let vb = coords[b as usize * dim + d];
            va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal)
        });
        self.split[mid] = d as u8;
        self.build_range(coords, dim, lo, mid);
        self.build_range(coords, dim, mid + 1, hi);
    }

    /// Nearest accepted slot; `better(slot, d2, best)` decides ties.
    pub(crate) fn nearest(
        &self,
        coords: &[T],
        dim: usize,
        q: &[T],
        accept: &dyn Fn(usize) -> bool,
        better: &dyn Fn(usize, T, Option<(usize, T)>) -> bool,
    ) -> Option<(usize, T)> {
        // start from the gap to the bounding box so far queries prune early
        let off: Vec<T> = q
            .iter()
            .zip(&self.bbox)
            .map(|(&v, &(lo, hi))| if v < lo { v - lo } else if v > hi { v - hi } else { T::zero() })
            .collect();
        let rd = off.iter().fold(T::zero(), |s, &o| s + o * o);
        let mut query = Query { coords, dim, q, accept, better, best: None, off };
        self.search(&mut query, 0, self.perm.len(), rd);
        query.best
    }

    /// `rd` is the squared distance from the query to the cell of the range.
    fn search(&self, qs: &mut Query<'_, T>, lo: usize, hi: usize, rd: T) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let slot = self.perm[mid] as usize;
        let p = &qs.coords[slot * qs.dim..(slot + 1) * qs.dim];
        if (qs.accept)(slot) {
            let d2 = sq_dist(p, qs.q);
            if (qs.better)(slot, d2, qs.best) {
                qs.best = Some((slot, d2));
            }
        }
        if hi - lo == 1 {
            return;
        }
        let d = self.split[mid] as usize;
        let diff = qs.q[d] - p[d];
        let (first, second) = if diff < T::zero() { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(qs, first.0, first.1, rd);
        let old = qs.off[d];
        let far = rd - old * old + diff * diff;
        // equal distances are still visited so ties resolve by id
        if qs.best.is_none_or(|(_, b)| far <= b) {
            qs.off[d] = diff;
            self.search(qs, second.0, second.1, far);
            qs.off[d] = old;
        }
    }
}
