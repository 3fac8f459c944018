use std::collections::HashSet;

use crate::scalar::Real;

use super::{normalize, Archive};

/// 2D grid onto which descriptors are projected to count effective cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    /// Descriptor dimensions used as the two projected axes.
    pub dims: [usize; 2],
    pub bounds: [(T, T); 2],
    pub resolution: [usize; 2],
}

impl<T: Real> Projection<T> {
    /// First two descriptor dimensions on a square grid over `±half_width`.
    pub fn square(half_width: T, resolution: usize) -> Self {
        Self { dims: [0, 1], bounds: [(-half_width, half_width); 2], resolution: [resolution; 2] }
    }

    /// Projected cell of a descriptor, clamped into the grid.
    pub fn cell(&self, bd: &[T]) -> (usize, usize) {
        let c = |k: usize| {
            let u = normalize(bd[self.dims[k]], self.bounds[k]).as_f64();
            let res = self.resolution[k];
            let v = (u * res as f64).floor();
            if v.is_nan() {
                0
            } else {
                (v.max(0.0) as usize).min(res - 1)
            }
        };
        (c(0), c(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArchiveMetrics {
    pub size: usize,
    /// Fraction of `capacity` that is filled; 0 when no capacity is known.
    pub coverage: f64,
    /// Sum over elites of `fitness - offset`.
    pub qd_score: f64,
    pub mean_fitness: f64,
    /// Distinct projected cells; 0 without a projection.
    pub effective_size: usize,
}

pub fn metrics<T: Real, A: Archive<T>>(
    archive: &A,
    capacity: Option<usize>,
    fitness_offset: f64,
    projection: Option<&Projection<T>>,
) -> ArchiveMetrics {
    let size = archive.len();
    if size == 0 {
        return ArchiveMetrics::default();
    }
    let total: f64 = archive.iter().map(|e| e.fitness.as_f64()).sum();
    let effective_size = projection.map_or(0, |p| {
        archive.iter().map(|e| p.cell(&e.bd)).collect::<HashSet<_>>().len()
    });
    ArchiveMetrics {
        size,
        coverage: capacity.map_or(0.0, |c| size as f64 / c as f64),
        qd_score: total - fitness_offset * size as f64,
        mean_fitness: total / size as f64,
        effective_size,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Elite, GridArchive, Genotype};
    use super::*;

    fn elite(bd: Vec<f64>, f: f64) -> Elite<f64> {
        Elite::new(Genotype(vec![]), bd, f)
    }

    #[test]
    fn empty_archive_is_all_zero() {
        let a = GridArchive::<f64>::new(vec![(0.0, 1.0)], vec![10]);
        let p = Projection { dims: [0, 0], bounds: [(0.0, 1.0); 2], resolution: [10, 10] };
        assert_eq!(metrics(&a, Some(10), -1.0, Some(&p)), ArchiveMetrics::default());
    }

    #[test]
    fn counts_projected_cells() {
        let mut a = GridArchive::new(vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)], vec![100, 100, 2]);
        a.insert(elite(vec![0.5, 0.5, 0.0], -0.2));
        a.insert(elite(vec![0.5, 0.5, 1.0], -0.4));
        a.insert(elite(vec![-0.5, 0.5, 0.0], -0.6));
        a.insert(elite(vec![0.5, -0.5, 1.0], -0.8));
        let p = Projection::square(1.0, 100);
        let m = metrics(&a, Some(a.capacity()), -1.0, Some(&p));
        assert_eq!(m.size, 4);
        assert_eq!(m.effective_size, 3);
        assert!((m.mean_fitness + 0.5).abs() < 1e-12);
        assert!((m.qd_score - 2.0).abs() < 1e-12);
        assert!((m.coverage - 4.0 / 20_000.0).abs() < 1e-15);
    }

    #[test]
    fn three_distinct_cells() {
        let mut a = GridArchive::new(vec![(-1.0, 1.0); 2], vec![100, 100]);
        for x in [-0.9, 0.0, 0.9] {
            a.insert(elite(vec![x, x], -0.1));
        }
        assert_eq!(metrics(&a, None, 0.0, Some(&Projection::square(1.0, 100))).effective_size, 3);
    }
}
