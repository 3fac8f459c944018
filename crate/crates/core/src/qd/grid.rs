use std::collections::HashMap;

use crate::scalar::Real;

use super::{normalize, Archive, Elite, InsertOutcome};

/// MAP-Elites grid: one elite per cell of a regular discretisation.
#[derive(Debug, Clone)]
pub struct GridArchive<T> {
    bounds: Vec<(T, T)>,
    resolution: Vec<usize>,
    slots: Vec<Elite<T>>,
    slot_cell: Vec<usize>,
    cell_slot: HashMap<usize, usize>,
    next_id: u64,
}

impl<T: Real> GridArchive<T> {
    pub fn new(bounds: Vec<(T, T)>, resolution: Vec<usize>) -> Self {
        assert_eq!(bounds.len(), resolution.len(), "one resolution per dimension");
        assert!(resolution.iter().all(|&r| r > 0), "resolution must be positive");
        assert!(bounds.iter().all(|(lo, hi)| hi > lo), "empty bounds");
        Self {
            bounds,
            resolution,
            slots: Vec::new(),
            slot_cell: Vec::new(),
            cell_slot: HashMap::new(),
            next_id: 0,
        }
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn capacity(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Per-dimension cell coordinates; values outside the bounds fall into the
    /// edge cells.
    pub fn cell_coords(&self, bd: &[T]) -> Vec<usize> {
        assert_eq!(bd.len(), self.dims(), "descriptor dimension mismatch");
        bd.iter()
            .zip(&self.bounds)
            .zip(&self.resolution)
            .map(|((&v, &b), &res)| {
                let u = normalize(v, b).as_f64();
                let c = (u * res as f64).floor();
                if c.is_nan() {
                    0
                } else {
                    (c.max(0.0) as usize).min(res - 1)
                }
            })
            .collect()
    }

    /// Row-major flat cell index.
    pub fn cell_of(&self, bd: &[T]) -> usize {
        self.cell_coords(bd)
            .iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&c, &res)| acc * res + c)
    }

    pub fn elite_at(&self, cell: usize) -> Option<&Elite<T>> {
        self.cell_slot.get(&cell).map(|&s| &self.slots[s])
    }

    pub fn cell_of_slot(&self, slot: usize) -> usize {
        self.slot_cell[slot]
    }

    /// Slot holding the cell, if occupied.
    pub fn slot_of_cell(&self, cell: usize) -> Option<usize> {
        self.cell_slot.get(&cell).copied()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Inserts keeping the elite's own id; used when loading files.
    pub fn insert_with_id(&mut self, elite: Elite<T>) -> InsertOutcome {
        let cell = self.cell_of(&elite.bd);
        self.next_id = self.next_id.max(elite.id + 1);
        match self.cell_slot.get(&cell) {
            None => {
                self.cell_slot.insert(cell, self.slots.len());
                self.slot_cell.push(cell);
                self.slots.push(elite);
                InsertOutcome::Added
            }
            Some(&s) if elite.fitness > self.slots[s].fitness => {
                self.slots[s] = elite;
                InsertOutcome::Replaced
            }
            Some(_) => InsertOutcome::Rejected,
        }
    }
}

impl<T: Real> Archive<T> for GridArchive<T> {
    /// Higher fitness wins the cell; ties keep the incumbent.
    fn insert(&mut self, mut elite: Elite<T>) -> InsertOutcome {
        elite.id = self.next_id;
        let out = self.insert_with_id(elite);
        if !out.accepted() {
            // ids are only consumed by stored elites
            self.next_id -= 1;
        }
        out
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn get(&self, i: usize) -> &Elite<T> {
        &self.slots[i]
    }
}
