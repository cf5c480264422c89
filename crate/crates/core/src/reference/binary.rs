//! Two-state lattice processes whose flip rates depend on a site's own value and on the
//! number of occupied sites in its range: the biased voter model and the contact process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BinaryField, Boundary, NeighborTable};
use crate::sumtree::SumTree;

/// Flip rate of a site given its value and the number of occupied sites among its
/// `nu` neighbors.
pub trait FlipRule {
    fn range(&self) -> usize;
    fn flip_rate(&self, occupied: bool, occupied_neighbors: u32, nu: u32) -> f64;
}

/// Biased voter model: a site adopts type `j` at rate `beta_j` times its count of type-`j`
/// neighbors. Occupied cells are type 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasedVoterParams {
    pub beta1: f64,
    pub beta2: f64,
    pub range: usize,
}

impl FlipRule for BiasedVoterParams {
    fn range(&self) -> usize {
        self.range
    }

    #[inline]
    fn flip_rate(&self, occupied: bool, ones: u32, nu: u32) -> f64 {
        if occupied {
            self.beta2 * (nu - ones) as f64
        } else {
            self.beta1 * ones as f64
        }
    }
}

/// Contact process: `0 -> 1` at `birth` per occupied neighbor, `1 -> 0` at `death`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub birth: f64,
    pub death: f64,
    pub range: usize,
}

impl FlipRule for ContactParams {
    fn range(&self) -> usize {
        self.range
    }

    #[inline]
    fn flip_rate(&self, occupied: bool, ones: u32, _nu: u32) -> f64 {
        if occupied {
            self.death
        } else {
            self.birth * ones as f64
        }
    }
}

/// Flip rate of site `x`, computed from scratch.
pub fn flip_rate<F: FlipRule>(field: &BinaryField, x: usize, rule: &F) -> Result<f64> {
    let table = NeighborTable::new(&field.geometry, rule.range())?;
    let ones = table.neighbors(x).iter().filter(|&&z| field.cells[z as usize]).count() as u32;
    Ok(rule.flip_rate(field.cells[x], ones, table.nu() as u32))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryRunSummary {
    pub events: u64,
    pub absorbed: bool,
}

/// Exact simulator for a [`FlipRule`] on a torus.
#[derive(Clone)]
pub struct BinarySimulator<F: FlipRule> {
    rule: F,
    field: BinaryField,
    table: NeighborTable,
    ones: Vec<u32>,
    tree: SumTree,
    clock: f64,
    pending: Vec<(usize, f64)>,
}

impl<F: FlipRule> BinarySimulator<F> {
    pub fn new(field: BinaryField, rule: F) -> Result<Self> {
        if field.geometry.boundary() != Boundary::Periodic {
            return Err(Error::Precondition("two-state processes run on a torus".into()));
        }
        let table = NeighborTable::new(&field.geometry, rule.range())?;
        let n = field.cells.len();
        let ones: Vec<u32> = (0..n)
            .map(|x| table.neighbors(x).iter().filter(|&&z| field.cells[z as usize]).count() as u32)
            .collect();
        let nu = table.nu() as u32;
        let rates: Vec<f64> = (0..n).map(|x| rule.flip_rate(field.cells[x], ones[x], nu)).collect();
        Ok(BinarySimulator { rule, field, table, ones, tree: SumTree::new(&rates), clock: 0.0, pending: Vec::new() })
    }

    pub fn field(&self) -> &BinaryField {
        &self.field
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn occupied(&self) -> usize {
        self.field.count()
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    /// Cached flip rate of site `x`.
    pub fn rate(&self, x: usize) -> f64 {
        self.tree.get(x)
    }

    fn flip(&mut self, x: usize) {
        let now = !self.field.cells[x];
        self.field.cells[x] = now;
        let nu = self.table.nu() as u32;
        let mut pending = std::mem::take(&mut self.pending);
        pending.clear();
        pending.push((x, self.rule.flip_rate(now, self.ones[x], nu)));
        for &z in self.table.neighbors(x) {
            let z = z as usize;
            if now {
                self.ones[z] += 1;
            } else {
                self.ones[z] -= 1;
            }
            pending.push((z, self.rule.flip_rate(self.field.cells[z], self.ones[z], nu)));
        }
        self.tree.set_many(&pending);
        self.pending = pending;
    }

    /// Runs to `t_end`, calling `sample` at `0, dt, 2dt, ...` (relative to the starting clock)
    /// up to and including `t_end` when `sample_interval` is set.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        t_end: f64,
        sample_interval: Option<f64>,
        rng: &mut R,
        mut sample: impl FnMut(f64, &BinaryField),
    ) -> Result<BinaryRunSummary> {
        let t0 = self.clock;
        if !(t_end >= t0) {
            return Err(Error::Precondition(format!("t_end {t_end} is before the clock {t0}")));
        }
        if sample_interval.is_some_and(|dt| !(dt > 0.0)) {
            return Err(Error::Precondition("sample interval must be positive".into()));
        }
        let mut summary = BinaryRunSummary { events: 0, absorbed: false };
        let mut next_sample = 0u64;
        loop {
            let total = self.tree.total();
            let next = if total > 0.0 {
                let u: f64 = rng.random();
                self.clock - (1.0 - u).ln() / total
            } else {
                summary.absorbed = true;
                f64::INFINITY
            };
            if let Some(dt) = sample_interval {
                while t0 + next_sample as f64 * dt <= next.min(t_end) {
                    sample(t0 + next_sample as f64 * dt, &self.field);
                    next_sample += 1;
                }
            }
            if next > t_end {
                self.clock = t_end;
                return Ok(summary);
            }
            let u: f64 = rng.random();
            let x = self.tree.search(u * total);
            self.flip(x);
            self.clock = next;
            summary.events += 1;
        }
    }
}
