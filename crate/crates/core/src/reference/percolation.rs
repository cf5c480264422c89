//! Oriented site percolation on the half-space `{(x, n) : x + n even, n >= 0, x >= 0}`.
//!
//! `(x, m) -> (y, n)` when there is a path of open sites moving one column left or right
//! per generation. Columns to the left of 0 are closed. Fields are drawn row by row from
//! uniforms, so one field can be read at several openness levels `p` simultaneously and
//! opening more sites can only enlarge reach sets.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::ProportionEstimate;

/// One generation of uniforms; entries off the parity lattice are unused.
#[derive(Clone, Debug)]
pub struct UniformRows<R> {
    rng: R,
    width: usize,
    generation: usize,
    row: Vec<f64>,
}

impl<R: Rng> UniformRows<R> {
    pub fn new(rng: R, width: usize) -> Self {
        UniformRows { rng, width, generation: 0, row: vec![1.0; width] }
    }

    /// Draws the next generation and returns it with its index.
    pub fn next_row(&mut self) -> (usize, &[f64]) {
        let n = self.generation;
        self.generation += 1;
        for x in 0..self.width {
            self.row[x] = if (x + n) % 2 == 0 { self.rng.random() } else { 1.0 };
        }
        (n, &self.row)
    }
}

/// Fully stored field of independent Bernoulli(`p`) openness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PercolationField {
    pub height: usize,
    pub width: usize,
    open: Vec<bool>,
}

impl PercolationField {
    /// Generations `0..=height`, columns `0..width`.
    pub fn sample<R: Rng>(p: f64, height: usize, width: usize, rng: &mut R) -> Self {
        let mut rows = UniformRows::new(rng, width);
        let mut open = Vec::with_capacity((height + 1) * width);
        for _ in 0..=height {
            let (_, row) = rows.next_row();
            open.extend(row.iter().map(|&u| u < p));
        }
        PercolationField { height, width, open }
    }

    pub fn from_fn(height: usize, width: usize, mut open: impl FnMut(i64, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity((height + 1) * width);
        for n in 0..=height {
            for x in 0..width {
                cells.push((x + n) % 2 == 0 && open(x as i64, n));
            }
        }
        PercolationField { height, width, open: cells }
    }

    /// Openness of `(x, n)`; closed off the parity lattice, left of 0 and outside the window.
    pub fn is_open(&self, x: i64, n: usize) -> bool {
        if x < 0 || x as usize >= self.width || n > self.height {
            return false;
        }
        self.open[n * self.width + x as usize]
    }
}

fn check_initial(a: &[i64]) -> Result<()> {
    match a.iter().find(|&&x| x < 0 || x % 2 != 0) {
        Some(x) => Err(Error::Input(format!("initial columns must be even and nonnegative, found {x}"))),
        None => Ok(()),
    }
}

fn advance(prev: &[bool], next: &mut [bool], open: impl Fn(usize) -> bool) {
    let w = prev.len();
    for y in 0..w {
        let from_left = y > 0 && prev[y - 1];
        let from_right = y + 1 < w && prev[y + 1];
        next[y] = (from_left || from_right) && open(y);
    }
}

/// Reachable columns at one generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachSet {
    pub generation: usize,
    pub columns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachTrace {
    pub sets: Vec<ReachSet>,
    /// First generation with an empty reach set; `None` if the top was reached.
    pub tau: Option<usize>,
}

/// `W_n^A` for `n = 0..=height`, stopping after the first empty generation.
pub fn percolation_reach(field: &PercolationField, a: &[i64]) -> Result<ReachTrace> {
    check_initial(a)?;
    let w = field.width;
    let mut cur = vec![false; w];
    for &x in a {
        if (x as usize) < w {
            cur[x as usize] = field.is_open(x, 0);
        }
    }
    let mut next = vec![false; w];
    let mut sets = Vec::new();
    let collect = |cells: &[bool], n| ReachSet {
        generation: n,
        columns: (0..w).filter(|&y| cells[y]).collect(),
    };
    sets.push(collect(&cur, 0));
    if sets[0].columns.is_empty() {
        return Ok(ReachTrace { sets, tau: Some(0) });
    }
    for n in 1..=field.height {
        advance(&cur, &mut next, |y| field.is_open(y as i64, n));
        std::mem::swap(&mut cur, &mut next);
        sets.push(collect(&cur, n));
        if sets[n].columns.is_empty() {
            return Ok(ReachTrace { sets, tau: Some(n) });
        }
    }
    Ok(ReachTrace { sets, tau: None })
}

/// Outcome of one shared-uniform field read at an ascending grid of `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledOutcome {
    /// `0` in the top-generation reach set, per grid value.
    pub survived: Vec<bool>,
    /// Reach sets were nested along the grid at every generation.
    pub nested: bool,
}

/// Propagates `W^A` for every `p` in `grid` through one lazily drawn field of
/// generations `0..=height`, reporting whether column 0 is reached at the top.
pub fn coupled_reach<R: Rng>(
    grid: &[f64],
    a: &[i64],
    height: usize,
    width: usize,
    rng: R,
) -> Result<CoupledOutcome> {
    check_initial(a)?;
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("p grid must be ascending".into()));
    }
    let k = grid.len();
    let mut rows = UniformRows::new(rng, width);
    let mut cur = vec![vec![false; width]; k];
    let mut next = vec![false; width];
    let (_, row) = rows.next_row();
    for (level, &p) in grid.iter().enumerate() {
        for &x in a {
            if (x as usize) < width {
                cur[level][x as usize] = row[x as usize] < p;
            }
        }
    }
    let nested_now = |cur: &[Vec<bool>]| {
        cur.windows(2).all(|pair| pair[0].iter().zip(&pair[1]).all(|(&lo, &hi)| !lo || hi))
    };
    let mut nested = nested_now(&cur);
    for _ in 1..=height {
        let (_, row) = rows.next_row();
        for (level, &p) in grid.iter().enumerate() {
            advance(&cur[level], &mut next, |y| row[y] < p);
            std::mem::swap(&mut cur[level], &mut next);
        }
        nested &= nested_now(&cur);
    }
    Ok(CoupledOutcome { survived: cur.iter().map(|c| width > 0 && c[0]).collect(), nested })
}

/// Estimates `P(0 in W_height)` from `A = 2Z+` (truncated to the light cone) for each `p`
/// in `grid`, one shared field per replicate. Returns the estimates and whether every field
/// was monotone in `p`.
pub fn survival_curve<R: Rng>(
    grid: &[f64],
    height: usize,
    replicates: u64,
    mut field_rng: impl FnMut(u64) -> R,
) -> Result<(Vec<ProportionEstimate>, bool)> {
    if height % 2 != 0 {
        return Err(Error::Precondition(format!("height must be even, got {height}")));
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let a: Vec<i64> = (0..=height as i64).step_by(2).collect();
    let mut successes = vec![0u64; sorted.len()];
    let mut monotone = true;
    for r in 0..replicates {
        let out = coupled_reach(&sorted, &a, height, height + 1, field_rng(r))?;
        monotone &= out.nested && out.survived.windows(2).all(|w| !w[0] || w[1]);
        for (s, hit) in successes.iter_mut().zip(&out.survived) {
            *s += *hit as u64;
        }
    }
    let estimates = sorted
        .iter()
        .zip(&successes)
        .map(|(&p, &s)| ProportionEstimate::new(p, s, replicates))
        .collect();
    Ok((estimates, monotone))
}

/// Paired duality estimate at generation `n`: the frequencies of
/// `W_n^A ∩ B ≠ ∅` and of `W_n^B ∩ A ≠ ∅`, each over independent fields.
pub fn duality_frequencies<R: Rng>(
    p: f64,
    a: &[i64],
    b: &[i64],
    n: usize,
    width: usize,
    replicates: u64,
    mut field_rng: impl FnMut(u64) -> R,
) -> Result<(ProportionEstimate, ProportionEstimate)> {
    let hits = |from: &[i64], to: &[i64], rng: &mut R| -> Result<bool> {
        let field = PercolationField::sample(p, n, width, rng);
        let trace = percolation_reach(&field, from)?;
        Ok(trace.tau.is_none()
            && trace.sets[n].columns.iter().any(|&y| to.contains(&(y as i64))))
    };
    let (mut ab, mut ba) = (0, 0);
    for r in 0..replicates {
        let mut rng = field_rng(2 * r);
        ab += hits(a, b, &mut rng)? as u64;
        let mut rng = field_rng(2 * r + 1);
        ba += hits(b, a, &mut rng)? as u64;
    }
    Ok((ProportionEstimate::new(p, ab, replicates), ProportionEstimate::new(p, ba, replicates)))
}
