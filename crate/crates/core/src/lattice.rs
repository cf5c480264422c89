//! Finite lattice geometry, punctured-box neighborhoods, and the site-state data model.
//!
//! Sites are stored in row-major flat arrays (first coordinate most significant).
//! A geometry is either a periodic torus `(Z/nZ)^d`, or a one-dimensional segment whose
//! ends are padded with frozen halo sites standing in for the two infinite half-lines.
//! Halo sites live after the active sites in storage and never change state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// One-dimensional segment with `halo` frozen sites beyond each end.
    Frozen { halo: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    dimension: usize,
    side: usize,
    boundary: Boundary,
}

impl Geometry {
    pub fn torus(dimension: usize, side: usize) -> Result<Self> {
        if dimension == 0 || side == 0 {
            return Err(Error::Configuration(format!(
                "torus needs positive dimension and side, got d={dimension}, side={side}"
            )));
        }
        let sites = (side as u128).checked_pow(dimension as u32);
        match sites {
            Some(n) if n <= u32::MAX as u128 => {}
            _ => {
                return Err(Error::Configuration(format!(
                    "torus {side}^{dimension} is too large"
                )))
            }
        }
        Ok(Geometry { dimension, side, boundary: Boundary::Periodic })
    }

    pub fn segment(side: usize, halo: usize) -> Result<Self> {
        if side == 0 || halo == 0 {
            return Err(Error::Configuration(format!(
                "segment needs positive length and halo, got side={side}, halo={halo}"
            )));
        }
        Ok(Geometry { dimension: 1, side, boundary: Boundary::Frozen { halo } })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of active (evolving) sites, `side^dimension`.
    pub fn site_count(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    /// Active sites plus frozen halo sites.
    pub fn storage_len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.site_count(),
            Boundary::Frozen { halo } => self.side + 2 * halo,
        }
    }

    pub fn is_halo(&self, index: usize) -> bool {
        index >= self.site_count()
    }

    /// Storage index of the halo site at position `-1 - depth`.
    pub fn left_halo(&self, depth: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Frozen { halo } if depth < halo => Some(self.side + depth),
            _ => None,
        }
    }

    /// Storage index of the halo site at position `side + depth`.
    pub fn right_halo(&self, depth: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Frozen { halo } if depth < halo => Some(self.side + halo + depth),
            _ => None,
        }
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dimension];
        let mut rest = index;
        for axis in (0..self.dimension).rev() {
            out[axis] = rest % self.side;
            rest /= self.side;
        }
        out
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dimension);
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    /// Storage index of the site at signed offset `offset` from active site `x`, if any.
    fn shifted(&self, x: usize, offset: &[i64]) -> Option<usize> {
        match self.boundary {
            Boundary::Periodic => {
                let n = self.side as i64;
                let mut coords = self.coords(x);
                for (c, &o) in coords.iter_mut().zip(offset) {
                    *c = (*c as i64 + o).rem_euclid(n) as usize;
                }
                Some(self.index(&coords))
            }
            Boundary::Frozen { halo } => {
                let pos = x as i64 + offset[0];
                let n = self.side as i64;
                if pos < 0 {
                    let depth = (-pos - 1) as usize;
                    (depth < halo).then(|| self.side + depth)
                } else if pos >= n {
                    let depth = (pos - n) as usize;
                    (depth < halo).then(|| self.side + halo + depth)
                } else {
                    Some(pos as usize)
                }
            }
        }
    }

    fn check_range(&self, range: usize) -> Result<()> {
        if range == 0 {
            return Err(Error::Configuration("neighborhood range must be at least 1".into()));
        }
        if self.side < 2 * range + 1 {
            return Err(Error::Configuration(format!(
                "side {} is smaller than 2R+1 = {} for range {range}",
                self.side,
                2 * range + 1
            )));
        }
        if let Boundary::Frozen { halo } = self.boundary {
            if range > halo {
                return Err(Error::Configuration(format!(
                    "range {range} exceeds the frozen halo width {halo}"
                )));
            }
        }
        Ok(())
    }
}

/// Size `(2R+1)^d - 1` of the punctured box of range `R`.
pub fn nu(dimension: usize, range: usize) -> usize {
    (2 * range + 1).pow(dimension as u32) - 1
}

/// Nonzero offsets of the punctured box `[-R, R]^d`, in lexicographic order.
pub fn box_offsets(dimension: usize, range: usize) -> Vec<Vec<i64>> {
    let r = range as i64;
    let width = 2 * range + 1;
    let total = width.pow(dimension as u32);
    let mut out = Vec::with_capacity(total - 1);
    for k in 0..total {
        let mut rest = k;
        let mut offset = vec![0i64; dimension];
        for axis in (0..dimension).rev() {
            offset[axis] = (rest % width) as i64 - r;
            rest /= width;
        }
        if offset.iter().any(|&o| o != 0) {
            out.push(offset);
        }
    }
    out
}

/// All sites `z` with `0 < |x - z|_inf <= R`, in canonical (lexicographic offset) order.
pub fn neighborhood(x: usize, range: usize, geometry: &Geometry) -> Result<Vec<usize>> {
    geometry.check_range(range)?;
    if x >= geometry.site_count() {
        return Err(Error::Configuration(format!(
            "site {x} is outside the active lattice of {} sites",
            geometry.site_count()
        )));
    }
    Ok(box_offsets(geometry.dimension, range)
        .iter()
        .filter_map(|o| geometry.shifted(x, o))
        .collect())
}

/// Precomputed neighborhood lists for every active site at one range.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    range: usize,
    nu: usize,
    table: Vec<u32>,
}

impl NeighborTable {
    pub fn new(geometry: &Geometry, range: usize) -> Result<Self> {
        geometry.check_range(range)?;
        let offsets = box_offsets(geometry.dimension, range);
        let nu = offsets.len();
        let n = geometry.site_count();
        let mut table = Vec::with_capacity(n * nu);
        for x in 0..n {
            for o in &offsets {
                let z = geometry
                    .shifted(x, o)
                    .expect("halo covers the range after check_range");
                table.push(z as u32);
            }
        }
        Ok(NeighborTable { range, nu, table })
    }

    pub fn range(&self) -> usize {
        self.range
    }

    /// Neighborhood size, identical for every site.
    pub fn nu(&self) -> usize {
        self.nu
    }

    #[inline]
    pub fn neighbors(&self, x: usize) -> &[u32] {
        &self.table[x * self.nu..(x + 1) * self.nu]
    }
}

/// `(host, symbiont)` at one site; symbiont 0 means unassociated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteState {
    pub host: u8,
    pub symbiont: u8,
}

impl SiteState {
    pub const fn new(host: u8, symbiont: u8) -> Self {
        SiteState { host, symbiont }
    }

    pub const fn unassociated(host: u8) -> Self {
        SiteState { host, symbiont: 0 }
    }

    pub const fn is_associated(&self) -> bool {
        self.symbiont != 0
    }

    pub fn is_valid(&self, kappa: usize) -> bool {
        self.host >= 1 && (self.host as usize) <= kappa && (self.symbiont as usize) <= kappa
    }
}

/// Full lattice assignment plus the continuous-time clock.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    geometry: Geometry,
    states: Vec<SiteState>,
    clock: f64,
}

impl Configuration {
    /// Every active and halo site set to `state`.
    pub fn uniform(geometry: Geometry, state: SiteState) -> Self {
        Configuration { geometry, states: vec![state; geometry.storage_len()], clock: 0.0 }
    }

    /// Active-site states in row-major order; halo sites (if any) copy the nearest end.
    pub fn from_states(geometry: Geometry, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != geometry.site_count() {
            return Err(Error::Configuration(format!(
                "expected {} site states, got {}",
                geometry.site_count(),
                states.len()
            )));
        }
        let mut config = Configuration { geometry, states, clock: 0.0 };
        if let Boundary::Frozen { halo } = geometry.boundary {
            let left = config.states[0];
            let right = config.states[geometry.side - 1];
            config.states.extend(std::iter::repeat_n(left, halo));
            config.states.extend(std::iter::repeat_n(right, halo));
        }
        Ok(config)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub(crate) fn set_clock(&mut self, t: f64) {
        debug_assert!(t >= self.clock);
        self.clock = t;
    }

    /// Active sites only.
    pub fn sites(&self) -> &[SiteState] {
        &self.states[..self.geometry.site_count()]
    }

    /// Active and halo sites, indexable by neighbor-table entries.
    pub fn storage(&self) -> &[SiteState] {
        &self.states
    }

    #[inline]
    pub fn get(&self, index: usize) -> SiteState {
        self.states[index]
    }

    /// Sets any site, halo included.  Simulators built on a configuration own it, so this
    /// is only reachable while preparing initial conditions.
    pub fn set(&mut self, index: usize, state: SiteState) {
        self.states[index] = state;
    }

    /// Fill the frozen halos of a segment.
    pub fn set_halos(&mut self, left: SiteState, right: SiteState) {
        if let Boundary::Frozen { halo } = self.geometry.boundary {
            let side = self.geometry.side;
            self.states[side..side + halo].fill(left);
            self.states[side + halo..].fill(right);
        }
    }

    pub fn validate(&self, kappa: usize) -> Result<()> {
        match self.states.iter().position(|s| !s.is_valid(kappa)) {
            None => Ok(()),
            Some(i) => Err(Error::Configuration(format!(
                "site {i} holds {:?}, invalid for kappa = {kappa}",
                self.states[i]
            ))),
        }
    }
}

/// Two-state field over the active sites of a geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryField {
    pub geometry: Geometry,
    pub cells: Vec<bool>,
}

impl BinaryField {
    pub fn filled(geometry: Geometry, value: bool) -> Self {
        BinaryField { geometry, cells: vec![value; geometry.site_count()] }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.cells.len() as f64
    }
}

/// Associated (1) versus unassociated (0) projection.
pub fn project_colorblind(config: &Configuration) -> BinaryField {
    BinaryField {
        geometry: config.geometry,
        cells: config.sites().iter().map(SiteState::is_associated).collect(),
    }
}
