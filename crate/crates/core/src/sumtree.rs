//! Binary prefix-sum tree over per-site rates.
//!
//! Parents are recomputed as `left + right` on every update, so the tree is a pure function
//! of its leaves and never accumulates drift. An ancestor whose recomputed sum is unchanged
//! stops the upward walk.

#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    cap: usize,
    nodes: Vec<f64>,
    scratch: Vec<usize>,
}

impl SumTree {
    pub fn new(values: &[f64]) -> Self {
        let leaves = values.len();
        let cap = leaves.next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + leaves].copy_from_slice(values);
        for i in (1..cap).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { leaves, cap, nodes, scratch: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.leaves
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    /// Sets leaf `i`. Ancestors are recomputed until one comes out unchanged.
    #[inline]
    pub fn set(&mut self, i: usize, value: f64) {
        let mut k = self.cap + i;
        if self.nodes[k] == value {
            return;
        }
        self.nodes[k] = value;
        while k > 1 {
            k >>= 1;
            let sum = self.nodes[2 * k] + self.nodes[2 * k + 1];
            if sum == self.nodes[k] {
                return;
            }
            self.nodes[k] = sum;
        }
    }

    /// Sets several leaves, then refreshes ancestors level by level, each at most once.
    pub fn set_many(&mut self, updates: &[(usize, f64)]) {
        if updates.len() <= 4 {
            for &(i, v) in updates {
                self.set(i, v);
            }
            return;
        }
        let mut frontier = std::mem::take(&mut self.scratch);
        frontier.clear();
        for &(i, v) in updates {
            let k = self.cap + i;
            if self.nodes[k] != v {
                self.nodes[k] = v;
                frontier.push(k >> 1);
            }
        }
        frontier.sort_unstable();
        while !frontier.is_empty() {
            frontier.dedup();
            let mut kept = 0;
            for r in 0..frontier.len() {
                let k = frontier[r];
                let sum = self.nodes[2 * k] + self.nodes[2 * k + 1];
                if sum != self.nodes[k] {
                    self.nodes[k] = sum;
                    if k > 1 {
                        frontier[kept] = k >> 1;
                        kept += 1;
                    }
                }
            }
            frontier.truncate(kept);
        }
        self.scratch = frontier;
    }

    /// Leaf `i` with `prefix(i) <= target < prefix(i) + leaf(i)`; the first index wins ties.
    /// Requires a positive total. Rounding overshoot lands on the last positive leaf.
    pub fn search(&self, target: f64) -> usize {
        let mut k = 1;
        let mut t = target;
        while k < self.cap {
            let left = self.nodes[2 * k];
            if t < left {
                k *= 2;
            } else {
                t -= left;
                k = 2 * k + 1;
            }
        }
        let mut i = k - self.cap;
        if i >= self.leaves || self.nodes[k] <= 0.0 {
            // only reachable through floating-point overshoot on the right edge
            i = i.min(self.leaves - 1);
            while i > 0 && self.get(i) <= 0.0 {
                i -= 1;
            }
        }
        i
    }
}
