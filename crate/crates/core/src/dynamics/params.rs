use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the spatial host-symbiont process.
///
/// `infection` is the row-major `kappa x kappa` matrix `c`, where `c[i][j]` is the rate at
/// which symbiont `j + 1` infects host `i + 1` per neighboring carrier. When `theta` is set
/// the hosts follow the threshold voter rule instead of the linear one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: usize,
    pub lambda: f64,
    pub g: f64,
    pub infection: Vec<f64>,
    pub r1: usize,
    pub r2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<u32>,
}

impl ModelParams {
    /// `c_ii = beta` and `c_ij = alpha` off the diagonal.
    pub fn symmetric(
        kappa: usize,
        lambda: f64,
        g: f64,
        alpha: f64,
        beta: f64,
        r1: usize,
        r2: usize,
    ) -> Self {
        let infection = (0..kappa * kappa)
            .map(|k| if k / kappa == k % kappa { beta } else { alpha })
            .collect();
        ModelParams { kappa, lambda, g, infection, r1, r2, theta: None }
    }

    pub fn specialist(kappa: usize, g: f64, beta: f64, range: usize) -> Self {
        Self::symmetric(kappa, 1.0, g, 0.0, beta, range, range)
    }

    pub fn generalist(kappa: usize, g: f64, beta: f64, range: usize) -> Self {
        Self::symmetric(kappa, 1.0, g, beta, beta, range, range)
    }

    pub fn with_theta(mut self, theta: u32) -> Self {
        self.theta = Some(theta);
        self
    }

    /// Infection rate of symbiont `symbiont` onto host `host`, both 1-based.
    #[inline]
    pub fn c(&self, host: u8, symbiont: u8) -> f64 {
        self.infection[(host as usize - 1) * self.kappa + symbiont as usize - 1]
    }

    pub fn max_range(&self) -> usize {
        self.r1.max(self.r2)
    }

    /// True when every cross-infection rate vanishes.
    pub fn is_specialist(&self) -> bool {
        (0..self.kappa)
            .flat_map(|i| (0..self.kappa).map(move |j| (i, j)))
            .all(|(i, j)| i == j || self.infection[i * self.kappa + j] == 0.0)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kappa == 0 || self.kappa > 255 {
            out.push(format!("kappa must be in 1..=255, got {}", self.kappa));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be a finite nonnegative rate, got {}", self.lambda));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            out.push(format!("g must be a finite nonnegative multiplier, got {}", self.g));
        }
        if self.infection.len() != self.kappa * self.kappa {
            out.push(format!(
                "infection matrix needs {} entries, got {}",
                self.kappa * self.kappa,
                self.infection.len()
            ));
        } else if let Some(c) = self.infection.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            out.push(format!("infection rates must be finite and nonnegative, found {c}"));
        }
        if self.r1 == 0 || self.r2 == 0 {
            out.push(format!("ranges must be positive, got R1={}, R2={}", self.r1, self.r2));
        }
        if let Some(theta) = self.theta {
            if theta == 0 {
                out.push("threshold theta must be at least 1".into());
            }
            if self.infection.len() == self.kappa * self.kappa && !self.is_specialist() {
                out.push("threshold dynamics require specialist symbionts (alpha = 0)".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}
