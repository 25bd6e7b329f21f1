//! Tolerances and construction parameters.
//!
//! Every numeric threshold used by the geometry lives here so tests and the
//! command-line tools can pin or override them in one place.

use serde::{Deserialize, Serialize};

/// Numeric tolerances shared by all modules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// General geometric tolerance (feasibility, containment).
    pub geometric: f64,
    /// Maximum deviation of a normal from unit length.
    pub unit_normal: f64,
    /// Points with a slack below `-membership` are considered outside.
    pub membership: f64,
    /// Relative volume optimality of the inscribed-ellipsoid solver.
    pub ellipsoid_volume: f64,
    /// Slack accepted by the ellipsoid intersection predicate.
    pub intersection: f64,
    /// Shape values at or above `1 - mollifier_cutoff` get zero weight.
    pub mollifier_cutoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            geometric: 1e-9,
            unit_normal: 1e-12,
            membership: 1e-12,
            ellipsoid_volume: 1e-6,
            intersection: 1e-9,
            mollifier_cutoff: 1e-8,
        }
    }
}

/// Covering scale `1 / (2 sqrt(d + 1))` for a base polytope of dimension `d`.
pub fn default_lambda_c(dim: usize) -> f64 {
    1.0 / (2.0 * ((dim + 1) as f64).sqrt())
}

/// Expansion-containment factor `(3 + lambda) / (1 - lambda)`.
pub fn expansion_factor(lambda: f64) -> f64 {
    (3.0 + lambda) / (1.0 - lambda)
}

/// Packing scale `lambda_c / (4 beta sqrt(d + 1))`, with `beta` taken at `lambda_c`.
pub fn default_lambda_p(dim: usize, lambda_c: f64) -> f64 {
    lambda_c / (4.0 * expansion_factor(lambda_c) * ((dim + 1) as f64).sqrt())
}

/// Parameters of a structure build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub epsilon: f64,
    pub seed: u64,
    /// Covering scale; `None` selects [`default_lambda_c`].
    pub lambda_c: Option<f64>,
    /// Packing scale; `None` selects [`default_lambda_p`].
    pub lambda_p: Option<f64>,
    /// Multiplier on `delta^{-(d+1)/2}` for the per-level candidate sample.
    pub sample_factor: f64,
    /// Lower bound on the per-level candidate sample.
    pub min_samples: usize,
    /// Fresh-sample coverage verification rounds; uncovered samples are inserted.
    pub verify_rounds: usize,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
    pub tolerances: Tolerances,
}

impl BuildConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            seed,
            lambda_c: None,
            lambda_p: None,
            sample_factor: 64.0,
            min_samples: 512,
            verify_rounds: 2,
            max_levels: 64,
            tolerances: Tolerances::default(),
        }
    }

    pub fn lambda_c(&self, dim: usize) -> f64 {
        self.lambda_c.unwrap_or_else(|| default_lambda_c(dim))
    }

    pub fn lambda_p(&self, dim: usize) -> f64 {
        self.lambda_p
            .unwrap_or_else(|| default_lambda_p(dim, self.lambda_c(dim)))
    }

    /// Candidate sample size for a level with expansion `delta`.
    pub fn samples_for(&self, dim: usize, delta: f64) -> usize {
        let n = self.sample_factor * delta.powf(-((dim + 1) as f64) / 2.0);
        (n.ceil() as usize).max(self.min_samples)
    }
}
