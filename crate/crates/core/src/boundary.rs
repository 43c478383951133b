use serde::{Deserialize, Serialize};

use crate::numerics::lerp_sorted;

/// Early-exercise boundary `ρ(τ)` sampled on an increasing grid of times to expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub taus: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl BoundaryCurve {
    pub fn new(taus: Vec<f64>, rhos: Vec<f64>) -> Self {
        assert_eq!(taus.len(), rhos.len(), "boundary grid and values differ in length");
        BoundaryCurve { taus, rhos }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Linear interpolation in τ, holding the end values outside the grid.
    pub fn rho_at(&self, tau: f64) -> f64 {
        lerp_sorted(&self.taus, &self.rhos, tau)
    }

    pub fn last_tau(&self) -> f64 {
        *self.taus.last().expect("empty boundary curve")
    }

    pub fn last_rho(&self) -> f64 {
        *self.rhos.last().expect("empty boundary curve")
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.taus.iter().copied().zip(self.rhos.iter().copied())
    }

    /// `max |ρ_self(τ) - ρ_other(τ)|` over this curve's grid.
    pub fn max_distance(&self, other: &BoundaryCurve) -> f64 {
        self.points()
            .map(|(t, r)| (r - other.rho_at(t)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.rhos.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}
