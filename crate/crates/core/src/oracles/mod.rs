//! Independent reference pricers: closed-form European Black-Scholes, a CRR
//! lattice, projected SOR on a log-price grid, and the Barone-Adesi-Whaley
//! quadratic approximation.

mod baw;
mod black_scholes;
mod lattice;
mod psor;

use serde::{Deserialize, Serialize};

pub use baw::{baw_critical_price, baw_price};
pub use black_scholes::bs_european_price;
pub use lattice::{binomial_price, lattice_critical_price, LatticeConfig, LatticeResult};
pub use psor::{psor_price, PsorConfig, PsorResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    American,
    European,
}
