//! Tabulated solution of the Barles-Soner utility ODE
//!
//! ```text
//! Ψ'(x) = (Ψ(x) + 1) / (2 sqrt(x Ψ(x)) - x),   Ψ(0) = 0.
//! ```
//!
//! The ODE is singular at the origin. Integration starts at `x0 = 1e-12` from
//! the two-term expansion `Ψ ≈ c s (1 + e s)` with `s = x^(1/3)`,
//! `c = (3/2)^(2/3)` and `e = 4 / (5 sqrt(c))`, and runs in log-log variables
//! with an adaptive Dormand-Prince 5(4) integrator up to `x = 1e8`.
//! Lookups interpolate `ln Ψ` against `ln x` with a monotone cubic; outside the
//! table the small-x series and the large-x behaviour `Ψ ≈ x + ln x + C` take over.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const X_MIN: f64 = 1e-12;
const X_MAX: f64 = 1e8;
const NODES: usize = 2048;

/// Leading small-x coefficient `(3/2)^(2/3)`.
pub fn small_x_coefficient() -> f64 {
    1.5f64.powf(2.0 / 3.0)
}

fn series(x: f64) -> f64 {
    let c = small_x_coefficient();
    let e = 4.0 / (5.0 * c.sqrt());
    let s = x.cbrt();
    c * s * (1.0 + e * s)
}

/// Right-hand side of the ODE in the original variables.
pub fn ode_rhs(x: f64, psi: f64) -> f64 {
    (psi + 1.0) / (2.0 * (x * psi).sqrt() - x)
}

// d(ln Ψ)/d(ln x)
fn log_rhs(t: f64, u: f64) -> f64 {
    let x = t.exp();
    let p = u.exp();
    x * ode_rhs(x, p) / p
}

#[derive(Debug, Clone)]
pub struct PsiTable {
    log_x: Vec<f64>,
    log_psi: Vec<f64>,
    slopes: Vec<f64>,
    step: f64,
}

impl PsiTable {
    /// Integrates the ODE and tabulates it on a log grid of 2048 nodes.
    pub fn build() -> Self {
        let t0 = X_MIN.ln();
        let t1 = X_MAX.ln();
        let step = (t1 - t0) / (NODES - 1) as f64;
        let mut log_x = Vec::with_capacity(NODES);
        let mut log_psi = Vec::with_capacity(NODES);
        let mut u = series(X_MIN).ln();
        log_x.push(t0);
        log_psi.push(u);
        for k in 1..NODES {
            let a = t0 + (k - 1) as f64 * step;
            let b = t0 + k as f64 * step;
            u = dopri_integrate(a, b, u, 1e-13);
            log_x.push(b);
            log_psi.push(u);
        }
        let slopes = fritsch_carlson(&log_x, &log_psi);
        PsiTable {
            log_x,
            log_psi,
            slopes,
            step,
        }
    }

    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_x.iter().map(|t| t.exp())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_psi.iter().map(|u| u.exp())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("Psi is defined for x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if x < X_MIN {
            return Ok(series(x));
        }
        let last = NODES - 1;
        if x >= X_MAX {
            let big = self.log_psi[last].exp();
            return Ok(big + (x - X_MAX) + (x / X_MAX).ln());
        }
        let t = x.ln();
        let s = (t - self.log_x[0]) / self.step;
        let i = (s.floor() as usize).min(last - 1);
        let h = self.log_x[i + 1] - self.log_x[i];
        let w = (t - self.log_x[i]) / h;
        let (y0, y1) = (self.log_psi[i], self.log_psi[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let w2 = w * w;
        let w3 = w2 * w;
        let u = (2.0 * w3 - 3.0 * w2 + 1.0) * y0
            + (w3 - 2.0 * w2 + w) * m0
            + (-2.0 * w3 + 3.0 * w2) * y1
            + (w3 - w2) * m1;
        Ok(u.exp())
    }

    /// Ψ'(x) obtained from the ODE itself at the interpolated value.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("Psi is defined for x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(f64::INFINITY);
        }
        let p = self.eval(x)?;
        Ok(ode_rhs(x, p))
    }
}

/// Shared table, built on first use.
pub fn table() -> &'static PsiTable {
    static TABLE: OnceLock<PsiTable> = OnceLock::new();
    TABLE.get_or_init(PsiTable::build)
}

/// Ψ(x) from the shared table.
pub fn psi(x: f64) -> Result<f64> {
    table().eval(x)
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[i - 1] + delta[i])
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta[i];
        let b = m[i + 1] / delta[i];
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * delta[i];
            m[i + 1] = tau * b * delta[i];
        }
    }
    m
}

// Dormand-Prince 5(4) on a scalar ODE from `a` to `b`.
fn dopri_integrate(a: f64, b: f64, mut y: f64, tol: f64) -> f64 {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = a;
    let mut h = (b - a).min(0.01);
    while t < b {
        if t + h > b {
            h = b - t;
        }
        let mut k = [0.0; 7];
        for s in 0..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                yi += h * A[s][j] * kj;
            }
            k[s] = log_rhs(t + C[s] * h, yi);
        }
        let y5: f64 = y + h * B5.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let y4: f64 = y + h * B4.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let err = (y5 - y4).abs() / (tol * (1.0 + y5.abs()));
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent check: classical RK4 with a fixed step in s = x^(1/3),
    // where dΨ/ds = 3 s^2 Ψ'(s^3) is regular for s > 0.
    fn rk4_oracle(x_target: f64) -> f64 {
        let s0 = 1e-3_f64;
        let s1 = x_target.cbrt();
        let steps = 200_000;
        let h = (s1 - s0) / steps as f64;
        let f = |s: f64, p: f64| 3.0 * s * s * ode_rhs(s * s * s, p);
        let mut p = series(s0 * s0 * s0);
        let mut s = s0;
        for _ in 0..steps {
            let k1 = f(s, p);
            let k2 = f(s + 0.5 * h, p + 0.5 * h * k1);
            let k3 = f(s + 0.5 * h, p + 0.5 * h * k2);
            let k4 = f(s + h, p + h * k3);
            p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s += h;
        }
        p
    }

    #[test]
    fn psi_at_zero_is_zero() {
        assert_eq!(psi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        assert!(matches!(psi(-1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn small_x_value_matches_leading_balance() {
        let v = psi(1e-6).unwrap();
        // leading term (3/2)^(2/3) * 1e-2 = 0.013104; next order adds ~0.7 %
        assert!((v - 0.01310).abs() / 0.01310 < 0.01, "Psi(1e-6) = {v}");
        let oracle = rk4_oracle(1e-6);
        assert!((v - oracle).abs() / oracle < 1e-7, "{v} vs {oracle}");
    }

    #[test]
    fn table_agrees_with_fixed_step_oracle() {
        for &x in &[1e-4, 0.5, 1.0, 3.0, 20.0] {
            let v = psi(x).unwrap();
            let o = rk4_oracle(x);
            assert!((v - o).abs() / o < 1e-7, "x = {x}: {v} vs {o}");
        }
    }

    #[test]
    fn monotone_and_ordered() {
        assert!(psi(1.0).unwrap() > psi(0.5).unwrap());
        assert!(psi(0.5).unwrap() > 0.0);
        let vals: Vec<f64> = table().values().collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn asymptotic_ratio_bands() {
        let mut x = 1e-8;
        while x <= 1e-2 {
            let ratio = psi(x).unwrap() / x.cbrt();
            assert!((1.0..=1.6).contains(&ratio), "x = {x}: ratio {ratio}");
            x *= 1.7;
        }
        let mut x = 1e2;
        while x <= 1e6 {
            let ratio = psi(x).unwrap() / x;
            assert!(ratio > 0.5 && ratio < 2.0, "x = {x}: ratio {ratio}");
            x *= 3.0;
        }
    }

    #[test]
    fn continuous_across_table_ends() {
        let below = psi(X_MIN * (1.0 - 1e-9)).unwrap();
        let above = psi(X_MIN * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() / above < 1e-6);
        let lo = psi(X_MAX * (1.0 - 1e-12)).unwrap();
        let hi = psi(X_MAX * (1.0 + 1e-12)).unwrap();
        assert!((lo - hi).abs() / hi < 1e-6);
    }
}
