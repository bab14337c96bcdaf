//! Fitting `C_H Φ(R_H X + ρ_H t) Π_j 1/(1 − a_H u_j)` to the Taylor coefficients of an analytic `H`.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Truncation of the fitted coefficient block: `k1 ≤ t`, `|k2| ≤ x`, `|k3| ≤ u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FitOrders {
    pub dim_x: usize,
    pub dim_u: usize,
    pub t: u32,
    pub x: u32,
    pub u: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticMajorant {
    pub c_h: f64,
    pub r_h: f64,
    pub rho_h: f64,
    pub a_h: f64,
}

/// Dyadic ladder used for `R_H`, `ρ_H` and `a_H`.
pub fn ladder() -> Vec<f64> {
    (-6..=12).map(|j| 2f64.powi(j)).collect()
}

fn multi_indices(dim: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for prefix in &out {
            let used: u32 = prefix.iter().sum();
            for e in 0..=(max_total - used) {
                let mut v = prefix.clone();
                v.push(e);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// `ln` of the envelope coefficient without `C_H`.
fn log_envelope(c0: f64, k1: u32, k2: &[u32], k3: &[u32], r: f64, rho: f64, a: f64) -> f64 {
    let s2: u32 = k2.iter().sum();
    let s3: u32 = k3.iter().sum();
    let p = (k1 + s2) as f64;
    let log_multinomial =
        ln_factorial((k1 + s2) as u64) - ln_factorial(k1 as u64) - k2.iter().map(|&e| ln_factorial(e as u64)).sum::<f64>();
    c0.ln() - (p * p + 1.0).ln() + log_multinomial + k1 as f64 * rho.ln() + s2 as f64 * r.ln() + s3 as f64 * a.ln()
}

/// Fits the analytic majorant on the dyadic ladder.
///
/// A candidate `(a_H, R_H, ρ_H)` is feasible when the worst coefficient/envelope
/// ratio on the outermost fitted shell does not exceed the worst ratio inside it.
/// The lexicographically smallest feasible candidate is returned with its least `C_H`.
pub fn fit_analytic_majorant<F>(coeff: F, orders: FitOrders, c0: f64) -> Result<AnalyticMajorant>
where
    F: Fn(u32, &[u32], &[u32]) -> f64,
{
    let xs = multi_indices(orders.dim_x, orders.x);
    let us = multi_indices(orders.dim_u, orders.u);
    let mut samples = Vec::new();
    for k1 in 0..=orders.t {
        for k2 in &xs {
            for k3 in &us {
                let v = coeff(k1, k2, k3).abs();
                if v > 0.0 {
                    let top = (orders.t > 0 && k1 == orders.t)
                        || (orders.dim_x > 0 && orders.x > 0 && k2.iter().sum::<u32>() == orders.x)
                        || (orders.dim_u > 0 && orders.u > 0 && k3.iter().sum::<u32>() == orders.u);
                    samples.push((k1, k2.clone(), k3.clone(), v.ln(), top));
                }
            }
        }
    }
    let lad = ladder();
    if samples.is_empty() {
        return Ok(AnalyticMajorant { c_h: 0.0, r_h: lad[0], rho_h: lad[0], a_h: lad[0] });
    }
    for &a in &lad {
        for &r in &lad {
            for &rho in &lad {
                let (mut inner, mut outer) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (k1, k2, k3, lv, top) in &samples {
                    let lr = lv - log_envelope(c0, *k1, k2, k3, r, rho, a);
                    if *top {
                        outer = outer.max(lr);
                    } else {
                        inner = inner.max(lr);
                    }
                }
                if outer <= inner + 1e-12 {
                    return Ok(AnalyticMajorant { c_h: inner.max(outer).exp(), r_h: r, rho_h: rho, a_h: a });
                }
            }
        }
    }
    Err(Error::NoMajorantCandidate)
}

/// Envelope coefficient `C_H c0/(p²+1) multinomial ρ_H^{k1} R_H^{|k2|} a_H^{|k3|}`.
pub fn envelope_coefficient(m: &AnalyticMajorant, c0: f64, k1: u32, k2: &[u32], k3: &[u32]) -> f64 {
    m.c_h * log_envelope(c0, k1, k2, k3, m.r_h, m.rho_h, m.a_h).exp()
}
