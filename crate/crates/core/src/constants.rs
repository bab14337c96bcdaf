//! The universal constants `c0` (Φ² ≺ Φ) and `c1` (discrete convolution).

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Safety factor applied to the swept infimum.
pub const SAFETY: f64 = 0.99;

/// `(k²+1) Σ_{p=0}^{k} 1/((p²+1)((k−p)²+1))`.
pub fn c0_bracket(k: u64) -> f64 {
    let kf = k as f64;
    let term = |p: u64| {
        let (a, b) = (p as f64, (k - p) as f64);
        1.0 / ((a * a + 1.0) * (b * b + 1.0))
    };
    // symmetric in p ↔ k − p
    let half = k.div_ceil(2);
    let mut s = 0.0;
    for p in 0..half {
        s += term(p);
    }
    s *= 2.0;
    if k % 2 == 0 {
        s += term(k / 2);
    }
    (kf * kf + 1.0) * s
}

/// Window used for the `c1` sum at mode `n`.
pub fn c1_window(n: i64) -> i64 {
    2 * n.abs() + 1000
}

/// `(n²+1) Σ_{p∈ℤ} 1/((p²+1)((n−p)²+1))`, windowed at `|p| ≤ W`, plus the tail bound `8/(3W³)`.
///
/// Returns `(windowed_sum_bracket, tail_bound_bracket)`.
pub fn c1_bracket(n: i64) -> (f64, f64) {
    let w = c1_window(n);
    let nf = n as f64;
    let term = |p: i64| {
        let (a, b) = (p as f64, (n - p) as f64);
        1.0 / ((a * a + 1.0) * (b * b + 1.0))
    };
    // paired as p, −p so that the sum is bitwise even in n
    let mut s = term(0);
    for p in 1..=w {
        s += term(p) + term(-p);
    }
    let wf = w as f64;
    let tail = 8.0 / (3.0 * wf * wf * wf);
    ((nf * nf + 1.0) * s, (nf * nf + 1.0) * tail)
}

/// `0.99 · min_{k ≤ k_max} 1/bracket(k)`.
pub fn derive_c0(k_max: u64) -> Result<f64> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let worst = (0..=k_max).into_par_iter().map(c0_bracket).reduce(|| 0.0, f64::max);
    Ok(SAFETY / worst)
}

/// `0.99 · min_{|n| ≤ n_max} 1/(bracket(n) + tail(n))`.
pub fn derive_c1(n_max: u64) -> Result<f64> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    // bracket(n) = bracket(−n), so n ≥ 0 suffices
    let worst = (0..=n_max as i64)
        .into_par_iter()
        .map(|n| {
            let (s, t) = c1_bracket(n);
            s + t
        })
        .reduce(|| 0.0, f64::max);
    // The bracket increases to 2π·coth(π); cover the limit so the constant holds for every n.
    let limit = 2.0 * std::f64::consts::PI / std::f64::consts::PI.tanh();
    Ok(SAFETY / worst.max(limit))
}

/// Contents of the constants file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    pub c0: f64,
    pub c1: f64,
    pub k_max: u64,
    pub n_max: u64,
    pub timestamp: String,
}

impl UniversalConstants {
    pub fn derive(k_max: u64, n_max: u64, timestamp: String) -> Result<Self> {
        Ok(UniversalConstants { c0: derive_c0(k_max)?, c1: derive_c1(n_max)?, k_max, n_max, timestamp })
    }

    /// Same derived values, ignoring the timestamp.
    pub fn same_values(&self, other: &UniversalConstants) -> bool {
        self.c0 == other.c0 && self.c1 == other.c1 && self.k_max == other.k_max && self.n_max == other.n_max
    }
}

/// Constants frozen from `hadamard derive-constants`.
pub fn canonical() -> &'static UniversalConstants {
    static CELL: OnceLock<UniversalConstants> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(include_str!("../data/constants.json")).expect("bundled constants parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_brackets() {
        assert_eq!(c0_bracket(0), 1.0);
        assert_eq!(c0_bracket(1), 2.0);
        assert!((c0_bracket(2) - 3.25).abs() < 1e-15);
    }

    #[test]
    fn c1_reference_at_zero() {
        // Σ_{p∈ℤ} 1/(p²+1)² = (π coth π + π² csch² π)/2
        let pi = std::f64::consts::PI;
        let exact = 0.5 * (pi / pi.tanh() + (pi / pi.sinh()).powi(2));
        let (s, t) = c1_bracket(0);
        assert!(s <= exact && exact <= s + t);
        assert!((s - exact).abs() < 1e-9);
    }

    #[test]
    fn c1_bracket_is_even() {
        for n in [1, 7, 40] {
            assert_eq!(c1_bracket(n).0, c1_bracket(-n).0);
        }
    }

    #[test]
    fn canonical_matches_a_small_sweep() {
        let k = canonical();
        assert!((derive_c0(200).unwrap() - k.c0).abs() < 1e-12);
        assert!(k.c1 <= derive_c1(50).unwrap());
    }
}
