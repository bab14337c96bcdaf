//! The model series Φ and the majoring relation ≺.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::series::{MultiIndex, PowerSeries, SampledSeries, C64};

/// `C·Φ(RX + ρt)` with `Φ(z) = Σ c0 z^k / (k² + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelMajorant {
    pub amplitude: f64,
    pub r: f64,
    pub rho: f64,
    pub c0: f64,
    /// Relative tolerance on the neglected tail of the `p`-sum.
    pub rel_tol: f64,
}

impl ModelMajorant {
    pub fn new(amplitude: f64, r: f64, rho: f64, c0: f64) -> Self {
        ModelMajorant { amplitude, r, rho, c0, rel_tol: 1e-12 }
    }

    /// `C·Φ_k(t)` laid out as a scalar series of the given order.
    pub fn to_series(&self, dim: usize, order: usize, t: f64) -> Result<PowerSeries> {
        let mut s = PowerSeries::zeros(dim, order, 1, 1);
        for pos in 0..s.basis().len() {
            let k = s.basis().index(pos).clone();
            s.block_mut(pos)[0] = C64::new(self.amplitude * phi_coefficient(&k, t, self)?, 0.0);
        }
        Ok(s)
    }
}

const P_MAX: usize = 50_000_000;

/// `Φ_k(t)` split as `prefactor · exp(log_scale) · sum` with `prefactor = c0/(|k|²+1)`.
fn phi_parts(k: &MultiIndex, t: f64, m: &ModelMajorant) -> Result<(f64, f64, f64)> {
    let x = m.rho * t;
    if x >= 1.0 {
        return Err(Error::RegularityExceeded(x));
    }
    if !(m.r > 0.0) || m.rho < 0.0 || t < 0.0 || !(m.c0 > 0.0) {
        return Err(Error::InvalidArgument(format!("R={}, rho={}, t={}, c0={}", m.r, m.rho, t, m.c0)));
    }
    let n = k.order() as u64;
    let nf = n as f64;
    let prefactor = m.c0 / (nf * nf + 1.0);
    let log_kfact: f64 = k.entries().iter().map(|&e| ln_factorial(e as u64)).sum();
    let log_scale = nf * m.r.ln() + ln_factorial(n) - log_kfact;
    if x == 0.0 {
        return Ok((prefactor, log_scale, 1.0));
    }
    // term p relative to term 0
    let rel = |p: u64| -> f64 {
        let np = (n + p) as f64;
        ((nf * nf + 1.0) / (np * np + 1.0)).ln() + ln_factorial(n + p) - ln_factorial(n) - ln_factorial(p)
            + p as f64 * x.ln()
    };
    let mut sum = 1.0;
    let mut p = 0u64;
    loop {
        let q = x * (n + p + 1) as f64 / (p + 1) as f64;
        let rel_p = if p == 0 { 1.0 } else { rel(p).exp() };
        if q < 1.0 && rel_p * q / (1.0 - q) < m.rel_tol * sum {
            break;
        }
        p += 1;
        if p as usize > P_MAX {
            return Err(Error::RegularityExceeded(x));
        }
        sum += rel(p).exp();
    }
    Ok((prefactor, log_scale, sum))
}

/// `ln Φ_k(t)`; the amplitude `C` is not included.
pub fn log_phi_coefficient(k: &MultiIndex, t: f64, m: &ModelMajorant) -> Result<f64> {
    let (pre, log_scale, sum) = phi_parts(k, t, m)?;
    Ok(pre.ln() + log_scale + sum.ln())
}

/// `Φ_k(t) = R^{|k|} Σ_p c0/((|k|+p)²+1) · (|k|+p)!/(k! p!) · (ρt)^p`.
pub fn phi_coefficient(k: &MultiIndex, t: f64, m: &ModelMajorant) -> Result<f64> {
    let (pre, log_scale, sum) = phi_parts(k, t, m)?;
    Ok(pre * log_scale.exp() * sum)
}

/// Outcome of a coefficientwise comparison against `C·Φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorizeReport {
    pub holds: bool,
    /// Largest `|φ_k(t)| / (C Φ_k(t))` seen, with its location.
    pub max_ratio: f64,
    pub worst: Option<(MultiIndex, f64)>,
}

/// Checks `|φ_k(t)| ≤ C·Φ_k(t)` entrywise for every stored `k` and grid time.
pub fn majorizes(phi: &SampledSeries, m: &ModelMajorant) -> Result<MajorizeReport> {
    let times = phi.grid.times();
    if let Some(&tmax) = times.last() {
        if m.rho * tmax >= 1.0 {
            return Err(Error::RegularityExceeded(m.rho * tmax));
        }
    }
    let mut max_ratio = 0.0f64;
    let mut worst = None;
    for (snap, &t) in phi.snapshots.iter().zip(times) {
        for pos in 0..snap.basis().len() {
            let k = snap.basis().index(pos);
            let top = snap.block(pos).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if top == 0.0 {
                continue;
            }
            let env = m.amplitude * phi_coefficient(k, t, m)?;
            let ratio = if env > 0.0 { top / env } else { f64::INFINITY };
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = Some((k.clone(), t));
            }
        }
    }
    Ok(MajorizeReport { holds: max_ratio <= 1.0, max_ratio, worst })
}

/// [`majorizes`] for a time-independent series checked at the given times.
pub fn majorizes_at(phi: &PowerSeries, m: &ModelMajorant, times: &[f64]) -> Result<MajorizeReport> {
    let grid = crate::series::TimeGrid::new(times.to_vec())?;
    let sampled = SampledSeries::new(grid, vec![phi.clone(); times.len()])?;
    majorizes(&sampled, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = 0.2;

    #[test]
    fn single_term_values() {
        let m = ModelMajorant::new(1.0, 2.0, 1.0, C0);
        assert_eq!(phi_coefficient(&MultiIndex::zero(1), 0.0, &m).unwrap(), C0);
        let v = phi_coefficient(&MultiIndex::new(vec![1]), 0.0, &m).unwrap();
        assert!((v - C0).abs() < 1e-15);
    }

    #[test]
    fn reference_sum_at_half() {
        let m = ModelMajorant::new(1.0, 1.0, 1.0, C0);
        let reference: f64 = (0..200).map(|p| C0 * 0.5f64.powi(p) / ((p * p) as f64 + 1.0)).sum();
        let v = phi_coefficient(&MultiIndex::zero(1), 0.5, &m).unwrap();
        assert!((v - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn divergent_time_rejected() {
        let m = ModelMajorant::new(1.0, 1.0, 2.0, C0);
        assert!(matches!(phi_coefficient(&MultiIndex::zero(1), 0.5, &m), Err(Error::RegularityExceeded(_))));
    }

    #[test]
    fn reflexive_and_zero() {
        let m = ModelMajorant::new(3.0, 1.5, 0.8, C0);
        let phi = m.to_series(2, 6, 0.4).unwrap();
        let rep = majorizes_at(&phi, &m, &[0.4]).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.max_ratio, 1.0);
        let z = PowerSeries::zeros(2, 6, 1, 1);
        assert!(majorizes_at(&z, &m, &[0.0, 0.4]).unwrap().holds);
    }

    #[test]
    fn constructed_violation_is_located() {
        let m = ModelMajorant::new(1.0, 1.0, 0.5, C0);
        let t = 0.3;
        let mut phi = m.to_series(1, 5, t).unwrap();
        let k = MultiIndex::new(vec![3]);
        let bumped = 1.01 * phi_coefficient(&k, t, &m).unwrap();
        phi.set_coeff(&k, &[C64::new(bumped, 0.0)]).unwrap();
        let rep = majorizes_at(&phi, &m, &[t]).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.worst, Some((k, t)));
        assert!((rep.max_ratio - 1.01).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_parameters_and_time() {
        let small = ModelMajorant::new(1.0, 1.0, 0.5, C0);
        let big = ModelMajorant::new(1.0, 1.5, 0.9, C0);
        for n in 0..8u32 {
            let k = MultiIndex::new(vec![n, 1]);
            for &t in &[0.0, 0.3, 0.7, 1.0] {
                assert!(phi_coefficient(&k, t, &small).unwrap() <= phi_coefficient(&k, t, &big).unwrap());
                assert!(phi_coefficient(&k, 0.5 * t, &big).unwrap() <= phi_coefficient(&k, t, &big).unwrap());
            }
        }
    }
}
