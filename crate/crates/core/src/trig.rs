//! Fourier series in θ whose coefficients are truncated power series in x.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{PowerSeries, TimeGrid, C64};

/// `Σ_{|n| ≤ N_θ} v_n(x) e^{inθ}` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct OscSlice {
    n_max: usize,
    modes: Vec<PowerSeries>,
}

impl OscSlice {
    pub fn zeros(n_max: usize, dim: usize, order: usize, rows: usize, cols: usize) -> Self {
        OscSlice { n_max, modes: vec![PowerSeries::zeros(dim, order, rows, cols); 2 * n_max + 1] }
    }

    pub fn from_modes(n_max: usize, modes: Vec<PowerSeries>) -> Result<Self> {
        if modes.len() != 2 * n_max + 1 {
            return Err(Error::ShapeMismatch(format!("{} modes for N_theta = {}", modes.len(), n_max)));
        }
        let f = &modes[0];
        if modes.iter().any(|m| m.shape() != f.shape() || m.order() != f.order() || m.dim() != f.dim()) {
            return Err(Error::ShapeMismatch("mode shapes differ".into()));
        }
        Ok(OscSlice { n_max, modes })
    }

    pub fn zeros_like(&self) -> Self {
        OscSlice { n_max: self.n_max, modes: self.modes.iter().map(|m| m.zeros_like()).collect() }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode_numbers(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }

    pub fn mode(&self, n: i64) -> &PowerSeries {
        &self.modes[(n + self.n_max as i64) as usize]
    }

    pub fn mode_mut(&mut self, n: i64) -> &mut PowerSeries {
        &mut self.modes[(n + self.n_max as i64) as usize]
    }

    pub fn modes(&self) -> &[PowerSeries] {
        &self.modes
    }

    pub fn shape(&self) -> (usize, usize) {
        self.modes[0].shape()
    }

    pub fn dim(&self) -> usize {
        self.modes[0].dim()
    }

    pub fn order(&self) -> usize {
        self.modes[0].order()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.is_zero())
    }

    fn check_same(&self, other: &OscSlice) -> Result<()> {
        if self.n_max != other.n_max {
            return Err(Error::ShapeMismatch(format!("N_theta {} vs {}", self.n_max, other.n_max)));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &OscSlice, alpha: C64) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.modes.iter_mut().zip(&other.modes) {
            a.add_scaled(b, alpha)?;
        }
        Ok(())
    }

    pub fn add(&self, other: &OscSlice) -> Result<OscSlice> {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(1.0, 0.0))?;
        Ok(out)
    }

    pub fn sub(&self, other: &OscSlice) -> Result<OscSlice> {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(-1.0, 0.0))?;
        Ok(out)
    }

    pub fn scale(&self, alpha: C64) -> OscSlice {
        OscSlice { n_max: self.n_max, modes: self.modes.iter().map(|m| m.scale(alpha)).collect() }
    }

    /// Fourier convolution of power-series products, truncated to `|n| ≤ N_θ`.
    pub fn product(&self, other: &OscSlice) -> Result<OscSlice> {
        self.check_same(other)?;
        let probe = self.modes[0].mul(&other.modes[0])?;
        let mut out = OscSlice { n_max: self.n_max, modes: vec![probe.zeros_like(); self.modes.len()] };
        let nm = self.n_max as i64;
        let live_a: Vec<bool> = self.modes.iter().map(|m| !m.is_zero()).collect();
        let live_b: Vec<bool> = other.modes.iter().map(|m| !m.is_zero()).collect();
        let one = C64::new(1.0, 0.0);
        for p in -nm..=nm {
            if !live_a[(p + nm) as usize] {
                continue;
            }
            for q in (-nm).max(-nm - p)..=nm.min(nm - p) {
                if !live_b[(q + nm) as usize] {
                    continue;
                }
                let a = self.mode(p);
                let b = other.mode(q);
                a.mul_acc(b, out.mode_mut(p + q), one)?;
            }
        }
        Ok(out)
    }

    /// `(∂_θ v)_n = i n v_n`.
    pub fn dtheta(&self) -> OscSlice {
        let mut out = self.clone();
        for n in self.mode_numbers() {
            let f = C64::new(0.0, n as f64);
            out.mode_mut(n).data_mut().iter_mut().for_each(|z| *z *= f);
        }
        out
    }

    /// `∂_{x_j}` mode by mode; the top shell is refilled with zeros to keep the order.
    pub fn dx(&self, axis: usize) -> Result<OscSlice> {
        let order = self.order();
        let modes = self.modes.iter().map(|m| m.derive(axis).map(|d| d.with_order(order))).collect::<Result<Vec<_>>>()?;
        Ok(OscSlice { n_max: self.n_max, modes })
    }

    /// Scalar slice of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> OscSlice {
        OscSlice { n_max: self.n_max, modes: self.modes.iter().map(|m| m.entry(i, j)).collect() }
    }

    /// Point value `Σ_n v_n(x) e^{inθ}` (row-major block).
    pub fn eval(&self, x: &[f64], theta: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.modes[0].block_len()];
        for n in self.mode_numbers() {
            let m = self.mode(n);
            if m.is_zero() {
                continue;
            }
            let phase = Complex64::from_polar(1.0, n as f64 * theta);
            for (o, v) in out.iter_mut().zip(m.eval(x)) {
                *o += v * phase;
            }
        }
        out
    }
}

/// A [`OscSlice`] per grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    pub grid: TimeGrid,
    pub slices: Vec<OscSlice>,
    /// `v_{−n} = conj(v_n)` is expected when set.
    pub real: bool,
}

impl TrigSeries {
    pub fn new(grid: TimeGrid, slices: Vec<OscSlice>) -> Result<Self> {
        if grid.len() != slices.len() {
            return Err(Error::InvalidGrid(format!("{} slices for {} times", slices.len(), grid.len())));
        }
        let f = &slices[0];
        if slices.iter().any(|s| s.n_max() != f.n_max() || s.shape() != f.shape() || s.order() != f.order()) {
            return Err(Error::ShapeMismatch("slice shapes differ".into()));
        }
        Ok(TrigSeries { grid, slices, real: false })
    }

    pub fn zeros(grid: TimeGrid, n_max: usize, dim: usize, order: usize, rows: usize) -> Self {
        let slices = vec![OscSlice::zeros(n_max, dim, order, rows, 1); grid.len()];
        TrigSeries { grid, slices, real: false }
    }

    /// The same slice at every grid time.
    pub fn constant(grid: TimeGrid, slice: OscSlice) -> Self {
        let slices = vec![slice; grid.len()];
        TrigSeries { grid, slices, real: false }
    }

    pub fn zeros_like(&self) -> Self {
        TrigSeries { grid: self.grid.clone(), slices: self.slices.iter().map(|s| s.zeros_like()).collect(), real: self.real }
    }

    pub fn n_max(&self) -> usize {
        self.slices[0].n_max()
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub fn order(&self) -> usize {
        self.slices[0].order()
    }

    pub fn rows(&self) -> usize {
        self.slices[0].shape().0
    }

    pub fn is_zero(&self) -> bool {
        self.slices.iter().all(|s| s.is_zero())
    }

    fn check_grid(&self, other: &TrigSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &TrigSeries) -> Result<TrigSeries> {
        self.check_grid(other)?;
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.add(b)).collect::<Result<Vec<_>>>()?;
        Ok(TrigSeries { grid: self.grid.clone(), slices, real: self.real && other.real })
    }

    pub fn sub(&self, other: &TrigSeries) -> Result<TrigSeries> {
        self.check_grid(other)?;
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Ok(TrigSeries { grid: self.grid.clone(), slices, real: self.real && other.real })
    }

    pub fn scale(&self, alpha: C64) -> TrigSeries {
        TrigSeries { grid: self.grid.clone(), slices: self.slices.iter().map(|s| s.scale(alpha)).collect(), real: false }
    }

    /// Pointwise value at grid index `j`.
    pub fn eval(&self, j: usize, x: &[f64], theta: f64) -> Vec<C64> {
        self.slices[j].eval(x, theta)
    }

    /// Pointwise value at any `s` in the grid range, linear in `s` between grid times.
    pub fn eval_at(&self, s: f64, x: &[f64], theta: f64) -> Vec<C64> {
        let t = self.grid.times();
        if s <= t[0] {
            return self.eval(0, x, theta);
        }
        if s >= self.grid.end() {
            return self.eval(t.len() - 1, x, theta);
        }
        let i = t.partition_point(|v| *v <= s) - 1;
        let w = (s - t[i]) / (t[i + 1] - t[i]);
        let a = self.eval(i, x, theta);
        let b = self.eval(i + 1, x, theta);
        a.iter().zip(&b).map(|(p, q)| p * (1.0 - w) + q * w).collect()
    }
}

/// Slicewise Fourier-convolution product.
pub fn ts_product(u: &TrigSeries, v: &TrigSeries) -> Result<TrigSeries> {
    u.check_grid(v)?;
    let slices = u.slices.iter().zip(&v.slices).map(|(a, b)| a.product(b)).collect::<Result<Vec<_>>>()?;
    Ok(TrigSeries { grid: u.grid.clone(), slices, real: u.real && v.real })
}

pub fn apply_dtheta(u: &TrigSeries) -> TrigSeries {
    TrigSeries { grid: u.grid.clone(), slices: u.slices.iter().map(|s| s.dtheta()).collect(), real: u.real }
}

pub fn apply_dx(u: &TrigSeries, axis: usize) -> Result<TrigSeries> {
    let slices = u.slices.iter().map(|s| s.dx(axis)).collect::<Result<Vec<_>>>()?;
    Ok(TrigSeries { grid: u.grid.clone(), slices, real: u.real })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MultiIndex;

    fn single(n_max: usize, n: i64, value: C64) -> OscSlice {
        let mut s = OscSlice::zeros(n_max, 1, 2, 1, 1);
        *s.mode_mut(n) = PowerSeries::scalar(1, 2, value);
        s
    }

    #[test]
    fn conjugate_exponentials_multiply_to_one() {
        let a = single(3, 1, C64::new(1.0, 0.0));
        let b = single(3, -1, C64::new(1.0, 0.0));
        let p = a.product(&b).unwrap();
        assert_eq!(p, single(3, 0, C64::new(1.0, 0.0)));
    }

    #[test]
    fn unit_is_neutral() {
        let mut u = OscSlice::zeros(2, 1, 3, 1, 1);
        *u.mode_mut(-2) = PowerSeries::from_terms(1, 3, &[(MultiIndex::new(vec![1]), C64::new(0.5, 2.0))]);
        *u.mode_mut(1) = PowerSeries::from_terms(1, 3, &[(MultiIndex::new(vec![3]), C64::new(-1.0, 0.0))]);
        let mut one = OscSlice::zeros(2, 1, 3, 1, 1);
        *one.mode_mut(0) = PowerSeries::scalar(1, 3, C64::new(1.0, 0.0));
        assert_eq!(u.product(&one).unwrap(), u);
    }

    #[test]
    fn dtheta_of_constant_and_exponential() {
        let c = single(2, 0, C64::new(3.0, 0.0));
        assert!(c.dtheta().is_zero());
        let e = single(2, 1, C64::new(1.0, 0.0));
        assert_eq!(e.dtheta(), single(2, 1, C64::new(0.0, 1.0)));
    }

    #[test]
    fn dx_keeps_order() {
        let mut u = OscSlice::zeros(1, 1, 3, 1, 1);
        *u.mode_mut(1) = PowerSeries::from_terms(1, 3, &[(MultiIndex::new(vec![3]), C64::new(1.0, 0.0))]);
        let d = u.dx(0).unwrap();
        assert_eq!(d.order(), 3);
        assert_eq!(d.mode(1).coeff(&MultiIndex::new(vec![2])).unwrap()[0], C64::new(3.0, 0.0));
    }

    #[test]
    fn eval_sums_modes() {
        let mut u = single(2, 1, C64::new(1.0, 0.0));
        *u.mode_mut(-1) = PowerSeries::scalar(1, 2, C64::new(1.0, 0.0));
        let v = u.eval(&[0.0], 0.3)[0];
        assert!((v.re - 2.0 * 0.3f64.cos()).abs() < 1e-15 && v.im.abs() < 1e-15);
    }
}
