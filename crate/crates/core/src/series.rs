//! Truncated multivariate power series in `x` with scalar, vector or matrix
//! coefficients.
//!
//! Coefficients are stored densely in a graded monomial order: all indices of
//! total degree 0, then degree 1, and so on. Bases are cached and shared, so
//! two series with the same `(dim, order)` always point at the same table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A multi-index `k ∈ ℕ^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|k|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` when `other ≤ self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex(out))
    }

    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

/// Graded monomial basis of `ℕ^d` truncated at total degree `order`.
#[derive(Debug)]
pub struct MonomialBasis {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    shell_start: Vec<usize>,
    // For each position k: pairs (p, k - p), p ascending in basis order.
    pairs: Vec<Vec<(u32, u32)>>,
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if parts == 1 {
        prefix.push(total);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl MonomialBasis {
    fn build(dim: usize, order: usize) -> Self {
        let mut indices = Vec::new();
        let mut shell_start = Vec::with_capacity(order + 2);
        for n in 0..=order {
            shell_start.push(indices.len());
            if dim == 0 {
                if n == 0 {
                    indices.push(MultiIndex(vec![]));
                }
            } else {
                compositions(n as u32, dim, &mut Vec::new(), &mut indices);
            }
        }
        shell_start.push(indices.len());
        let lookup: HashMap<_, _> = indices.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut pairs = Vec::with_capacity(indices.len());
        for k in &indices {
            let mut row = Vec::new();
            for (pi, p) in indices.iter().enumerate() {
                if p.order() > k.order() {
                    break;
                }
                if let Some(q) = k.checked_sub(p) {
                    row.push((pi as u32, lookup[&q] as u32));
                }
            }
            pairs.push(row);
        }
        MonomialBasis { dim, order, indices, lookup, shell_start, pairs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, k: &MultiIndex) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    /// Positions of all monomials of total degree `n`.
    pub fn shell(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.order {
            return self.indices.len()..self.indices.len();
        }
        self.shell_start[n]..self.shell_start[n + 1]
    }

    pub fn pairs(&self, pos: usize) -> &[(u32, u32)] {
        &self.pairs[pos]
    }
}

/// Shared basis for `(dim, order)`.
pub fn basis(dim: usize, order: usize) -> Arc<MonomialBasis> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().unwrap().get(&(dim, order)) {
        return b.clone();
    }
    let built = Arc::new(MonomialBasis::build(dim, order));
    cache.lock().unwrap().entry((dim, order)).or_insert(built).clone()
}

/// Truncated power series `Σ_{|k|≤K} a_k x^k` with `rows × cols` coefficients.
///
/// `1×1` is a scalar series, `N×1` a vector series and `N×N` a matrix series.
#[derive(Clone, Debug)]
pub struct PowerSeries {
    basis: Arc<MonomialBasis>,
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl PartialEq for PowerSeries {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self.order() == other.order()
            && self.rows == other.rows
            && self.cols == other.cols
            && self.data == other.data
    }
}

impl PowerSeries {
    pub fn zeros(dim: usize, order: usize, rows: usize, cols: usize) -> Self {
        let basis = basis(dim, order);
        let data = vec![ZERO; basis.len() * rows * cols];
        PowerSeries { basis, rows, cols, data }
    }

    pub fn zeros_like(&self) -> Self {
        PowerSeries { basis: self.basis.clone(), rows: self.rows, cols: self.cols, data: vec![ZERO; self.data.len()] }
    }

    pub fn scalar(dim: usize, order: usize, value: C64) -> Self {
        let mut s = Self::zeros(dim, order, 1, 1);
        s.data[0] = value;
        s
    }

    /// Constant (x-independent) series with a matrix coefficient.
    pub fn constant_matrix(dim: usize, order: usize, m: &DMatrix<C64>) -> Self {
        let mut s = Self::zeros(dim, order, m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                s.data[i * m.ncols() + j] = m[(i, j)];
            }
        }
        s
    }

    pub fn constant_vector(dim: usize, order: usize, v: &[C64]) -> Self {
        let mut s = Self::zeros(dim, order, v.len(), 1);
        s.data[..v.len()].copy_from_slice(v);
        s
    }

    pub fn identity(dim: usize, order: usize, n: usize) -> Self {
        let mut s = Self::zeros(dim, order, n, n);
        for i in 0..n {
            s.data[i * n + i] = C64::new(1.0, 0.0);
        }
        s
    }

    /// Builds a scalar series from `(index, value)` pairs; indices beyond the order are dropped.
    pub fn from_terms(dim: usize, order: usize, terms: &[(MultiIndex, C64)]) -> Self {
        let mut s = Self::zeros(dim, order, 1, 1);
        for (k, v) in terms {
            if let Some(pos) = s.basis.position(k) {
                s.data[pos] += *v;
            }
        }
        s
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn block_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Coefficient block at basis position `pos`, row-major.
    pub fn block(&self, pos: usize) -> &[C64] {
        let b = self.block_len();
        &self.data[pos * b..(pos + 1) * b]
    }

    pub fn block_mut(&mut self, pos: usize) -> &mut [C64] {
        let b = self.block_len();
        &mut self.data[pos * b..(pos + 1) * b]
    }

    pub fn coeff(&self, k: &MultiIndex) -> Option<&[C64]> {
        self.basis.position(k).map(|p| self.block(p))
    }

    pub fn set_coeff(&mut self, k: &MultiIndex, value: &[C64]) -> Result<()> {
        let pos = self
            .basis
            .position(k)
            .ok_or_else(|| Error::InvalidArgument(format!("index {:?} beyond order {}", k, self.order())))?;
        if value.len() != self.block_len() {
            return Err(Error::ShapeMismatch(format!("block of {} for {}x{}", value.len(), self.rows, self.cols)));
        }
        self.block_mut(pos).copy_from_slice(value);
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn check_same(&self, other: &PowerSeries) -> Result<()> {
        if self.dim() != other.dim() || self.order() != other.order() || self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "({}, K={}, {:?}) vs ({}, K={}, {:?})",
                self.dim(),
                self.order(),
                self.shape(),
                other.dim(),
                other.order(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &PowerSeries) -> Result<PowerSeries> {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(1.0, 0.0))?;
        Ok(out)
    }

    pub fn sub(&self, other: &PowerSeries) -> Result<PowerSeries> {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(-1.0, 0.0))?;
        Ok(out)
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, other: &PowerSeries, alpha: C64) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&self, alpha: C64) -> PowerSeries {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= alpha);
        out
    }

    pub fn conj(&self) -> PowerSeries {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z = z.conj());
        out
    }

    fn product_shape(&self, other: &PowerSeries) -> Result<(usize, usize)> {
        if self.dim() != other.dim() || self.order() != other.order() {
            return Err(Error::ShapeMismatch(format!(
                "series bases (d={}, K={}) vs (d={}, K={})",
                self.dim(),
                self.order(),
                other.dim(),
                other.order()
            )));
        }
        if self.shape() == (1, 1) {
            Ok(other.shape())
        } else if other.shape() == (1, 1) || self.cols == other.rows {
            Ok(if other.shape() == (1, 1) { self.shape() } else { (self.rows, other.cols) })
        } else {
            Err(Error::ShapeMismatch(format!("{:?} · {:?}", self.shape(), other.shape())))
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &PowerSeries) -> Result<PowerSeries> {
        let (r, c) = self.product_shape(other)?;
        let mut out = PowerSeries { basis: self.basis.clone(), rows: r, cols: c, data: vec![ZERO; self.basis.len() * r * c] };
        self.mul_acc(other, &mut out, C64::new(1.0, 0.0))?;
        Ok(out)
    }

    /// `out += alpha · (self ⊛ other)`.
    pub fn mul_acc(&self, other: &PowerSeries, out: &mut PowerSeries, alpha: C64) -> Result<()> {
        let (r, c) = self.product_shape(other)?;
        if out.shape() != (r, c) || out.order() != self.order() || out.dim() != self.dim() {
            return Err(Error::ShapeMismatch("accumulator shape".into()));
        }
        let basis = self.basis.clone();
        let a = &self.data;
        let b = &other.data;
        let (ab, bb, ob) = (self.block_len(), other.block_len(), r * c);
        let scalar_left = self.shape() == (1, 1);
        let scalar_right = other.shape() == (1, 1) && !scalar_left;
        let inner = self.cols;
        let mut acc = vec![ZERO; ob];
        for k in 0..basis.len() {
            acc.iter_mut().for_each(|z| *z = ZERO);
            for &(p, q) in basis.pairs(k) {
                let ap = &a[p as usize * ab..(p as usize + 1) * ab];
                let bq = &b[q as usize * bb..(q as usize + 1) * bb];
                if scalar_left {
                    let s = ap[0];
                    for (o, v) in acc.iter_mut().zip(bq) {
                        *o += s * v;
                    }
                } else if scalar_right {
                    let s = bq[0];
                    for (o, v) in acc.iter_mut().zip(ap) {
                        *o += v * s;
                    }
                } else {
                    for i in 0..r {
                        for j in 0..c {
                            let mut sum = acc[i * c + j];
                            for l in 0..inner {
                                sum += ap[i * inner + l] * bq[l * c + j];
                            }
                            acc[i * c + j] = sum;
                        }
                    }
                }
            }
            for (o, v) in out.data[k * ob..(k + 1) * ob].iter_mut().zip(&acc) {
                *o += alpha * v;
            }
        }
        Ok(())
    }

    /// Entrywise (Hadamard) product of same-shape series.
    pub fn mul_entrywise(&self, other: &PowerSeries) -> Result<PowerSeries> {
        self.check_same(other)?;
        let mut out = self.zeros_like();
        let blen = self.block_len();
        for e in 0..blen {
            let a = self.entry(e / self.cols, e % self.cols);
            let b = other.entry(e / self.cols, e % self.cols);
            let p = a.mul(&b)?;
            for pos in 0..self.basis.len() {
                out.data[pos * blen + e] = p.data[pos];
            }
        }
        Ok(out)
    }

    /// Scalar series of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> PowerSeries {
        let mut out = PowerSeries::zeros(self.dim(), self.order(), 1, 1);
        let b = self.block_len();
        for pos in 0..self.basis.len() {
            out.data[pos] = self.data[pos * b + i * self.cols + j];
        }
        out
    }

    /// Formal derivative along `axis`; the result has order `K − 1`.
    pub fn derive(&self, axis: usize) -> Result<PowerSeries> {
        if axis >= self.dim() {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim() });
        }
        let new_order = self.order().saturating_sub(1);
        let mut out = PowerSeries::zeros(self.dim(), new_order, self.rows, self.cols);
        if self.order() == 0 {
            return Ok(out);
        }
        let unit = MultiIndex::unit(self.dim(), axis);
        let b = self.block_len();
        for pos in 0..out.basis.len() {
            let k = out.basis.index(pos).clone();
            let src = self.basis.position(&k.add(&unit)).expect("shifted index inside basis");
            let factor = (k.entries()[axis] + 1) as f64;
            for e in 0..b {
                out.data[pos * b + e] = self.data[src * b + e] * factor;
            }
        }
        Ok(out)
    }

    /// Pads with zeros or truncates to a new order.
    pub fn with_order(&self, order: usize) -> PowerSeries {
        if order == self.order() {
            return self.clone();
        }
        let mut out = PowerSeries::zeros(self.dim(), order, self.rows, self.cols);
        let b = self.block_len();
        let n = out.basis.len().min(self.basis.len());
        // graded order: the first n positions coincide
        out.data[..n * b].copy_from_slice(&self.data[..n * b]);
        out
    }

    /// Multiplies by the monomial `x^k`, dropping terms past the order.
    pub fn shift(&self, k: &MultiIndex) -> PowerSeries {
        let mut out = self.zeros_like();
        let b = self.block_len();
        for pos in 0..self.basis.len() {
            let target = self.basis.index(pos).add(k);
            if let Some(t) = self.basis.position(&target) {
                out.data[t * b..(t + 1) * b].copy_from_slice(&self.data[pos * b..(pos + 1) * b]);
            }
        }
        out
    }

    /// Sums the series at a real point, shell by shell.
    pub fn eval(&self, x: &[f64]) -> Vec<C64> {
        let b = self.block_len();
        let mut out = vec![ZERO; b];
        let mut powers = vec![vec![1.0; self.order() + 1]; self.dim()];
        for (j, pw) in powers.iter_mut().enumerate() {
            for e in 1..=self.order() {
                pw[e] = pw[e - 1] * x[j];
            }
        }
        for n in (0..=self.order()).rev() {
            let mut shell = vec![ZERO; b];
            for pos in self.basis.shell(n) {
                let mono: f64 = self.basis.index(pos).entries().iter().enumerate().map(|(j, &e)| powers[j][e as usize]).product();
                for e in 0..b {
                    shell[e] += self.data[pos * b + e] * mono;
                }
            }
            for e in 0..b {
                out[e] += shell[e];
            }
        }
        out
    }

    pub fn eval_matrix(&self, x: &[f64]) -> DMatrix<C64> {
        let v = self.eval(x);
        DMatrix::from_row_slice(self.rows, self.cols, &v)
    }
}

/// Truncated Cauchy product (free-function form).
pub fn ps_mul(a: &PowerSeries, b: &PowerSeries) -> Result<PowerSeries> {
    a.mul(b)
}

/// Formal derivative along `axis` (free-function form).
pub fn ps_derive(a: &PowerSeries, axis: usize) -> Result<PowerSeries> {
    a.derive(axis)
}

/// Strictly increasing list of sample times, shared by reference.
#[derive(Clone, Debug)]
pub struct TimeGrid(Arc<[f64]>);

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0[..] == other.0[..]
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("empty".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidGrid("times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("not strictly increasing".into()));
        }
        Ok(TimeGrid(times.into()))
    }

    /// `steps + 1` equispaced points covering `[0, end]`.
    pub fn uniform(end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(end > 0.0) {
            return Err(Error::InvalidGrid(format!("uniform grid with end {end} and {steps} steps")));
        }
        let h = end / steps as f64;
        let mut t: Vec<f64> = (0..=steps).map(|j| j as f64 * h).collect();
        t[steps] = end;
        Self::new(t)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn end(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index of the grid point equal to `s` (within 1e-12 relative).
    pub fn locate(&self, s: f64) -> Option<usize> {
        let tol = 1e-12 * self.end().max(1.0);
        let i = self.0.partition_point(|t| *t < s - tol);
        (i < self.0.len() && (self.0[i] - s).abs() <= tol).then_some(i)
    }
}

/// A power series sampled on a time grid (one snapshot per grid time).
#[derive(Clone, Debug)]
pub struct SampledSeries {
    pub grid: TimeGrid,
    pub snapshots: Vec<PowerSeries>,
}

impl SampledSeries {
    pub fn new(grid: TimeGrid, snapshots: Vec<PowerSeries>) -> Result<Self> {
        if grid.len() != snapshots.len() {
            return Err(Error::InvalidGrid(format!("{} snapshots for {} times", snapshots.len(), grid.len())));
        }
        let first = &snapshots[0];
        if snapshots.iter().any(|s| s.shape() != first.shape() || s.order() != first.order() || s.dim() != first.dim()) {
            return Err(Error::ShapeMismatch("snapshot shapes differ".into()));
        }
        Ok(SampledSeries { grid, snapshots })
    }

    pub fn mul(&self, other: &SampledSeries) -> Result<SampledSeries> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let snapshots = self.snapshots.iter().zip(&other.snapshots).map(|(a, b)| a.mul(b)).collect::<Result<Vec<_>>>()?;
        Ok(SampledSeries { grid: self.grid.clone(), snapshots })
    }

    /// Linear interpolation between snapshots; clamps outside the grid.
    pub fn at(&self, s: f64) -> PowerSeries {
        let t = self.grid.times();
        if s <= t[0] {
            return self.snapshots[0].clone();
        }
        if s >= self.grid.end() {
            return self.snapshots[t.len() - 1].clone();
        }
        let i = t.partition_point(|x| *x <= s) - 1;
        let w = (s - t[i]) / (t[i + 1] - t[i]);
        let mut out = self.snapshots[i].scale(C64::new(1.0 - w, 0.0));
        out.add_scaled(&self.snapshots[i + 1], C64::new(w, 0.0)).expect("homogeneous snapshots");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn graded_basis_sizes() {
        assert_eq!(basis(1, 5).len(), 6);
        assert_eq!(basis(2, 3).len(), 10);
        assert_eq!(basis(3, 2).len(), 10);
        let b = basis(2, 2);
        assert_eq!(b.shell(1), 1..3);
        assert_eq!(b.index(1).entries(), &[1, 0]);
    }

    #[test]
    fn one_plus_x_times_one_minus_x() {
        let a = PowerSeries::from_terms(1, 2, &[(MultiIndex::new(vec![0]), c(1.0)), (MultiIndex::new(vec![1]), c(1.0))]);
        let b = PowerSeries::from_terms(1, 2, &[(MultiIndex::new(vec![0]), c(1.0)), (MultiIndex::new(vec![1]), c(-1.0))]);
        let p = ps_mul(&a, &b).unwrap();
        assert_eq!(p.data(), &[c(1.0), c(0.0), c(-1.0)]);
    }

    #[test]
    fn product_with_zero() {
        let a = PowerSeries::from_terms(2, 3, &[(MultiIndex::new(vec![1, 1]), C64::new(0.3, -2.0))]);
        let z = PowerSeries::zeros(2, 3, 1, 1);
        assert!(ps_mul(&a, &z).unwrap().is_zero());
    }

    #[test]
    fn derivative_of_monomial_and_constant() {
        let x2 = PowerSeries::from_terms(1, 3, &[(MultiIndex::new(vec![2]), c(1.0))]);
        let d = ps_derive(&x2, 0).unwrap();
        assert_eq!(d.order(), 2);
        assert_eq!(d.data(), &[c(0.0), c(2.0), c(0.0)]);
        let k = PowerSeries::scalar(1, 3, c(5.0));
        assert!(ps_derive(&k, 0).unwrap().is_zero());
        assert!(matches!(ps_derive(&k, 1), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn matrix_vector_shapes() {
        let m = PowerSeries::identity(1, 2, 3);
        let v = PowerSeries::constant_vector(1, 2, &[c(1.0), c(2.0), c(3.0)]);
        let mv = m.mul(&v).unwrap();
        assert_eq!(mv.shape(), (3, 1));
        assert_eq!(mv, v);
        assert!(v.mul(&m).is_err());
        let s = PowerSeries::scalar(1, 2, c(2.0));
        assert_eq!(s.mul(&v).unwrap(), v.scale(c(2.0)));
        assert_eq!(v.mul(&s).unwrap(), v.scale(c(2.0)));
    }

    #[test]
    fn horner_matches_direct_sum() {
        let a = PowerSeries::from_terms(
            2,
            3,
            &[
                (MultiIndex::new(vec![0, 0]), c(1.0)),
                (MultiIndex::new(vec![1, 2]), c(2.0)),
                (MultiIndex::new(vec![3, 0]), c(-1.0)),
            ],
        );
        let v = a.eval(&[0.5, -0.25])[0];
        let direct = 1.0 + 2.0 * 0.5 * 0.0625 - 0.125;
        assert!((v.re - direct).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.locate(1.0), Some(2));
        assert_eq!(g.locate(0.7), None);
    }

    #[test]
    fn sampled_product_requires_same_grid() {
        let g1 = TimeGrid::uniform(1.0, 2).unwrap();
        let g2 = TimeGrid::uniform(2.0, 2).unwrap();
        let s = PowerSeries::scalar(1, 1, c(1.0));
        let a = SampledSeries::new(g1, vec![s.clone(); 3]).unwrap();
        let b = SampledSeries::new(g2, vec![s; 3]).unwrap();
        assert_eq!(a.mul(&b).unwrap_err(), Error::GridMismatch);
    }
}
