//! Per-mode propagators `U_n(0, s, x)` of `∂_s U = i n Ā(εs, x) U` and their growth bounds.

use nalgebra::{DMatrix, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MultiIndex, PowerSeries, SampledSeries, TimeGrid, C64};
use crate::spectrum::RateFunction;
use crate::symbol::PolyMatrix;
use crate::trig::{OscSlice, TrigSeries};

/// `Ā(εs, x)` as an `N×N` matrix series in `x`.
pub trait SymbolInTime: Sync {
    fn at(&self, s: f64) -> PowerSeries;
}

impl SymbolInTime for SampledSeries {
    fn at(&self, s: f64) -> PowerSeries {
        SampledSeries::at(self, s)
    }
}

/// The frozen symbol of a polynomial family, evaluated exactly at any time.
#[derive(Clone, Debug)]
pub struct FrozenSymbol {
    pub poly: PolyMatrix,
    pub eps: f64,
    pub order: usize,
}

impl FrozenSymbol {
    pub fn new(frozen: PolyMatrix, eps: f64, order: usize) -> Self {
        FrozenSymbol { poly: frozen, eps, order }
    }
}

/// Substitutes `t` into a polynomial matrix, keeping `x` as series variable and dropping `u`-terms.
pub fn poly_to_series(poly: &PolyMatrix, t: f64, order: usize) -> PowerSeries {
    let n = poly.n;
    let mut out = PowerSeries::zeros(poly.d, order, n, n);
    for term in poly.terms.iter().filter(|t| t.u_degree() == 0) {
        let Some(pos) = out.basis().position(&MultiIndex::new(term.x.clone())) else { continue };
        let w = t.powi(term.t as i32);
        let block = out.block_mut(pos);
        for i in 0..n {
            for j in 0..n {
                block[i * n + j] += term.coef[(i, j)] * w;
            }
        }
    }
    out
}

impl SymbolInTime for FrozenSymbol {
    fn at(&self, s: f64) -> PowerSeries {
        poly_to_series(&self.poly, self.eps * s, self.order)
    }
}

/// Sum of coefficient Frobenius norms, a bound for multiplication by the series.
fn series_size(a: &PowerSeries) -> f64 {
    (0..a.basis().len()).map(|p| a.block(p).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorOptions {
    /// Relative tolerance on the Richardson error estimate per grid interval.
    pub ode_tol: f64,
    /// Substeps satisfy `|n|·‖Ā‖·h ≤ step_scale`.
    pub step_scale: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions { ode_tol: 1e-8, step_scale: 0.01 }
    }
}

#[derive(Clone, Copy)]
enum Side {
    /// `dU/ds = c·Ā U`
    Left,
    /// `dV/ds = −c·V Ā`
    Right,
}

fn rhs(a: &PowerSeries, y: &PowerSeries, coef: C64, side: Side) -> Result<PowerSeries> {
    let mut out = y.zeros_like();
    match side {
        Side::Left => a.mul_acc(y, &mut out, coef)?,
        Side::Right => y.mul_acc(a, &mut out, -coef)?,
    }
    Ok(out)
}

fn rk4_step(sym: &dyn SymbolInTime, s: f64, h: f64, y: &PowerSeries, coef: C64, side: Side) -> Result<PowerSeries> {
    let a0 = sym.at(s);
    let am = sym.at(s + 0.5 * h);
    let a1 = sym.at(s + h);
    let half = C64::new(0.5 * h, 0.0);
    let k1 = rhs(&a0, y, coef, side)?;
    let mut y2 = y.clone();
    y2.add_scaled(&k1, half)?;
    let k2 = rhs(&am, &y2, coef, side)?;
    let mut y3 = y.clone();
    y3.add_scaled(&k2, half)?;
    let k3 = rhs(&am, &y3, coef, side)?;
    let mut y4 = y.clone();
    y4.add_scaled(&k3, C64::new(h, 0.0))?;
    let k4 = rhs(&a1, &y4, coef, side)?;
    let mut out = y.clone();
    let sixth = C64::new(h / 6.0, 0.0);
    out.add_scaled(&k1, sixth)?;
    out.add_scaled(&k2, sixth * 2.0)?;
    out.add_scaled(&k3, sixth * 2.0)?;
    out.add_scaled(&k4, sixth)?;
    Ok(out)
}

fn rk4_run(sym: &dyn SymbolInTime, s0: f64, s1: f64, steps: usize, y: &PowerSeries, coef: C64, side: Side) -> Result<PowerSeries> {
    let h = (s1 - s0) / steps as f64;
    let mut y = y.clone();
    for k in 0..steps {
        y = rk4_step(sym, s0 + k as f64 * h, h, &y, coef, side)?;
    }
    Ok(y)
}

/// Solution of one mode at the grid times, starting from `start` at `times[0]`.
///
/// Returns the values and the largest Richardson error estimate relative to `‖y‖`.
pub fn integrate_single(
    sym: &dyn SymbolInTime,
    n: i64,
    times: &[f64],
    start: &PowerSeries,
    adjoint: bool,
    opts: &PropagatorOptions,
) -> Result<(Vec<PowerSeries>, f64)> {
    let mut out = Vec::with_capacity(times.len());
    out.push(start.clone());
    if n == 0 {
        out.resize(times.len(), start.clone());
        return Ok((out, 0.0));
    }
    let coef = C64::new(0.0, n as f64);
    let side = if adjoint { Side::Right } else { Side::Left };
    let mut worst = 0.0f64;
    let mut y = start.clone();
    for w in times.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let size = series_size(&sym.at(s0)).max(series_size(&sym.at(s1))).max(f64::MIN_POSITIVE);
        let steps = ((n.unsigned_abs() as f64 * size * (s1 - s0) / opts.step_scale).ceil() as usize).max(1);
        let coarse = rk4_run(sym, s0, s1, steps, &y, coef, side)?;
        let fine = rk4_run(sym, s0, s1, 2 * steps, &y, coef, side)?;
        let mut diff = fine.clone();
        diff.add_scaled(&coarse, C64::new(-1.0, 0.0))?;
        let scale = fine.max_abs().max(f64::MIN_POSITIVE);
        let err = diff.max_abs() / 15.0 / scale;
        if !(err <= opts.ode_tol) {
            return Err(Error::StepRejected { s: s1, err });
        }
        worst = worst.max(err);
        y = fine;
        y.add_scaled(&diff, C64::new(1.0 / 15.0, 0.0))?;
        out.push(y.clone());
    }
    Ok((out, worst))
}

/// One-step propagators `U_n(s_{j−1}, s_j)`, each integrated from the identity.
///
/// Entry 0 is the identity. Composing these avoids the `e^{|n|s}·e^{−|n|s′}`
/// cancellation of `U_n(0,s)·U_n(0,s′)⁻¹`.
pub fn integrate_steps(
    sym: &dyn SymbolInTime,
    n: i64,
    times: &[f64],
    id: &PowerSeries,
    opts: &PropagatorOptions,
) -> Result<(Vec<PowerSeries>, f64)> {
    let mut out = vec![id.clone()];
    let mut worst = 0.0f64;
    for w in times.windows(2) {
        let (step, err) = integrate_single(sym, n, w, id, false, opts)?;
        worst = worst.max(err);
        out.push(step.into_iter().nth(1).expect("two grid points"));
    }
    Ok((out, worst))
}

/// `U_n(s_{j−1}, s_j)`, `U_n(0, s_j)` and `U_n(0, s_j)⁻¹` for `|n| ≤ N_θ`.
#[derive(Clone, Debug)]
pub struct PropagatorModes {
    pub n_max: usize,
    pub grid: TimeGrid,
    steps: Vec<Vec<PowerSeries>>,
    forward: Vec<Vec<PowerSeries>>,
    inverse: Vec<Vec<PowerSeries>>,
    pub max_error: f64,
}

impl PropagatorModes {
    fn idx(&self, n: i64) -> usize {
        (n + self.n_max as i64) as usize
    }

    /// `U_n(s_{j−1}, s_j)`; the identity at `j = 0`.
    pub fn step(&self, n: i64, j: usize) -> &PowerSeries {
        &self.steps[self.idx(n)][j]
    }

    pub fn forward(&self, n: i64, j: usize) -> &PowerSeries {
        &self.forward[self.idx(n)][j]
    }

    /// `U_n(0, s_j)⁻¹` from the adjoint equation.
    pub fn inverse(&self, n: i64, j: usize) -> &PowerSeries {
        &self.inverse[self.idx(n)][j]
    }

    /// `U_n(s_i, s_j)` as the ordered product of one-step propagators.
    pub fn two_time(&self, n: i64, i: usize, j: usize) -> Result<PowerSeries> {
        let mut out = self.steps[self.idx(n)][0].clone();
        for k in i + 1..=j {
            out = self.step(n, k).mul(&out)?;
        }
        Ok(out)
    }

    pub fn system_size(&self) -> usize {
        self.forward[0][0].shape().0
    }
}

/// Integrates all modes `|n| ≤ n_max` on `grid` (mode-parallel).
pub fn integrate_modes(
    sym: &dyn SymbolInTime,
    n_max: usize,
    grid: &TimeGrid,
    opts: &PropagatorOptions,
) -> Result<PropagatorModes> {
    let probe = sym.at(grid.times()[0]);
    let (rows, cols) = probe.shape();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!("symbol is {rows}x{cols}")));
    }
    let id = PowerSeries::identity(probe.dim(), probe.order(), rows);
    let nm = n_max as i64;
    let results: Vec<Result<(Vec<PowerSeries>, Vec<PowerSeries>, Vec<PowerSeries>, f64)>> = (-nm..=nm)
        .into_par_iter()
        .map(|n| {
            let (st, e1) = integrate_steps(sym, n, grid.times(), &id, opts)?;
            let mut f = Vec::with_capacity(st.len());
            f.push(id.clone());
            for k in 1..st.len() {
                let next = st[k].mul(&f[k - 1])?;
                f.push(next);
            }
            let (b, e2) = integrate_single(sym, n, grid.times(), &id, true, opts)?;
            Ok((st, f, b, e1.max(e2)))
        })
        .collect();
    let mut steps = Vec::with_capacity(results.len());
    let mut forward = Vec::with_capacity(results.len());
    let mut inverse = Vec::with_capacity(results.len());
    let mut max_error = 0.0f64;
    for r in results {
        let (st, f, b, e) = r?;
        steps.push(st);
        forward.push(f);
        inverse.push(b);
        max_error = max_error.max(e);
    }
    Ok(PropagatorModes { n_max, grid: grid.clone(), steps, forward, inverse, max_error })
}

/// `U(s_i, s_j) v` mode by mode.
pub fn apply_propagator(p: &PropagatorModes, v: &OscSlice, i: usize, j: usize) -> Result<OscSlice> {
    if i > j {
        return Err(Error::InvalidArgument(format!("backward propagation from index {i} to {j}")));
    }
    if v.n_max() != p.n_max {
        return Err(Error::ShapeMismatch(format!("N_theta {} vs propagator {}", v.n_max(), p.n_max)));
    }
    if i == j {
        return Ok(v.clone());
    }
    let mut out = v.zeros_like();
    for n in v.mode_numbers() {
        let vn = v.mode(n);
        if vn.is_zero() {
            continue;
        }
        let mut moved = vn.clone();
        for k in i + 1..=j {
            moved = p.step(n, k).mul(&moved)?;
        }
        *out.mode_mut(n) = moved;
    }
    Ok(out)
}

/// `s ↦ U(0, s) h` on every grid time.
pub fn propagate_datum(p: &PropagatorModes, h: &OscSlice) -> Result<TrigSeries> {
    let slices = (0..p.grid.len())
        .into_par_iter()
        .map(|j| {
            let mut out = h.zeros_like();
            for n in h.mode_numbers() {
                if !h.mode(n).is_zero() {
                    *out.mode_mut(n) = p.forward(n, j).mul(h.mode(n))?;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    TrigSeries::new(p.grid.clone(), slices)
}

/// Trapezoid Duhamel integral `s_j ↦ ∫₀^{s_j} U(s′, s_j) g(s′) ds′`.
pub fn duhamel(p: &PropagatorModes, g: &TrigSeries) -> Result<TrigSeries> {
    if g.grid != p.grid {
        return Err(Error::GridMismatch);
    }
    let times = p.grid.times();
    let nm = p.n_max as i64;
    let zero = g.slices[0].zeros_like();
    // per mode: I_j = U_n(s_{j−1}, s_j)(I_{j−1} + h g_{j−1}) + h g_j
    let per_mode: Vec<Result<Vec<PowerSeries>>> = (-nm..=nm)
        .into_par_iter()
        .map(|n| {
            let live = g.slices.iter().any(|s| !s.mode(n).is_zero());
            let z = zero.mode(n).clone();
            if !live {
                return Ok(vec![z; times.len()]);
            }
            let mut out = Vec::with_capacity(times.len());
            out.push(z);
            for j in 1..times.len() {
                let h = C64::new(0.5 * (times[j] - times[j - 1]), 0.0);
                let mut carried = out[j - 1].clone();
                carried.add_scaled(g.slices[j - 1].mode(n), h)?;
                let mut next = p.step(n, j).mul(&carried)?;
                next.add_scaled(g.slices[j].mode(n), h)?;
                out.push(next);
            }
            Ok(out)
        })
        .collect();
    let per_mode = per_mode.into_iter().collect::<Result<Vec<_>>>()?;
    let slices = (0..times.len())
        .map(|j| OscSlice::from_modes(p.n_max, per_mode.iter().map(|m| m[j].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = TrigSeries::new(p.grid.clone(), slices)?;
    out.real = g.real;
    Ok(out)
}

/// Halton points inside the `ℓ¹` ball of the given radius (strictly inside).
pub fn ball_samples(d: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let radical_inverse = |mut i: u64, b: u64| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    let mut out = vec![vec![0.0; d]];
    let mut i = 1u64;
    while out.len() < count {
        let p: Vec<f64> = (0..d).map(|k| radius * (2.0 * radical_inverse(i, PRIMES[k % PRIMES.len()]) - 1.0)).collect();
        if p.iter().map(|v| v.abs()).sum::<f64>() < radius {
            out.push(p);
        }
        i += 1;
    }
    out
}

fn op_norm(m: &DMatrix<C64>) -> f64 {
    SVD::new(m.clone(), false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBound {
    pub n: i64,
    #[serde(rename = "C*")]
    pub c_star: f64,
    pub argmax_s: f64,
    pub argmax_x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub modes: Vec<ModeBound>,
    pub c_star: f64,
    pub c_cap: f64,
    pub passes: bool,
}

impl GrowthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `C* = max |U_n(0,s,x)| / (loss·exp(|n|∫₀ˢγ♯))` over modes, grid times and samples.
pub fn growth_constant(
    p: &PropagatorModes,
    rate: &RateFunction,
    loss: f64,
    x_samples: &[Vec<f64>],
    r_inv: f64,
    c_cap: f64,
) -> Result<GrowthReport> {
    for x in x_samples {
        let norm: f64 = x.iter().map(|v| v.abs()).sum();
        if norm >= r_inv {
            return Err(Error::OutsideConvergence { norm, radius: r_inv });
        }
    }
    let times = p.grid.times();
    let nm = p.n_max as i64;
    let modes: Vec<ModeBound> = (-nm..=nm)
        .into_par_iter()
        .map(|n| {
            let mut best = ModeBound { n, c_star: 0.0, argmax_s: 0.0, argmax_x: vec![] };
            for (j, &s) in times.iter().enumerate() {
                let log_bound = loss.ln() + n.unsigned_abs() as f64 * rate.integral_sharp(s);
                for x in x_samples {
                    let u = p.forward(n, j).eval_matrix(x);
                    let ratio = (op_norm(&u).ln() - log_bound).exp();
                    if ratio > best.c_star {
                        best = ModeBound { n, c_star: ratio, argmax_s: s, argmax_x: x.clone() };
                    }
                }
            }
            best
        })
        .collect();
    let c_star = modes.iter().map(|m| m.c_star).fold(0.0, f64::max);
    Ok(GrowthReport { modes, c_star, c_cap, passes: c_star <= c_cap })
}

/// [`growth_constant`] with the loss `ω^{−(m−1)}`.
pub fn verify_growth_bound(
    p: &PropagatorModes,
    rate: &RateFunction,
    omega: f64,
    m: usize,
    x_samples: &[Vec<f64>],
    r_inv: f64,
    c_cap: f64,
) -> Result<GrowthReport> {
    let loss = if m > 1 { omega.powi(-(m as i32 - 1)) } else { 1.0 };
    growth_constant(p, rate, loss, x_samples, r_inv, c_cap)
}
