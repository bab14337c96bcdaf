//! Free solution, the source operators and Picard iteration for the Duhamel fixed point.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{ball_samples, duhamel, propagate_datum, PropagatorModes};
use crate::series::{MultiIndex, PowerSeries, C64};
use crate::spaces::Space;
use crate::spectrum::RateFunction;
use crate::symbol::{PolyMatrix, SymbolFamily};
use crate::trig::{OscSlice, TrigSeries};

/// `f(s) = U(0, s) h` for the polarized datum `h = e^{−M}(e^{−iθ}e₊ + e^{iθ}ē₊)`.
#[derive(Clone, Debug)]
pub struct FreeSolution {
    pub f: TrigSeries,
    pub h: OscSlice,
    pub m_eps: f64,
    pub amplitude: f64,
    pub e_plus: DVector<C64>,
    pub e_minus: DVector<C64>,
}

/// The datum slice with modes `∓1` carrying `e₊`, `ē₊`.
pub fn polarized_datum(e_plus: &DVector<C64>, amplitude: f64, n_max: usize, dim: usize, order: usize) -> Result<OscSlice> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("the datum needs N_theta >= 1".into()));
    }
    let n = e_plus.len();
    let mut h = OscSlice::zeros(n_max, dim, order, n, 1);
    let plus: Vec<C64> = e_plus.iter().map(|z| z * amplitude).collect();
    let minus: Vec<C64> = plus.iter().map(|z| z.conj()).collect();
    *h.mode_mut(-1) = PowerSeries::constant_vector(dim, order, &plus);
    *h.mode_mut(1) = PowerSeries::constant_vector(dim, order, &minus);
    Ok(h)
}

pub fn build_free_solution(e_plus: &DVector<C64>, p: &PropagatorModes, m_eps: f64, dim: usize, order: usize) -> Result<FreeSolution> {
    let amplitude = (-m_eps).exp();
    let h = polarized_datum(e_plus, amplitude, p.n_max, dim, order)?;
    FreeSolution::from_datum(h, p, m_eps, e_plus.clone())
}

impl FreeSolution {
    pub fn from_datum(h: OscSlice, p: &PropagatorModes, m_eps: f64, e_plus: DVector<C64>) -> Result<Self> {
        let mut f = propagate_datum(p, &h)?;
        f.real = true;
        let e_minus = e_plus.map(|z| z.conj());
        Ok(FreeSolution { f, h, m_eps, amplitude: (-m_eps).exp(), e_plus, e_minus })
    }
}

/// `max_θ |v(s_j, x, θ)|` on `n_theta` equispaced angles.
pub fn theta_max_amplitude(u: &TrigSeries, j: usize, x: &[f64], n_theta: usize) -> f64 {
    (0..n_theta)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
            u.eval(j, x, th).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln max_θ|u(s, x, θ)|` against `s` over all grid times.
pub fn growth_exponent_fit(u: &TrigSeries, x: &[f64]) -> f64 {
    let times = u.grid.times();
    let ys: Vec<f64> = (0..times.len()).map(|j| theta_max_amplitude(u, j, x, 64).ln()).collect();
    let n = times.len() as f64;
    let mx = times.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(&ys).map(|(s, y)| (s - mx) * (y - my)).sum();
    let sxx: f64 = times.iter().map(|s| (s - mx) * (s - mx)).sum();
    sxy / sxx
}

/// Which parts of the source are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Couplings {
    pub theta: bool,
    pub x: bool,
    pub u: bool,
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings { theta: true, x: true, u: true }
    }
}

impl Couplings {
    pub fn off() -> Self {
        Couplings { theta: false, x: false, u: false }
    }
}

/// The pieces of the symbol used by the source operators.
#[derive(Clone, Debug)]
pub struct SourceTerms {
    pub eps: f64,
    /// `A − Ā`.
    pub a_minus_abar: PolyMatrix,
    pub a_j: Vec<PolyMatrix>,
    pub f: PolyMatrix,
}

impl SourceTerms {
    pub fn new(fam: &SymbolFamily, eps: f64) -> Self {
        SourceTerms { eps, a_minus_abar: fam.symbol().u_dependent(), a_j: fam.a.clone(), f: fam.f.clone() }
    }
}

fn scalar_one(like: &OscSlice) -> OscSlice {
    let mut s = OscSlice::zeros(like.n_max(), like.dim(), like.order(), 1, 1);
    *s.mode_mut(0) = PowerSeries::scalar(like.dim(), like.order(), C64::new(1.0, 0.0));
    s
}

fn shift_slice(v: &OscSlice, k: &MultiIndex) -> OscSlice {
    if k.order() == 0 {
        return v.clone();
    }
    OscSlice::from_modes(v.n_max(), v.modes().iter().map(|m| m.shift(k)).collect()).expect("same layout")
}

fn constant_times(coef: &nalgebra::DMatrix<C64>, v: &OscSlice) -> Result<OscSlice> {
    let c = PowerSeries::constant_matrix(v.dim(), v.order(), coef);
    let modes = v.modes().iter().map(|m| if m.is_zero() { Ok(m.zeros_like()) } else { c.mul(m) }).collect::<Result<Vec<_>>>()?;
    OscSlice::from_modes(v.n_max(), modes)
}

/// Powers `(εu_i)^k`, built on demand.
struct PowerCache {
    entries: Vec<Vec<OscSlice>>,
}

impl PowerCache {
    fn new(eps_u: &OscSlice) -> Self {
        let one = scalar_one(eps_u);
        let rows = eps_u.shape().0;
        PowerCache { entries: (0..rows).map(|i| vec![one.clone(), eps_u.entry(i, 0)]).collect() }
    }

    fn get(&mut self, i: usize, k: usize) -> Result<&OscSlice> {
        while self.entries[i].len() <= k {
            let next = self.entries[i].last().unwrap().product(&self.entries[i][1])?;
            self.entries[i].push(next);
        }
        Ok(&self.entries[i][k])
    }
}

/// `P(t, x, εu)·v` as an `N×1` slice.
fn apply_poly(poly: &PolyMatrix, t: f64, cache: &mut PowerCache, v: &OscSlice) -> Result<OscSlice> {
    let mut out = v.zeros_like();
    if v.is_zero() {
        return Ok(out);
    }
    for term in &poly.terms {
        let mut w: Option<OscSlice> = None;
        for (i, &e) in term.u.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let p = cache.get(i, e as usize)?.clone();
            w = Some(match w {
                None => p,
                Some(acc) => acc.product(&p)?,
            });
        }
        let cv = shift_slice(&constant_times(&term.coef, v)?, &MultiIndex::new(term.x.clone()));
        let scale = C64::new(t.powi(term.t as i32), 0.0);
        let contrib = match w {
            None => cv,
            Some(w) => w.product(&cv)?,
        };
        out.add_scaled(&contrib, scale)?;
    }
    Ok(out)
}

/// Which kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Theta,
    X,
    U,
}

/// Kernel of one source operator at one grid time.
fn kernel_slice(src: &SourceTerms, which: Kernel, s: f64, u: &OscSlice) -> Result<OscSlice> {
    let eps = src.eps;
    let t = eps * s;
    let eps_u = u.scale(C64::new(eps, 0.0));
    let mut cache = PowerCache::new(&eps_u);
    match which {
        Kernel::Theta => apply_poly(&src.a_minus_abar, t, &mut cache, &u.dtheta()),
        Kernel::X => {
            let mut out = u.zeros_like();
            for (j, aj) in src.a_j.iter().enumerate() {
                let du = u.dx(j)?;
                out.add_scaled(&apply_poly(aj, t, &mut cache, &du)?, C64::new(eps, 0.0))?;
            }
            Ok(out)
        }
        Kernel::U => Ok(apply_poly(&src.f, t, &mut cache, u)?.scale(C64::new(eps, 0.0))),
    }
}

/// Integrand `G` restricted to the chosen kernels, on every grid time.
pub fn source(src: &SourceTerms, u: &TrigSeries, kernels: &[Kernel]) -> Result<TrigSeries> {
    let times = u.grid.times();
    let slices = u
        .slices
        .par_iter()
        .zip(times.par_iter())
        .map(|(slice, &s)| {
            let mut acc = slice.zeros_like();
            for &k in kernels {
                acc.add_scaled(&kernel_slice(src, k, s, slice)?, C64::new(1.0, 0.0))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = TrigSeries::new(u.grid.clone(), slices)?;
    out.real = u.real;
    Ok(out)
}

pub fn op_t_theta(src: &SourceTerms, p: &PropagatorModes, u: &TrigSeries) -> Result<TrigSeries> {
    duhamel(p, &source(src, u, &[Kernel::Theta])?)
}

pub fn op_t_x(src: &SourceTerms, p: &PropagatorModes, u: &TrigSeries) -> Result<TrigSeries> {
    duhamel(p, &source(src, u, &[Kernel::X])?)
}

pub fn op_t_u(src: &SourceTerms, p: &PropagatorModes, u: &TrigSeries) -> Result<TrigSeries> {
    duhamel(p, &source(src, u, &[Kernel::U])?)
}

/// `T = T^[θ] + T^[x] + T^[u]` with the chosen couplings (one Duhamel sweep).
pub fn op_t(src: &SourceTerms, p: &PropagatorModes, u: &TrigSeries, couplings: Couplings) -> Result<TrigSeries> {
    let mut kernels = Vec::new();
    if couplings.theta {
        kernels.push(Kernel::Theta);
    }
    if couplings.x {
        kernels.push(Kernel::X);
    }
    if couplings.u {
        kernels.push(Kernel::U);
    }
    if kernels.is_empty() {
        return Ok(u.zeros_like());
    }
    duhamel(p, &source(src, u, &kernels)?)
}

/// `K(ε) = ω^{−(m−1)}(β⁻¹ε|||f||| + Rρ⁻¹)`.
pub fn contraction_constant(space: &Space, norm_f: f64) -> f64 {
    let p = &space.params;
    p.omega_loss() * (p.eps * norm_f / p.beta + p.r / p.rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once the residual is below `tol·|||f|||`.
    pub tol: f64,
    pub j_max: usize,
    /// Refuse to iterate when `K(ε)` is not below this value.
    pub k_limit: Option<f64>,
    /// Abort when an iterate leaves this ball of `E`.
    pub ball_radius: Option<f64>,
    pub couplings: Couplings,
    pub c_cap: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { tol: 1e-8, j_max: 60, k_limit: Some(0.5), ball_radius: Some(1.0), couplings: Couplings::default(), c_cap: 10.0 }
    }
}

impl PicardOptions {
    pub fn ungated(self) -> Self {
        PicardOptions { k_limit: None, ball_radius: None, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub j: usize,
    /// `None` for the starting iterate.
    pub residual: Option<f64>,
    #[serde(rename = "K_eps")]
    pub k_eps: f64,
    pub norm_u: f64,
}

#[derive(Clone, Debug)]
pub struct PicardState {
    pub u: TrigSeries,
    pub residual: f64,
    pub k_eps: f64,
    pub iterations: usize,
    pub norm_f: f64,
    /// `|||u − f|||`.
    pub distance_to_free: f64,
    /// `|||u − f||| ≤ C_cap·K(ε)|||f|||`.
    pub closeness_holds: bool,
    pub trace: Vec<TraceRow>,
}

impl PicardState {
    /// Successive residual ratios `r_{j+1}/r_j`.
    pub fn residual_ratios(&self) -> Vec<f64> {
        self.trace
            .windows(2)
            .filter_map(|w| match (w[0].residual, w[1].residual) {
                (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                _ => None,
            })
            .collect()
    }

    pub fn trace_json(&self) -> String {
        serde_json::to_string(&self.trace).expect("trace serializes")
    }
}

fn check_ball(norm: f64, opts: &PicardOptions) -> Result<()> {
    match opts.ball_radius {
        Some(r) if !(norm < r) => Err(Error::NormEscape(norm)),
        _ => Ok(()),
    }
}

/// `u^{(j+1)} = f + T(u^{(j)})` from `u^{(0)} = f`.
pub fn picard_solve(
    src: &SourceTerms,
    p: &PropagatorModes,
    space: &Space,
    f: &TrigSeries,
    opts: &PicardOptions,
) -> Result<PicardState> {
    let norm_f = space.norm_e(f)?;
    let k_eps = contraction_constant(space, norm_f);
    if let Some(limit) = opts.k_limit {
        if !(k_eps < limit) {
            return Err(Error::KTooLarge { k: k_eps, limit });
        }
    }
    let mut u = f.clone();
    let mut trace = vec![TraceRow { j: 0, residual: None, k_eps, norm_u: norm_f }];
    for j in 1..=opts.j_max {
        check_ball(trace.last().unwrap().norm_u, opts)?;
        let next = f.add(&op_t(src, p, &u, opts.couplings)?)?;
        let residual = space.norm_e(&next.sub(&u)?)?;
        let norm_u = space.norm_e(&next)?;
        if !residual.is_finite() || !norm_u.is_finite() {
            return Err(Error::NormEscape(norm_u));
        }
        u = next;
        trace.push(TraceRow { j, residual: Some(residual), k_eps, norm_u });
        if residual <= opts.tol * norm_f {
            let distance_to_free = space.norm_e(&u.sub(f)?)?;
            let closeness_holds = distance_to_free <= opts.c_cap * k_eps * norm_f;
            return Ok(PicardState { u, residual, k_eps, iterations: j, norm_f, distance_to_free, closeness_holds, trace });
        }
    }
    Err(Error::NoConvergence { iterations: opts.j_max, residual: trace.last().unwrap().residual.unwrap_or(f64::NAN) })
}

/// Outcome of the pointwise comparison of `u` with `f` near the final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// Measured `max |u − f| / (ω^{−(m−1)} e^{−M} exp ∫₀ˢγ♭)`.
    pub c_eps: f64,
    /// Smallest `|u| / min|f|` over the window, per time.
    pub min_ratio: f64,
    pub passes: bool,
    pub samples: usize,
}

/// Pointwise check on `(s̄−1, s̄] × B_r × [0, 2π)`.
pub fn lower_bound_check(
    u: &TrigSeries,
    f: &TrigSeries,
    rate: &RateFunction,
    r: f64,
    loss: f64,
    m_eps: f64,
) -> Result<LowerBoundReport> {
    if u.grid != f.grid {
        return Err(Error::GridMismatch);
    }
    let times = u.grid.times();
    let s_bar = u.grid.end();
    let d = u.dim();
    let xs = if r > 0.0 { ball_samples(d, r, 5) } else { vec![vec![0.0; d]] };
    let n_theta = 16;
    let thetas: Vec<f64> = (0..n_theta).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64).collect();
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut c_eps = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut samples = 0;
    let window: Vec<usize> = (0..times.len()).filter(|&j| times[j] > (s_bar - 1.0).max(0.0) || times.len() == 1).collect();
    for j in window {
        let s = times[j];
        let envelope = loss * (-m_eps + rate.integral_flat(s)).exp();
        let mut min_f = f64::INFINITY;
        let mut min_u = f64::INFINITY;
        for x in &xs {
            for &th in &thetas {
                let uv = u.eval(j, x, th);
                let fv = f.eval(j, x, th);
                let diff: Vec<C64> = uv.iter().zip(&fv).map(|(a, b)| a - b).collect();
                c_eps = c_eps.max(norm(&diff) / envelope);
                min_f = min_f.min(norm(&fv));
                min_u = min_u.min(norm(&uv));
                samples += 1;
            }
        }
        if min_f > 0.0 {
            min_ratio = min_ratio.min(min_u / min_f);
        }
    }
    Ok(LowerBoundReport { c_eps, min_ratio, passes: min_ratio >= 0.5, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{integrate_modes, FrozenSymbol, PropagatorOptions};
    use crate::series::TimeGrid;
    use crate::spaces::{RateCase, SpaceNormParams};
    use crate::symbol::{cauchy_riemann, Term};
    use nalgebra::DMatrix;

    fn toy(kappa: f64, eps: f64) -> SymbolFamily {
        let zero = PolyMatrix { n: 1, d: 1, terms: vec![] };
        let f = PolyMatrix {
            n: 1,
            d: 1,
            terms: vec![Term { t: 0, x: vec![0], u: vec![0], coef: DMatrix::from_element(1, 1, C64::new(kappa / eps, 0.0)) }],
        };
        SymbolFamily::new("toy", vec![zero], f, vec![1.0]).unwrap()
    }

    fn toy_space(eps: f64) -> Space {
        let params = SpaceNormParams {
            r: 1.0,
            rho: 1.0,
            m_prime: 2.0,
            beta: 0.5,
            omega: 0.0,
            m: 1,
            eps,
            rate_case: RateCase::Semisimple,
            gamma0: 0.0,
        };
        Space::new(params, 400, 0.2, 0.15).unwrap()
    }

    #[test]
    fn scalar_toy_limit_is_exponential() {
        let (kappa, eps) = (0.4, 0.01);
        let fam = toy(kappa, eps);
        let space = toy_space(eps);
        let grid = space.budget.grid().unwrap();
        let sym = FrozenSymbol::new(fam.symbol().frozen(), eps, 1);
        let p = integrate_modes(&sym, 1, &grid, &PropagatorOptions::default()).unwrap();
        let mut h = OscSlice::zeros(1, 1, 1, 1, 1);
        *h.mode_mut(0) = PowerSeries::constant_vector(1, 1, &[C64::new(0.3, 0.0)]);
        let f = TrigSeries::constant(grid.clone(), h);
        let src = SourceTerms::new(&fam, eps);
        let opts = PicardOptions { tol: 1e-12, ..PicardOptions::default() }.ungated();
        let st = picard_solve(&src, &p, &space, &f, &opts).unwrap();
        for (j, &s) in grid.times().iter().enumerate() {
            let got = st.u.slices[j].mode(0).block(0)[0].re;
            let exact = 0.3 * (kappa * s).exp();
            assert!((got - exact).abs() < 1e-6 * exact, "s={s} got={got} exact={exact}");
        }
    }

    #[test]
    fn zero_input_and_zero_coupling() {
        let eps = 0.05;
        let fam = cauchy_riemann();
        let params = SpaceNormParams {
            r: 2.0,
            rho: 8.0,
            m_prime: 2.0,
            beta: 0.5,
            omega: 0.0,
            m: 1,
            eps,
            rate_case: RateCase::Semisimple,
            gamma0: 1.0,
        };
        let space = Space::new(params, 20, 0.2, 0.15).unwrap();
        let grid = space.budget.grid().unwrap();
        let sym = FrozenSymbol::new(fam.symbol().frozen(), eps, 3);
        let p = integrate_modes(&sym, 3, &grid, &PropagatorOptions::default()).unwrap();
        let src = SourceTerms::new(&fam, eps);
        let zero = TrigSeries::zeros(grid.clone(), 3, 1, 3, 2);
        for k in [Kernel::Theta, Kernel::X, Kernel::U] {
            assert!(duhamel(&p, &source(&src, &zero, &[k]).unwrap()).unwrap().is_zero());
        }
        let st = picard_solve(&src, &p, &space, &zero, &PicardOptions::default()).unwrap();
        assert!(st.u.is_zero());

        let e = DVector::from_vec(vec![C64::new(0.5f64.sqrt(), 0.0), C64::new(0.0, -(0.5f64.sqrt()))]);
        let free = build_free_solution(&e, &p, 3.0, 1, 3).unwrap();
        let opts = PicardOptions { couplings: Couplings::off(), ..PicardOptions::default() }.ungated();
        let st = picard_solve(&src, &p, &space, &free.f, &opts).unwrap();
        assert_eq!(st.iterations, 1);
        assert_eq!(st.u, free.f);
        // only modes ±1 are populated by linear propagation
        for slice in &st.u.slices {
            for n in slice.mode_numbers() {
                assert_eq!(slice.mode(n).is_zero(), n.abs() != 1);
            }
        }
    }

    #[test]
    fn free_solution_datum_and_growth() {
        let eps = 0.05;
        let fam = cauchy_riemann();
        let grid = TimeGrid::uniform(4.0, 40).unwrap();
        let sym = FrozenSymbol::new(fam.symbol().frozen(), eps, 2);
        let p = integrate_modes(&sym, 2, &grid, &PropagatorOptions::default()).unwrap();
        let r = 0.5f64.sqrt();
        let e = DVector::from_vec(vec![C64::new(r, 0.0), C64::new(0.0, -r)]);
        let m_eps = 2.5;
        let free = build_free_solution(&e, &p, m_eps, 1, 2).unwrap();
        for th in [0.0, 0.7, 2.0] {
            let v = free.f.eval(0, &[0.0], th);
            let expect: Vec<C64> = (0..2).map(|i| C64::from_polar(1.0, -th) * e[i] + C64::from_polar(1.0, th) * e[i].conj()).collect();
            for (a, b) in v.iter().zip(&expect) {
                assert!((a - b * (-m_eps).exp()).norm() < 1e-15);
            }
        }
        let slope = growth_exponent_fit(&free.f, &[0.0]);
        assert!((slope - 1.0).abs() < 1e-6);
    }
}
