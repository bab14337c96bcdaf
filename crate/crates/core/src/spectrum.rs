//! Frozen spectrum of the principal symbol, the structural assumptions and the growth rates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::C64;
use crate::spaces::RateCase;
use crate::symbol::{PolyMatrix, SymbolFamily};

/// Thresholds for the exact dichotomies of the structural assumptions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTolerances {
    pub imag_tol: f64,
    pub gap_tol: f64,
    pub def_tol: f64,
    pub cluster_radius: f64,
    /// Radius of the `(t, x)` ball sampled by branch continuation.
    pub ball_radius: f64,
    pub continuation_steps: usize,
}

impl Default for SymbolTolerances {
    fn default() -> Self {
        SymbolTolerances {
            imag_tol: 1e-10,
            gap_tol: 1e-8,
            def_tol: 1e-8,
            cluster_radius: 1e-6,
            ball_radius: 0.1,
            continuation_steps: 20,
        }
    }
}

/// Eigenvalues from the diagonal of the complex Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure("non-finite matrix entry".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Orthonormal basis of the numerical null space (last `k` right singular vectors).
fn null_space(m: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested V^H");
    // rows of V^H sorted by descending singular value
    DMatrix::from_fn(n, k, |i, j| vt[(n - k + j, i)].conj())
}

fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    SVD::new(m.clone(), false, false).singular_values.iter().copied().collect()
}

fn identity(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// Unit 2-norm, first entry above `1e-12·max` rotated to positive real.
fn normalize_phase(v: &DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    let top = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let pivot = v.iter().find(|z| z.norm() > 1e-12 * top).copied().unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v.map(|z| z * phase / norm)
}

/// Frozen spectral data at the origin.
#[derive(Clone, Debug)]
pub struct SymbolSpectrum {
    pub a0: DMatrix<C64>,
    pub eigenvalues: Vec<C64>,
    pub lambda0: C64,
    pub gamma0: f64,
    pub m: usize,
    pub e_plus: DVector<C64>,
    pub p0: DMatrix<C64>,
    /// `X` with `P₀X = 0` and `A₀X = Id − P₀`; absent when `A₀` is singular off the eigenspace.
    pub a0_partial_inverse: Option<DMatrix<C64>>,
}

/// Assumption of a non-real spectrum at the origin.
pub fn check_ellipticity(fam: &SymbolFamily, tol: &SymbolTolerances) -> Result<SymbolSpectrum> {
    let n = fam.n;
    let a0 = fam.symbol().eval(0.0, &vec![0.0; fam.d], &vec![C64::new(0.0, 0.0); n]);
    let eigs = eigenvalues(&a0)?;
    let top = eigs.iter().fold(f64::NEG_INFINITY, |a, z| a.max(z.im));
    if top <= tol.imag_tol {
        return Err(Error::NotElliptic);
    }
    // argmax Im, ties by largest Re
    let pick = eigs
        .iter()
        .copied()
        .filter(|z| z.im >= top - tol.cluster_radius)
        .fold(None::<C64>, |best, z| match best {
            Some(b) if b.re >= z.re => Some(b),
            _ => Some(z),
        })
        .expect("nonempty spectrum");
    let cluster: Vec<C64> = eigs.iter().copied().filter(|z| (*z - pick).norm() <= tol.cluster_radius).collect();
    let m = cluster.len();
    let lambda0 = cluster.iter().sum::<C64>() / m as f64;

    let shifted = &a0 - identity(n) * lambda0;
    let e_plus = normalize_phase(&null_space(&shifted, 1).column(0).into_owned());

    let mut power = identity(n);
    for _ in 0..m {
        power = &power * &shifted;
    }
    let right = null_space(&power, m);
    let left = null_space(&power.adjoint(), m);
    let gram = left.adjoint() * &right;
    let gram_inv = gram.try_inverse().ok_or_else(|| Error::EigenFailure("eigenprojector Gram matrix is singular".into()))?;
    let p0 = &right * gram_inv * left.adjoint();

    let scale = a0.norm().max(1.0);
    let complement = identity(n) - &p0;
    let a0_partial_inverse = if eigs.iter().any(|z| z.norm() <= 1e3 * f64::EPSILON * scale) {
        None
    } else {
        a0.clone().try_inverse().map(|inv| inv * &complement)
    };

    Ok(SymbolSpectrum { a0, eigenvalues: eigs, lambda0, gamma0: lambda0.im, m, e_plus, p0, a0_partial_inverse })
}

/// One continuation sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub lambda: C64,
    /// Distance from the branch to the rest of the spectrum.
    pub gap: f64,
    /// Spread of the `m` tracked eigenvalues.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub semisimple: bool,
    pub noncoalescing: bool,
    pub rank: usize,
    pub min_gap: f64,
    pub max_spread: f64,
    pub samples: Vec<BranchSample>,
}

impl BranchReport {
    pub fn holds(&self) -> bool {
        self.semisimple && self.noncoalescing
    }
}

/// Rays in `(t, x)` with `t ≥ 0`: coordinate axes and the pairwise diagonals.
fn continuation_directions(d: usize) -> Vec<Vec<f64>> {
    let dim = d + 1;
    let mut dirs = Vec::new();
    let unit = |i: usize, sign: f64| {
        let mut v = vec![0.0; dim];
        v[i] = sign;
        v
    };
    dirs.push(unit(0, 1.0));
    for i in 1..dim {
        dirs.push(unit(i, 1.0));
        dirs.push(unit(i, -1.0));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                if i == 0 && si < 0.0 {
                    continue;
                }
                let mut v = vec![0.0; dim];
                v[i] = si * h;
                v[j] = sj * h;
                dirs.push(v);
            }
        }
    }
    dirs
}

/// Semisimplicity by rank, non-coalescence by continuation of the branch on a small ball.
pub fn check_semisimple_noncoalescing(
    fam: &SymbolFamily,
    spec: &SymbolSpectrum,
    tol: &SymbolTolerances,
) -> Result<BranchReport> {
    let n = fam.n;
    let shifted = &spec.a0 - identity(n) * spec.lambda0;
    let sv = singular_values(&shifted);
    let rank_tol = tol.cluster_radius * spec.a0.norm().max(1.0);
    let rank = sv.iter().filter(|&&s| s > rank_tol).count();
    let semisimple = rank + spec.m == n;
    if !semisimple {
        return Ok(BranchReport { semisimple, noncoalescing: false, rank, min_gap: 0.0, max_spread: 0.0, samples: vec![] });
    }
    let frozen = fam.symbol().frozen();
    let zero_u = vec![C64::new(0.0, 0.0); n];
    let mut samples = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut max_spread = 0.0f64;
    for dir in continuation_directions(fam.d) {
        let mut prev = spec.lambda0;
        for step in 0..=tol.continuation_steps {
            let r = tol.ball_radius * step as f64 / tol.continuation_steps as f64;
            let t = r * dir[0];
            let x: Vec<f64> = dir[1..].iter().map(|v| r * v).collect();
            let mut eigs = eigenvalues(&frozen.eval(t, &x, &zero_u))?;
            eigs.sort_by(|a, b| (*a - prev).norm().total_cmp(&(*b - prev).norm()));
            let tracked = &eigs[..spec.m];
            let lambda = tracked.iter().sum::<C64>() / spec.m as f64;
            let spread = tracked.iter().map(|z| (*z - lambda).norm()).fold(0.0, f64::max);
            let gap = eigs[spec.m..].iter().map(|z| (*z - lambda).norm()).fold(f64::INFINITY, f64::min);
            // the nearest foreign eigenvalue must stay clearly farther than the step taken
            let jump = (lambda - prev).norm();
            if gap.is_finite() && jump >= 0.5 * gap {
                let mut at = vec![t];
                at.extend(&x);
                return Err(Error::BranchLost(at));
            }
            min_gap = min_gap.min(gap);
            max_spread = max_spread.max(spread);
            samples.push(BranchSample { t, x, lambda, gap, spread });
            prev = lambda;
        }
    }
    let noncoalescing = min_gap > tol.gap_tol && max_spread <= tol.cluster_radius;
    Ok(BranchReport { semisimple, noncoalescing, rank, min_gap, max_spread, samples })
}

/// Sign condition outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MuStatus {
    NegativeDefinite,
    SignFail,
}

#[derive(Clone, Debug)]
pub struct MuReport {
    /// `(d+1)×(d+1)`, index 0 is time.
    pub mu: DMatrix<C64>,
    pub im_hessian_eigenvalues: Vec<f64>,
    pub status: MuStatus,
}

/// First derivatives of `Ā` at the origin, index 0 being `t`.
fn first_derivatives(frozen: &PolyMatrix) -> Vec<DMatrix<C64>> {
    let d = frozen.d;
    (0..=d)
        .map(|i| {
            let mut x = vec![0u32; d];
            if i == 0 {
                frozen.tx_coefficient(1, &x)
            } else {
                x[i - 1] = 1;
                frozen.tx_coefficient(0, &x)
            }
        })
        .collect()
}

/// `∂²_{ij}Ā(0,0)`.
fn second_derivative(frozen: &PolyMatrix, i: usize, j: usize) -> DMatrix<C64> {
    let d = frozen.d;
    let mut t = 0u32;
    let mut x = vec![0u32; d];
    for k in [i, j] {
        if k == 0 {
            t += 1;
        } else {
            x[k - 1] += 1;
        }
    }
    let c = frozen.tx_coefficient(t, &x);
    if i == j {
        c * C64::new(2.0, 0.0)
    } else {
        c
    }
}

/// Condition (i), the matrix `μ_ij` and the sign of `Im μ`.
pub fn compute_mu_and_check_sign(fam: &SymbolFamily, spec: &SymbolSpectrum, tol: &SymbolTolerances) -> Result<MuReport> {
    let frozen = fam.symbol().frozen();
    let d1 = fam.d + 1;
    let p = &spec.p0;
    let scale = spec.a0.norm().max(1.0);
    let first = first_derivatives(&frozen);
    for da in &first {
        let v = (p * da * p).norm();
        if v > tol.def_tol * scale {
            return Err(Error::ConditionIViolated(v));
        }
    }
    let inv = spec
        .a0_partial_inverse
        .as_ref()
        .ok_or_else(|| Error::EigenFailure("A0 has no partial inverse".into()))?;
    let mut mu = DMatrix::zeros(d1, d1);
    for i in 0..d1 {
        for j in i..d1 {
            let mat = p * &first[i] * inv * &first[j] * p
                + p * &first[j] * inv * &first[i] * p
                + p * second_derivative(&frozen, i, j) * p;
            let eigs = eigenvalues(&mat)?;
            let nz_tol = tol.def_tol * scale;
            let nonzero: Vec<C64> = eigs.into_iter().filter(|z| z.norm() > nz_tol).collect();
            let value = match nonzero.first() {
                None => C64::new(0.0, 0.0),
                Some(&first_nz) => {
                    if nonzero.iter().any(|z| (*z - first_nz).norm() > tol.cluster_radius * scale) {
                        return Err(Error::AmbiguousMu(i, j));
                    }
                    nonzero.iter().sum::<C64>() / nonzero.len() as f64
                }
            };
            mu[(i, j)] = value;
            mu[(j, i)] = value;
        }
    }
    let im = DMatrix::from_fn(d1, d1, |i, j| mu[(i, j)].im);
    let eig = SymmetricEigen::new(im).eigenvalues;
    let mut im_hessian_eigenvalues: Vec<f64> = eig.iter().copied().collect();
    im_hessian_eigenvalues.sort_by(f64::total_cmp);
    let status = if im_hessian_eigenvalues.iter().all(|&v| v < -tol.def_tol) {
        MuStatus::NegativeDefinite
    } else {
        MuStatus::SignFail
    };
    Ok(MuReport { mu, im_hessian_eigenvalues, status })
}

/// `F` has no part that is linear in `u`, identically in `(t, x)`.
pub fn check_quadratic_source(fam: &SymbolFamily) -> bool {
    // F(t,x,u)u is the source: linear u-terms of f come from the u-free part of F
    fam.f.terms.iter().all(|t| t.u_degree() > 0 || t.coef.iter().all(|z| z.norm() == 0.0))
}

/// `Im λ(t, 0)` along the branch through `λ₀`.
#[derive(Clone)]
pub struct BranchTracker {
    frozen: Arc<PolyMatrix>,
    lambda0: C64,
    d: usize,
}

impl std::fmt::Debug for BranchTracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BranchTracker").field("lambda0", &self.lambda0).finish()
    }
}

impl BranchTracker {
    pub fn new(fam: &SymbolFamily, spec: &SymbolSpectrum) -> Self {
        BranchTracker { frozen: Arc::new(fam.symbol().frozen()), lambda0: spec.lambda0, d: fam.d }
    }

    pub fn im_lambda(&self, t: f64) -> f64 {
        let n = self.frozen.n;
        let a = self.frozen.eval(t, &vec![0.0; self.d], &vec![C64::new(0.0, 0.0); n]);
        match eigenvalues(&a) {
            Ok(eigs) => eigs
                .into_iter()
                .min_by(|a, b| (*a - self.lambda0).norm().total_cmp(&(*b - self.lambda0).norm()))
                .map_or(f64::NAN, |z| z.im),
            Err(_) => f64::NAN,
        }
    }
}

/// Upper and lower growth rates `γ♯`, `γ♭`.
#[derive(Clone, Debug)]
pub struct RateFunction {
    pub case: RateCase,
    pub gamma0: f64,
    pub eps: f64,
    pub r_inv: f64,
    pub r: f64,
    pub omega: f64,
    pub branch: Option<BranchTracker>,
}

const SIMPSON_PANELS: usize = 256;

impl RateFunction {
    pub fn sharp(&self, tau: f64) -> f64 {
        match self.case {
            RateCase::General => self.gamma0 + self.eps * tau + self.r_inv + self.omega,
            RateCase::Semisimple => self.gamma0 + self.eps * tau + self.r_inv,
            RateCase::Maximal => self.gamma0,
        }
    }

    pub fn flat(&self, tau: f64) -> f64 {
        match self.case {
            RateCase::General => self.gamma0 - self.eps * tau - self.r - self.omega,
            RateCase::Semisimple => self.gamma0 - self.eps * tau - self.r,
            RateCase::Maximal => match &self.branch {
                Some(b) => b.im_lambda(self.eps * tau) - self.r,
                None => f64::NAN,
            },
        }
    }

    pub fn integral_sharp(&self, s: f64) -> f64 {
        match self.case {
            RateCase::Maximal => self.gamma0 * s,
            _ => self.sharp(0.0) * s + 0.5 * self.eps * s * s,
        }
    }

    pub fn integral_flat(&self, s: f64) -> f64 {
        match self.case {
            RateCase::Maximal => {
                if s == 0.0 {
                    return 0.0;
                }
                let h = s / SIMPSON_PANELS as f64;
                let mut acc = self.flat(0.0) + self.flat(s);
                for k in 1..SIMPSON_PANELS {
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * self.flat(k as f64 * h);
                }
                acc * h / 3.0
            }
            _ => self.flat(0.0) * s - 0.5 * self.eps * s * s,
        }
    }
}

/// Rates for the given case; `ω` is forced to 0 (SEMISIMPLE) or 1 (MAXIMAL).
pub fn make_rates(
    case: RateCase,
    spec: &SymbolSpectrum,
    fam: &SymbolFamily,
    r_inv: f64,
    r: f64,
    omega: f64,
    eps: f64,
) -> RateFunction {
    let (omega, branch) = match case {
        RateCase::General => (omega, None),
        RateCase::Semisimple => (0.0, None),
        RateCase::Maximal => (1.0, Some(BranchTracker::new(fam, spec))),
    };
    RateFunction { case, gamma0: spec.gamma0, eps, r_inv, r, omega, branch }
}

/// Everything `check-symbol` reports.
#[derive(Clone, Debug)]
pub struct SymbolReport {
    pub spectrum: SymbolSpectrum,
    pub branch: BranchReport,
    pub mu: Option<std::result::Result<MuReport, String>>,
    pub quadratic_source: bool,
    pub case: RateCase,
    pub ceiling: f64,
}

impl SymbolReport {
    /// The multiplicity that enters the GENERAL schedule (1 otherwise).
    pub fn schedule_m(&self) -> usize {
        match self.case {
            RateCase::General => self.spectrum.m,
            _ => 1,
        }
    }
}

/// Runs all checks and picks the strongest case whose assumptions hold.
pub fn classify(fam: &SymbolFamily, tol: &SymbolTolerances) -> Result<SymbolReport> {
    let spectrum = check_ellipticity(fam, tol)?;
    let branch = check_semisimple_noncoalescing(fam, &spectrum, tol)?;
    let quadratic_source = check_quadratic_source(fam);
    let mu = branch.holds().then(|| compute_mu_and_check_sign(fam, &spectrum, tol).map_err(|e| e.to_string()));
    let case = match (&mu, branch.holds()) {
        (Some(Ok(r)), _) if r.status == MuStatus::NegativeDefinite => RateCase::Maximal,
        (_, true) => RateCase::Semisimple,
        _ => RateCase::General,
    };
    let ceiling = case.ceiling(spectrum.m);
    Ok(SymbolReport { spectrum, branch, mu, quadratic_source, case, ceiling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{cauchy_riemann, jordan_elliptic, max_flat, Term};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn family_from_constant(a0: DMatrix<C64>) -> SymbolFamily {
        let n = a0.nrows();
        let a = PolyMatrix { n, d: 1, terms: vec![Term { t: 0, x: vec![0], u: vec![0; n], coef: a0 }] };
        SymbolFamily::new("test", vec![a], PolyMatrix::zero(n, 1), vec![1.0]).unwrap()
    }

    /// `A = (1 − t² + s x²) J`.
    fn branch_model(s: f64) -> SymbolFamily {
        let j = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let a = PolyMatrix {
            n: 2,
            d: 1,
            terms: vec![
                Term { t: 0, x: vec![0], u: vec![0, 0], coef: j.clone() },
                Term { t: 2, x: vec![0], u: vec![0, 0], coef: -j.clone() },
                Term { t: 0, x: vec![2], u: vec![0, 0], coef: j * c(s, 0.0) },
            ],
        };
        SymbolFamily::new("branch", vec![a], PolyMatrix::zero(2, 1), vec![1.0]).unwrap()
    }

    #[test]
    fn cauchy_riemann_spectrum() {
        let tol = SymbolTolerances::default();
        let s = check_ellipticity(&cauchy_riemann(), &tol).unwrap();
        assert!((s.lambda0 - c(0.0, 1.0)).norm() < 1e-12);
        assert_eq!(s.m, 1);
        assert!((&s.a0 * &s.e_plus - &s.e_plus * s.lambda0).norm() < 1e-12);
        assert!(s.e_plus[0].im == 0.0 && s.e_plus[0].re > 0.0);
        assert!((&s.p0 * &s.p0 - &s.p0).norm() < 1e-12);
        let inv = s.a0_partial_inverse.as_ref().unwrap();
        assert!((&s.a0 * inv + &s.p0 - identity(2)).norm() < 1e-12);
        assert!((&s.p0 * inv).norm() < 1e-12);
    }

    #[test]
    fn real_spectrum_is_not_elliptic() {
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
        let r = check_ellipticity(&family_from_constant(a0), &SymbolTolerances::default());
        assert!(matches!(r, Err(Error::NotElliptic)));
    }

    #[test]
    fn jordan_multiplicity_and_defect() {
        let tol = SymbolTolerances::default();
        let fam = jordan_elliptic();
        let s = check_ellipticity(&fam, &tol).unwrap();
        assert_eq!(s.m, 2);
        assert!((s.lambda0 - c(0.0, 1.0)).norm() < 1e-9);
        assert!((&s.p0 * &s.p0 - &s.p0).norm() < 1e-8);
        let b = check_semisimple_noncoalescing(&fam, &s, &tol).unwrap();
        assert!(!b.semisimple);
        assert_eq!(classify(&fam, &tol).unwrap().case, RateCase::General);
    }

    #[test]
    fn semisimple_double_eigenvalue() {
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 1.0), c(0.0, 1.0), c(0.0, -1.0)]));
        let fam = family_from_constant(a0);
        let tol = SymbolTolerances::default();
        let s = check_ellipticity(&fam, &tol).unwrap();
        assert_eq!(s.m, 2);
        let b = check_semisimple_noncoalescing(&fam, &s, &tol).unwrap();
        assert!(b.holds());
        assert!((b.min_gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn max_flat_branch_and_mu() {
        let tol = SymbolTolerances::default();
        let fam = max_flat();
        let rep = classify(&fam, &tol).unwrap();
        assert_eq!(rep.case, RateCase::Maximal);
        assert!((rep.ceiling - 2.0 / 3.0).abs() < 1e-15);
        // gap to the conjugate branch is 2(1 − t² − x²) ≥ 2(1 − 0.01)
        assert!((rep.branch.min_gap - 1.98).abs() < 1e-9);
        let mu = rep.mu.unwrap().unwrap();
        assert!((mu.mu[(0, 0)] - c(0.0, -2.0)).norm() < 1e-12);
        assert!((mu.mu[(1, 1)] - c(0.0, -2.0)).norm() < 1e-12);
        assert!(mu.mu[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn saddle_and_constant_fail_sign() {
        let tol = SymbolTolerances::default();
        let fam = branch_model(1.0);
        let s = check_ellipticity(&fam, &tol).unwrap();
        assert_eq!(compute_mu_and_check_sign(&fam, &s, &tol).unwrap().status, MuStatus::SignFail);
        let cr = cauchy_riemann();
        let s = check_ellipticity(&cr, &tol).unwrap();
        let rep = compute_mu_and_check_sign(&cr, &s, &tol).unwrap();
        assert_eq!(rep.status, MuStatus::SignFail);
        assert!(rep.mu.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn condition_i_violation() {
        let tol = SymbolTolerances::default();
        let j = cauchy_riemann().a[0].terms[0].coef.clone();
        let a = PolyMatrix {
            n: 2,
            d: 1,
            terms: vec![
                Term { t: 0, x: vec![0], u: vec![0, 0], coef: j.clone() },
                Term { t: 1, x: vec![0], u: vec![0, 0], coef: j },
            ],
        };
        let fam = SymbolFamily::new("drift", vec![a], PolyMatrix::zero(2, 1), vec![1.0]).unwrap();
        let s = check_ellipticity(&fam, &tol).unwrap();
        assert!(matches!(compute_mu_and_check_sign(&fam, &s, &tol), Err(Error::ConditionIViolated(_))));
    }

    #[test]
    fn quadratic_source_detection() {
        assert!(check_quadratic_source(&cauchy_riemann()));
        let id = DMatrix::<C64>::identity(2, 2);
        let mut fam = cauchy_riemann();
        fam.f = PolyMatrix { n: 2, d: 1, terms: vec![Term { t: 0, x: vec![0], u: vec![0, 0], coef: id.clone() }] };
        assert!(!check_quadratic_source(&fam));
        fam.f = PolyMatrix { n: 2, d: 1, terms: vec![Term { t: 0, x: vec![1], u: vec![0, 0], coef: id }] };
        assert!(!check_quadratic_source(&fam));
    }

    #[test]
    fn rates() {
        let tol = SymbolTolerances::default();
        let cr = cauchy_riemann();
        let s = check_ellipticity(&cr, &tol).unwrap();
        let g = make_rates(RateCase::General, &s, &cr, 0.0, 0.0, 0.0, 0.0);
        assert!((g.sharp(3.0) - 1.0).abs() < 1e-14);
        assert_eq!(g.sharp(3.0), g.flat(3.0));
        let g = make_rates(RateCase::General, &s, &cr, 0.1, 0.05, 0.2, 0.01);
        let tau = 7.0;
        assert!((g.sharp(tau) - g.flat(tau) - (2.0 * 0.01 * tau + 0.1 + 0.05 + 0.4)).abs() < 1e-12);

        let mf = max_flat();
        let s = check_ellipticity(&mf, &tol).unwrap();
        let (eps, r) = (0.05, 0.01);
        let m = make_rates(RateCase::Maximal, &s, &mf, 0.3, r, 0.0, eps);
        assert_eq!(m.omega, 1.0);
        for tau in [0.0, 1.0, 5.0] {
            assert!((m.flat(tau) - (1.0 - eps * eps * tau * tau - r)).abs() < 1e-12);
            assert!(m.sharp(tau) >= m.flat(tau));
        }
        let s_end = 5.0;
        let exact = (1.0 - r) * s_end - eps * eps * s_end.powi(3) / 3.0;
        assert!((m.integral_flat(s_end) - exact).abs() < 1e-10);
    }

    #[test]
    fn frequency_scaling_keeps_direction_and_case() {
        let tol = SymbolTolerances::default();
        for fam in [cauchy_riemann(), max_flat()] {
            let a = classify(&fam, &tol).unwrap();
            let scaled = fam.with_scaled_frequency(3.0);
            let b = classify(&scaled, &tol).unwrap();
            assert_eq!(a.case, b.case);
            assert!((a.spectrum.lambda0 * 3.0 - b.spectrum.lambda0).norm() < 1e-12);
            assert!((&a.spectrum.e_plus - &b.spectrum.e_plus).norm() < 1e-12);
        }
    }
}
