//! Parameter schedules, Gevrey norms of the data, `L²` norms on cones and the instability ratio.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spaces::{growth_time, RateCase, SpaceNormParams};
use crate::trig::TrigSeries;

pub const FLAG_SBAR_OUT_OF_BAND: &str = "SBAR_OUT_OF_BAND";
pub const FLAG_REGULARITY_LIMITED: &str = "REGULARITY_LIMITED";
pub const FLAG_ALT_MPRIME: &str = "ALT_MPRIME_DIFFERS";
pub const FLAG_CHAIN_BROKEN: &str = "CHAIN_BROKEN";

/// One scheduled scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub eps: f64,
    pub delta: f64,
    pub case: RateCase,
    pub m: usize,
    pub gamma0: f64,
    pub omega: f64,
    pub beta: f64,
    pub r_inv: f64,
    pub rho_inv: f64,
    /// `M(ε) = ε^{−δ}`.
    pub m_eps: f64,
    pub m_prime: f64,
    /// `M − (mδ − 1)|ln ε|`, the value used in the closing ratio estimate.
    pub m_prime_alt: f64,
    pub s_bar: f64,
    pub s_bar_1: f64,
    pub flags: Vec<String>,
}

impl ScenarioParams {
    pub fn space_params(&self) -> SpaceNormParams {
        SpaceNormParams {
            r: 1.0 / self.r_inv,
            rho: 1.0 / self.rho_inv,
            m_prime: self.m_prime,
            beta: self.beta,
            omega: self.omega,
            m: self.m,
            eps: self.eps,
            rate_case: self.case,
            gamma0: self.gamma0,
        }
    }

    /// `ε^{1−δ} ≪ ρ⁻¹ ≪ ε^{(m−1)δ}R⁻¹`, read as strict inequalities.
    pub fn chain_holds(&self) -> bool {
        let lower = self.eps.powf(1.0 - self.delta);
        let upper = self.eps.powf((self.m as f64 - 1.0) * self.delta) * self.r_inv;
        lower < self.rho_inv && self.rho_inv < upper
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Schedules `ω, β, R, ρ, M, M′` for the case and computes `s̄`.
pub fn select_parameters(eps: f64, delta: f64, case: RateCase, m: usize, gamma0: f64) -> Result<ScenarioParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1)")));
    }
    if m == 0 || !(gamma0 > 0.0) {
        return Err(Error::InvalidArgument(format!("m = {m}, gamma0 = {gamma0}")));
    }
    let m_eff = if case == RateCase::General { m } else { 1 };
    let ceiling = case.ceiling(m_eff);
    if !(delta > 0.0 && delta < ceiling) {
        return Err(Error::IndexOutOfRange { delta, ceiling });
    }
    let mf = m_eff as f64;
    let ln_eps = eps.ln().abs();
    let e_d = eps.powf(delta);
    let m_eps = eps.powf(-delta);
    let (omega, beta, r_inv, rho_inv, m_prime) = match case {
        RateCase::General => {
            let m_prime = m_eps - (1.0 - (2.0 * mf - 1.0) * delta).min(0.0) * ln_eps;
            (e_d, e_d, e_d, eps.powf((1.0 + (mf - 1.0) * delta) / 2.0), m_prime)
        }
        RateCase::Semisimple => (0.0, e_d, e_d, eps.sqrt(), m_eps - (1.0 - delta) * ln_eps),
        RateCase::Maximal => {
            (1.0, e_d, eps.powf((1.0 - delta) / 4.0), eps.powf((1.0 - delta) / 2.0), m_eps - (1.0 - delta) * ln_eps)
        }
    };
    if !(m_prime > 0.0) {
        return Err(Error::InvalidArgument(format!("scheduled M' = {m_prime} is not positive at eps = {eps}")));
    }
    let m_prime_alt = m_eps - (mf * delta - 1.0) * ln_eps;
    let mut out = ScenarioParams {
        eps,
        delta,
        case,
        m: m_eff,
        gamma0,
        omega,
        beta,
        r_inv,
        rho_inv,
        m_eps,
        m_prime,
        m_prime_alt,
        s_bar: 0.0,
        s_bar_1: 0.0,
        flags: Vec::new(),
    };
    let budget = growth_time(&out.space_params(), 1)?;
    out.s_bar = budget.s_bar;
    out.s_bar_1 = budget.s_bar_1;
    if budget.regularity_limited {
        out.flags.push(FLAG_REGULARITY_LIMITED.into());
    }
    let band = out.s_bar * e_d;
    if !(0.5..=2.0).contains(&band) {
        out.flags.push(FLAG_SBAR_OUT_OF_BAND.into());
    }
    if (m_prime_alt - m_prime).abs() > 1e-12 * m_prime.abs() {
        out.flags.push(FLAG_ALT_MPRIME.into());
    }
    if case == RateCase::General && !out.chain_holds() {
        out.flags.push(FLAG_CHAIN_BROKEN.into());
    }
    Ok(out)
}

/// Both sides of the Gevrey norm comparison, with logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyNorms {
    pub closed: f64,
    pub direct: f64,
    pub log_closed: f64,
    pub log_direct: f64,
    pub argmax_k: u64,
    pub k_cap: u64,
}

/// `sup_{k ≤ k_cap} exp(L(k) − k ln c − ln Γ(k+1)/σ)` where `L(k) = ln sup|∂^k h|`.
///
/// Returns `(log value, argmax)`; `L(k) = −∞` marks vanishing derivatives.
pub fn gevrey_sup_log(log_derivative: impl Fn(u64) -> f64, sigma: f64, c: f64, k_cap: u64) -> (f64, u64) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..=k_cap {
        let l = log_derivative(k);
        if l == f64::NEG_INFINITY {
            continue;
        }
        let v = l - k as f64 * c.ln() - ln_gamma(k as f64 + 1.0) / sigma;
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

/// Closed-form envelope and direct log-space supremum for the oscillating datum.
pub fn gevrey_norm_oscillatory(eps: f64, sigma: f64, c: f64, amplitude: f64, m_eps: f64) -> Result<GevreyNorms> {
    if !(eps > 0.0 && sigma > 0.0 && c > 0.0 && amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!("eps={eps}, sigma={sigma}, c={c}, amplitude={amplitude}")));
    }
    let log_closed = amplitude.ln() + eps.ln() - m_eps + eps.powf(-sigma) / (sigma * c.powf(sigma));
    let k_cap = 4 * ((eps * c).powf(-sigma).ceil() as u64).max(1);
    let base = amplitude.ln() + eps.ln() - m_eps;
    let (sup, argmax_k) = gevrey_sup_log(|k| -(k as f64) * eps.ln(), sigma, c, k_cap);
    let log_direct = base + sup;
    Ok(GevreyNorms { closed: log_closed.exp(), direct: log_direct.exp(), log_closed, log_direct, argmax_k, k_cap })
}

/// Quadrature layout for cone integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeQuadrature {
    pub points: usize,
    pub t_panels: usize,
    pub x_panels: usize,
}

impl Default for ConeQuadrature {
    fn default() -> Self {
        ConeQuadrature { points: 32, t_panels: 1, x_panels: 1 }
    }
}

/// `(∫_{Ω_{R,ρ} ∩ {t ≤ t_max}} |u|²)^{1/2}` for `d = 1`; `field` returns `|u(t,x)|²`.
pub fn l2_norm_on_cone(
    field: impl Fn(f64, f64) -> f64 + Sync,
    r: f64,
    rho: f64,
    t_max: Option<f64>,
    quad: &ConeQuadrature,
) -> Result<f64> {
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("R = {r}, rho = {rho}")));
    }
    let points = NonZeroUsize::new(quad.points).ok_or_else(|| Error::InvalidArgument("zero quadrature points".into()))?;
    let rule = GaussLegendre::new(points);
    let nodes = rule.as_node_weight_pairs();
    let t_end = t_max.map_or(1.0 / rho, |t| t.min(1.0 / rho));
    if t_end <= 0.0 {
        return Ok(0.0);
    }
    let (nt, nx) = (quad.t_panels.max(1), quad.x_panels.max(1));
    let dt = t_end / nt as f64;
    // panel sums collected first so the total does not depend on the thread count
    let total: f64 = (0..nt)
        .into_par_iter()
        .map(|pt| {
            let mut acc = 0.0;
            for &(tn, tw) in nodes {
                let t = dt * (pt as f64 + 0.5 * (tn + 1.0));
                let half = (1.0 - rho * t) / r;
                let dx = 2.0 * half / nx as f64;
                let mut inner = 0.0;
                for px in 0..nx {
                    for &(xn, xw) in nodes {
                        let x = -half + dx * (px as f64 + 0.5 * (xn + 1.0));
                        inner += 0.5 * dx * xw * field(t, x);
                    }
                }
                acc += 0.5 * dt * tw * inner;
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total.sqrt())
}

/// `|ε u(t/ε, x, xξ₀/ε)|²` from a solution on the `s`-grid (`d = 1`).
pub fn physical_field(u: &TrigSeries, eps: f64, xi0: f64) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    move |t, x| {
        let v = u.eval_at(t / eps, &[x], x * xi0 / eps);
        eps * eps * v.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// `ε^{1+(d+1)/2−δ(2m+1)−α} exp(−αcε^{−σ} + αε^{−δ})`, in log form.
pub fn predicted_log_envelope(eps: f64, delta: f64, sigma: f64, c: f64, alpha: f64, d: usize, m: usize) -> f64 {
    let power = 1.0 + (d as f64 + 1.0) / 2.0 - delta * (2.0 * m as f64 + 1.0) - alpha;
    power * eps.ln() - alpha * c * eps.powf(-sigma) + alpha * eps.powf(-delta)
}

/// `‖u‖_{L²(Ω)} / ‖h‖^α`.
pub fn instability_ratio(norm_u: f64, norm_h: f64, alpha: f64) -> f64 {
    norm_u / norm_h.powf(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_schedule_example() {
        let p = select_parameters(1e-2, 0.3, RateCase::General, 1, 1.0).unwrap();
        let e = 1e-2f64.powf(0.3);
        assert!((p.omega - e).abs() < 1e-15 && (p.beta - e).abs() < 1e-15 && (p.r_inv - e).abs() < 1e-15);
        assert!((p.rho_inv - 0.1).abs() < 1e-15);
        assert_eq!(p.m_prime, p.m_eps);
    }

    #[test]
    fn ceilings() {
        match select_parameters(0.01, 0.4, RateCase::General, 2, 1.0) {
            Err(Error::IndexOutOfRange { ceiling, .. }) => assert!((ceiling - 1.0 / 3.0).abs() < 1e-15),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(select_parameters(0.01, 0.6, RateCase::Maximal, 1, 1.0).is_ok());
        assert!(select_parameters(0.01, 0.5, RateCase::Semisimple, 1, 1.0).is_err());
    }

    #[test]
    fn gevrey_examples() {
        let g = gevrey_norm_oscillatory(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((g.log_closed - 1.0).abs() < 1e-15);
        assert!(g.argmax_k <= 1);
        let g = gevrey_norm_oscillatory(1e-2, 0.5, 1.0, 1.0, 0.0).unwrap();
        assert!((g.log_closed - (1e-2f64.ln() + 20.0)).abs() < 1e-12);
        // plain-arithmetic oracle: max_k 10^{2k} / (k!)^2
        let mut term = 1.0f64;
        let mut naive = 1.0f64;
        for k in 1..=g.k_cap {
            term *= 100.0 / (k as f64 * k as f64);
            naive = naive.max(term);
        }
        assert!((g.direct - naive * 1e-2).abs() < 1e-12 * g.direct);
        // k = 9 and k = 10 tie exactly
        assert!(g.argmax_k == 9 || g.argmax_k == 10);
        assert!(g.direct <= g.closed);
        // constant datum: only k = 0 contributes
        let a: f64 = 2.5;
        let (v, k) = gevrey_sup_log(|k| if k == 0 { a.ln() } else { f64::NEG_INFINITY }, 0.3, 0.7, 50);
        assert_eq!(k, 0);
        assert!((v.exp() - a).abs() < 1e-14 * a);
    }

    #[test]
    fn cone_volumes() {
        let q = ConeQuadrature::default();
        let one = l2_norm_on_cone(|_, _| 1.0, 1.0, 1.0, None, &q).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let v = l2_norm_on_cone(|_, _| 1.0, 3.0, 0.25, None, &q).unwrap();
        assert!((v * v - 1.0 / 0.75).abs() < 1e-10);
        let eps = 0.01;
        let osc = ConeQuadrature { x_panels: 64, ..q };
        let w = l2_norm_on_cone(|_, x: f64| (x / eps).cos().powi(2) + (x / eps).sin().powi(2), 1.0, 1.0, None, &osc).unwrap();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn envelope_boundary_case() {
        // σ = δ, c = 1, α = 1: only the power of ε survives
        let lp = |eps: f64| predicted_log_envelope(eps, 0.3, 0.3, 1.0, 1.0, 1, 1);
        for eps in [0.1, 0.01] {
            let power = 1.0 + 1.0 - 0.9 - 1.0;
            assert!((lp(eps) - power * f64::ln(eps)).abs() < 1e-12);
        }
        let sweep: Vec<f64> = (4..=10).map(|k| predicted_log_envelope(2f64.powi(-k), 0.3, 0.2, 1.0, 1.0, 1, 1)).collect();
        assert!(sweep.windows(2).all(|w| w[1] > w[0]));
    }
}
