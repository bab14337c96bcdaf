//! The weighted spaces `E_s` and `E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorant::ModelMajorant;
use crate::series::{MonomialBasis, TimeGrid};
use crate::trig::{OscSlice, TrigSeries};

/// Which upper rate `γ♯` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RateCase {
    General,
    Semisimple,
    Maximal,
}

impl RateCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateCase::General => "GENERAL",
            RateCase::Semisimple => "SEMISIMPLE",
            RateCase::Maximal => "MAXIMAL",
        }
    }

    /// Largest admissible Gevrey index for the case.
    pub fn ceiling(&self, m: usize) -> f64 {
        match self {
            RateCase::General => 1.0 / (m as f64 + 1.0),
            RateCase::Semisimple => 0.5,
            RateCase::Maximal => 2.0 / 3.0,
        }
    }
}

/// Parameters of the weight defining `E_s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceNormParams {
    /// `R`, the inverse radius in `Φ(RX + ερs)`.
    pub r: f64,
    pub rho: f64,
    pub m_prime: f64,
    pub beta: f64,
    pub omega: f64,
    pub m: usize,
    pub eps: f64,
    pub rate_case: RateCase,
    pub gamma0: f64,
}

impl SpaceNormParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.rho > 0.0 && self.beta > 0.0 && self.m_prime > 0.0 && self.omega >= 0.0) {
            return Err(Error::InvalidArgument(format!("space parameters {:?}", self)));
        }
        if self.rate_case == RateCase::General && self.m > 1 && self.omega <= 0.0 {
            return Err(Error::InvalidArgument("GENERAL case with m > 1 needs omega > 0".into()));
        }
        Ok(())
    }

    /// Constant part of `γ = γ♯ + β`, i.e. everything except `ετ`.
    fn rate_constant(&self) -> f64 {
        match self.rate_case {
            RateCase::General => self.gamma0 + 1.0 / self.r + self.omega + self.beta,
            RateCase::Semisimple => self.gamma0 + 1.0 / self.r + self.beta,
            RateCase::Maximal => self.gamma0 + self.beta,
        }
    }

    fn rate_slope(&self) -> f64 {
        match self.rate_case {
            RateCase::Maximal => 0.0,
            _ => self.eps,
        }
    }

    /// `γ(τ) = γ♯(τ) + β`.
    pub fn gamma(&self, tau: f64) -> f64 {
        self.rate_constant() + self.rate_slope() * tau
    }

    /// `∫₀ˢ γ(τ) dτ` in closed form.
    pub fn integral_gamma(&self, s: f64) -> f64 {
        self.rate_constant() * s + 0.5 * self.rate_slope() * s * s
    }

    /// Loss factor `ω^{−(m−1)}` (1 outside the GENERAL case).
    pub fn omega_loss(&self) -> f64 {
        if self.rate_case == RateCase::General && self.m > 1 {
            self.omega.powi(-(self.m as i32 - 1))
        } else {
            1.0
        }
    }
}

/// `⟨n⟩ = max(1, |n|)`.
pub fn bracket(n: i64) -> f64 {
    (n.unsigned_abs().max(1)) as f64
}

/// Growth and regularity times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub s_bar_1: f64,
    pub s_bar: f64,
    pub grid_step: f64,
    pub regularity_limited: bool,
}

impl TimeBudget {
    pub fn grid(&self) -> Result<TimeGrid> {
        let steps = (self.s_bar / self.grid_step).round().max(1.0) as usize;
        TimeGrid::uniform(self.s_bar, steps)
    }
}

/// Pull-in applied to a regularity-limited end time so that `ρεs̄ < 1`.
const REGULARITY_PULL_IN: f64 = 1.0 / 1_048_576.0;

/// Solves `M′ = ∫₀^{s̄₁} γ` by bisection and sets `s̄ = min(s̄₁, (ερ)⁻¹)`.
pub fn growth_time(p: &SpaceNormParams, steps: usize) -> Result<TimeBudget> {
    p.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("grid needs at least one step".into()));
    }
    let f = |s: f64| p.integral_gamma(s) - p.m_prime;
    let mut hi = p.m_prime / p.gamma(0.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_bar_1 = 0.5 * (lo + hi);
    let regularity = 1.0 / (p.eps * p.rho);
    let (s_bar, regularity_limited) =
        if regularity < s_bar_1 { (regularity * (1.0 - REGULARITY_PULL_IN), true) } else { (s_bar_1, false) };
    Ok(TimeBudget { s_bar_1, s_bar, grid_step: s_bar / steps as f64, regularity_limited })
}

/// Norm machinery for one parameter set.
#[derive(Clone, Debug)]
pub struct Space {
    pub params: SpaceNormParams,
    pub budget: TimeBudget,
    pub c0: f64,
    pub c1: f64,
}

impl Space {
    pub fn new(params: SpaceNormParams, steps: usize, c0: f64, c1: f64) -> Result<Self> {
        let budget = growth_time(&params, steps)?;
        Ok(Space { params, budget, c0, c1 })
    }

    pub fn majorant(&self) -> ModelMajorant {
        ModelMajorant::new(1.0, self.params.r, self.params.rho, self.c0)
    }

    /// `ln weight(n, s)`.
    pub fn log_weight(&self, n: i64, s: f64) -> Result<f64> {
        if s > self.budget.s_bar * (1.0 + 1e-12) {
            return Err(Error::PastFinalTime { s, s_bar: self.budget.s_bar });
        }
        let nf = n as f64;
        Ok(self.c1.ln() - (nf * nf + 1.0).ln() - (self.params.m_prime - self.params.integral_gamma(s)) * bracket(n))
    }

    /// `c1/(n²+1) · exp(−(M′ − ∫₀ˢγ)⟨n⟩)`.
    pub fn weight(&self, n: i64, s: f64) -> Result<f64> {
        self.log_weight(n, s).map(f64::exp)
    }

    /// `ln Φ_k(εs)` for every monomial of `basis`.
    pub fn log_phi_row(&self, basis: &MonomialBasis, s: f64) -> Result<Vec<f64>> {
        let m = self.majorant();
        basis.indices().iter().map(|k| crate::majorant::log_phi_coefficient(k, self.params.eps * s, &m)).collect()
    }

    /// `‖v‖_s`: the largest coefficient-to-envelope ratio.
    pub fn norm_es(&self, v: &OscSlice, s: f64) -> Result<f64> {
        let basis = v.modes()[0].basis().clone();
        let phi = self.log_phi_row(&basis, s)?;
        self.norm_es_with(v, s, &phi)
    }

    fn norm_es_with(&self, v: &OscSlice, s: f64, log_phi: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for n in v.mode_numbers() {
            let m = v.mode(n);
            if m.is_zero() {
                continue;
            }
            let lw = self.log_weight(n, s)?;
            for (pos, lp) in log_phi.iter().enumerate() {
                let top = m.block(pos).iter().fold(0.0f64, |a, z| a.max(z.norm()));
                if top > 0.0 {
                    worst = worst.max((top.ln() - lw - lp).exp());
                }
            }
        }
        Ok(worst)
    }

    /// `‖u(s_j)‖_{s_j}` for every grid time.
    pub fn norm_profile(&self, u: &TrigSeries) -> Result<Vec<f64>> {
        let basis = u.slices[0].modes()[0].basis().clone();
        u.grid
            .times()
            .iter()
            .zip(&u.slices)
            .map(|(&s, v)| {
                let phi = self.log_phi_row(&basis, s)?;
                self.norm_es_with(v, s, &phi)
            })
            .collect()
    }

    /// `|||u||| = max_j ‖u(s_j)‖_{s_j}`.
    pub fn norm_e(&self, u: &TrigSeries) -> Result<f64> {
        Ok(self.norm_profile(u)?.into_iter().fold(0.0, f64::max))
    }
}

/// Free-function form of [`Space::weight`].
pub fn weight(n: i64, s: f64, space: &Space) -> Result<f64> {
    space.weight(n, s)
}

pub fn norm_es(v: &OscSlice, s: f64, space: &Space) -> Result<f64> {
    space.norm_es(v, s)
}

pub fn norm_e(u: &TrigSeries, space: &Space) -> Result<f64> {
    space.norm_e(u)
}
