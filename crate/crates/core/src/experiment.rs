//! Scenario configuration and the per-ε pipeline that produces one report row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{
    build_free_solution, growth_exponent_fit, lower_bound_check, picard_solve, theta_max_amplitude, Couplings,
    LowerBoundReport, PicardOptions, PicardState, SourceTerms, TraceRow,
};
use crate::metrology::{
    gevrey_norm_oscillatory, instability_ratio, l2_norm_on_cone, physical_field, predicted_log_envelope, select_parameters,
    ConeQuadrature, GevreyNorms, ScenarioParams,
};
use crate::propagator::{integrate_modes, FrozenSymbol, PropagatorOptions};
use crate::spaces::{RateCase, Space};
use crate::spectrum::{classify, make_rates, SymbolReport, SymbolTolerances};
use crate::symbol::SymbolFamily;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Truncations {
    #[serde(rename = "K_x")]
    pub k_x: usize,
    #[serde(rename = "N_theta")]
    pub n_theta: usize,
    pub grid_steps: usize,
}

impl Default for Truncations {
    fn default() -> Self {
        Truncations { k_x: 4, n_theta: 6, grid_steps: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub picard_tol: f64,
    #[serde(rename = "C_cap")]
    pub c_cap: f64,
    pub picard_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { ode_tol: 1e-8, picard_tol: 1e-8, c_cap: 10.0, picard_max_iter: 60 }
    }
}

/// The smallness gates of the Picard iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gates {
    pub enforce: bool,
    pub k_limit: f64,
    pub ball_radius: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates { enforce: true, k_limit: 0.5, ball_radius: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// `cauchy-riemann`, `jordan-elliptic`, `max-flat` or `file:<path>`.
    pub model: String,
    pub delta: f64,
    pub sigma: f64,
    pub c: f64,
    pub alpha: f64,
    pub eps_sweep: Vec<f64>,
    /// Forces a weaker rate case than the classifier's.
    #[serde(default)]
    pub case: Option<RateCase>,
    #[serde(default)]
    pub truncations: Truncations,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default = "default_quad_points")]
    pub quadrature_points: usize,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_quad_points() -> usize {
    32
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Model(format!("config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.eps_sweep.is_empty() {
            return bad("eps_sweep is empty".into());
        }
        if self.eps_sweep.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps_sweep must be strictly decreasing".into());
        }
        if self.eps_sweep.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("eps values must lie in (0, 1)".into());
        }
        if !(self.sigma > 0.0 && self.sigma < self.delta) {
            return bad(format!("need 0 < sigma < delta, got sigma = {}, delta = {}", self.sigma, self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.c > 0.0) {
            return bad(format!("alpha = {}, c = {}", self.alpha, self.c));
        }
        let t = &self.truncations;
        if t.n_theta < 1 || t.grid_steps < 1 {
            return bad("N_theta and grid_steps must be positive".into());
        }
        Ok(())
    }

    pub fn picard_options(&self) -> PicardOptions {
        let base = PicardOptions {
            tol: self.tolerances.picard_tol,
            j_max: self.tolerances.picard_max_iter,
            k_limit: Some(self.gates.k_limit),
            ball_radius: Some(self.gates.ball_radius),
            couplings: self.couplings,
            c_cap: self.tolerances.c_cap,
        };
        if self.gates.enforce {
            base
        } else {
            base.ungated()
        }
    }
}

/// Built-in name or `file:<path>` to a JSON family.
pub fn load_model(spec: &str) -> Result<SymbolFamily> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Model(format!("{path}: {e}")))?;
            SymbolFamily::from_json(&text)
        }
        None => SymbolFamily::builtin(spec),
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub c: f64,
    pub alpha: f64,
    pub case: String,
    pub m: usize,
    pub omega: f64,
    pub beta: f64,
    #[serde(rename = "R_inv")]
    pub r_inv: f64,
    pub rho_inv: f64,
    #[serde(rename = "M")]
    pub m_eps: f64,
    #[serde(rename = "M_prime")]
    pub m_prime: f64,
    pub s_bar: f64,
    #[serde(rename = "K_eps")]
    pub k_eps: f64,
    pub norm_h_closed: f64,
    pub norm_h_direct: f64,
    #[serde(rename = "norm_u_L2")]
    pub norm_u_l2: f64,
    pub ratio: f64,
    pub growth_fit: f64,
    pub picard_iters: usize,
    pub flags: String,
}

/// Row plus everything the acceptance checks look at.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub row: SweepRow,
    pub params: ScenarioParams,
    pub gevrey: GevreyNorms,
    pub norm_f: f64,
    pub distance_to_free: f64,
    pub closeness_holds: bool,
    pub residual_ratios: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub lower_bound: LowerBoundReport,
    pub log_envelope: f64,
    pub propagator_error: f64,
    /// Gate values at this ε (reported even when the gates are off).
    pub k_gate_violated: bool,
    pub ball_gate_violated: bool,
}

/// Full pipeline for one ε: schedule, propagator, free solution, Picard, lower bound, norms.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    fam: &SymbolFamily,
    report: &SymbolReport,
    eps: f64,
    c0: f64,
    c1: f64,
) -> Result<ScenarioOutcome> {
    if fam.d != 1 {
        return Err(Error::InvalidArgument(format!("cone quadrature supports d = 1, model has d = {}", fam.d)));
    }
    let spec = &report.spectrum;
    let case = effective_case(cfg, report)?;
    let m = if case == RateCase::General { spec.m } else { 1 };
    let params = select_parameters(eps, cfg.delta, case, m, spec.gamma0)?;
    let space = Space::new(params.space_params(), cfg.truncations.grid_steps, c0, c1)?;
    let grid = space.budget.grid()?;
    let sym = FrozenSymbol::new(fam.symbol().frozen(), eps, cfg.truncations.k_x);
    let popts = PropagatorOptions { ode_tol: cfg.tolerances.ode_tol, ..PropagatorOptions::default() };
    let prop = integrate_modes(&sym, cfg.truncations.n_theta, &grid, &popts)?;
    let free = build_free_solution(&spec.e_plus, &prop, params.m_eps, fam.d, cfg.truncations.k_x)?;
    let src = SourceTerms::new(fam, eps);
    let opts = cfg.picard_options();
    let state: PicardState = picard_solve(&src, &prop, &space, &free.f, &opts)?;

    let loss = space.params.omega_loss();
    let rate = make_rates(case, spec, fam, params.r_inv, eps, params.omega, eps);
    let lower_bound = lower_bound_check(&state.u, &free.f, &rate, eps, loss, params.m_eps)?;

    // sup_θ |e^{−iθ}e₊ + e^{iθ}ē₊|
    let amplitude = theta_max_amplitude(&free.f, 0, &[0.0], 256) / free.amplitude;
    let gevrey = gevrey_norm_oscillatory(eps, cfg.sigma, cfg.c, amplitude, params.m_eps)?;

    let t_max = eps * grid.end();
    let quad = ConeQuadrature {
        points: cfg.quadrature_points,
        t_panels: grid.end().ceil().max(1.0) as usize,
        x_panels: (params.r_inv / (std::f64::consts::PI * eps)).ceil().max(1.0) as usize,
    };
    let norm_u_l2 = l2_norm_on_cone(physical_field(&state.u, eps, fam.xi0[0]), 1.0 / params.r_inv, 1.0 / params.rho_inv, Some(t_max), &quad)?;
    let ratio = instability_ratio(norm_u_l2, gevrey.direct, cfg.alpha);
    let growth_fit = growth_exponent_fit(&state.u, &[0.0]);
    let log_envelope = predicted_log_envelope(eps, cfg.delta, cfg.sigma, cfg.c, cfg.alpha, fam.d, params.m);

    let mut flags = params.flags.clone();
    let k_gate_violated = !(state.k_eps < cfg.gates.k_limit);
    let ball_gate_violated = state.trace.iter().any(|t| !(t.norm_u < cfg.gates.ball_radius));
    if k_gate_violated {
        flags.push("K_GATE_OFF".into());
    }
    if ball_gate_violated {
        flags.push("BALL_GATE_OFF".into());
    }
    if !state.closeness_holds {
        flags.push("CLOSENESS_EXCEEDED".into());
    }
    if !lower_bound.passes {
        flags.push("LOWER_BOUND_FAILED".into());
    }
    let row = SweepRow {
        eps,
        delta: cfg.delta,
        sigma: cfg.sigma,
        c: cfg.c,
        alpha: cfg.alpha,
        case: params.case.as_str().into(),
        m: params.m,
        omega: params.omega,
        beta: params.beta,
        r_inv: params.r_inv,
        rho_inv: params.rho_inv,
        m_eps: params.m_eps,
        m_prime: params.m_prime,
        s_bar: params.s_bar,
        k_eps: state.k_eps,
        norm_h_closed: gevrey.closed,
        norm_h_direct: gevrey.direct,
        norm_u_l2,
        ratio,
        growth_fit,
        picard_iters: state.iterations,
        flags: flags.join("|"),
    };
    Ok(ScenarioOutcome {
        row,
        params,
        gevrey,
        norm_f: state.norm_f,
        distance_to_free: state.distance_to_free,
        closeness_holds: state.closeness_holds,
        residual_ratios: state.residual_ratios(),
        trace: state.trace.clone(),
        lower_bound,
        log_envelope,
        propagator_error: prop.max_error,
        k_gate_violated,
        ball_gate_violated,
    })
}

/// The classifier's case, or the configured override when its assumptions hold.
pub fn effective_case(cfg: &ScenarioConfig, report: &SymbolReport) -> Result<RateCase> {
    let Some(forced) = cfg.case else { return Ok(report.case) };
    let allowed = match forced {
        RateCase::General => true,
        RateCase::Semisimple => report.case != RateCase::General,
        RateCase::Maximal => report.case == RateCase::Maximal,
    };
    if allowed {
        Ok(forced)
    } else {
        Err(Error::InvalidArgument(format!("case {} not admissible for a {} model", forced.as_str(), report.case.as_str())))
    }
}

/// Classifies the model with default tolerances.
pub fn analyse_model(fam: &SymbolFamily) -> Result<SymbolReport> {
    classify(fam, &SymbolTolerances::default())
}

/// Monotonicity verdict on one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub column: String,
    pub pass: bool,
    /// First `(ε_i, ε_{i+1})` pair that breaks the trend.
    pub offending: Option<(f64, f64)>,
}

/// Rows are ordered by decreasing ε; `increasing` asks the column to grow along the sweep.
pub fn monotone_verdict(column: &str, eps: &[f64], values: &[f64], increasing: bool) -> Verdict {
    let offending = eps
        .windows(2)
        .zip(values.windows(2))
        .find(|(_, v)| if increasing { !(v[1] > v[0]) } else { !(v[1] < v[0]) })
        .map(|(e, _)| (e[0], e[1]));
    Verdict { column: column.into(), pass: offending.is_none(), offending }
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One group of rows sharing `(case, δ, σ, c, α)`, in sweep order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSummary {
    pub case: String,
    pub delta: f64,
    pub sigma: f64,
    pub c: f64,
    pub alpha: f64,
    pub rows: usize,
    pub verdicts: Vec<Verdict>,
    /// `d ln(ratio) / d ln(1/ε)`.
    pub ratio_log_slope: f64,
    /// `d ln K / d ln(1/ε)`; negative when `K → 0`.
    pub k_log_slope: f64,
    pub growth_fit_mean: f64,
    pub growth_fit_max_rel_dev: f64,
    /// Consecutive pairs where measured and predicted log-ratios move the same way.
    pub envelope_agreement: usize,
    pub sbar_in_band: usize,
}

/// Verdicts and fitted exponents for a CSV; `gamma0` is the rate `growth_fit` should match.
pub fn summarize(rows: &[SweepRow], gamma0: f64) -> Vec<GroupSummary> {
    let key = |r: &SweepRow| (r.case.clone(), r.delta.to_bits(), r.sigma.to_bits(), r.c.to_bits(), r.alpha.to_bits());
    let mut groups: Vec<Vec<&SweepRow>> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| key(g[0]) == key(r)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
        .into_iter()
        .map(|mut g| {
            g.sort_by(|a, b| b.eps.total_cmp(&a.eps));
            let col = |f: fn(&SweepRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let eps = col(|r| r.eps);
            let inv_log: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
            let ratio = col(|r| r.ratio);
            let k = col(|r| r.k_eps);
            let envelope: Vec<f64> =
                g.iter().map(|r| predicted_log_envelope(r.eps, r.delta, r.sigma, r.c, r.alpha, 1, r.m)).collect();
            let fits = col(|r| r.growth_fit);
            let agree = ratio
                .windows(2)
                .zip(envelope.windows(2))
                .filter(|(a, b)| (a[1] > a[0]) == (b[1] > b[0]))
                .count();
            let verdicts = vec![
                monotone_verdict("ratio increasing", &eps, &ratio, true),
                monotone_verdict("K_eps decreasing", &eps, &k, false),
                monotone_verdict("envelope increasing", &eps, &envelope, true),
            ];
            let r0 = g[0];
            GroupSummary {
                case: r0.case.clone(),
                delta: r0.delta,
                sigma: r0.sigma,
                c: r0.c,
                alpha: r0.alpha,
                rows: g.len(),
                verdicts,
                ratio_log_slope: if g.len() > 1 { log_slope(&inv_log, &ratio) } else { f64::NAN },
                k_log_slope: if g.len() > 1 { log_slope(&inv_log, &k) } else { f64::NAN },
                growth_fit_mean: fits.iter().sum::<f64>() / fits.len() as f64,
                growth_fit_max_rel_dev: fits.iter().map(|f| (f / gamma0 - 1.0).abs()).fold(0.0, f64::max),
                envelope_agreement: agree,
                sbar_in_band: g.iter().filter(|r| (0.5..=2.0).contains(&(r.s_bar * r.eps.powf(r.delta)))).count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"
            model = "cauchy-riemann"
            delta = 0.3
            sigma = 0.2
            c = 1.0
            alpha = 1.0
            eps_sweep = [0.0625, 0.03125]
            [truncations]
            N_theta = 4
        "#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.truncations.n_theta, 4);
        assert_eq!(cfg.truncations.k_x, 4);
        cfg.validate().unwrap();
        let mut bad = cfg.clone();
        bad.eps_sweep = vec![0.01, 0.02];
        assert!(bad.validate().is_err());
        bad = cfg.clone();
        bad.sigma = 0.3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn verdicts() {
        let eps = [0.1, 0.05, 0.025];
        assert!(monotone_verdict("ratio", &eps, &[1.0, 2.0, 3.0], true).pass);
        let v = monotone_verdict("ratio", &eps, &[1.0, 3.0, 2.0], true);
        assert_eq!(v.offending, Some((0.05, 0.025)));
        let xs = [0.0f64, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * (1.3 * x).exp()).collect();
        assert!((log_slope(&xs, &ys) - 1.3).abs() < 1e-12);
    }
}
