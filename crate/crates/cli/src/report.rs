use std::path::Path;

use hadamard_core::experiment::summarize;
use hadamard_core::SweepRow;

use crate::Failure;

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    rd.deserialize().collect::<Result<Vec<SweepRow>, _>>().map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

pub fn report(path: &Path, gamma0: f64, as_json: bool) -> Result<(), Failure> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Failure::config(format!("{}: no rows", path.display())));
    }
    let groups = summarize(&rows, gamma0);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&groups).map_err(|e| Failure::io("json", e))?);
        return Ok(());
    }
    for g in &groups {
        println!(
            "{} delta={} sigma={} c={} alpha={} ({} rows)",
            g.case, g.delta, g.sigma, g.c, g.alpha, g.rows
        );
        for v in &g.verdicts {
            match v.offending {
                None => println!("  PASS {}", v.column),
                Some((a, b)) => println!("  FAIL {} between eps = {a} and eps = {b}", v.column),
            }
        }
        let fit_ok = g.growth_fit_max_rel_dev <= 0.05;
        println!(
            "  {} growth_fit within 5% of {gamma0} (mean {:.6}, worst {:.2}%)",
            if fit_ok { "PASS" } else { "FAIL" },
            g.growth_fit_mean,
            100.0 * g.growth_fit_max_rel_dev
        );
        println!("  d ln(ratio)/d ln(1/eps) = {:.4}   d ln(K)/d ln(1/eps) = {:.4}", g.ratio_log_slope, g.k_log_slope);
        println!("  envelope trend agrees on {}/{} steps", g.envelope_agreement, g.rows.saturating_sub(1));
        println!("  s_bar*eps^delta in [0.5, 2] on {}/{} rows", g.sbar_in_band, g.rows);
    }
    Ok(())
}
