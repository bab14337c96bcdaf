use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use hadamard_core::constants::{canonical, UniversalConstants};
use hadamard_core::experiment::{analyse_model, load_model, run_scenario, ScenarioConfig};
use rayon::prelude::*;

use crate::manifest::{sha256_hex, RowStatus, RunManifest, Status};
use crate::Failure;

pub fn read_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let cfg = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => ScenarioConfig::from_json(&text)?,
        _ => ScenarioConfig::from_toml(&text)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_constants(path: Option<&Path>) -> Result<UniversalConstants, Failure> {
    match path {
        None => Ok(canonical().clone()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
        }
    }
}

/// `<prefix>.csv`, `<prefix>.manifest.json`, `<prefix>.traces.json`.
pub struct OutputPaths {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub traces: PathBuf,
}

impl OutputPaths {
    pub fn new(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        OutputPaths { csv: with(".csv"), manifest: with(".manifest.json"), traces: with(".traces.json") }
    }
}

pub fn sweep(config: &Path, constants: Option<&Path>, out: Option<&Path>, seed: u64, fresh: bool) -> Result<(), Failure> {
    let clock = Instant::now();
    let cfg = read_config(config)?;
    let consts = read_constants(constants)?;
    let fam = load_model(&cfg.model)?;
    let report = analyse_model(&fam)?;
    if !report.quadratic_source {
        return Err(Failure { code: 2, message: format!("model {}: source term is not quadratic in u", fam.name) });
    }

    let prefix = match (out, &cfg.output) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => config.with_extension(""),
    };
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(&dir.display().to_string(), e))?;
    }
    let paths = OutputPaths::new(&prefix);
    let config_hash = sha256_hex(&serde_json::to_vec(&cfg).expect("config serializes"));
    let constants_hash = sha256_hex(&serde_json::to_vec(&(consts.c0, consts.c1)).expect("constants serialize"));

    let mut manifest = match RunManifest::load(&paths.manifest) {
        Some(m) if !fresh && m.matches(&config_hash, &constants_hash, &cfg.eps_sweep) => m,
        _ => RunManifest {
            config_hash,
            constants_hash,
            c0: consts.c0,
            c1: consts.c1,
            seed,
            started: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            wall_clock_s: 0.0,
            rows: cfg
                .eps_sweep
                .iter()
                .map(|&eps| RowStatus { eps, status: Status::Pending, seconds: 0.0, error: None, exit_code: None, outcome: None })
                .collect(),
        },
    };
    let pending: Vec<usize> = (0..manifest.rows.len()).filter(|&i| manifest.rows[i].status != Status::Done).collect();
    if pending.len() < manifest.rows.len() {
        eprintln!("resuming: {} of {} rows already done", manifest.rows.len() - pending.len(), manifest.rows.len());
    }
    manifest.save(&paths.manifest)?;
    let base_wall = manifest.wall_clock_s;

    // workers compute, this thread is the only writer
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| -> Result<(), Failure> {
        let (cfg, fam, report) = (&cfg, &fam, &report);
        let (c0, c1) = (consts.c0, consts.c1);
        let pending = &pending;
        scope.spawn(move || {
            pending.par_iter().for_each_with(tx, |tx, &i| {
                let start = Instant::now();
                let res = run_scenario(cfg, fam, report, cfg.eps_sweep[i], c0, c1);
                let _ = tx.send((i, res, start.elapsed().as_secs_f64()));
            });
        });
        for (i, res, secs) in rx {
            let row = &mut manifest.rows[i];
            row.seconds = secs;
            match res {
                Ok(outcome) => {
                    eprintln!("eps = {:<12} ratio = {:.6e}  K = {:.4}  ({secs:.2}s)", row.eps, outcome.row.ratio, outcome.row.k_eps);
                    row.status = Status::Done;
                    row.error = None;
                    row.exit_code = None;
                    row.outcome = Some(outcome);
                }
                Err(e) => {
                    eprintln!("eps = {:<12} failed: {e}", row.eps);
                    row.status = Status::Failed;
                    row.error = Some(e.to_string());
                    row.exit_code = Some(e.exit_code() as u8);
                    row.outcome = None;
                }
            }
            manifest.wall_clock_s = base_wall + clock.elapsed().as_secs_f64();
            manifest.save(&paths.manifest)?;
        }
        Ok(())
    })?;

    write_csv(&paths.csv, &manifest)?;
    let traces: Vec<_> = manifest
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().map(|o| serde_json::json!({ "eps": r.eps, "trace": o.trace })))
        .collect();
    std::fs::write(&paths.traces, serde_json::to_string_pretty(&traces).expect("json value"))
        .map_err(|e| Failure::io(&paths.traces.display().to_string(), e))?;
    println!("{}", paths.csv.display());

    match manifest.rows.iter().find(|r| r.status == Status::Failed) {
        Some(r) => Err(Failure {
            code: r.exit_code.unwrap_or(1),
            message: format!("eps = {}: {}", r.eps, r.error.as_deref().unwrap_or("failed")),
        }),
        None => Ok(()),
    }
}

/// Finished rows in sweep order.
pub fn write_csv(path: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::io(&path.display().to_string(), e))?;
    for r in manifest.rows.iter().filter_map(|r| r.outcome.as_ref()) {
        w.serialize(&r.row).map_err(|e| Failure::io("csv", e))?;
    }
    w.flush().map_err(|e| Failure::io("csv", e))
}
