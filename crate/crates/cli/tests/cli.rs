use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hadamard_core::constants::UniversalConstants;
use hadamard_core::SweepRow;
use serde_json::Value;

fn hadamard(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hadamard")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> Vec<SweepRow> {
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

const CR: &str = r#"
model = "cauchy-riemann"
delta = 0.3
sigma = 0.2
c = 1.0
alpha = 1.0
eps_sweep = [0.0625, 0.03125, 0.015625]
[gates]
enforce = false
"#;

#[test]
fn check_symbol_ceilings() {
    let tmp = tempfile::tempdir().unwrap();
    for (model, case, ceiling) in [
        ("cauchy-riemann", "SEMISIMPLE", 0.5),
        ("jordan-elliptic", "GENERAL", 1.0 / 3.0),
        ("max-flat", "MAXIMAL", 2.0 / 3.0),
    ] {
        let out = hadamard(&["check-symbol", model, "--json"], tmp.path());
        assert_eq!(code(&out), 0, "{model}");
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(v["case"], case);
        assert!((v["ceiling"].as_f64().unwrap() - ceiling).abs() < 1e-12);
    }
}

#[test]
fn check_symbol_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hadamard(&["check-symbol", "no-such-model"], tmp.path())), 5);
    // real spectrum: hyperbolic, not elliptic
    let hyperbolic = r#"{"name":"hyperbolic","d":1,"n":2,"xi0":[1.0],
        "a":[[{"t":0,"x":[0],"u":[0,0],"re":[[1.0,0.0],[0.0,-1.0]]}]],
        "f":[{"t":0,"x":[0],"u":[1,0],"re":[[1.0,0.0],[0.0,1.0]]}]}"#;
    let p = write(tmp.path(), "hyp.json", hyperbolic);
    let arg = format!("file:{}", p.display());
    assert_eq!(code(&hadamard(&["check-symbol", &arg], tmp.path())), 2);
}

#[test]
fn sweep_rows_determinism_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cr.toml", CR);
    let out = hadamard(&["sweep", cfg.to_str().unwrap(), "--out", "run/a"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv_a = tmp.path().join("run/a.csv");
    assert_eq!(rows(&csv_a).len(), 3);
    let first = std::fs::read(&csv_a).unwrap();

    // a second run from scratch on one thread gives the same bytes
    let out = hadamard(&["--threads", "1", "sweep", cfg.to_str().unwrap(), "--out", "run/b"], tmp.path());
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(tmp.path().join("run/b.csv")).unwrap(), first);

    // interrupt: forget the last row, then resume
    let mpath = tmp.path().join("run/a.manifest.json");
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
    assert_eq!(m["rows"][2]["status"], "done");
    m["rows"][2]["status"] = "pending".into();
    m["rows"][2]["outcome"] = Value::Null;
    std::fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
    let out = hadamard(&["sweep", cfg.to_str().unwrap(), "--out", "run/a"], tmp.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("resuming: 2 of 3"));
    assert_eq!(std::fs::read(&csv_a).unwrap(), first);

    let traces: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/a.traces.json")).unwrap()).unwrap();
    assert_eq!(traces.as_array().unwrap().len(), 3);
    assert!(traces[0]["trace"][1]["K_eps"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &CR.replace("sigma = 0.2", "sigma = 0.3"));
    assert_eq!(code(&hadamard(&["sweep", bad.to_str().unwrap()], tmp.path())), 5);
    let unsorted = write(tmp.path(), "unsorted.toml", &CR.replace("[0.0625, 0.03125, 0.015625]", "[0.03125, 0.0625]"));
    assert_eq!(code(&hadamard(&["sweep", unsorted.to_str().unwrap()], tmp.path())), 5);
    let ceiling = write(tmp.path(), "ceiling.toml", &CR.replace("delta = 0.3", "delta = 0.55"));
    assert_eq!(code(&hadamard(&["sweep", ceiling.to_str().unwrap()], tmp.path())), 5);
    // K = 1.46 at eps = 2^-4
    let gated = write(tmp.path(), "gated.toml", &CR.replace("enforce = false", "enforce = true"));
    assert_eq!(code(&hadamard(&["sweep", gated.to_str().unwrap()], tmp.path())), 3);
    let starved =
        write(tmp.path(), "starved.toml", &format!("{CR}\n[tolerances]\npicard_tol = 1e-30\npicard_max_iter = 1\n"));
    assert_eq!(code(&hadamard(&["sweep", starved.to_str().unwrap()], tmp.path())), 4);
}

/// `∫₀ᵀ (1 − ρt) e^{at} dt`.
fn tilted_exp_integral(a: f64, rho: f64, t: f64) -> f64 {
    let e = (a * t).exp();
    (e - 1.0) / a - rho * ((t / a - 1.0 / (a * a)) * e + 1.0 / (a * a))
}

#[test]
fn uncoupled_control_matches_free_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{CR}\n[couplings]\ntheta = false\nx = false\nu = false\n");
    let cfg = write(tmp.path(), "control.toml", &text);
    let out = hadamard(&["sweep", cfg.to_str().unwrap(), "--out", "control"], tmp.path());
    assert_eq!(code(&out), 0);
    for r in rows(&tmp.path().join("control.csv")) {
        assert_eq!(r.picard_iters, 1);
        // |f|² = 2e^{−2M}e^{2s} for the polarized Cauchy-Riemann datum, whatever θ is
        let (half, rho) = (r.r_inv, 1.0 / r.rho_inv);
        let t_end = (1.0 / rho).min(r.eps * r.s_bar);
        let a = 2.0 / r.eps;
        let sq = 2.0 * half * 2.0 * r.eps * r.eps * (-2.0 * r.m_eps).exp() * tilted_exp_integral(a, rho, t_end);
        let predicted = sq.sqrt() / r.norm_h_direct.powf(r.alpha);
        let rel = (r.ratio / predicted - 1.0).abs();
        assert!(rel < 0.10, "eps = {}: ratio {} vs {}", r.eps, r.ratio, predicted);
    }
}

fn synthetic(eps: &[f64], ratio: &[f64], growth: f64) -> Vec<SweepRow> {
    eps.iter()
        .zip(ratio)
        .map(|(&e, &q)| SweepRow {
            eps: e,
            delta: 0.3,
            sigma: 0.2,
            c: 1.0,
            alpha: 1.0,
            case: "SEMISIMPLE".into(),
            m: 1,
            omega: 0.0,
            beta: e.powf(0.3),
            r_inv: e.powf(0.3),
            rho_inv: e.sqrt(),
            m_eps: e.powf(-0.3),
            m_prime: 1.0,
            s_bar: e.powf(-0.3),
            k_eps: e,
            norm_h_closed: 1.0,
            norm_h_direct: 1.0,
            norm_u_l2: q,
            ratio: q,
            growth_fit: growth,
            picard_iters: 2,
            flags: String::new(),
        })
        .collect()
}

fn write_csv(path: &Path, rows: &[SweepRow]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    for r in rows {
        w.serialize(r).unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn report_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let eps = [0.0625, 0.03125, 0.015625, 0.0078125];
    let good = tmp.path().join("good.csv");
    write_csv(&good, &synthetic(&eps, &[1.0, 2.0, 4.0, 8.0], 1.02));
    let out = stdout(&hadamard(&["report", good.to_str().unwrap()], tmp.path()));
    assert!(out.contains("PASS ratio increasing"), "{out}");
    assert!(out.contains("PASS growth_fit within 5%"), "{out}");
    // ratio doubles per halving of ε
    assert!(out.contains("d ln(ratio)/d ln(1/eps) = 1.0000"), "{out}");

    let bad = tmp.path().join("bad.csv");
    write_csv(&bad, &synthetic(&eps, &[1.0, 2.0, 1.5, 8.0], 1.2));
    let out = stdout(&hadamard(&["report", bad.to_str().unwrap()], tmp.path()));
    assert!(out.contains("FAIL ratio increasing between eps = 0.03125 and eps = 0.015625"), "{out}");
    assert!(out.contains("FAIL growth_fit"), "{out}");
}

#[test]
fn derive_constants_file() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |k: &str, n: &str, name: &str| hadamard(&["derive-constants", "--k-max", k, "--n-max", n, "--out", name], tmp.path());
    assert_eq!(code(&run("1000", "200", "c.json")), 0);
    let path = tmp.path().join("c.json");
    let first = std::fs::read_to_string(&path).unwrap();
    let parsed: UniversalConstants = serde_json::from_str(&first).unwrap();
    assert_eq!((parsed.k_max, parsed.n_max), (1000, 200));
    assert!(parsed.c0 > 0.0 && parsed.c1 > 0.0);

    let again = run("1000", "200", "c.json");
    assert!(stdout(&again).contains("unchanged"));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);

    assert_eq!(code(&run("2000", "200", "d.json")), 0);
    let doubled: UniversalConstants = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("d.json")).unwrap()).unwrap();
    assert!((doubled.c0 / parsed.c0 - 1.0).abs() < 0.01);
}
