use std::path::Path;

use hadamard_core::constants::UniversalConstants;
use hadamard_core::experiment::{analyse_model, load_model};
use serde_json::json;

use crate::Failure;

/// Leaves an existing file alone when the derived values agree.
pub fn derive_constants(out: &Path, k_max: u64, n_max: u64) -> Result<(), Failure> {
    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let fresh = UniversalConstants::derive(k_max, n_max, stamp)?;
    if let Ok(text) = std::fs::read_to_string(out) {
        if let Ok(old) = serde_json::from_str::<UniversalConstants>(&text) {
            if old.same_values(&fresh) {
                println!("{} unchanged (c0 = {}, c1 = {})", out.display(), old.c0, old.c1);
                return Ok(());
            }
        }
    }
    let text = serde_json::to_string_pretty(&fresh).map_err(|e| Failure::io("serialize", e))?;
    std::fs::write(out, text + "\n").map_err(|e| Failure::io(&out.display().to_string(), e))?;
    println!("c0 = {}\nc1 = {}\nwrote {}", fresh.c0, fresh.c1, out.display());
    Ok(())
}

pub fn check_symbol(model: &str, as_json: bool) -> Result<(), Failure> {
    let fam = load_model(model)?;
    let rep = analyse_model(&fam)?;
    let spec = &rep.spectrum;
    let mu = match &rep.mu {
        None => json!(null),
        Some(Ok(m)) => json!({ "status": m.status, "im_hessian_eigenvalues": m.im_hessian_eigenvalues }),
        Some(Err(e)) => json!({ "error": e }),
    };
    let eig: Vec<[f64; 2]> = spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect();
    let out = json!({
        "model": fam.name,
        "d": fam.d,
        "n": fam.n,
        "eigenvalues": eig,
        "lambda0": [spec.lambda0.re, spec.lambda0.im],
        "gamma0": spec.gamma0,
        "multiplicity": spec.m,
        "semisimple": rep.branch.semisimple,
        "noncoalescing": rep.branch.noncoalescing,
        "min_gap": rep.branch.min_gap,
        "mu": mu,
        "quadratic_source": rep.quadratic_source,
        "case": rep.case.as_str(),
        "ceiling": rep.ceiling,
    });
    if as_json {
        println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    } else {
        print_report(&fam.name, &rep);
    }
    if !rep.quadratic_source {
        return Err(Failure { code: 2, message: "source term is not at least quadratic in u".into() });
    }
    Ok(())
}

fn print_report(name: &str, rep: &hadamard_core::SymbolReport) {
    let spec = &rep.spectrum;
    println!("model          {name}");
    println!("lambda0        {:.6} {:+.6}i (multiplicity {})", spec.lambda0.re, spec.lambda0.im, spec.m);
    println!("gamma0         {:.6}", spec.gamma0);
    println!("semisimple     {}", rep.branch.semisimple);
    println!("noncoalescing  {} (min gap {:.3e})", rep.branch.noncoalescing, rep.branch.min_gap);
    match &rep.mu {
        None => println!("mu             not computed"),
        Some(Ok(m)) => println!("mu             {:?} {:?}", m.status, m.im_hessian_eigenvalues),
        Some(Err(e)) => println!("mu             {e}"),
    }
    println!("quadratic src  {}", rep.quadratic_source);
    println!("case           {}", rep.case.as_str());
    println!("ceiling        sigma < {:.6}", rep.ceiling);
}
