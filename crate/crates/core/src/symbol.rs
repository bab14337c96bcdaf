//! Polynomial symbol families `A(t,x,u) = Σ_j A_j(t,x,u) ξ_{0,j}` and the source `F(t,x,u)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::C64;

/// One monomial `t^a x^b u^c` with an `N×N` coefficient, as stored in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    #[serde(default)]
    pub t: u32,
    #[serde(default)]
    pub x: Vec<u32>,
    #[serde(default)]
    pub u: Vec<u32>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

/// A monomial of a polynomial matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub t: u32,
    pub x: Vec<u32>,
    pub u: Vec<u32>,
    pub coef: DMatrix<C64>,
}

impl Term {
    pub fn u_degree(&self) -> u32 {
        self.u.iter().sum()
    }

    pub fn tx_degree(&self) -> u32 {
        self.t + self.x.iter().sum::<u32>()
    }
}

/// Matrix-valued polynomial in `(t, x, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    pub n: usize,
    pub d: usize,
    pub terms: Vec<Term>,
}

impl PolyMatrix {
    pub fn zero(n: usize, d: usize) -> Self {
        PolyMatrix { n, d, terms: Vec::new() }
    }

    pub fn from_specs(n: usize, d: usize, specs: &[TermSpec]) -> Result<Self> {
        let mut terms = Vec::with_capacity(specs.len());
        for s in specs {
            let x = if s.x.is_empty() { vec![0; d] } else { s.x.clone() };
            let u = if s.u.is_empty() { vec![0; n] } else { s.u.clone() };
            if x.len() != d || u.len() != n {
                return Err(Error::Model(format!("term exponents x={:?} u={:?} for d={d}, N={n}", s.x, s.u)));
            }
            let rows_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
            if !rows_ok(&s.re) || s.im.as_ref().is_some_and(|m| !rows_ok(m)) {
                return Err(Error::Model(format!("coefficient is not {n}x{n}")));
            }
            let coef = DMatrix::from_fn(n, n, |i, j| {
                C64::new(s.re[i][j], s.im.as_ref().map_or(0.0, |m| m[i][j]))
            });
            terms.push(Term { t: s.t, x, u, coef });
        }
        Ok(PolyMatrix { n, d, terms })
    }

    pub fn to_specs(&self) -> Vec<TermSpec> {
        self.terms
            .iter()
            .map(|t| {
                let re = (0..self.n).map(|i| (0..self.n).map(|j| t.coef[(i, j)].re).collect()).collect();
                let has_im = t.coef.iter().any(|z| z.im != 0.0);
                let im = has_im.then(|| (0..self.n).map(|i| (0..self.n).map(|j| t.coef[(i, j)].im).collect()).collect());
                TermSpec { t: t.t, x: t.x.clone(), u: t.u.clone(), re, im }
            })
            .collect()
    }

    /// `Σ c_j P_j` with matching dimensions.
    pub fn combine(parts: &[(f64, &PolyMatrix)]) -> PolyMatrix {
        let (n, d) = (parts[0].1.n, parts[0].1.d);
        let mut terms: Vec<Term> = Vec::new();
        for (w, p) in parts {
            for t in &p.terms {
                let scaled = t.coef.map(|z| z * *w);
                if let Some(existing) = terms.iter_mut().find(|e| e.t == t.t && e.x == t.x && e.u == t.u) {
                    existing.coef += scaled;
                } else {
                    terms.push(Term { t: t.t, x: t.x.clone(), u: t.u.clone(), coef: scaled });
                }
            }
        }
        PolyMatrix { n, d, terms }
    }

    /// Point evaluation.
    pub fn eval(&self, t: f64, x: &[f64], u: &[C64]) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for term in &self.terms {
            let mut w = C64::new(t.powi(term.t as i32), 0.0);
            for (xi, &e) in x.iter().zip(&term.x) {
                w *= xi.powi(e as i32);
            }
            for (ui, &e) in u.iter().zip(&term.u) {
                w *= ui.powi(e as i32);
            }
            out += &term.coef * w;
        }
        out
    }

    /// Sum of the coefficients of `t^a x^b` with no `u` factor.
    pub fn tx_coefficient(&self, t: u32, x: &[u32]) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for term in &self.terms {
            if term.u_degree() == 0 && term.t == t && term.x == x {
                out += &term.coef;
            }
        }
        out
    }

    /// Terms with no `u` factor, i.e. `Ā(t,x) = A(t,x,0)`.
    pub fn frozen(&self) -> PolyMatrix {
        PolyMatrix { n: self.n, d: self.d, terms: self.terms.iter().filter(|t| t.u_degree() == 0).cloned().collect() }
    }

    /// Terms with at least one `u` factor, i.e. `A − Ā`.
    pub fn u_dependent(&self) -> PolyMatrix {
        PolyMatrix { n: self.n, d: self.d, terms: self.terms.iter().filter(|t| t.u_degree() > 0).cloned().collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef.iter().all(|z| z.norm() == 0.0))
    }
}

/// JSON description of a symbol family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub d: usize,
    pub n: usize,
    pub xi0: Vec<f64>,
    pub a: Vec<Vec<TermSpec>>,
    #[serde(default)]
    pub f: Vec<TermSpec>,
}

/// Coefficients `A_1 … A_d`, source coefficient `F` and frequency `ξ₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolFamily {
    pub name: String,
    pub d: usize,
    pub n: usize,
    pub a: Vec<PolyMatrix>,
    pub f: PolyMatrix,
    pub xi0: Vec<f64>,
}

impl SymbolFamily {
    pub fn new(name: &str, a: Vec<PolyMatrix>, f: PolyMatrix, xi0: Vec<f64>) -> Result<Self> {
        let d = a.len();
        if d == 0 || xi0.len() != d {
            return Err(Error::Model(format!("{} coefficients for xi0 of length {}", d, xi0.len())));
        }
        let n = a[0].n;
        if a.iter().any(|p| p.n != n || p.d != d) || f.n != n || f.d != d {
            return Err(Error::Model("inconsistent coefficient sizes".into()));
        }
        let norm = xi0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!("|xi0| = {norm}, expected 1")));
        }
        Ok(SymbolFamily { name: name.to_string(), d, n, a, f, xi0 })
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        if spec.a.len() != spec.d {
            return Err(Error::Model(format!("{} coefficient lists for d = {}", spec.a.len(), spec.d)));
        }
        let a = spec.a.iter().map(|t| PolyMatrix::from_specs(spec.n, spec.d, t)).collect::<Result<Vec<_>>>()?;
        let f = PolyMatrix::from_specs(spec.n, spec.d, &spec.f)?;
        Self::new(&spec.name, a, f, spec.xi0.clone())
    }

    pub fn to_spec(&self) -> FamilySpec {
        FamilySpec {
            name: self.name.clone(),
            d: self.d,
            n: self.n,
            xi0: self.xi0.clone(),
            a: self.a.iter().map(|p| p.to_specs()).collect(),
            f: self.f.to_specs(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FamilySpec = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("family serializes")
    }

    /// `A(t,x,u) = Σ_j A_j(t,x,u) ξ_{0,j}`.
    pub fn symbol(&self) -> PolyMatrix {
        let parts: Vec<(f64, &PolyMatrix)> = self.xi0.iter().copied().zip(self.a.iter()).collect();
        PolyMatrix::combine(&parts)
    }

    /// Same family with `ξ₀` replaced (not renormalized).
    pub fn with_scaled_frequency(&self, c: f64) -> SymbolFamily {
        let mut out = self.clone();
        out.xi0.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "cauchy-riemann" => Ok(cauchy_riemann()),
            "jordan-elliptic" => Ok(jordan_elliptic()),
            "max-flat" => Ok(max_flat()),
            other => Err(Error::Model(format!("unknown built-in model '{other}'"))),
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["cauchy-riemann", "jordan-elliptic", "max-flat"]
    }
}

fn real(rows: &[&[f64]]) -> DMatrix<C64> {
    let n = rows.len();
    DMatrix::from_fn(n, rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
}

fn term(t: u32, x: u32, u: Vec<u32>, coef: DMatrix<C64>) -> Term {
    Term { t, x: vec![x], u, coef }
}

/// `∂_t u + J ∂_x u = u₁ u` with `J` the rotation by π/2.
pub fn cauchy_riemann() -> SymbolFamily {
    let j = real(&[&[0.0, -1.0], &[1.0, 0.0]]);
    let a = PolyMatrix { n: 2, d: 1, terms: vec![term(0, 0, vec![0, 0], j)] };
    let f = PolyMatrix { n: 2, d: 1, terms: vec![term(0, 0, vec![1, 0], DMatrix::identity(2, 2).map(|v: f64| C64::new(v, 0.0)))] };
    SymbolFamily::new("cauchy-riemann", vec![a], f, vec![1.0]).expect("built-in model is consistent")
}

/// Realification of the complex Jordan block `[[i, 1], [0, i]]`.
pub fn jordan_elliptic() -> SymbolFamily {
    let a1 = real(&[
        &[0.0, 1.0, -1.0, 0.0],
        &[0.0, 0.0, 0.0, -1.0],
        &[1.0, 0.0, 0.0, 1.0],
        &[0.0, 1.0, 0.0, 0.0],
    ]);
    let a = PolyMatrix { n: 4, d: 1, terms: vec![term(0, 0, vec![0; 4], a1)] };
    let f = PolyMatrix {
        n: 4,
        d: 1,
        terms: vec![term(0, 0, vec![1, 0, 0, 0], DMatrix::identity(4, 4).map(|v: f64| C64::new(v, 0.0)))],
    };
    SymbolFamily::new("jordan-elliptic", vec![a], f, vec![1.0]).expect("built-in model is consistent")
}

/// `A = (1 − t² − x² + u₁) J`: eigenvalue branch `i(1 − t² − x²)` at `u = 0`.
pub fn max_flat() -> SymbolFamily {
    let j = real(&[&[0.0, -1.0], &[1.0, 0.0]]);
    let a = PolyMatrix {
        n: 2,
        d: 1,
        terms: vec![
            term(0, 0, vec![0, 0], j.clone()),
            term(2, 0, vec![0, 0], -j.clone()),
            term(0, 2, vec![0, 0], -j.clone()),
            term(0, 0, vec![1, 0], j),
        ],
    };
    let f = PolyMatrix { n: 2, d: 1, terms: vec![term(0, 0, vec![1, 0], DMatrix::identity(2, 2).map(|v: f64| C64::new(v, 0.0)))] };
    SymbolFamily::new("max-flat", vec![a], f, vec![1.0]).expect("built-in model is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        for name in SymbolFamily::builtin_names() {
            let fam = SymbolFamily::builtin(name).unwrap();
            let back = SymbolFamily::from_json(&fam.to_json()).unwrap();
            assert_eq!(fam, back);
        }
    }

    #[test]
    fn max_flat_evaluates_branch_factor() {
        let fam = max_flat();
        let a = fam.symbol().eval(0.1, &[0.2], &[C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((a[(1, 0)].re - (1.0 - 0.01 - 0.04)).abs() < 1e-15);
        assert_eq!(fam.symbol().u_dependent().terms.len(), 1);
    }

    #[test]
    fn bad_xi0_rejected() {
        let fam = cauchy_riemann();
        assert!(SymbolFamily::new("x", fam.a.clone(), fam.f.clone(), vec![2.0]).is_err());
    }
}
