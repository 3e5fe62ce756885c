use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::EnergyError;

/// Symbols a cost expression may mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    /// Node count.
    N,
    /// Fault bound.
    F,
    /// Receivers per k-cast.
    K,
    /// Command payload bytes per block.
    M,
    /// Signature bytes.
    B,
    /// Send energy per byte (J).
    S,
    /// Receive energy per byte (J).
    R,
    /// Energy per signature (J).
    SigmaS,
    /// Energy per verification (J).
    SigmaV,
    /// MAC compute energy (J).
    MuS,
    MuV,
}

impl Var {
    pub const ALL: [Var; 11] = [
        Var::N,
        Var::F,
        Var::K,
        Var::M,
        Var::B,
        Var::S,
        Var::R,
        Var::SigmaS,
        Var::SigmaV,
        Var::MuS,
        Var::MuV,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Var::N => "n",
            Var::F => "f",
            Var::K => "k",
            Var::M => "m",
            Var::B => "b",
            Var::S => "S",
            Var::R => "R",
            Var::SigmaS => "σ_s",
            Var::SigmaV => "σ_v",
            Var::MuS => "μ_s",
            Var::MuV => "μ_v",
        }
    }
}

/// Variable assignment. Unset entries make evaluation fail.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: BTreeMap<Var, f64>,
}

impl ParamVector {
    pub fn new() -> ParamVector {
        ParamVector::default()
    }

    pub fn set(mut self, v: Var, x: f64) -> ParamVector {
        self.values.insert(v, x);
        self
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        self.values.get(&v).copied()
    }
}

type Monomial = Vec<(Var, u32)>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut m: BTreeMap<Var, u32> = BTreeMap::new();
    for (v, e) in a.iter().chain(b) {
        *m.entry(*v).or_default() += e;
    }
    m.into_iter().collect()
}

/// Polynomial over [`Var`] with real coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostExpr {
    terms: BTreeMap<Monomial, f64>,
}

impl CostExpr {
    pub fn zero() -> CostExpr {
        CostExpr::default()
    }

    pub fn constant(c: f64) -> CostExpr {
        let mut e = CostExpr::zero();
        e.add_term(Vec::new(), c);
        e
    }

    pub fn var(v: Var) -> CostExpr {
        let mut e = CostExpr::zero();
        e.add_term(vec![(v, 1)], 1.0);
        e
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(m.clone()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: f64) -> CostExpr {
        let mut e = CostExpr::zero();
        for (m, x) in &self.terms {
            e.add_term(m.clone(), x * c);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.terms.keys().flatten().map(|(v, _)| *v).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Substitutes the bound variables and returns a numeric value.
    pub fn eval(&self, x: &ParamVector) -> Result<f64, EnergyError> {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (v, e) in m {
                let val = x
                    .get(*v)
                    .ok_or_else(|| EnergyError::Unbound(v.symbol().to_string()))?;
                t *= val.powi(*e as i32);
            }
            total += t;
        }
        Ok(total)
    }
}

impl Add for CostExpr {
    type Output = CostExpr;
    fn add(mut self, o: CostExpr) -> CostExpr {
        for (m, c) in o.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Sub for CostExpr {
    type Output = CostExpr;
    fn sub(self, o: CostExpr) -> CostExpr {
        self + o.scale(-1.0)
    }
}

impl Mul for CostExpr {
    type Output = CostExpr;
    fn mul(self, o: CostExpr) -> CostExpr {
        let mut e = CostExpr::zero();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                e.add_term(mono_mul(a, b), x * y);
            }
        }
        e
    }
}

impl Mul<f64> for CostExpr {
    type Output = CostExpr;
    fn mul(self, c: f64) -> CostExpr {
        self.scale(c)
    }
}

impl From<Var> for CostExpr {
    fn from(v: Var) -> CostExpr {
        CostExpr::var(v)
    }
}

impl From<f64> for CostExpr {
    fn from(c: f64) -> CostExpr {
        CostExpr::constant(c)
    }
}

impl fmt::Display for CostExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mut parts = Vec::new();
            if m.is_empty() || mag != 1.0 {
                parts.push(format!("{mag}"));
            }
            for (v, e) in m {
                if *e == 1 {
                    parts.push(v.symbol().to_string());
                } else {
                    parts.push(format!("{}^{}", v.symbol(), e));
                }
            }
            write!(f, "{}", parts.join("·"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_arithmetic() {
        let n = CostExpr::var(Var::N);
        let e = (n.clone() + CostExpr::constant(1.0)) * n.clone() - n * 1.0;
        let x = ParamVector::new().set(Var::N, 7.0);
        assert_eq!(e.eval(&x).unwrap(), 49.0);
        assert_eq!(e.to_string(), "n^2");
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = CostExpr::var(Var::SigmaS) * 2.0;
        assert_eq!(
            e.eval(&ParamVector::new()),
            Err(EnergyError::Unbound("σ_s".into()))
        );
    }
}
