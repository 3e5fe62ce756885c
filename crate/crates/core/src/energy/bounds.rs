use serde::Serialize;

use super::models::Psi;
use crate::error::EnergyError;

/// View-change ratio `V/N` at which protocol `a` stops beating `b`:
/// `(b.b - a.b) / (a.v - b.v)`.
pub fn nu_f_bound(a: &Psi, b: &Psi) -> Result<f64, EnergyError> {
    let den = a.v - b.v;
    if den == 0.0 {
        return Err(EnergyError::EqualViewChangeCost);
    }
    Ok((b.b - a.b) / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Both best and worst case are no worse.
    Dominant,
    /// Cheaper best case, costlier view change.
    BestCaseOptimal,
    /// Costlier best case, cheaper view change.
    WorstCaseOptimal,
    Dominated,
}

pub fn region(a: &Psi, b: &Psi) -> Region {
    match (a.b <= b.b, a.v <= b.v) {
        (true, true) => Region::Dominant,
        (true, false) => Region::BestCaseOptimal,
        (false, true) => Region::WorstCaseOptimal,
        (false, false) => Region::Dominated,
    }
}

/// Largest number of forced worst cases after which one best case still
/// fits the baseline budget. `-1` means never favorable.
pub fn f_e_bound(p: &Psi, baseline: f64) -> Result<i64, EnergyError> {
    let per_fault = p.b + p.v;
    if per_fault <= 0.0 {
        return Err(EnergyError::NonPositiveCost(per_fault));
    }
    let x = ((baseline - p.b) / per_fault).floor();
    Ok(if x < 0.0 { -1 } else { x as i64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi(b: f64, v: f64) -> Psi {
        Psi { b, w: b + v, v }
    }

    #[test]
    fn bound_arithmetic() {
        assert!((nu_f_bound(&psi(3.0, 10.0), &psi(5.0, 4.0)).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(nu_f_bound(&psi(5.0, 10.0), &psi(5.0, 4.0)).unwrap(), 0.0);
        assert!(nu_f_bound(&psi(6.0, 2.0), &psi(5.0, 4.0)).unwrap() > 0.0);
        assert_eq!(
            nu_f_bound(&psi(1.0, 4.0), &psi(5.0, 4.0)),
            Err(EnergyError::EqualViewChangeCost)
        );
        assert_eq!(f_e_bound(&psi(10.0, 20.0), 100.0).unwrap(), 3);
        assert_eq!(f_e_bound(&psi(10.0, 0.0), 100.0).unwrap(), 9);
        assert_eq!(f_e_bound(&psi(10.0, 20.0), 5.0).unwrap(), -1);
    }
}
