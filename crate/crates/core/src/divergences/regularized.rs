//! Regularized relative entropy `D^∞(ρ‖S) = lim (1/n) D(ρ^⊗n‖S_n)`, evaluated
//! only where it collapses to a finite computation.

use serde::{Deserialize, Serialize};

use super::frank_wolfe::FwOptions;
use super::rel_entropy::rel_entropy_of_resource;
use super::result::DivergenceResult;
use crate::error::{Error, Result};
use crate::qcore::matrix::kron;
use crate::qcore::state::DensityOperator;
use crate::qcore::structure::{Party, TensorStructure};
use crate::theories::{FreeStateSet, SetKind};

/// Copies allowed in [`Additivity::EvaluateN`].
pub const MAX_COPIES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "n")]
pub enum Additivity {
    /// The caller asserts additivity; the single-copy value is exact.
    DeclaredAdditive,
    /// `(1/n) D(ρ^⊗n‖S_n)`, an upper-bound estimate.
    EvaluateN(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularizedResult {
    /// Per-copy values.
    pub result: DivergenceResult,
    pub copies: usize,
    /// False for finite-n estimates.
    pub certified: bool,
}

fn power_structure(s: &TensorStructure, n: usize) -> TensorStructure {
    let parties = (0..n)
        .flat_map(|k| {
            s.parties().iter().map(move |p| Party {
                label: if k == 0 { p.label.clone() } else { format!("{}#{k}", p.label) },
                dim: p.dim,
            })
        })
        .collect();
    TensorStructure::new(parties).expect("copy labels are distinct")
}

/// `S_n` for the kinds with an obvious n-copy counterpart.
pub fn copies_of_set(set: &FreeStateSet, n: usize) -> Result<FreeStateSet> {
    let st = power_structure(set.structure(), n);
    let pow = |m: &crate::qcore::matrix::CMat| (1..n).fold(m.clone(), |acc, _| kron(&acc, m));
    match set.kind() {
        SetKind::Incoherent { basis: None } => Ok(FreeStateSet::incoherent(st)),
        SetKind::Incoherent { basis: Some(b) } => FreeStateSet::incoherent_in(st, pow(b)),
        SetKind::Real { basis: None } => Ok(FreeStateSet::real(st)),
        SetKind::Real { basis: Some(b) } => FreeStateSet::real_in(st, pow(b)),
        SetKind::Singleton { gamma } => {
            Ok(FreeStateSet::singleton(&DensityOperator::new(pow(gamma), st)?))
        }
        SetKind::AllStates => Ok(FreeStateSet::all_states(st)),
        _ => Err(Error::Unsupported(format!("{}-copy version of a {} set", n, set.kind_name()))),
    }
}

pub fn regularized_rel_entropy(
    rho: &DensityOperator,
    set: &FreeStateSet,
    additivity: Additivity,
    opts: &FwOptions,
) -> Result<RegularizedResult> {
    match additivity {
        Additivity::DeclaredAdditive => {
            if !matches!(set.kind(), SetKind::Incoherent { .. } | SetKind::Singleton { .. } | SetKind::Real { .. }) {
                return Err(Error::Precondition(format!(
                    "additivity can only be declared for incoherent, singleton or real sets, not {}",
                    set.kind_name()
                )));
            }
            let result = rel_entropy_of_resource(rho, set, opts)?;
            Ok(RegularizedResult { result, copies: 1, certified: true })
        }
        Additivity::EvaluateN(n) => {
            if n == 0 || n > MAX_COPIES {
                return Err(Error::OutOfRange(format!("copies {n} outside 1..={MAX_COPIES}")));
            }
            let sn = copies_of_set(set, n)?;
            let st = sn.structure().clone();
            let m = (1..n).fold(rho.matrix().clone(), |acc, _| kron(&acc, rho.matrix()));
            let rn = DensityOperator::new(m, st)?;
            let mut r = rel_entropy_of_resource(&rn, &sn, opts)?;
            let k = n as f64;
            r.value /= k;
            r.lower_bound /= k;
            r.upper_bound /= k;
            Ok(RegularizedResult { result: r, copies: n, certified: false })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;

    #[test]
    fn two_copies_of_plus_give_one_bit_per_copy() {
        let plus = DensityOperator::single(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let s = FreeStateSet::incoherent(TensorStructure::single("0", 2));
        let r = regularized_rel_entropy(&plus, &s, Additivity::EvaluateN(2), &FwOptions::default()).unwrap();
        assert!((r.result.value - 1.0).abs() < 1e-9);
        assert!(!r.certified);
        let one = regularized_rel_entropy(&plus, &s, Additivity::DeclaredAdditive, &FwOptions::default()).unwrap();
        assert!((one.result.value - 1.0).abs() < 1e-9 && one.certified);
    }

    #[test]
    fn rejects_three_copies_and_undeclarable_sets() {
        let s = FreeStateSet::incoherent(TensorStructure::single("0", 2));
        let mm = DensityOperator::maximally_mixed(TensorStructure::single("0", 2));
        assert!(regularized_rel_entropy(&mm, &s, Additivity::EvaluateN(3), &FwOptions::default()).is_err());
        let all = FreeStateSet::all_states(TensorStructure::single("0", 2));
        assert!(regularized_rel_entropy(&mm, &all, Additivity::DeclaredAdditive, &FwOptions::default()).is_err());
    }
}
