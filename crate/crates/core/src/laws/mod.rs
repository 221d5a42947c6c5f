//! Transformation bounds for composite theories. Every bound is a necessary
//! condition, so verdicts are either FORBIDDEN or NOT-EXCLUDED.

pub mod monotone;
pub mod nogo;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::composite::{smax, smin};
use crate::divergences::{
    regularized_rel_entropy, rel_entropy_engine, rel_entropy_of_resource, Additivity, DivergenceResult, FwOptions,
    RegularizedResult,
};
use crate::error::{Error, Result};
use crate::qcore::matrix::{kron_all, max_abs};
use crate::qcore::state::DensityOperator;
use crate::theories::{FreeStateSet, SetKind};

pub use monotone::{induced_monotone, lift_to_second_party, witness_channel, InducedReport, WitnessChannel};
pub use nogo::{nogo_entanglement_to_coherence, sample_rng_channels, NogoReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "FORBIDDEN")]
    Forbidden,
    #[serde(rename = "NOT-EXCLUDED")]
    NotExcluded,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Gaps {
    #[serde(with = "crate::serde_ext")]
    pub lhs: f64,
    #[serde(with = "crate::serde_ext")]
    pub rhs: f64,
}

/// `lhs ≥ rhs` is necessary for the transformation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(with = "crate::serde_ext")]
    pub lhs: f64,
    #[serde(with = "crate::serde_ext")]
    pub rhs: f64,
    pub gaps: Gaps,
    pub verdict: Verdict,
    pub certificates: BTreeMap<String, DivergenceResult>,
}

impl BoundReport {
    /// FORBIDDEN only when the certified upper bound of the left side is
    /// below the certified lower bound of the right side.
    pub fn compare(lhs: DivergenceResult, rhs: DivergenceResult) -> Self {
        let verdict = if lhs.upper_bound < rhs.lower_bound { Verdict::Forbidden } else { Verdict::NotExcluded };
        BoundReport {
            lhs: lhs.value,
            rhs: rhs.value,
            gaps: Gaps { lhs: lhs.gap(), rhs: rhs.gap() },
            verdict,
            certificates: [("lhs".to_string(), lhs), ("rhs".to_string(), rhs)].into(),
        }
    }
}

/// `D(ρ‖S_min) ≥ D(σ‖S_max)` for any free `ρ → σ`.
pub fn single_shot_verdict(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    locals: &[FreeStateSet],
    opts: &FwOptions,
) -> Result<BoundReport> {
    if !rho.structure().same_shape(sigma.structure()) {
        return Err(Error::DimensionMismatch("input and target structures differ".into()));
    }
    let lo = smin(locals.to_vec())?;
    let hi = smax(locals.to_vec())?;
    let lhs = rel_entropy_of_resource(rho, &lo, opts)?;
    let rhs = rel_entropy_of_resource(sigma, &hi, opts)?;
    Ok(BoundReport::compare(lhs, rhs))
}

/// `D(ρ₁‖S₁) ≥ D(ρ₂‖S₂)` for converting a state of party 1 into one of party 2.
pub fn conversion_verdict(
    rho1: &DensityOperator,
    s1: &FreeStateSet,
    rho2: &DensityOperator,
    s2: &FreeStateSet,
    opts: &FwOptions,
) -> Result<BoundReport> {
    let lhs = rel_entropy_of_resource(rho1, s1, opts)?;
    let rhs = rel_entropy_of_resource(rho2, s2, opts)?;
    Ok(BoundReport::compare(lhs, rhs))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionReport {
    pub local: DivergenceResult,
    pub smin: DivergenceResult,
    pub smax: DivergenceResult,
    /// `|D(ρ‖S_min) − D(ρ‖S_max)|` within the combined certified gaps.
    pub consistent: bool,
}

/// For `ρ = ⊗ρ_i` with every factor but one locally free, both extremal
/// composite divergences equal the remaining local one.
pub fn uncorrelated_reduction(
    rho: &DensityOperator,
    locals: &[FreeStateSet],
    resourceful: usize,
    opts: &FwOptions,
) -> Result<ReductionReport> {
    if resourceful >= locals.len() {
        return Err(Error::OutOfRange(format!("party index {resourceful}")));
    }
    let blocks = crate::composite::block_ranges(locals);
    let dims = rho.structure().dims();
    let marginals: Vec<DensityOperator> = blocks
        .iter()
        .zip(locals)
        .map(|(b, l)| {
            let m = crate::composite::block_marginal(rho.matrix(), &dims, b);
            DensityOperator::new(m, l.structure().clone())
        })
        .collect::<Result<_>>()?;
    let prod = kron_all(&marginals.iter().map(|m| m.matrix().clone()).collect::<Vec<_>>());
    if max_abs(&(prod - rho.matrix())) > 1e-9 {
        return Err(Error::Precondition("state is not a product across the local theories".into()));
    }
    for (k, (m, l)) in marginals.iter().zip(locals).enumerate() {
        if k != resourceful && !l.contains(m, crate::theories::sets::MEMBERSHIP_TOL)? {
            return Err(Error::Precondition(format!("factor {k} is not locally free")));
        }
    }
    let local = rel_entropy_of_resource(&marginals[resourceful], &locals[resourceful], opts)?;
    let a = rel_entropy_of_resource(rho, &smin(locals.to_vec())?, opts)?;
    let b = rel_entropy_of_resource(rho, &smax(locals.to_vec())?, opts)?;
    let slack = a.gap() + b.gap() + 1e-9;
    let consistent = (a.value - b.value).abs() <= slack || (a.value.is_infinite() && b.value.is_infinite());
    Ok(ReductionReport { local, smin: a, smax: b, consistent })
}

/// How to obtain a regularized value for one side of a rate bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSide {
    /// Only sets known to be additive (incoherent, singleton, real).
    #[default]
    Additive,
    /// The caller asserts additivity; the single-copy value is used.
    Asserted,
    /// `(1/n) D(ρ^⊗n‖S_n)`.
    Copies(usize),
}

fn regularized(rho: &DensityOperator, set: &FreeStateSet, side: RateSide, opts: &FwOptions) -> Result<RegularizedResult> {
    let known = matches!(set.kind(), SetKind::Incoherent { .. } | SetKind::Singleton { .. } | SetKind::Real { .. });
    match side {
        RateSide::Additive if known => regularized_rel_entropy(rho, set, Additivity::DeclaredAdditive, opts),
        RateSide::Additive => Err(Error::Precondition(format!(
            "{} set is not known to be additive; assert additivity or evaluate copies",
            set.kind_name()
        ))),
        RateSide::Asserted => {
            let result = rel_entropy_of_resource(rho, set, opts)?;
            Ok(RegularizedResult { result, copies: 1, certified: known })
        }
        RateSide::Copies(n) => regularized_rel_entropy(rho, set, Additivity::EvaluateN(n), opts),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateBound {
    /// `D^∞(ρ‖S_ρ) / D^∞(σ‖S_σ)`; `+∞` when the denominator is within its gap of zero.
    #[serde(with = "crate::serde_ext")]
    pub bound: f64,
    /// Certified: numerator upper bound over denominator lower bound.
    #[serde(with = "crate::serde_ext")]
    pub bound_upper: f64,
    pub numerator: RegularizedResult,
    pub denominator: RegularizedResult,
    /// Both sides certified regularized values.
    pub certified: bool,
}

fn ratio(num: &RegularizedResult, den: &RegularizedResult, gap: f64) -> (f64, f64) {
    let d = &den.result;
    let n = &num.result;
    if d.value <= gap.max(d.gap()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let b = if n.value <= 0.0 { 0.0 } else { n.value / d.value };
    let up = if d.lower_bound <= 0.0 { f64::INFINITY } else { n.upper_bound.max(0.0) / d.lower_bound };
    (b, up)
}

/// `R(ρ → σ) ≤ D^∞(ρ‖S_ρ) / D^∞(σ‖S_σ)`. Pass `S_min` for `S_ρ` and `S_max`
/// for `S_σ` in the composite setting.
pub fn asymptotic_rate_bound(
    rho: &DensityOperator,
    s_rho: &FreeStateSet,
    sigma: &DensityOperator,
    s_sigma: &FreeStateSet,
    sides: (RateSide, RateSide),
    opts: &FwOptions,
) -> Result<RateBound> {
    let numerator = regularized(rho, s_rho, sides.0, opts)?;
    let denominator = regularized(sigma, s_sigma, sides.1, opts)?;
    let (bound, bound_upper) = ratio(&numerator, &denominator, opts.gap);
    let certified = numerator.certified && denominator.certified;
    Ok(RateBound { bound, bound_upper, numerator, denominator, certified })
}

/// Leading parties of `rho` not covered by `b` form the assistant `A`.
fn assistant_split(rho: &DensityOperator, b: &FreeStateSet) -> Result<FreeStateSet> {
    let st = rho.structure();
    let nb = b.structure().len();
    if st.len() <= nb || st.dims()[st.len() - nb..] != b.structure().dims()[..] {
        return Err(Error::DimensionMismatch("B's theory must cover the trailing parties".into()));
    }
    let a = st.select(&(0..st.len() - nb).collect::<Vec<_>>());
    let b_labels = st.select(&((st.len() - nb)..st.len()).collect::<Vec<_>>());
    smin(vec![FreeStateSet::all_states(a), b.with_structure(b_labels)?])
}

/// Assisted distillation rate bound with an unrestricted assistant.
pub fn assisted_distillation_bound(
    rho_ab: &DensityOperator,
    b_theory: &FreeStateSet,
    golden: &DensityOperator,
    opts: &FwOptions,
) -> Result<RateBound> {
    let s = assistant_split(rho_ab, b_theory)?;
    let num = rel_entropy_engine(rho_ab, &s, opts)?;
    let numerator = RegularizedResult { result: num, copies: 1, certified: false };
    let denominator = regularized(golden, b_theory, RateSide::Additive, opts)?;
    let (bound, bound_upper) = ratio(&numerator, &denominator, opts.gap);
    Ok(RateBound { bound, bound_upper, numerator, denominator, certified: false })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationWitness {
    /// Lower bound on `D(ρ_AB‖ρ_A ⊗ ρ_B)`.
    #[serde(with = "crate::serde_ext")]
    pub bound: f64,
    /// Unassisted rate bound `D^∞(ρ_B‖S_B) / D^∞(Φ‖S_B)`.
    #[serde(with = "crate::serde_ext")]
    pub unassisted_rate: f64,
    pub local: RegularizedResult,
    pub golden: RegularizedResult,
}

/// An assisted rate above the unassisted bound certifies correlations.
pub fn correlation_witness(
    rho_ab: &DensityOperator,
    b_theory: &FreeStateSet,
    golden: &DensityOperator,
    observed_rate: f64,
    opts: &FwOptions,
) -> Result<CorrelationWitness> {
    assistant_split(rho_ab, b_theory)?;
    let st = rho_ab.structure();
    let nb = b_theory.structure().len();
    let keep: Vec<&str> = st.labels()[st.len() - nb..].to_vec();
    let rho_b = rho_ab.partial_trace(&keep)?.with_structure(b_theory.structure().clone())?;
    let local = regularized(&rho_b, b_theory, RateSide::Additive, opts)?;
    let g = regularized(golden, b_theory, RateSide::Additive, opts)?;
    let gv = g.result.value;
    if gv <= opts.gap {
        return Err(Error::Precondition("golden unit is free".into()));
    }
    let unassisted_rate = local.result.value / gv;
    let bound = ((observed_rate - unassisted_rate) * gv).max(0.0);
    Ok(CorrelationWitness { bound, unassisted_rate, local, golden: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    #[test]
    fn free_to_resourceful_is_forbidden() {
        let s = FreeStateSet::incoherent(qubit("0"));
        let zero = pure(&ket0(), qubit("0"));
        let plus = pure(&ket_plus(), qubit("0"));
        let r = conversion_verdict(&zero, &s, &plus, &s, &FwOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Forbidden);
        let r = conversion_verdict(&plus, &s, &plus, &s, &FwOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotExcluded);
    }

    #[test]
    fn verdict_serializes_with_hyphen() {
        assert_eq!(serde_json::to_string(&Verdict::NotExcluded).unwrap(), "\"NOT-EXCLUDED\"");
    }

    #[test]
    fn maximally_entangled_assistance_certifies_one_bit() {
        let b = FreeStateSet::incoherent(qubit("B"));
        let w = correlation_witness(&phi_plus("A", "B"), &b, &pure(&ket_plus(), qubit("B")), 1.0, &FwOptions::default()).unwrap();
        assert!((w.bound - 1.0).abs() < 1e-9);
        assert!(w.unassisted_rate.abs() < 1e-9);
    }
}
