//! Remote certification: party A holds a state, applies a preprocessing
//! channel, and party B tests the result with the measurements its own theory
//! allows. No family can beat the hypothesis-testing divergence of A's state.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{effective_povm, KrausChannel, LfoccProtocol};
use crate::composite::smax;
use crate::divergences::hypothesis::{alpha_of, dual_hints, hypothesis_testing_engine, BETA_ZERO};
use crate::divergences::{hypothesis_testing, hypothesis_testing_restricted, DivergenceResult, Restriction};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::laws::lift_to_second_party;
use crate::qcore::eig::eigh;
use crate::qcore::matrix::{c, kron, max_off_diagonal, trace_product_re, CMat, MatrixLiteral};
use crate::qcore::state::{DensityOperator, HermitianOperator};
use crate::theories::ops::{protocol_in_classes, rng_check};
use crate::theories::sets::MEMBERSHIP_TOL;
use crate::theories::{ChannelImage, FreeOpClass, FreeStateSet};

pub const CEILING_SLACK: f64 = 1e-6;
pub const DIAGONAL_TOL: f64 = 1e-10;
const INCLUSION_SAMPLES: usize = 200;

/// Tests available to B when it holds a system of the given operation class.
pub fn measurement_restriction(class: &FreeOpClass) -> Result<Restriction> {
    match class {
        FreeOpClass::AllOps => Ok(Restriction::None),
        FreeOpClass::RealOps { basis: None } => Ok(Restriction::Real),
        FreeOpClass::Sio { basis: None } => Ok(Restriction::Diagonal),
        other => Err(Error::Unsupported(format!("measurements of the {} class", other.name()))),
    }
}

/// `−log₂(1 − ε)`: what a test achieves without looking at the state.
pub fn floor(eps: f64) -> f64 {
    -(1.0 - eps).log2()
}

/// `D_H^ε(ρ‖S)` with unrestricted tests.
pub fn standard_certification(rho: &DensityOperator, set: &FreeStateSet, eps: f64, tol: f64) -> Result<DivergenceResult> {
    hypothesis_testing(rho, set, eps, tol)
}

/// A channel applied by A before sending to B. With `aux`, the channel acts
/// on `(A, B)` with B's input fixed to `aux`, and B keeps its own output.
#[derive(Clone, Debug)]
pub struct Preprocessing {
    pub channel: KrausChannel,
    pub aux: Option<DensityOperator>,
}

impl Preprocessing {
    pub fn send(channel: KrausChannel) -> Self {
        Preprocessing { channel, aux: None }
    }

    pub fn joint(channel: KrausChannel, aux: DensityOperator) -> Self {
        Preprocessing { channel, aux: Some(aux) }
    }

    /// `X ↦ Tr_A Λ(X ⊗ aux)`, or the channel itself when nothing is appended.
    pub fn induced(&self, a_dim: usize) -> Result<KrausChannel> {
        let Some(aux) = &self.aux else {
            if self.channel.in_dim() != a_dim {
                return Err(Error::DimensionMismatch("preprocessing input is not A".into()));
            }
            return Ok(self.channel.clone());
        };
        let ch = &self.channel;
        if ch.in_dim() != a_dim * aux.dim() {
            return Err(Error::DimensionMismatch("preprocessing input is not (A, B)".into()));
        }
        let ins = ch.in_structure();
        let outs = ch.out_structure();
        let na = (1..=ins.len())
            .find(|&k| ins.dims()[..k].iter().product::<usize>() == a_dim)
            .ok_or_else(|| Error::DimensionMismatch("A does not align with the party split".into()))?;
        let a_out: usize = outs.dims()[..na.min(outs.len())].iter().product();
        let b_out = ch.out_dim() / a_out;
        let e = eigh(aux.matrix());
        let mut kraus = Vec::new();
        for (k, &l) in e.values.iter().enumerate() {
            if l <= 1e-14 {
                continue;
            }
            let v = e.vector(k);
            let attach = kron(&CMat::identity(a_dim, a_dim), &CMat::from_fn(aux.dim(), 1, |r, _| v[r] * l.sqrt()));
            for kl in ch.kraus() {
                for j in 0..a_out {
                    let bra = CMat::from_fn(1, a_out, |_, col| if col == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
                    let discard = kron(&bra, &CMat::identity(b_out, b_out));
                    kraus.push(&discard * kl * &attach);
                }
            }
        }
        let out_st = outs.select(&(na..outs.len()).collect::<Vec<_>>());
        KrausChannel::new(kraus, ins.select(&(0..na).collect::<Vec<_>>()), out_st)?.canonical()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Achiever {
    pub channel_id: usize,
    #[serde(rename = "P")]
    pub test: MatrixLiteral,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertReport {
    pub eps: f64,
    /// Best `−log₂ β` over the family.
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    /// `D_H^ε(ρ_A‖S_A)`, which no family can exceed.
    pub ceiling: DivergenceResult,
    pub achiever: Achiever,
    pub alpha: f64,
    pub beta: f64,
    #[serde(with = "crate::serde_ext")]
    pub floor: f64,
    /// Per-channel values, in family order.
    #[serde(with = "crate::serde_ext::vec")]
    pub values: Vec<f64>,
    pub within_ceiling: bool,
}

fn within(value: f64, ceiling: &DivergenceResult) -> bool {
    ceiling.upper_bound.is_infinite() || value <= ceiling.upper_bound + CEILING_SLACK
}

/// Best certification value over a preprocessing family, with B restricted
/// to the measurements of `b_class`.
pub fn remote_certification(
    rho_a: &DensityOperator,
    s_a: &FreeStateSet,
    b_class: &FreeOpClass,
    family: &[Preprocessing],
    eps: f64,
    tol: f64,
) -> Result<CertReport> {
    if family.is_empty() {
        return Err(Error::Precondition("empty preprocessing family".into()));
    }
    let restriction = measurement_restriction(b_class)?;
    let ceiling = hypothesis_testing(rho_a, s_a, eps, tol)?;
    let hints = dual_hints(rho_a, s_a);
    let outcomes = Execution::default().map(family.len(), |k| {
        let ch = family[k].induced(rho_a.dim())?;
        let image = ChannelImage { channel: &ch, set: s_a };
        let rho_b = ch.apply_mat(rho_a.matrix());
        let pushed: Vec<CMat> = hints.iter().map(|h| ch.apply_mat(h)).collect();
        hypothesis_testing_engine(&rho_b, &image, eps, restriction, tol, k as u64, &pushed)
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = outcomes.iter().map(|o| o.result.value).collect();
    let (best, o) = outcomes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.result.value.total_cmp(&b.1.result.value))
        .expect("non-empty family");
    let value = o.result.value;
    Ok(CertReport {
        eps,
        value,
        within_ceiling: within(value, &ceiling),
        ceiling,
        achiever: Achiever { channel_id: best, test: MatrixLiteral::from_matrix(&o.test) },
        alpha: o.alpha,
        beta: o.beta,
        floor: floor(eps),
        values,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LfoccReport {
    pub report: CertReport,
    /// Largest off-diagonal entry of the effective POVM element on A.
    pub effective_offdiag: f64,
    /// Factor applied to B's test to meet the type-I budget.
    pub scale: f64,
}

/// Value of one local protocol followed by B's test `P`, against the
/// diagonal-restricted hypothesis-testing divergence it cannot exceed. A's
/// rounds must be strictly incoherent and B's rounds real.
#[allow(clippy::too_many_arguments)]
pub fn lfocc_ceiling(
    rho_a: &DensityOperator,
    s_a: &FreeStateSet,
    protocol: &LfoccProtocol,
    parties: (&str, &str),
    aux_b: &DensityOperator,
    p: &HermitianOperator,
    eps: f64,
    tol: f64,
) -> Result<LfoccReport> {
    let (a, b) = parties;
    let classes: BTreeMap<String, FreeOpClass> = [
        (a.to_string(), FreeOpClass::Sio { basis: None }),
        (b.to_string(), FreeOpClass::RealOps { basis: None }),
    ]
    .into();
    let check = protocol_in_classes(protocol, &classes, 1e-9)?;
    if !check.member {
        return Err(Error::Precondition(format!("protocol leaves the local classes: {}", check.summary())));
    }
    let ch = protocol.compile()?;
    let frozen: BTreeMap<String, DensityOperator> = [(b.to_string(), aux_b.clone())].into();
    let e = effective_povm(&ch, p, b, &frozen)?;
    let e = e.matrix();
    let effective_offdiag = max_off_diagonal(e);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let alpha_raw = alpha_of(s_a, e, &mut rng)?;
    let scale = if alpha_raw > eps { eps / alpha_raw } else { 1.0 };
    let beta = (1.0 - scale * trace_product_re(rho_a.matrix(), e)).max(0.0);
    let value = if beta <= BETA_ZERO { f64::INFINITY } else { -beta.log2() };
    let ceiling = hypothesis_testing_restricted(rho_a, s_a, eps, Restriction::Diagonal, tol)?.result;
    Ok(LfoccReport {
        report: CertReport {
            eps,
            value,
            within_ceiling: within(value, &ceiling),
            ceiling,
            achiever: Achiever { channel_id: 0, test: MatrixLiteral::from_matrix(&(e * c(scale, 0.0))) },
            alpha: alpha_raw * scale,
            beta,
            floor: floor(eps),
            values: vec![value],
        },
        effective_offdiag,
        scale,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RngOptimal {
    pub report: CertReport,
    /// The move-and-replace channel keeps the maximal composite invariant.
    pub rng_verified: bool,
    /// `|dist − D_H^ε|` within the combined solver gaps.
    pub saturates: bool,
}

/// `X ⊗ Y ↦ μ_A ⊗ X`: A's state moves to B and A is reset to a free state.
/// When `S_A ⊆ S_B` this channel is free and B, measuring without
/// restriction, reaches the hypothesis-testing divergence of A's state.
pub fn rng_optimal_protocol(
    rho_a: &DensityOperator,
    s_a: &FreeStateSet,
    s_b: &FreeStateSet,
    mu_a: &DensityOperator,
    eps: f64,
    tol: f64,
) -> Result<(KrausChannel, RngOptimal)> {
    if s_a.dim() != s_b.dim() {
        return Err(Error::DimensionMismatch("A and B systems differ".into()));
    }
    if !s_a.contains(mu_a, MEMBERSHIP_TOL)? {
        return Err(Error::Precondition("replacement state is not free for A".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (probe, _) = s_a.verification_states(INCLUSION_SAMPLES, &mut rng);
    if let Some(k) = probe.iter().position(|m| !s_b.contains_mat(m, MEMBERSHIP_TOL)) {
        return Err(Error::Precondition(format!("free state {k} of A is not free for B")));
    }
    let mover = KrausChannel::identity(s_a.structure().clone())
        .with_structures(s_a.structure().clone(), s_b.structure().clone())?;
    let channel = lift_to_second_party(&mover, mu_a)?.canonical()?;
    let joint = smax(vec![s_a.clone(), s_b.clone()])?;
    let rng_verified = rng_check(&channel, &joint, MEMBERSHIP_TOL, 50, 0)?.member;
    let aux = DensityOperator::new(s_b.interior_point(), s_b.structure().clone())?;
    let report = remote_certification(
        rho_a,
        s_a,
        &FreeOpClass::AllOps,
        &[Preprocessing::joint(channel.clone(), aux)],
        eps,
        tol,
    )?;
    let c = &report.ceiling;
    let saturates = (report.value.is_infinite() && c.value.is_infinite())
        || (report.value - c.value).abs() <= c.gap() + tol + CEILING_SLACK;
    Ok((channel, RngOptimal { report, rng_verified, saturates }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ket_plus_y, pure, qubit, rz};

    fn case() -> (DensityOperator, FreeStateSet) {
        (pure(&ket_plus_y(), qubit("A")), FreeStateSet::incoherent(qubit("A")))
    }

    fn send(u: CMat) -> Preprocessing {
        Preprocessing::send(KrausChannel::unitary(u, qubit("A")).unwrap().with_structures(qubit("A"), qubit("B")).unwrap())
    }

    #[test]
    fn real_measurements_need_a_rotation() {
        let (rho, s) = case();
        let real = FreeOpClass::RealOps { basis: None };
        let plain = remote_certification(&rho, &s, &real, &[send(CMat::identity(2, 2))], 0.5, 1e-6).unwrap();
        assert!((plain.value - 1.0).abs() < 1e-6);
        let rotated = remote_certification(&rho, &s, &real, &[send(rz(std::f64::consts::FRAC_PI_2))], 0.5, 1e-6).unwrap();
        assert!(rotated.value.is_infinite());
        assert!((rotated.alpha - 0.5).abs() < 1e-6 && rotated.beta < 1e-9);
        assert!(rotated.within_ceiling);
    }

    #[test]
    fn move_and_replace_saturates() {
        let (rho, s) = case();
        let sb = FreeStateSet::real(qubit("B"));
        let mu = DensityOperator::maximally_mixed(qubit("A"));
        let (_, r) = rng_optimal_protocol(&rho, &s, &sb, &mu, 0.5, 1e-6).unwrap();
        assert!(r.rng_verified && r.saturates);
        assert!(r.report.value.is_infinite());
    }

    #[test]
    fn inclusion_is_checked() {
        let (rho, _) = case();
        let sa = FreeStateSet::real(qubit("A"));
        let sb = FreeStateSet::incoherent(qubit("B"));
        let mu = DensityOperator::maximally_mixed(qubit("A"));
        assert!(rng_optimal_protocol(&rho, &sa, &sb, &mu, 0.25, 1e-6).is_err());
    }
}
