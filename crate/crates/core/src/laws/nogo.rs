//! Entanglement cannot be turned into coherence by channels that are free for
//! the coherence–entanglement composite. The argument is affine: every
//! two-qubit state is an affine combination of product states, and channel
//! outputs on product inputs have incoherent party-1 marginals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{coh_ent_channel, ket0, ket1, ket_phi_plus, ket_plus, ket_plus_y, kron_vec, pure};
use crate::channels::{compose, KrausChannel};
use crate::composite::{block_marginal, block_ranges, smax};
use crate::error::{Error, Result};
use crate::qcore::matrix::{c, hermitize, kron, max_abs, max_off_diagonal, outer, CMat};
use crate::qcore::random::{haar_unitary, random_simplex};
use crate::qcore::state::DensityOperator;
use crate::theories::ops::rng_check;
use crate::theories::samplers::random_sio_channel;
use crate::theories::sets::MEMBERSHIP_TOL;
use crate::theories::{FreeStateSet, SetKind};

use super::monotone::{lift_to_second_party, witness_channel};

pub const INCOHERENCE_TOL: f64 = 1e-9;
const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NogoReport {
    pub basis_size: usize,
    pub condition_number: f64,
    /// Free party-1 inputs the basis images were computed for.
    pub inputs_checked: usize,
    /// Party-1 inputs were every extreme point of the free set.
    pub exhaustive: bool,
    /// Largest off-diagonal entry of a party-1 marginal over all basis images.
    pub basis_offdiag: f64,
    /// `‖Σ_k c_k β_k − Φ+‖` for the affine coefficients of `Φ+`.
    pub reconstruction_error: f64,
    pub coefficient_sum: f64,
    /// Largest off-diagonal entry of `Tr₂ Λ(μ₁ ⊗ Φ+)`, computed directly.
    pub direct_offdiag: f64,
    /// Direct marginals agree with the affine prediction.
    pub affine_consistent: bool,
    pub incoherent: bool,
}

/// Real coordinates of a Hermitian matrix.
fn coords(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
        for j in (i + 1)..d {
            v.push(m[(i, j)].re);
            v.push(m[(i, j)].im);
        }
    }
    v
}

/// Product states `{|0⟩, |1⟩, |+⟩, |+y⟩}^{⊗2}`.
pub fn product_basis() -> Vec<CMat> {
    let kets = [ket0(), ket1(), ket_plus(), ket_plus_y()];
    let mut out = Vec::with_capacity(16);
    for a in &kets {
        for b in &kets {
            out.push(outer(&kron_vec(a, b)));
        }
    }
    out
}

fn in_basis(set: &FreeStateSet, m: &CMat) -> CMat {
    match set.kind() {
        SetKind::Incoherent { basis: Some(u) } => u.adjoint() * m * u,
        _ => m.clone(),
    }
}

/// Certify that `Λ` cannot create coherence on party 1 from any input
/// `μ₁ ⊗ ρ₂` with `μ₁` incoherent, and confirm directly on `ρ₂ = Φ+`.
pub fn nogo_entanglement_to_coherence(ch: &KrausChannel, locals: &[FreeStateSet], seed: u64) -> Result<NogoReport> {
    if locals.len() != 2 || !matches!(locals[0].kind(), SetKind::Incoherent { .. }) {
        return Err(Error::Precondition("expected (incoherent, two-qubit) local theories".into()));
    }
    if locals[1].structure().dims() != [2, 2] {
        return Err(Error::DimensionMismatch("party 2 must be two qubits".into()));
    }
    let d1 = locals[0].dim();
    if ch.in_dim() != d1 * 4 || ch.out_dim() != d1 * 4 {
        return Err(Error::DimensionMismatch("channel is not on the composite space".into()));
    }
    let basis = product_basis();
    let cols: Vec<Vec<f64>> = basis.iter().map(coords).collect();
    let b = nalgebra::DMatrix::from_fn(16, 16, |r, k| cols[k][r]);
    let sv = b.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_number = sv.iter().copied().fold(0.0, f64::max) / smin;
    if !(condition_number < MAX_CONDITION) {
        return Err(Error::Numerical(format!("product states do not span (condition {condition_number:.3e})")));
    }
    let phi = outer(&ket_phi_plus());
    let target = nalgebra::DVector::from_vec(coords(&phi));
    let coef = b
        .clone()
        .lu()
        .solve(&target)
        .ok_or_else(|| Error::Numerical("affine basis is singular".into()))?;
    let mut rebuilt = CMat::zeros(4, 4);
    for (k, bk) in basis.iter().enumerate() {
        rebuilt += bk * c(coef[k], 0.0);
    }
    let reconstruction_error = max_abs(&(rebuilt - &phi));
    let coefficient_sum: f64 = coef.iter().sum();

    let (inputs, exhaustive) = match locals[0].finite_extreme_points() {
        Some(p) => (p, true),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ((0..8).map(|_| locals[0].random_free_state(&mut rng)).collect(), false)
        }
    };
    let blocks = block_ranges(locals);
    let dims = ch.out_structure().dims();
    let marginal = |x: &CMat| in_basis(&locals[0], &hermitize(&block_marginal(&ch.apply_mat(x), &dims, &blocks[0])));

    let mut basis_offdiag: f64 = 0.0;
    let mut direct_offdiag: f64 = 0.0;
    let mut worst_mismatch: f64 = 0.0;
    for mu in &inputs {
        let mut predicted = CMat::zeros(d1, d1);
        for (k, bk) in basis.iter().enumerate() {
            let m = marginal(&kron(mu, bk));
            basis_offdiag = basis_offdiag.max(max_off_diagonal(&m));
            predicted += m * c(coef[k], 0.0);
        }
        let direct = marginal(&kron(mu, &phi));
        direct_offdiag = direct_offdiag.max(max_off_diagonal(&direct));
        worst_mismatch = worst_mismatch.max(max_abs(&(direct - predicted)));
    }
    let affine_consistent = worst_mismatch <= 1e-8 && (coefficient_sum - 1.0).abs() <= 1e-9;
    Ok(NogoReport {
        basis_size: basis.len(),
        condition_number,
        inputs_checked: inputs.len(),
        exhaustive,
        basis_offdiag,
        reconstruction_error,
        coefficient_sum,
        direct_offdiag,
        affine_consistent,
        incoherent: basis_offdiag <= INCOHERENCE_TOL && direct_offdiag <= INCOHERENCE_TOL && affine_consistent,
    })
}

/// Random channels on `(1, A, B)` that keep the maximal coherence–entanglement
/// composite invariant: compositions and mixtures of the coherence-to-
/// entanglement channel, lifted witness channels, and products of a strictly
/// incoherent channel on 1 with local unitaries on A and B. Every returned
/// channel passed an RNG check on `verify_samples` states.
pub fn sample_rng_channels(locals: &[FreeStateSet], n: usize, seed: u64, verify_samples: usize) -> Result<Vec<KrausChannel>> {
    if locals.len() != 2 {
        return Err(Error::Precondition("expected two local theories".into()));
    }
    let joint = locals[0].structure().concat(locals[1].structure());
    if !joint.same_shape(&crate::catalog::coh_ent_structure()) {
        return Err(Error::DimensionMismatch("expected locals on (1, A, B)".into()));
    }
    let free = smax(locals.to_vec())?;
    let convert = coh_ent_channel().with_structures(joint.clone(), joint.clone())?;
    let plus = pure(&ket_plus(), locals[0].structure().clone());
    let witness = witness_channel(&plus, &locals[0], &locals[1])?.channel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let generator = |rng: &mut ChaCha8Rng| -> Result<KrausChannel> {
        match rng.random_range(0..3) {
            0 => Ok(convert.clone()),
            1 => {
                let p = random_simplex(locals[0].dim(), rng);
                let tau = DensityOperator::new(crate::qcore::matrix::diag(&p), locals[0].structure().clone())?;
                let lifted = lift_to_second_party(&witness, &tau)?.canonical()?;
                lifted.with_structures(joint.clone(), joint.clone())
            }
            _ => {
                let sio = random_sio_channel(locals[0].structure().clone(), 2, rng)?;
                let u = kron(&haar_unitary(2, rng), &haar_unitary(2, rng));
                let local = KrausChannel::unitary(u, locals[1].structure().clone())?;
                Ok(sio.tensor(&local))
            }
        }
    };
    let word = |rng: &mut ChaCha8Rng| -> Result<KrausChannel> {
        let len = rng.random_range(1..=3);
        let mut ch = generator(rng)?;
        for _ in 1..len {
            ch = compose(&generator(rng)?, &ch)?.canonical()?;
        }
        Ok(ch)
    };

    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 4 * n + 10 {
            return Err(Error::Numerical("too many sampled channels failed verification".into()));
        }
        let mut ch = word(&mut rng)?;
        if rng.random_bool(0.5) {
            let other = word(&mut rng)?;
            let t: f64 = rng.random();
            ch = KrausChannel::mixture(&[t, 1.0 - t], &[ch, other])?.canonical()?;
        }
        if rng_check(&ch, &free, MEMBERSHIP_TOL, verify_samples, rng.random())?.member {
            out.push(ch);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::coh_ent_locals;

    #[test]
    fn product_basis_spans_two_qubit_hermitian_space() {
        let (a, b) = coh_ent_locals();
        let r = nogo_entanglement_to_coherence(&coh_ent_channel(), &[a, b], 0).unwrap();
        assert!(r.condition_number < 100.0);
        assert!(r.reconstruction_error < 1e-12);
        assert!(r.incoherent);
    }

    #[test]
    fn coherence_creating_channel_is_caught() {
        let (a, b) = coh_ent_locals();
        let h = kron(&crate::catalog::hadamard(), &CMat::identity(4, 4));
        let ch = KrausChannel::unitary(h, crate::catalog::coh_ent_structure()).unwrap();
        let r = nogo_entanglement_to_coherence(&ch, &[a, b], 0).unwrap();
        assert!(!r.incoherent);
    }
}
