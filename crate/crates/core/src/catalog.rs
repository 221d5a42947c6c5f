//! Canonical states, channels, theories and protocols used by the worked
//! examples, the scenario runner and the acceptance suite.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::channels::{compile_lfocc, compose, KrausChannel, LfoccProtocol, Round};
use crate::composite::{smax, LocalTheory};
use crate::error::Result;
use crate::qcore::matrix::{c, from_real_rows, from_rows, kron, kron_all, outer, CMat};
use crate::qcore::state::DensityOperator;
use crate::qcore::structure::TensorStructure;
use crate::theories::{FreeOpClass, FreeStateSet};

const O: Complex64 = Complex64::new(0.0, 0.0);
const I1: Complex64 = Complex64::new(1.0, 0.0);

pub fn ket0() -> Vec<Complex64> {
    vec![I1, O]
}

pub fn ket1() -> Vec<Complex64> {
    vec![O, I1]
}

pub fn ket_plus() -> Vec<Complex64> {
    vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]
}

pub fn ket_minus() -> Vec<Complex64> {
    vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]
}

/// `(|0⟩ + i|1⟩)/√2`.
pub fn ket_plus_y() -> Vec<Complex64> {
    vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn ket_phi_plus() -> Vec<Complex64> {
    vec![c(FRAC_1_SQRT_2, 0.0), O, O, c(FRAC_1_SQRT_2, 0.0)]
}

pub fn qubit(label: &str) -> TensorStructure {
    TensorStructure::single(label, 2)
}

pub fn two_qubits(a: &str, b: &str) -> TensorStructure {
    TensorStructure::from_pairs(&[(a, 2), (b, 2)]).expect("distinct labels")
}

pub fn pure(v: &[Complex64], structure: TensorStructure) -> DensityOperator {
    DensityOperator::pure(v, structure).expect("normalised catalog vector")
}

pub fn phi_plus(a: &str, b: &str) -> DensityOperator {
    pure(&ket_phi_plus(), two_qubits(a, b))
}

pub fn maximally_mixed_qubit(label: &str) -> DensityOperator {
    DensityOperator::maximally_mixed(qubit(label))
}

pub fn pauli_x() -> CMat {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMat {
    from_rows(&[&[O, c(0.0, -1.0)], &[c(0.0, 1.0), O]])
}

pub fn pauli_z() -> CMat {
    from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

pub fn hadamard() -> CMat {
    from_real_rows(&[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
}

/// CNOT with the first qubit as control.
pub fn cnot() -> CMat {
    from_real_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 0.0]])
}

/// `diag(e^{-iθ/2}, e^{iθ/2})`.
pub fn rz(theta: f64) -> CMat {
    let h = 0.5 * theta;
    from_rows(&[&[c(h.cos(), -h.sin()), O], &[O, c(h.cos(), h.sin())]])
}

/// Pauli-X as a channel on one qubit.
pub fn pauli_x_channel(label: &str) -> KrausChannel {
    KrausChannel::unitary(pauli_x(), qubit(label)).expect("unitary")
}

/// `X ↦ Tr(X)|ψ⟩⟨ψ|`.
pub fn prepare_pure(v: &[Complex64], structure: TensorStructure) -> KrausChannel {
    let s = structure.clone();
    KrausChannel::replacer(structure, &pure(v, s))
}

/// Coherence on party `1`, entanglement on the two-qubit party `A|B`.
pub fn coh_ent_locals() -> (FreeStateSet, FreeStateSet) {
    (
        FreeStateSet::incoherent(qubit("1")),
        FreeStateSet::separable_two_qubit(two_qubits("A", "B")).expect("two qubits"),
    )
}

pub fn coh_ent_structure() -> TensorStructure {
    TensorStructure::from_pairs(&[("1", 2), ("A", 2), ("B", 2)]).expect("distinct labels")
}

/// `ρ ↦ |0⟩⟨0| ⊗ CNOT(Tr_{AB}ρ ⊗ |0⟩⟨0|)CNOT†`, with party 1's state moved to `A`.
/// Kraus operators `K_{ab}|x a' b'⟩ = δ_{aa'}δ_{bb'} |0⟩ ⊗ CNOT|x 0⟩`.
pub fn coh_ent_channel() -> KrausChannel {
    let st = coh_ent_structure();
    let cn = cnot();
    let mut kraus = Vec::with_capacity(4);
    for ab in 0..4 {
        let mut k = CMat::zeros(8, 8);
        for x in 0..2 {
            let col = x * 4 + ab;
            // CNOT|x⟩|0⟩ sits in the |0⟩_1 half of the output.
            let v = cn.column(x * 2);
            for r in 0..4 {
                k[(r, col)] = v[r];
            }
        }
        kraus.push(k);
    }
    KrausChannel::on(kraus, st).expect("trace preserving")
}

/// `|+⟩ ⊗ |00⟩`.
pub fn coh_ent_input() -> DensityOperator {
    let v: Vec<Complex64> = kron_vec(&ket_plus(), &kron_vec(&ket0(), &ket0()));
    pure(&v, coh_ent_structure())
}

/// `|0⟩ ⊗ Φ+`.
pub fn coh_ent_target() -> DensityOperator {
    let v = kron_vec(&ket0(), &ket_phi_plus());
    pure(&v, coh_ent_structure())
}

pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Two qubits governed by the unital theory: only `I/2` is free.
pub fn unital_pair() -> Vec<LocalTheory> {
    ["1", "2"]
        .iter()
        .map(|l| LocalTheory::new(FreeStateSet::singleton(&maximally_mixed_qubit(l)), FreeOpClass::Unital))
        .collect()
}

/// `ρ ↦ Tr(ρ) Φ+`, free for the maximal composite of the unital pair.
pub fn prepare_phi_channel() -> KrausChannel {
    KrausChannel::replacer(two_qubits("1", "2"), &phi_plus("1", "2"))
}

/// Unitary taking `Φ+` to `|00⟩`: CNOT followed by a Hadamard on the control.
pub fn phi_to_zero_unitary() -> CMat {
    kron(&hadamard(), &CMat::identity(2, 2)) * cnot()
}

/// `Λ′ = U ∘ Λ`, i.e. `ρ ↦ Tr(ρ)|00⟩⟨00|`.
pub fn no_fmax_channel() -> Result<KrausChannel> {
    let u = KrausChannel::unitary(phi_to_zero_unitary(), two_qubits("1", "2"))?;
    compose(&u, &prepare_phi_channel())
}

/// Teleportation as a two-round local protocol. Party `1` holds qubits
/// `(1, 1')`, party `2` holds `(2, 2')`. Party 2 measures in the Bell basis,
/// party 1 applies the Pauli correction to `1'`.
pub fn teleportation_protocol() -> Result<LfoccProtocol> {
    let st = TensorStructure::from_pairs(&[("1", 4), ("2", 4)])?;
    let s = FRAC_1_SQRT_2;
    let bell: [[f64; 4]; 4] = [[s, 0.0, 0.0, s], [0.0, s, s, 0.0], [s, 0.0, 0.0, -s], [0.0, s, -s, 0.0]];
    let projectors: Vec<CMat> = bell.iter().map(|b| outer(&b.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())).collect();
    // Outcome k = (z, x) of the Bell basis above needs Z^z X^x on qubit 1'.
    let id = CMat::identity(2, 2);
    let corrections = [id.clone(), pauli_x(), pauli_z(), pauli_z() * pauli_x()];
    let tree = corrections.iter().enumerate().map(|(k, u)| (k.to_string(), vec![kron(&id, u)])).collect();
    LfoccProtocol::new(st, vec![Round::uniform("2", projectors), Round { party: "1".into(), tree }])
}

/// `Φ^(1,2) ⊗ Φ^(1',2')` in the order `(1, 1', 2, 2')`.
pub fn teleportation_resource() -> Result<DensityOperator> {
    let mut v = vec![O; 16];
    for a in 0..2 {
        for b in 0..2 {
            // |a⟩_1 |b⟩_1' |a⟩_2 |b⟩_2'
            v[((a * 2 + b) * 2 + a) * 2 + b] = c(0.5, 0.0);
        }
    }
    DensityOperator::pure(&v, TensorStructure::from_pairs(&[("1", 4), ("2", 4)])?)
}

/// Discard the input, prepare two Bell pairs, teleport: a channel that
/// prepares a pure state on party 1.
pub fn teleportation_channel() -> Result<KrausChannel> {
    let r = teleportation_resource()?;
    let prep = KrausChannel::replacer(r.structure().clone(), &r);
    compose(&compile_lfocc(&teleportation_protocol()?)?, &prep)
}

/// Family `S_1 = S_max` of the unital pair and `S_2 = conv{S_max ⊗ S_min}`,
/// with `Φ+` as a probe member of `S_1`.
pub fn bp_violation_family() -> Result<(Vec<FreeStateSet>, Vec<Vec<CMat>>)> {
    let s1 = smax(unital_pair().into_iter().map(|l| l.states).collect())?;
    let copy2 = two_qubits("1#1", "2#1");
    let smin2 = FreeStateSet::singleton(&DensityOperator::maximally_mixed(copy2.clone()));
    let s2 = FreeStateSet::min_composite(vec![s1.clone(), smin2])?;
    Ok((vec![s1, s2], vec![vec![phi_plus("1", "2").matrix().clone()]]))
}

/// `S_n` of the unital pair's minimal composite: `{I/4^{⊗n}}`.
pub fn unital_smin_family(max_n: usize) -> Result<Vec<FreeStateSet>> {
    (1..=max_n)
        .map(|n| {
            let pairs: Vec<(String, usize)> =
                (0..n).flat_map(|k| [(format!("1#{k}"), 2), (format!("2#{k}"), 2)]).collect();
            let refs: Vec<(&str, usize)> = pairs.iter().map(|(l, d)| (l.as_str(), *d)).collect();
            Ok(FreeStateSet::singleton(&DensityOperator::maximally_mixed(TensorStructure::from_pairs(&refs)?)))
        })
        .collect()
}

/// Product of single-qubit states as one matrix.
pub fn product(states: &[&DensityOperator]) -> CMat {
    kron_all(&states.iter().map(|s| s.matrix().clone()).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::max_abs;

    #[test]
    fn coh_ent_channel_maps_input_to_target() {
        let out = coh_ent_channel().apply(&coh_ent_input()).unwrap();
        assert!(max_abs(&(out.matrix() - coh_ent_target().matrix())) < 1e-12);
    }

    #[test]
    fn no_fmax_channel_prepares_zero_zero() {
        let ch = no_fmax_channel().unwrap();
        let x = crate::qcore::random::random_density(4, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        assert!(max_abs(&(ch.apply_mat(&x) - crate::qcore::matrix::diag(&[1.0, 0.0, 0.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn teleportation_prepares_bell_pair_on_party_one() {
        let ch = teleportation_channel().unwrap();
        let x = DensityOperator::maximally_mixed(ch.in_structure().clone());
        let out = ch.apply(&x).unwrap();
        let m = out.marginal("1").unwrap();
        assert!((m.purity() - 1.0).abs() < 1e-10);
        assert!(max_abs(&(m.matrix() - phi_plus("a", "b").matrix())) < 1e-10);
    }

    #[test]
    fn rz_quarter_turn_maps_plus_y_to_minus() {
        let u = rz(std::f64::consts::FRAC_PI_2);
        let v = &u * CMat::from_column_slice(2, 1, &ket_plus_y());
        let overlap = v[(0, 0)].conj() * ket_minus()[0] + v[(1, 0)].conj() * ket_minus()[1];
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }
}
