//! Random channels and protocols from the implemented operation classes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::{KrausChannel, LfoccProtocol, Round};
use super::ops::FreeOpClass;
use crate::error::{Error, Result};
use crate::qcore::matrix::{c, CMat};
use crate::qcore::random::{haar_unitary, random_simplex};
use crate::qcore::state::DensityOperator;
use crate::qcore::structure::TensorStructure;

/// `n` Kraus operators `K_k = Σ_i a_k(i) |π_k(i)⟩⟨i|` with `Σ_k |a_k(i)|² = 1`.
pub fn random_sio_kraus<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<CMat> {
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..d).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    let mut amps = vec![vec![c(0.0, 0.0); d]; n];
    for i in 0..d {
        let mut norm = 0.0;
        for a in amps.iter_mut() {
            let z = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
            norm += z.norm_sqr();
            a[i] = z;
        }
        let s = norm.sqrt();
        for a in amps.iter_mut() {
            a[i] /= s;
        }
    }
    (0..n)
        .map(|k| {
            let mut m = CMat::zeros(d, d);
            for i in 0..d {
                m[(perms[k][i], i)] = amps[k][i];
            }
            m
        })
        .collect()
}

/// `n` real Kraus operators: the blocks of a random real isometry.
pub fn random_real_kraus<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<CMat> {
    let g = nalgebra::DMatrix::<f64>::from_fn(n * d, d, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    (0..n).map(|k| CMat::from_fn(d, d, |i, j| c(q[(k * d + i, j)], 0.0))).collect()
}

/// Mixture of `n` Haar-random unitaries.
pub fn random_unital_channel<R: Rng + ?Sized>(structure: TensorStructure, n: usize, rng: &mut R) -> Result<KrausChannel> {
    let d = structure.total_dim();
    let w = random_simplex(n, rng);
    let kraus = w.iter().map(|&p| haar_unitary(d, rng) * c(p.sqrt(), 0.0)).collect();
    KrausChannel::on(kraus, structure)
}

pub fn random_sio_channel<R: Rng + ?Sized>(structure: TensorStructure, n: usize, rng: &mut R) -> Result<KrausChannel> {
    let d = structure.total_dim();
    KrausChannel::on(random_sio_kraus(d, n, rng), structure)
}

pub fn random_real_channel<R: Rng + ?Sized>(structure: TensorStructure, n: usize, rng: &mut R) -> Result<KrausChannel> {
    let d = structure.total_dim();
    KrausChannel::on(random_real_kraus(d, n, rng), structure)
}

/// `n` Kraus blocks of a Haar-random isometry.
pub fn random_channel<R: Rng + ?Sized>(structure: TensorStructure, n: usize, rng: &mut R) -> Result<KrausChannel> {
    let d = structure.total_dim();
    let u = haar_unitary(n * d, rng);
    let kraus = (0..n).map(|k| CMat::from_fn(d, d, |i, j| u[(k * d + i, j)])).collect();
    KrausChannel::on(kraus, structure)
}

/// A random member of a single-party operation class. RNG classes are sampled
/// as mixtures of the identity with a replacement by a random free state.
pub fn random_in_class<R: Rng + ?Sized>(class: &FreeOpClass, structure: TensorStructure, rng: &mut R) -> Result<KrausChannel> {
    let n = rng.random_range(1..=3);
    match class {
        FreeOpClass::Sio { basis } | FreeOpClass::RealOps { basis } => {
            let ch = if matches!(class, FreeOpClass::Sio { .. }) {
                random_sio_channel(structure, n, rng)?
            } else {
                random_real_channel(structure, n, rng)?
            };
            match basis {
                None => Ok(ch),
                Some(u) => {
                    let kraus = ch.kraus().iter().map(|k| u * k * u.adjoint()).collect();
                    KrausChannel::on(kraus, ch.in_structure().clone())
                }
            }
        }
        FreeOpClass::Unital => random_unital_channel(structure, n, rng),
        FreeOpClass::AllOps => random_channel(structure, n, rng),
        FreeOpClass::Rng(set) => {
            if set.dim() != structure.total_dim() {
                return Err(Error::DimensionMismatch("RNG class vs structure".into()));
            }
            let gamma = DensityOperator::new(set.random_free_state(rng), structure.clone())?;
            let p: f64 = rng.random();
            KrausChannel::mixture(
                &[p, 1.0 - p],
                &[KrausChannel::identity(structure.clone()), KrausChannel::replacer(structure, &gamma)],
            )
        }
        FreeOpClass::Lfocc(_) => Err(Error::Unsupported("sampling protocol classes as bare channels".into())),
    }
}

/// A protocol on parties `A` (SIO rounds) and `B` (real rounds) with the given
/// number of rounds, alternating from a random first party. Every history gets
/// its own family of two operators.
pub fn random_sio_real_protocol<R: Rng + ?Sized>(
    structure: &TensorStructure,
    sio_party: &str,
    real_party: &str,
    rounds: usize,
    rng: &mut R,
) -> Result<LfoccProtocol> {
    let da = structure.parties()[structure.index_of(sio_party)?].dim;
    let db = structure.parties()[structure.index_of(real_party)?].dim;
    let mut first_a: bool = rng.random();
    let mut histories = vec![String::new()];
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let (party, d) = if first_a { (sio_party, da) } else { (real_party, db) };
        let mut tree = std::collections::BTreeMap::new();
        let mut next = Vec::new();
        for h in &histories {
            let fam = if first_a { random_sio_kraus(d, 2, rng) } else { random_real_kraus(d, 2, rng) };
            for o in 0..fam.len() {
                next.push(if h.is_empty() { o.to_string() } else { format!("{h}.{o}") });
            }
            tree.insert(h.clone(), fam);
        }
        out.push(Round { party: party.to_string(), tree });
        histories = next;
        first_a = !first_a;
    }
    LfoccProtocol::new(structure.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theories::ops::is_sio_operator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampled_families_are_trace_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3, 4] {
            for fam in [random_sio_kraus(d, 3, &mut rng), random_real_kraus(d, 3, &mut rng)] {
                let mut s = CMat::zeros(d, d);
                for k in &fam {
                    s += k.adjoint() * k;
                }
                assert!(crate::qcore::matrix::max_abs(&(s - CMat::identity(d, d))) < 1e-12);
            }
        }
    }

    #[test]
    fn sio_samples_have_normal_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in random_sio_kraus(4, 3, &mut rng) {
            assert!(is_sio_operator(&k, 1e-14));
        }
    }

    #[test]
    fn class_samples_pass_their_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = TensorStructure::single("0", 3);
        let classes = [
            FreeOpClass::Sio { basis: None },
            FreeOpClass::RealOps { basis: None },
            FreeOpClass::Unital,
            FreeOpClass::AllOps,
            FreeOpClass::Rng(Box::new(crate::theories::FreeStateSet::incoherent(st.clone()))),
        ];
        for class in &classes {
            for _ in 0..5 {
                let ch = random_in_class(class, st.clone(), &mut rng).unwrap();
                assert!(ch.tp_defect() < 1e-10);
                assert!(crate::theories::op_in_class(&ch, class, 1e-9).unwrap().member, "{}", class.name());
            }
        }
    }
}
