//! Entropies in bits.

use super::eig::eigh;
use super::matrix::CMat;
use super::state::DensityOperator;
use crate::error::{Error, Result};

/// Eigenvalues at or below this are treated as zero inside logarithms.
pub const EIG_CLAMP: f64 = 1e-12;
/// Kernel overlap above this makes a relative entropy infinite.
pub const SUPPORT_TOL: f64 = 1e-10;

#[inline]
pub fn xlog2x(x: f64) -> f64 {
    if x <= EIG_CLAMP {
        0.0
    } else {
        x * x.log2()
    }
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlog2x(x)).sum::<f64>()
}

pub fn entropy_mat(m: &CMat) -> f64 {
    shannon(&eigh(m).values)
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_mat(rho.matrix())
}

/// Tr ρ(log₂ρ − log₂σ) on raw matrices; `+∞` when supp ρ ⊄ supp σ.
pub fn relative_entropy_mat(rho: &CMat, sigma: &CMat) -> f64 {
    let er = eigh(rho);
    let es = eigh(sigma);
    let n = rho.nrows();
    // Overlaps |⟨u_i|v_j⟩|².
    let w = er.vectors.adjoint() * &es.vectors;
    let mut kernel_weight = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        let li = er.values[i];
        if li <= EIG_CLAMP {
            continue;
        }
        for j in 0..n {
            let o = w[(i, j)].norm_sqr();
            let mu = es.values[j];
            if mu <= SUPPORT_TOL {
                kernel_weight += li * o;
            } else {
                cross += li * o * mu.log2();
            }
        }
    }
    if kernel_weight > SUPPORT_TOL {
        return f64::INFINITY;
    }
    let neg_s: f64 = er.values.iter().map(|&l| xlog2x(l)).sum();
    (neg_s - cross).max(0.0)
}

pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    Ok(relative_entropy_mat(rho.matrix(), sigma.matrix()))
}

/// Mutual information D(ρ_AB ‖ ρ_A ⊗ ρ_B) across the first party vs the rest.
pub fn mutual_information(rho: &DensityOperator, a: &[&str]) -> Result<f64> {
    let labels = rho.structure().labels();
    let b: Vec<&str> = labels.iter().copied().filter(|l| !a.contains(l)).collect();
    let ra = rho.partial_trace(a)?;
    let rb = rho.partial_trace(&b)?;
    Ok(von_neumann_entropy(&ra) + von_neumann_entropy(&rb) - von_neumann_entropy(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{c, from_real_rows};
    use crate::qcore::random::random_density;
    use crate::qcore::structure::TensorStructure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(m: CMat) -> DensityOperator {
        DensityOperator::single(m).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!(entropy_mat(&from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).abs() < 1e-15);
        assert!((entropy_mat(&(CMat::identity(2, 2) * c(0.5, 0.0))) - 1.0).abs() < 1e-14);
        assert!((entropy_mat(&(CMat::identity(4, 4) * c(0.25, 0.0))) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let zero = q(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]));
        let one = q(from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]));
        let mixed = q(CMat::identity(2, 2) * c(0.5, 0.0));
        assert!((relative_entropy(&zero, &mixed).unwrap() - 1.0).abs() < 1e-14);
        assert!(relative_entropy(&zero, &zero).unwrap().abs() < 1e-14);
        assert_eq!(relative_entropy(&zero, &one).unwrap(), f64::INFINITY);
    }

    #[test]
    fn plus_against_its_dephasing() {
        // Direct formula: D(ρ‖Δρ) = −S(ρ) − Tr ρ log Δρ = 0 + 1.
        let plus = q(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]));
        let d = relative_entropy(&plus, &plus.dephase()).unwrap();
        let direct = entropy_mat(plus.dephase().matrix()) - entropy_mat(plus.matrix());
        assert!((d - 1.0).abs() < 1e-12);
        assert!((d - direct).abs() < 1e-12);
    }

    #[test]
    fn product_reference_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap();
        for _ in 0..50 {
            let rho = DensityOperator::new(random_density(4, &mut rng), s.clone()).unwrap();
            let sa = q(random_density(2, &mut rng)).relabel(&["A"]).unwrap();
            let sb = q(random_density(2, &mut rng)).relabel(&["B"]).unwrap();
            let ra = rho.marginal("A").unwrap();
            let rb = rho.marginal("B").unwrap();
            let lhs = relative_entropy(&rho, &sa.tensor(&sb)).unwrap();
            let rhs = relative_entropy(&rho, &ra.tensor(&rb)).unwrap()
                + relative_entropy(&ra, &sa).unwrap()
                + relative_entropy(&rb, &sb).unwrap();
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }
}
